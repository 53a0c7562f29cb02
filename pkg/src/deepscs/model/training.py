"""Training and evaluation loops for the neural transceivers."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from deepscs.channel import ChannelKind, make_rng
from deepscs.metrics import MetricReport, MetricRow, mse as mse_metric, sdr
from deepscs.model.transceiver import FeatureCodec, Transceiver, TransceiverConfig, build_model
from deepscs.nn import ops
from deepscs.nn.checkpoint import CheckpointError, load_parameters, save_parameters
from deepscs.nn.optim import OptimizerState, sgd_step, zero_grad
from deepscs.nn.tensor import Tensor
from deepscs.signal import FrameGrid, SampleSequence, deframe, frame

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainSettings:
    channel: ChannelKind
    snr_db: float = 8.0
    epochs: int = 30
    batch_size: int = 16
    micro_batch: int = 4
    learning_rate: float = 1e-3
    momentum: float = 0.0
    seed: int = 0
    early_stop: bool = True
    plateau_epochs: int = 5
    plateau_tol: float = 1e-4


@dataclass
class TrainRecord:
    channel: str
    snr_db: float
    epochs: int
    seed: int
    learning_rate: float
    momentum: float
    batch_size: int
    loss_history: list[float] = field(default_factory=list)
    stopped_early: bool = False
    seconds: float = 0.0


@dataclass
class ModelCheckpoint:
    model: Transceiver | FeatureCodec
    record: TrainRecord

    @property
    def config(self) -> TransceiverConfig:
        return self.model.cfg


def _grid(seqs: list[SampleSequence], cfg: TransceiverConfig, dtype) -> np.ndarray:
    return frame(seqs, cfg.frames, cfg.frame_length).data.astype(dtype)


def _forward(model, m: np.ndarray, kind: ChannelKind | None, snr_db, rng):
    """One transceiver pass. The feature codec has no channel layer."""
    x = Tensor(m)
    if isinstance(model, FeatureCodec):
        return x, model(x)
    state = model.draw_channel(m.shape[0], kind, snr_db, rng)
    return x, model(x, state)


def train(dataset: list[SampleSequence], settings: TrainSettings, cfg: TransceiverConfig | None = None,
          model=None, progress=None) -> ModelCheckpoint:
    """SGD over shuffled batches; every batch sees a fresh channel gain and noise draw.

    Batches are pushed through the graph in micro-batches whose gradients
    are accumulated with weight ``micro / batch`` so the update equals the
    full-batch one.
    """
    if not dataset:
        raise ValueError("empty training set")
    if model is None:
        model = build_model(cfg or TransceiverConfig(), seed=settings.seed)
    cfg = model.cfg
    params = model.parameters()
    opt = OptimizerState(settings.learning_rate, settings.momentum)
    data = _grid(dataset, cfg, model.dtype)
    rng = make_rng(settings.seed, 0x7EA1)
    kind = None if isinstance(model, FeatureCodec) else settings.channel
    record = TrainRecord(str(settings.channel), settings.snr_db, 0, settings.seed, settings.learning_rate,
                         settings.momentum, settings.batch_size)
    t0 = time.perf_counter()
    n = data.shape[0]
    for epoch in range(settings.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, settings.batch_size):
            idx = order[start:start + settings.batch_size]
            zero_grad(params)
            batch_loss = 0.0
            for ms in range(0, idx.size, settings.micro_batch):
                sub = idx[ms:ms + settings.micro_batch]
                weight = sub.size / idx.size
                x, y = _forward(model, data[sub], kind, settings.snr_db, rng)
                loss = ops.mse_loss(x, y)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch starting {start}")
                loss.backward(np.array(weight))
                batch_loss += weight * value
            sgd_step(params, opt)
            epoch_loss += batch_loss * idx.size
        epoch_loss /= n
        record.loss_history.append(epoch_loss)
        record.epochs = epoch + 1
        log.info("epoch %d loss %.6g", epoch + 1, epoch_loss)
        if progress:
            progress(epoch + 1, epoch_loss)
        if settings.early_stop and _plateaued(record.loss_history, settings.plateau_epochs, settings.plateau_tol):
            record.stopped_early = True
            break
    record.seconds = time.perf_counter() - t0
    return ModelCheckpoint(model, record)


def _plateaued(history: list[float], window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    old, new = history[-window - 1], min(history[-window:])
    return (old - new) / max(abs(old), 1e-30) < tol


def reconstruct(model, seqs: list[SampleSequence], kind: ChannelKind | None, snr_db: float | None,
                rng: np.random.Generator, micro_batch: int = 4) -> list[SampleSequence]:
    """Run sequences through the transceiver (no gradients kept)."""
    cfg = model.cfg
    out: list[SampleSequence] = []
    data = _grid(seqs, cfg, model.dtype)
    for start in range(0, data.shape[0], micro_batch):
        _, y = _forward(model, data[start:start + micro_batch], kind, snr_db, rng)
        rate = seqs[start].rate
        out.extend(deframe(_as_grid(y.data), rate))
    return out


def _as_grid(arr):
    return FrameGrid(arr)


def evaluate(ckpt: ModelCheckpoint | Transceiver, dataset: list[SampleSequence], channels: list[ChannelKind],
             snrs: list[float], seed: int = 0, system: str = "", micro_batch: int = 4) -> MetricReport:
    """Mean MSE and SDR per (channel, SNR).

    The SNR points of one channel replay the same RNG stream, so they differ
    only in noise scale.
    """
    model = ckpt.model if isinstance(ckpt, ModelCheckpoint) else ckpt
    report = MetricReport()
    for ci, kind in enumerate(channels):
        for snr in snrs:
            rng = make_rng(seed, 0xE7A1, ci)
            rec = reconstruct(model, dataset, kind, snr, rng, micro_batch)
            mses = [mse_metric(s, r) for s, r in zip(dataset, rec)]
            sdrs = [sdr(s, r) for s, r in zip(dataset, rec)]
            report.add(MetricRow(str(kind), float(snr), float(np.mean(mses)), float(np.mean(sdrs)), None,
                                 len(dataset), seed, system))
    return report


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    params = {k: v.data for k, v in ckpt.model.named_parameters().items()}
    record = dataclasses.asdict(ckpt.record)
    record.pop("seconds")  # wall-clock time would make checkpoints differ between identical runs
    save_parameters(path, params, ckpt.config.to_dict(), {"training": record})


def load_checkpoint(path) -> ModelCheckpoint:
    """Rebuild the model from the stored config and audit every parameter shape."""
    params, meta = load_parameters(path)
    cfg = TransceiverConfig.from_dict(meta["config"])
    model = build_model(cfg)
    expected = model.named_parameters()
    if set(expected) != set(params):
        missing = sorted(set(expected) - set(params))
        unknown = sorted(set(params) - set(expected))
        raise CheckpointError(f"parameter names differ from config: missing={missing[:5]} unknown={unknown[:5]}")
    for name, tensor in expected.items():
        if params[name].shape != tensor.shape:
            raise CheckpointError(f"{name}: shape {params[name].shape} does not match config {tensor.shape}")
        tensor.data = params[name].astype(tensor.dtype)
    rec = meta.get("training") or {}
    record = TrainRecord(**rec) if rec else TrainRecord("", 0.0, 0, 0, 0.0, 0.0, 0)
    return ModelCheckpoint(model, record)
