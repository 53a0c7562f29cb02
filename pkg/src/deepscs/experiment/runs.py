"""Train, evaluate and baseline runs that write self-describing run directories.

A run directory holds ``config.json`` (the exact configuration used),
``seed.json``, and whichever of ``loss.csv``, ``model.ckpt``,
``metrics_<system>.csv`` and ``audio/*.wav`` the run produced. Nothing in
these files depends on wall-clock time, so repeating a run from its
config snapshot reproduces them byte for byte.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from deepscs.channel import ChannelKind, make_rng
from deepscs.classic.pcm import PcmLaw, pcm_decode_samples, pcm_encode
from deepscs.classic.pipeline import classic_pipeline, transmit_bits
from deepscs.experiment.config import ConfigError, ExperimentConfig
from deepscs.experiment.dataset import ingest_dataset, synth_corpus
from deepscs.metrics import MetricReport, MetricRow, mse, sdr, try_pesq
from deepscs.model.training import (ModelCheckpoint, TrainSettings, load_checkpoint, reconstruct,
                                    save_checkpoint, train)
from deepscs.model.transceiver import FeatureCodec
from deepscs.nn.tensor import Tensor
from deepscs.signal import SampleSequence, frame, write_wav

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.ckpt"
EVAL_STREAM = 0xE7A1


def load_split(cfg: ExperimentConfig, split: str) -> list[SampleSequence]:
    """The configured corpus split, or the synthetic desk corpus when no manifest is set."""
    if cfg.manifest:
        return ingest_dataset(cfg.manifest, split, cfg.rate, cfg.sequence_length)
    n = cfg.n_train if split == "train" else cfg.n_test
    return synth_corpus(n, cfg.sequence_length, cfg.rate, cfg.seed, split)


def _prepare(cfg: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json(), encoding="utf-8")
    seed_record = {"seed": cfg.seed, "generator": "philox", "eval_stream": EVAL_STREAM}
    (out / "seed.json").write_text(json.dumps(seed_record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def run_train(cfg: ExperimentConfig, out_dir, progress=None) -> Path:
    """Train the configured neural system; returns the checkpoint path."""
    if cfg.system == "classic":
        raise ConfigError("the classic system has nothing to train")
    out = _prepare(cfg, out_dir)
    settings = TrainSettings(ChannelKind.parse(cfg.train_channel), cfg.train_snr_db, cfg.epochs, cfg.batch_size,
                             cfg.micro_batch, cfg.learning_rate, cfg.momentum, cfg.seed, cfg.early_stop)
    ckpt = train(load_split(cfg, "train"), settings, cfg.model_config(), progress=progress)
    lines = ["epoch,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(ckpt.record.loss_history, 1)]
    (out / "loss.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    path = out / CHECKPOINT_NAME
    save_checkpoint(ckpt, path)
    return path


def _semi_reconstruct(codec: FeatureCodec, seqs: list[SampleSequence], kind: ChannelKind, snr_db: float | None,
                      rng: np.random.Generator, law: PcmLaw) -> list[SampleSequence]:
    """Feature encoder -> PCM -> turbo/64-QAM link -> feature decoder, one sequence at a time.

    Features are scaled into [-1, 1] by their per-sequence peak, which is sent
    as error-free side information.
    """
    cfg = codec.cfg
    out = []
    for seq in seqs:
        m = Tensor(frame([seq], cfg.frames, cfg.frame_length).data.astype(codec.dtype))
        feats = codec.encode(m).data.astype(np.float64)
        peak = float(np.max(np.abs(feats))) or 1.0
        bits = pcm_encode(feats.ravel() / peak, law)
        rx = pcm_decode_samples(transmit_bits(bits, kind, snr_db, rng), law) * peak
        y = codec.decode(Tensor(rx.reshape(feats.shape).astype(codec.dtype))).data
        out.append(SampleSequence(np.clip(y.ravel().astype(np.float64), -1.0, 1.0), seq.rate))
    return out


def _row(system: str, kind: ChannelKind, snr: float, seed: int, ref: list[SampleSequence],
         rec: list[SampleSequence]) -> MetricRow:
    pesqs = [try_pesq(s, r) for s, r in zip(ref, rec)]
    pesq = float(np.mean(pesqs)) if pesqs and all(p is not None for p in pesqs) else None
    return MetricRow(str(kind), float(snr), float(np.mean([mse(s, r) for s, r in zip(ref, rec)])),
                     float(np.mean([sdr(s, r) for s, r in zip(ref, rec)])), pesq, len(ref), seed, system)


def _sweep(cfg: ExperimentConfig, out: Path, system: str, recover) -> Path:
    """Evaluate ``recover(seqs, kind, snr, rng)`` over the channel x SNR grid.

    Every SNR point of a channel replays the same random stream, so all points
    share their fading gains and unit noise draws (paired comparison).
    """
    test = load_split(cfg, "test")
    report = MetricReport()
    audio = out / "audio"
    if cfg.audio_samples:
        audio.mkdir(exist_ok=True)
        for i, s in enumerate(test[: cfg.audio_samples]):
            write_wav(audio / f"reference_{i}.wav", s)
    for ci, name in enumerate(cfg.eval_channels):
        kind = ChannelKind.parse(name)
        for si, snr in enumerate(cfg.snr_grid):
            rng = make_rng(cfg.seed, EVAL_STREAM, ci)
            rec = recover(test, kind, snr, rng)
            report.add(_row(system, kind, snr, cfg.seed, test, rec))
            log.info("%s %s %g dB: SDR %.3f", system, kind, snr, report.rows[-1].sdr_db)
            if si == len(cfg.snr_grid) - 1:
                for i, r in enumerate(rec[: cfg.audio_samples]):
                    clipped = SampleSequence(np.clip(r.samples, -1.0, 1.0), r.rate)
                    write_wav(audio / f"{system}_{kind.name}_{snr:g}dB_{i}.wav", clipped)
    path = out / f"metrics_{system}.csv"
    path.write_text(report.to_csv(), encoding="utf-8")
    return path


def run_eval(cfg: ExperimentConfig, checkpoint, out_dir) -> Path:
    """Sweep a trained checkpoint over the evaluation grid; returns the metrics CSV path."""
    ckpt: ModelCheckpoint = load_checkpoint(checkpoint)
    model = ckpt.model
    if cfg.frames != model.cfg.frames or cfg.frame_length != model.cfg.frame_length:
        raise ConfigError("checkpoint framing does not match the experiment config")
    out = _prepare(cfg, out_dir)
    if isinstance(model, FeatureCodec):
        law = PcmLaw(cfg.pcm_law)
        return _sweep(cfg, out, "semi-traditional",
                      lambda seqs, kind, snr, rng: _semi_reconstruct(model, seqs, kind, snr, rng, law))
    system = model.cfg.variant
    return _sweep(cfg, out, system,
                  lambda seqs, kind, snr, rng: reconstruct(model, seqs, kind, snr, rng, cfg.micro_batch))


def run_classic(cfg: ExperimentConfig, out_dir) -> Path:
    """PCM + turbo + 64-QAM baseline over the evaluation grid."""
    out = _prepare(cfg, out_dir)
    law = PcmLaw(cfg.pcm_law)

    def recover(seqs, kind, snr, rng):
        return [classic_pipeline(s, law, kind, snr, rng) for s in seqs]

    return _sweep(cfg, out, "classic", recover)


def emit_plotdata(reports: dict[str, MetricReport], out_dir) -> list[Path]:
    """One CSV per (metric, channel): an ``snr_db`` column plus one column per system.

    The PESQ files are skipped when no report carries a score.
    """
    if not reports or not any(r.rows for r in reports.values()):
        raise ValueError("nothing to plot: empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = ["mse", "sdr_db"]
    if any(r.has_pesq() for r in reports.values()):
        metrics.append("pesq")
    systems = list(reports)
    channels = sorted({row.channel for r in reports.values() for row in r.rows})
    written = []
    for metric in metrics:
        for channel in channels:
            table: dict[float, dict[str, float | None]] = {}
            for system in systems:
                for row in reports[system].rows:
                    if row.channel == channel:
                        table.setdefault(row.snr_db, {})[system] = getattr(row, metric)
            lines = [",".join(["snr_db", *systems])]
            for snr in sorted(table):
                vals = [table[snr].get(s) for s in systems]
                lines.append(",".join([repr(snr)] + ["" if v is None else repr(float(v)) for v in vals]))
            safe = channel.replace(":", "-")
            path = out / f"{metric}_{safe}.csv"
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
    return written
