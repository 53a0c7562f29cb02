"""Speech metrics, FLOPs accounting and the external PESQ adapter."""

from __future__ import annotations

import csv
import io
import os
import re
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field

import numpy as np

from deepscs.signal import SampleSequence, write_wav

SDR_CAP_DB = 300.0
PESQ_RANGE = (-0.5, 4.5)
PESQ_ENV = "DEEPSCS_PESQ"
REPORT_HEADER = ("channel", "snr_db", "mse", "sdr_db", "pesq", "count", "seed")


def _samples(x) -> np.ndarray:
    return np.asarray(x.samples if isinstance(x, SampleSequence) else x, dtype=np.float64).ravel()


def sdr(s, s_hat) -> float:
    """10 log10(||s||^2 / ||s - s_hat||^2) in dB, capped at +300 dB for a perfect match."""
    ref, est = _samples(s), _samples(s_hat)
    if ref.shape != est.shape:
        raise ValueError(f"length mismatch: {ref.size} vs {est.size}")
    signal = float(np.dot(ref, ref))
    if signal == 0:
        raise ValueError("SDR is undefined for an all-zero reference")
    err = ref - est
    noise = float(np.dot(err, err))
    if noise == 0:
        return SDR_CAP_DB
    return float(min(SDR_CAP_DB, 10.0 * np.log10(signal / noise)))


def mse(s, s_hat) -> float:
    ref, est = _samples(s), _samples(s_hat)
    if ref.shape != est.shape:
        raise ValueError(f"length mismatch: {ref.size} vs {est.size}")
    return float(np.mean((ref - est) ** 2))


# -- FLOPs -----------------------------------------------------------------

@dataclass(frozen=True)
class FlopsQuery:
    width: int
    height: int
    c_in: int
    kernel: int
    c_out: int

    def __post_init__(self):
        for name in ("width", "height", "c_in", "kernel", "c_out"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")


def flops_conv(q: FlopsQuery) -> int:
    """2 * G * H * (Cin * K^2 + 1) * Cout."""
    return 2 * q.width * q.height * (q.c_in * q.kernel * q.kernel + 1) * q.c_out


def flops_dense(n_in: int, n_out: int) -> int:
    return 2 * (n_in + 1) * n_out


@dataclass
class FlopsBreakdown:
    transmitter: int
    receiver: int
    extras: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.transmitter + self.receiver

    def as_dict(self) -> dict:
        return {"transmitter": self.transmitter, "receiver": self.receiver, "total": self.total, **self.extras}


def flops_model(model_or_cfg) -> FlopsBreakdown:
    """Headline FLOPs of a transceiver, counting every convolution module.

    SE gate dense layers and residual 1x1 projections are reported under
    ``extras`` and left out of the headline numbers.
    """
    from deepscs.model.transceiver import TransceiverConfig, build_model

    if isinstance(model_or_cfg, TransceiverConfig):
        # shape bookkeeping only; a tiny float32 build is cheap
        model = build_model(model_or_cfg, seed=0)
        cfg = model_or_cfg
    else:
        model = model_or_cfg
        cfg = model.cfg
    g, h = cfg.frame_length, cfg.frames

    def total(shapes):
        return sum(flops_conv(FlopsQuery(g, h, cin, k, cout)) for cin, k, cout in shapes)

    extras = {
        "residual_projection": total(model.extra_convs()),
        "se_dense": sum(flops_dense(a, b) for a, b in model.dense_layers()),
    }
    return FlopsBreakdown(total(model.transmitter_convs()), total(model.receiver_convs()), extras)


# -- PESQ adapter ----------------------------------------------------------

class PesqUnavailable(RuntimeError):
    """No external evaluator is configured or it could not be run."""


class PesqParseError(RuntimeError):
    pass


_pesq_lock = threading.Lock()
_DEFAULT_SCORE_RE = r"(-?\d+(?:\.\d+)?)\s*$"


def pesq_external(reference, degraded, evaluator_path: str | None = None,
                  score_regex: str = _DEFAULT_SCORE_RE, timeout: float = 120.0) -> float:
    """Score ``degraded`` against ``reference`` with an external P.862 tool.

    The evaluator is run as ``<path> +<rate> <ref.wav> <deg.wav>`` and the
    score is taken from the last non-empty output line.
    """
    path = evaluator_path or os.environ.get(PESQ_ENV)
    if not path:
        raise PesqUnavailable(f"no PESQ evaluator configured (set {PESQ_ENV})")
    exe = shutil.which(path) or (path if os.path.exists(path) else None)
    if exe is None:
        raise PesqUnavailable(f"PESQ evaluator {path!r} not found")
    if reference.rate != degraded.rate:
        raise ValueError("reference and degraded signals must share a sample rate")
    if reference.rate not in (8000, 16000):
        raise PesqUnavailable(f"P.862 supports 8 kHz and 16 kHz, not {reference.rate} Hz")
    with _pesq_lock, tempfile.TemporaryDirectory(prefix="pesq-") as tmp:
        ref_path, deg_path = os.path.join(tmp, "ref.wav"), os.path.join(tmp, "deg.wav")
        write_wav(ref_path, reference)
        write_wav(deg_path, degraded)
        try:
            proc = subprocess.run([exe, f"+{reference.rate}", ref_path, deg_path],
                                  capture_output=True, text=True, timeout=timeout, check=False)
        except OSError as exc:
            raise PesqUnavailable(f"could not run {exe}: {exc}") from exc
    lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines:
        raise PesqParseError(f"evaluator produced no output (exit {proc.returncode}): {proc.stderr.strip()}")
    m = re.search(score_regex, lines[-1])
    if not m:
        raise PesqParseError(f"cannot parse score from {lines[-1]!r}")
    score = float(m.group(1))
    lo, hi = PESQ_RANGE
    if not lo <= score <= hi:
        raise PesqParseError(f"score {score} outside [{lo}, {hi}]")
    return score


def try_pesq(reference, degraded, evaluator_path: str | None = None) -> float | None:
    """PESQ score, or ``None`` when the evaluator is unavailable."""
    try:
        return pesq_external(reference, degraded, evaluator_path)
    except PesqUnavailable:
        return None


# -- reports ---------------------------------------------------------------

@dataclass
class MetricRow:
    channel: str
    snr_db: float
    mse: float
    sdr_db: float
    pesq: float | None
    count: int
    seed: int
    system: str = ""


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)

    def add(self, row: MetricRow) -> None:
        if any(r.channel == row.channel and r.snr_db == row.snr_db and r.system == row.system for r in self.rows):
            raise ValueError(f"duplicate row for ({row.channel}, {row.snr_db})")
        if not np.isfinite(row.sdr_db):
            row.sdr_db = float(np.clip(np.nan_to_num(row.sdr_db, nan=-SDR_CAP_DB), -SDR_CAP_DB, SDR_CAP_DB))
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow([r.channel, _fmt(r.snr_db), _fmt(r.mse), _fmt(r.sdr_db),
                        "" if r.pesq is None else _fmt(r.pesq), r.count, r.seed])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, system: str = "") -> "MetricReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        report = cls()
        for r in rows:
            report.rows.append(MetricRow(r["channel"], float(r["snr_db"]), float(r["mse"]), float(r["sdr_db"]),
                                         float(r["pesq"]) if r["pesq"] else None, int(r["count"]), int(r["seed"]),
                                         system))
        return report

    def has_pesq(self) -> bool:
        return any(r.pesq is not None for r in self.rows)


def _fmt(x: float) -> str:
    return repr(float(x))
