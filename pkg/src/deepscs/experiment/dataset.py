"""Dataset manifests and the synthetic desk-scale corpus."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from deepscs.channel import make_rng
from deepscs.signal import SampleSequence, fit_length, load_wav, resample


SYNTH_PEAK = 0.9


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    split: str


def read_manifest(path) -> list[ManifestEntry]:
    """Parse ``path,split`` lines; blank lines and ``#`` comments are skipped.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    entries = []
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    for lineno, row in enumerate(csv.reader(io.StringIO("\n".join(lines))), 1):
        if len(row) != 2:
            raise DatasetError(f"{path}: line {lineno}: expected 'path,split', got {row!r}")
        p, split = row[0].strip(), row[1].strip().lower()
        if split not in ("train", "test"):
            raise DatasetError(f"{path}: line {lineno}: split must be train or test, got {split!r}")
        entries.append(ManifestEntry((base / p) if not Path(p).is_absolute() else Path(p), split))
    return entries


def ingest_dataset(manifest, split: str, rate: int, length: int = 16384) -> list[SampleSequence]:
    """Load one split: resample to ``rate`` and cut into ``length``-sample sequences.

    Ordering follows the manifest, then chunk position within each file.
    """
    entries = [e for e in read_manifest(manifest) if e.split == split]
    if not entries:
        raise DatasetError(f"split {split!r} of {manifest} is empty")
    out: list[SampleSequence] = []
    for e in entries:
        if not e.path.exists():
            raise DatasetError(f"missing file {e.path}")
        seq = resample(load_wav(e.path), rate)
        out.extend(fit_length(seq, length))
    return out


def synth_sequence(rng: np.random.Generator, length: int, rate: int) -> np.ndarray:
    """Speech-like test signal: voiced harmonic segments, noise bursts and silences."""
    x = np.zeros(length)
    t = np.arange(length) / rate
    pos = 0
    while pos < length:
        seg = int(rng.integers(length // 16, length // 4))
        end = min(length, pos + seg)
        kind = rng.choice(3, p=[0.55, 0.25, 0.2])
        n = end - pos
        env = np.hanning(n) if n > 2 else np.ones(n)
        if kind == 0:
            f0 = rng.uniform(90.0, 260.0)
            vib = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(2, 6) * t[pos:end])
            phase = 2 * np.pi * f0 * np.cumsum(vib) / rate
            voiced = np.zeros(n)
            for k in range(1, 6):
                if k * f0 < 0.45 * rate:
                    voiced += rng.uniform(0.2, 1.0) / k * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
            x[pos:end] = rng.uniform(0.2, 0.6) * env * voiced / 1.5
        elif kind == 1:
            burst = rng.standard_normal(n)
            # crude low-pass so bursts are not pure white noise
            if n >= 4:
                burst = np.convolve(burst, np.ones(4) / 4, mode="same")
            x[pos:end] = rng.uniform(0.05, 0.25) * env * burst
        pos = end
    peak = np.max(np.abs(x))
    # peak-normalized like a levelled speech corpus; quiet inputs starve SGD of gradient
    return x * (SYNTH_PEAK / peak) if peak > 0 else x


def synth_corpus(n: int, length: int = 16384, rate: int = 8000, seed: int = 0,
                 split: str = "train") -> list[SampleSequence]:
    """Deterministic synthetic sequences; train and test splits use disjoint RNG streams."""
    if split not in ("train", "test"):
        raise DatasetError(f"unknown split {split!r}")
    rng = make_rng(seed, 0x5D47A, 0 if split == "train" else 1)
    return [SampleSequence(synth_sequence(rng, length, rate), rate) for _ in range(n)]
