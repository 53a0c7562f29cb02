"""Waveform ingestion, resampling, framing and transmit-power normalization."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

log = logging.getLogger(__name__)

STANDARD_RATES = (8000, 16000, 44100)

# polyphase resampler design
TAPS_PER_PHASE = 64
CUTOFF_FRACTION = 0.45
KAISER_BETA = 8.0


class WavFormatError(ValueError):
    """Raised for malformed, unsupported or empty WAV files."""


@dataclass
class SampleSequence:
    samples: np.ndarray
    rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if self.rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0:
            raise ValueError("samples must lie in [-1, 1]")
        if self.rate not in STANDARD_RATES:
            log.warning("non-standard sample rate %d Hz", self.rate)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate


@dataclass
class FrameGrid:
    data: np.ndarray  # B x F x L

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def frame_length(self) -> int:
        return self.data.shape[2]


@dataclass
class SymbolBlock:
    symbols: np.ndarray  # complex
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.symbols) ** 2))

    def __len__(self) -> int:
        return self.symbols.size


def load_wav(path) -> SampleSequence:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.ndim == 2:
        data = data[:, 0]
    if data.size == 0:
        raise WavFormatError(f"{path}: empty payload")
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.float32:
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise WavFormatError(f"{path}: unsupported sample format {data.dtype}")
    return SampleSequence(samples, int(rate))


def write_wav(path, seq: SampleSequence) -> None:
    """Write 16-bit PCM, clipping to [-1, 1]."""
    pcm = np.round(np.clip(seq.samples, -1.0, 1.0) * 32768.0)
    pcm = np.clip(pcm, -32768, 32767).astype("<i2")
    wavfile.write(Path(path), int(seq.rate), pcm)


@lru_cache(maxsize=16)
def _resample_filter(up: int, down: int) -> np.ndarray:
    # cutoff relative to the lower of the two rates, expressed at the upsampled rate
    cutoff = CUTOFF_FRACTION / max(up, down)
    numtaps = TAPS_PER_PHASE * max(up, down) + 1
    taps = sps.firwin(numtaps, 2 * cutoff, window=("kaiser", KAISER_BETA))
    return taps * up


def resample(seq: SampleSequence, target_rate: int) -> SampleSequence:
    """Band-limited rational-factor resampling with a Kaiser-windowed sinc."""
    if target_rate <= 0:
        raise ValueError("target rate must be positive")
    if target_rate == seq.rate:
        return SampleSequence(seq.samples.copy(), seq.rate)
    ratio = Fraction(int(target_rate), int(seq.rate))
    up, down = ratio.numerator, ratio.denominator
    taps = _resample_filter(up, down)
    out_len = int(round(len(seq) * target_rate / seq.rate))
    # filter delay of (numtaps-1)/2 at the upsampled rate
    delay = (taps.size - 1) // 2
    y = sps.upfirdn(taps, seq.samples, up=up, down=1)
    y = y[delay: delay + out_len * down: down]
    if y.size < out_len:
        y = np.pad(y, (0, out_len - y.size))
    return SampleSequence(np.clip(y, -1.0, 1.0), int(target_rate))


def fit_length(seq: SampleSequence, length: int) -> list[SampleSequence]:
    """Split into non-overlapping chunks of ``length``; the tail chunk is zero-padded."""
    if length <= 0:
        raise ValueError("length must be positive")
    x = seq.samples
    n_chunks = max(1, -(-x.size // length))
    padded = np.zeros(n_chunks * length)
    padded[: x.size] = x
    return [SampleSequence(c, seq.rate) for c in padded.reshape(n_chunks, length)]


def frame(batch: list[SampleSequence], frames: int, frame_length: int, pad: bool = False) -> FrameGrid:
    """Row-major reshape of each sequence into ``frames`` x ``frame_length``."""
    if not batch:
        raise ValueError("empty batch")
    w = frames * frame_length
    rows = []
    for i, seq in enumerate(batch):
        x = np.asarray(seq.samples if isinstance(seq, SampleSequence) else seq, dtype=np.float64)
        if x.size != w:
            if not pad:
                raise ValueError(f"sequence {i} has {x.size} samples, expected {w}")
            x = np.pad(x[:w], (0, max(0, w - x.size)))
        rows.append(x)
    return FrameGrid(np.stack(rows).reshape(len(rows), frames, frame_length))


def deframe(grid: FrameGrid, rate: int = 8000) -> list[SampleSequence]:
    b = grid.data.shape[0]
    flat = np.asarray(grid.data, dtype=np.float64).reshape(b, -1)
    # reconstruction may overshoot full scale; clipping happens at WAV write
    return [_unchecked_sequence(row, rate) for row in flat]


def _unchecked_sequence(samples: np.ndarray, rate: int) -> SampleSequence:
    seq = SampleSequence.__new__(SampleSequence)
    seq.samples = samples
    seq.rate = rate
    return seq


def normalize_power(raw) -> SymbolBlock:
    """Interpret interleaved reals as complex symbols and scale to unit mean power."""
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if raw.size % 2:
        raise ValueError("need an even number of reals to form complex symbols")
    z = raw[0::2] + 1j * raw[1::2]
    power = np.mean(np.abs(z) ** 2) if z.size else 0.0
    if power == 0:
        raise ValueError("cannot normalize an all-zero block")
    scale = 1.0 / np.sqrt(power)
    return SymbolBlock(z * scale, scale=float(scale))
