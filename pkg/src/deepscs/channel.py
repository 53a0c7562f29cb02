"""Block-fading channel layer: AWGN, Rayleigh and Rician with perfect-CSI equalization.

Every draw takes a ``numpy.random.Generator``; use :func:`make_rng` to build
the counter-based (Philox) generator from an explicit 64-bit seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deepscs.signal import SymbolBlock

DEGENERATE_GAIN = 1e-12


class DegenerateChannelError(ValueError):
    pass


def make_rng(seed: int, *streams: int) -> np.random.Generator:
    """Philox generator keyed by ``seed``; extra ints select disjoint sub-streams."""
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *streams])
    return np.random.Generator(np.random.Philox(key))


@dataclass(frozen=True)
class ChannelKind:
    name: str  # "awgn" | "rayleigh" | "rician"
    k_factor: float = 1.0

    def __post_init__(self):
        if self.name not in ("awgn", "rayleigh", "rician"):
            raise ValueError(f"unknown channel kind {self.name!r}")
        if self.k_factor < 0:
            raise ValueError("Rician k-factor must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "ChannelKind":
        """Parse ``awgn``, ``rayleigh``, ``rician`` or ``rician:<k>``."""
        name, _, k = text.strip().lower().partition(":")
        return cls(name, float(k)) if k else cls(name)

    def __str__(self) -> str:
        if self.name == "rician" and self.k_factor != 1.0:
            return f"rician:{self.k_factor:g}"
        return self.name


AWGN = ChannelKind("awgn")
RAYLEIGH = ChannelKind("rayleigh")
RICIAN = ChannelKind("rician")


@dataclass(frozen=True)
class ChannelRealization:
    h: complex
    snr_db: float
    noise_variance: float


def snr_to_noise_variance(snr_db: float) -> float:
    """Complex noise variance for unit-power symbols."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return float(10.0 ** (-snr_db / 10.0))


def _cn(rng: np.random.Generator, size, variance: float) -> np.ndarray:
    std = np.sqrt(variance / 2.0)
    return rng.normal(0.0, std, size) + 1j * rng.normal(0.0, std, size)


def sample_channel(kind: ChannelKind, rng: np.random.Generator, size=None):
    """Draw one (or ``size``) complex gains with unit average power."""
    if kind.name == "awgn":
        return complex(1.0) if size is None else np.ones(size, dtype=complex)
    if kind.name == "rayleigh":
        h = _cn(rng, size, 1.0)
    else:
        k = kind.k_factor
        h = np.sqrt(k / (k + 1.0)) + _cn(rng, size, 1.0 / (k + 1.0))
    return complex(h) if size is None else h


def realize(kind: ChannelKind, snr_db: float, rng: np.random.Generator) -> ChannelRealization:
    return ChannelRealization(sample_channel(kind, rng), float(snr_db), snr_to_noise_variance(snr_db))


def draw_noise(n: int, noise_variance: float, rng: np.random.Generator) -> np.ndarray:
    if noise_variance == 0:
        return np.zeros(n, dtype=complex)
    return _cn(rng, n, noise_variance)


def transmit(x: SymbolBlock | np.ndarray, real: ChannelRealization, rng: np.random.Generator) -> SymbolBlock:
    """y = h x + w with w ~ CN(0, sigma^2) i.i.d."""
    symbols = x.symbols if isinstance(x, SymbolBlock) else np.asarray(x, dtype=complex)
    y = real.h * symbols + draw_noise(symbols.size, real.noise_variance, rng).reshape(symbols.shape)
    return SymbolBlock(y)


def equalize(y: SymbolBlock | np.ndarray, real: ChannelRealization) -> SymbolBlock:
    """Zero-forcing with perfect CSI."""
    if abs(real.h) < DEGENERATE_GAIN:
        raise DegenerateChannelError(f"|h| = {abs(real.h):.3g} is too small to equalize")
    symbols = y.symbols if isinstance(y, SymbolBlock) else np.asarray(y, dtype=complex)
    return SymbolBlock(symbols / real.h)
