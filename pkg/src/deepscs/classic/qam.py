"""Gray-mapped square 64-QAM with max-log soft demapping."""

from __future__ import annotations

from importlib import resources

import numpy as np

from deepscs.signal import SymbolBlock

BITS_PER_SYMBOL = 6
NORM = np.sqrt(42.0)


def _load_table() -> tuple[np.ndarray, np.ndarray]:
    text = resources.files("deepscs.classic.data").joinpath("qam64_gray.hex").read_text()
    i_lv = np.zeros(64)
    q_lv = np.zeros(64)
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        label, i, q = line.split()
        i_lv[int(label, 16)] = float(i)
        q_lv[int(label, 16)] = float(q)
    return i_lv, q_lv


_I_LEVELS, _Q_LEVELS = _load_table()
CONSTELLATION = (_I_LEVELS + 1j * _Q_LEVELS) / NORM  # indexed by 6-bit label

# per-axis view: 3-bit label -> amplitude (identical for I and Q)
AXIS_LEVELS = np.array([_I_LEVELS[lab << 3] for lab in range(8)]) / NORM
_AXIS_BITS = ((np.arange(8)[:, None] >> np.array([2, 1, 0])) & 1).astype(bool)  # label x bit


def qam64_modulate(bits: np.ndarray) -> SymbolBlock:
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % BITS_PER_SYMBOL:
        raise ValueError(f"{bits.size} bits do not fill whole 64-QAM symbols")
    labels = bits.reshape(-1, BITS_PER_SYMBOL) @ (1 << np.arange(5, -1, -1))
    return SymbolBlock(CONSTELLATION[labels])


def _axis_llrs(y: np.ndarray, noise_variance) -> np.ndarray:
    d2 = (y[:, None] - AXIS_LEVELS[None, :]) ** 2  # n x 8
    out = np.empty((y.size, 3))
    for b in range(3):
        ones = _AXIS_BITS[:, b]
        out[:, b] = (d2[:, ones].min(axis=1) - d2[:, ~ones].min(axis=1))
    return out / np.asarray(noise_variance).reshape(-1, 1)


def qam64_soft_demod(y: SymbolBlock | np.ndarray, noise_variance) -> np.ndarray:
    """Max-log LLRs, positive favouring bit 0.

    Because the labelling is Gray per axis, the minimum over the full
    constellation separates into independent I and Q searches.
    ``noise_variance`` is the complex noise variance, scalar or per symbol.
    """
    sym = y.symbols if isinstance(y, SymbolBlock) else np.asarray(y, dtype=complex)
    sym = sym.ravel()
    nv = np.broadcast_to(np.asarray(noise_variance, dtype=np.float64), sym.shape)
    if np.any(nv <= 0):
        raise ValueError("noise variance must be positive")
    # per real dimension the variance is sigma^2 / 2 and LLR = d / (2 * sigma_r^2) = d / sigma^2
    llr_i = _axis_llrs(sym.real, nv)
    llr_q = _axis_llrs(sym.imag, nv)
    return np.concatenate([llr_i, llr_q], axis=1).ravel()


def qam64_hard_demod(y: SymbolBlock | np.ndarray) -> np.ndarray:
    sym = y.symbols if isinstance(y, SymbolBlock) else np.asarray(y, dtype=complex)
    return (qam64_soft_demod(sym, 1.0) < 0).astype(np.uint8)
