from __future__ import annotations

import numpy as np

from deepscs.nn.tensor import Tensor

# std of a unit normal truncated to [-2, 2]
_TRUNC_STD = 0.87962566103423978


def variance_scaling_init(shape, fan_in: int, rng: np.random.Generator | int, scale: float = 1.0,
                          dtype=np.float32, name: str | None = None) -> Tensor:
    """Truncated-normal weights with variance ``scale / fan_in``.

    Draws come from N(0, sigma^2) cut at +-2 sigma, with sigma inflated so the
    truncated distribution has the requested variance.
    """
    if fan_in <= 0:
        raise ValueError("fan_in must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.Philox(rng))
    sigma = truncation_sigma(fan_in, scale)
    n = int(np.prod(shape))
    out = np.empty(0)
    while out.size < n:
        draw = rng.standard_normal(2 * (n - out.size) + 16)
        out = np.concatenate([out, draw[np.abs(draw) <= 2.0]])
    values = (out[:n] * sigma).reshape(shape).astype(dtype)
    return Tensor(values, requires_grad=True, name=name)


def truncation_sigma(fan_in: int, scale: float = 1.0) -> float:
    """Pre-truncation standard deviation used by :func:`variance_scaling_init`."""
    return float(np.sqrt(scale / fan_in) / _TRUNC_STD)


def zeros(shape, dtype=np.float32, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, name=name)
