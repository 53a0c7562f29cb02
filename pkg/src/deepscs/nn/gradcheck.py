"""Central finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable

import numpy as np

from deepscs.nn import ops
from deepscs.nn.tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """max |a - n| over entries, divided by the largest numeric magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), float(np.max(np.abs(analytic), initial=0.0)), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)


def _traced_loss(loss_fn: Callable[[], Tensor]) -> tuple[float, list[np.ndarray]]:
    ops.relu_trace = []
    try:
        value = float(np.sum(loss_fn().data, dtype=np.float64))
        return value, ops.relu_trace
    finally:
        ops.relu_trace = None


def _same_pattern(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def numeric_gradient(loss_fn: Callable[[], Tensor], t: Tensor, eps: float = 1e-4,
                     indices: np.ndarray | None = None, return_smooth: bool = False):
    """d loss / d t by central differences, at ``indices`` (flat) or everywhere.

    With ``return_smooth`` a boolean array is returned too, False where the
    probe flipped a ReLU (the loss is not differentiable inside the probe).
    """
    flat = t.data.reshape(-1)
    idx = np.arange(flat.size) if indices is None else np.asarray(indices)
    out = np.zeros(idx.size)
    smooth = np.ones(idx.size, dtype=bool)
    _, base = _traced_loss(loss_fn) if return_smooth else (None, None)
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + eps
        up, pat_up = _traced_loss(loss_fn)
        flat[i] = orig - eps
        down, pat_down = _traced_loss(loss_fn)
        flat[i] = orig
        out[j] = (up - down) / (2 * eps)
        if return_smooth:
            smooth[j] = _same_pattern(base, pat_up) and _same_pattern(base, pat_down)
    return (out, smooth) if return_smooth else out


def check_gradients(loss_fn: Callable[[], Tensor], tensors: dict[str, Tensor], eps: float = 1e-4,
                    max_entries: int | None = None, rng: np.random.Generator | None = None) -> dict[str, float]:
    """Relative error of the backward pass against finite differences, per tensor.

    ``loss_fn`` must rebuild the graph from the current tensor values and
    return a tensor whose sum is the scalar being differentiated. Entries
    whose probe crosses a ReLU kink are left out of the comparison.
    """
    for t in tensors.values():
        t.grad = None
    out = loss_fn()
    if out.data.size == 1:
        out.backward()
    else:
        out.backward(np.ones_like(out.data))
    rng = rng or np.random.default_rng(0)
    errors = {}
    for name, t in tensors.items():
        n = t.data.size
        idx = None
        if max_entries is not None and n > max_entries:
            idx = np.sort(rng.choice(n, max_entries, replace=False))
        analytic = (t.grad if t.grad is not None else np.zeros_like(t.data)).reshape(-1)
        if idx is not None:
            analytic = analytic[idx]
        numeric, smooth = numeric_gradient(loss_fn, t, eps, idx, return_smooth=True)
        errors[name] = relative_error(analytic[smooth], numeric[smooth])
    return errors
