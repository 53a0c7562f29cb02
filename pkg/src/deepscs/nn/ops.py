"""Differentiable operators used by the transceiver graphs.

Feature maps are NHWC (batch, height, width, channels); kernels are laid out
K x K x Cin x Cout. Every op keeps the dtype of its inputs, so graphs built
from float64 tensors are exact enough for finite-difference checks while
training runs in float32.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from deepscs.nn.tensor import Tensor, make_result

# Rows of the im2col matrix processed per GEMM; bounds scratch memory.
_COLS_BUDGET = 1 << 24


def _im2col(xp: np.ndarray, k: int, h: int, w: int) -> np.ndarray:
    """Patch matrix of a padded NHWC array, columns ordered (ky, kx, c)."""
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # B,H,W,C,ky,kx
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(-1, k * k * xp.shape[3])


def _batch_chunks(batch: int, per_item: int):
    step = max(1, _COLS_BUDGET // max(per_item, 1))
    for start in range(0, batch, step):
        yield slice(start, min(batch, start + step))


def _correlate_same(x: np.ndarray, kmat: np.ndarray, k: int) -> np.ndarray:
    """'Same' cross-correlation of x (B,H,W,C) with a (k*k*C, Cout) matrix."""
    b, h, w, c = x.shape
    cout = kmat.shape[1]
    if k == 1:
        return (x.reshape(-1, c) @ kmat).reshape(b, h, w, cout)
    pad = k // 2
    out = np.empty((b, h, w, cout), dtype=np.result_type(x, kmat))
    for sl in _batch_chunks(b, h * w * k * k * c):
        xp = np.pad(x[sl], ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        out[sl] = (_im2col(xp, k, h, w) @ kmat).reshape(-1, h, w, cout)
    return out


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Stride-1 cross-correlation with zero 'same' padding, plus bias."""
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ValueError(f"conv2d expects NHWC input and KxKxCinxCout kernel, got {x.shape}, {kernel.shape}")
    k, k2, cin, cout = kernel.shape
    if k != k2 or k % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {kernel.shape}")
    if x.shape[3] != cin:
        raise ValueError(f"input has {x.shape[3]} channels, kernel expects {cin}")
    if bias.shape != (cout,):
        raise ValueError(f"bias shape {bias.shape} does not match Cout={cout}")

    b, h, w, _ = x.shape
    kmat = kernel.data.reshape(k * k * cin, cout)
    out = _correlate_same(x.data, kmat, k) + bias.data

    def backward(g):
        gx = gk = gb = None
        if bias.requires_grad:
            gb = g.sum(axis=(0, 1, 2))
        if kernel.requires_grad:
            gk_mat = np.zeros_like(kmat)
            if k == 1:
                gk_mat += x.data.reshape(-1, cin).T @ g.reshape(-1, cout)
            else:
                pad = k // 2
                for sl in _batch_chunks(b, h * w * k * k * cin):
                    xp = np.pad(x.data[sl], ((0, 0), (pad, pad), (pad, pad), (0, 0)))
                    gk_mat += _im2col(xp, k, h, w).T @ g[sl].reshape(-1, cout)
            gk = gk_mat.reshape(kernel.shape)
        if x.requires_grad:
            # input gradient = correlation of g with the spatially flipped, transposed kernel
            flipped = kernel.data[::-1, ::-1].transpose(0, 1, 3, 2).reshape(k * k * cout, cin)
            gx = _correlate_same(g, np.ascontiguousarray(flipped), k)
        return gx, gk, gb

    return make_result(out, (x, kernel, bias), backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValueError(f"dense shape mismatch: {x.shape} @ {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ValueError(f"bias shape {bias.shape} does not match {weight.shape[1]} outputs")
    out = x.data @ weight.data + bias.data

    def backward(g):
        gx = g @ weight.data.T if x.requires_grad else None
        gw = x.data.T @ g if weight.requires_grad else None
        gb = g.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return make_result(out, (x, weight, bias), backward)


# When a list, relu() appends its activation masks here (used to detect kinks in gradient checks).
relu_trace: list | None = None


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    if relu_trace is not None:
        relu_trace.append(mask)
    out = x.data * mask

    def backward(g):
        return (g * mask,)

    return make_result(out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def backward(g):
        return (g * out * (1.0 - out),)

    return make_result(out.astype(x.dtype, copy=False), (x,), backward)


def activation(x: Tensor, kind: str | None) -> Tensor:
    if kind is None or kind == "none":
        return x
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over H and W; output keeps them as size-1 axes (B,1,1,C)."""
    _, h, w, _ = x.shape
    out = x.data.mean(axis=(1, 2), keepdims=True)

    def backward(g):
        return (np.broadcast_to(g / (h * w), x.shape).astype(x.dtype),)

    return make_result(out, (x,), backward)


def scale_channels(x: Tensor, gates: Tensor) -> Tensor:
    b, _, _, c = x.shape
    if gates.shape != (b, 1, 1, c):
        raise ValueError(f"gates must have shape {(b, 1, 1, c)}, got {gates.shape}")
    out = x.data * gates.data

    def backward(g):
        gx = g * gates.data if x.requires_grad else None
        gg = (g * x.data).sum(axis=(1, 2), keepdims=True) if gates.requires_grad else None
        return gx, gg

    return make_result(out, (x, gates), backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis."""
    if a.shape[:-1] != b.shape[:-1]:
        raise ValueError(f"cannot concatenate {a.shape} and {b.shape}")
    split = a.shape[-1]
    out = np.concatenate([a.data, b.data], axis=-1)

    def backward(g):
        return g[..., :split], g[..., split:]

    return make_result(out, (a, b), backward)


def residual_add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"residual_add shape mismatch: {a.shape} vs {b.shape}")

    def backward(g):
        return g, g

    return make_result(a.data + b.data, (a, b), backward)


def reshape(t: Tensor, shape) -> Tensor:
    out = t.data.reshape(shape)

    def backward(g):
        return (g.reshape(t.shape),)

    return make_result(out, (t,), backward)


def flatten_spatial(t: Tensor) -> Tensor:
    """(B,1,1,C) -> (B,C), the hand-off from pooling to the dense gate."""
    return reshape(t, (t.shape[0], -1))


def power_normalize(t: Tensor) -> Tensor:
    """Scale each batch item so its interleaved complex symbols have unit mean power.

    The last axis holds (real, imag) pairs or an even-length run of reals;
    every item is normalized independently.
    """
    b = t.shape[0]
    flat = t.data.reshape(b, -1)
    if flat.shape[1] % 2:
        raise ValueError("power_normalize needs an even number of reals per item")
    n_sym = flat.shape[1] // 2
    energy = np.einsum("ij,ij->i", flat, flat, dtype=np.float64)
    if np.any(energy == 0):
        raise ValueError("cannot normalize an all-zero symbol block")
    scale = np.sqrt(n_sym / energy).astype(t.dtype)
    out = (flat * scale[:, None]).reshape(t.shape)

    def backward(g):
        gf = g.reshape(b, -1)
        proj = np.einsum("ij,ij->i", gf, flat, dtype=np.float64) / energy
        gx = scale[:, None] * (gf - flat * proj[:, None].astype(t.dtype))
        return (gx.reshape(t.shape),)

    return make_result(out, (t,), backward)


def complex_gain(t: Tensor, gain: np.ndarray, offset: np.ndarray | None = None) -> Tensor:
    """Per-item complex affine map on (..., 2) real pairs: z -> gain[b] * z + offset.

    ``gain`` has one complex value per batch item; ``offset`` (noise) is a
    constant with the same shape as ``t``.
    """
    b = t.shape[0]
    if t.shape[-1] != 2:
        raise ValueError("complex_gain expects a trailing axis of length 2")
    gain = np.asarray(gain, dtype=np.complex128).reshape(b)
    z = t.data[..., 0] + 1j * t.data[..., 1]
    bshape = (b,) + (1,) * (z.ndim - 1)
    z = z * gain.reshape(bshape)
    out = np.stack([z.real, z.imag], axis=-1).astype(t.dtype)
    if offset is not None:
        out = out + offset.astype(t.dtype, copy=False)

    def backward(g):
        gz = (g[..., 0] + 1j * g[..., 1]) * np.conj(gain).reshape(bshape)
        return (np.stack([gz.real, gz.imag], axis=-1).astype(t.dtype),)

    return make_result(out, (t,), backward)


def mse_loss(s: Tensor, s_hat: Tensor) -> Tensor:
    """Mean squared error per sequence, averaged over the batch.

    With equal-length sequences this is the mean over all elements; the sum
    is accumulated in float64.
    """
    if s.shape != s_hat.shape:
        raise ValueError(f"mse_loss shape mismatch: {s.shape} vs {s_hat.shape}")
    diff = s_hat.data.astype(np.float64) - s.data.astype(np.float64)
    n = diff.size
    value = np.array(np.dot(diff.ravel(), diff.ravel()) / n)

    def backward(g):
        base = (2.0 / n) * float(g) * diff
        gs = (-base).astype(s.dtype) if s.requires_grad else None
        gh = base.astype(s_hat.dtype) if s_hat.requires_grad else None
        return gs, gh

    return make_result(value, (s, s_hat), backward)
