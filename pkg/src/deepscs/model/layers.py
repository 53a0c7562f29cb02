"""Parameterized building blocks: plain conv modules and the SE-ResNet unit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deepscs.nn import ops
from deepscs.nn.init import variance_scaling_init, zeros
from deepscs.nn.tensor import Tensor


class Module:
    """Anything owning named parameters, possibly through child modules."""

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for attr, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[attr] = value
            elif isinstance(value, Module):
                for k, v in value.named_parameters().items():
                    out[f"{attr}.{k}"] = v
            elif isinstance(value, list) and value and isinstance(value[0], Module):
                for i, m in enumerate(value):
                    for k, v in m.named_parameters().items():
                        out[f"{attr}.{i}.{k}"] = v
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())


class Conv(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 act: str | None, rng: np.random.Generator, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.act = act
        fan_in = kernel_size * kernel_size * in_channels
        self.kernel = variance_scaling_init((kernel_size, kernel_size, in_channels, out_channels),
                                            fan_in, rng, dtype=dtype)
        self.bias = zeros(out_channels, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.activation(ops.conv2d(x, self.kernel, self.bias), self.act)

    def conv_shapes(self) -> list[tuple[int, int, int]]:
        """(Cin, K, Cout) of every convolution, for FLOPs accounting."""
        return [(self.in_channels, self.kernel_size, self.out_channels)]


class Dense(Module):
    def __init__(self, in_features: int, out_features: int, act: str | None,
                 rng: np.random.Generator, dtype=np.float32):
        self.weight = variance_scaling_init((in_features, out_features), in_features, rng, dtype=dtype)
        self.bias = zeros(out_features, dtype=dtype)
        self.act = act

    def __call__(self, x: Tensor) -> Tensor:
        return ops.activation(ops.dense(x, self.weight, self.bias), self.act)


@dataclass(frozen=True)
class SeResNetConfig:
    branch_filters: int = 16
    branch_kernel: int = 5
    n_branches: int = 2
    transition_filters: int = 32
    se_reduction: int = 4
    residual: bool = True

    @property
    def out_channels(self) -> int:
        return self.transition_filters


class SeResNetBlock(Module):
    """Split (parallel 5x5 branches) -> concat -> 1x1 transition -> SE gating -> residual add.

    The residual path is the identity when the input already has
    ``transition_filters`` channels and a linear 1x1 projection otherwise.
    """

    def __init__(self, cfg: SeResNetConfig, in_channels: int, rng: np.random.Generator, dtype=np.float32):
        if cfg.n_branches != 2:
            raise ValueError("the split layer is implemented with exactly two branches")
        self.cfg = cfg
        self.in_channels = in_channels
        self.split_a = Conv(in_channels, cfg.branch_filters, cfg.branch_kernel, "relu", rng, dtype)
        self.split_b = Conv(in_channels, cfg.branch_filters, cfg.branch_kernel, "relu", rng, dtype)
        c = cfg.transition_filters
        self.transition = Conv(2 * cfg.branch_filters, c, 1, "relu", rng, dtype)
        self.squeeze = Dense(c, max(1, c // cfg.se_reduction), "relu", rng, dtype)
        self.excite = Dense(max(1, c // cfg.se_reduction), c, "sigmoid", rng, dtype)
        self.project = Conv(in_channels, c, 1, None, rng, dtype) if (cfg.residual and in_channels != c) else None

    def split(self, x: Tensor) -> Tensor:
        # both branches see the same input, so one correlation with the stacked kernels
        # equals concat(branch_a(x), branch_b(x))
        kernel = ops.concat_channels(self.split_a.kernel, self.split_b.kernel)
        bias = ops.concat_channels(self.split_a.bias, self.split_b.bias)
        return ops.relu(ops.conv2d(x, kernel, bias))

    def gates(self, p: Tensor) -> Tensor:
        pooled = ops.flatten_spatial(ops.global_avg_pool(p))
        z = self.excite(self.squeeze(pooled))
        return ops.reshape(z, (p.shape[0], 1, 1, p.shape[3]))

    def __call__(self, x: Tensor, force_gates: float | None = None) -> Tensor:
        p = self.transition(self.split(x))
        if force_gates is None:
            z = self.gates(p)
        else:
            z = Tensor(np.full((p.shape[0], 1, 1, p.shape[3]), force_gates, dtype=p.dtype))
        scaled = ops.scale_channels(p, z)
        if not self.cfg.residual:
            return scaled
        shortcut = x if self.project is None else self.project(x)
        return ops.residual_add(shortcut, scaled)

    def conv_shapes(self) -> list[tuple[int, int, int]]:
        return self.split_a.conv_shapes() + self.split_b.conv_shapes() + self.transition.conv_shapes()

    def extra_conv_shapes(self) -> list[tuple[int, int, int]]:
        return [] if self.project is None else self.project.conv_shapes()

    def dense_shapes(self) -> list[tuple[int, int]]:
        c = self.cfg.transition_filters
        r = max(1, c // self.cfg.se_reduction)
        return [(c, r), (r, c)]
