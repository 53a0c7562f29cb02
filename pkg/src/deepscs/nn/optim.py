from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from deepscs.nn.tensor import Tensor


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    momentum: float = 0.0
    iteration: int = 0
    velocity: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        # zero is accepted so a frozen run can be expressed
        if not self.learning_rate >= 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


class MissingGradientError(RuntimeError):
    pass


def sgd_step(params: list[Tensor], state: OptimizerState) -> None:
    """In-place update theta <- theta - lr * grad (heavy-ball if momentum > 0)."""
    for i, p in enumerate(params):
        if p.grad is None:
            raise MissingGradientError(f"parameter {p.name or i} has no gradient; run backward first")
    lr = state.learning_rate
    for i, p in enumerate(params):
        step = p.grad
        if state.momentum:
            v = state.velocity.get(i)
            v = step.copy() if v is None else state.momentum * v + step
            state.velocity[i] = v
            step = v
        p.data -= (lr * step).astype(p.dtype, copy=False)
    state.iteration += 1


def zero_grad(params: list[Tensor]) -> None:
    for p in params:
        p.grad = None
