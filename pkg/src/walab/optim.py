"""Inner-loop parameter updaters: SGD (heavy-ball momentum, coupled L2
weight decay) and bias-corrected Adam.

Updates are pure: they return a new weight vector and a new state. With
momentum 0 and weight decay 0, :func:`sgd_step` is exactly w - lr*grad.
Weight decay is added to the gradient (classic coupled L2), and momentum
is the plain velocity form without dampening or lookahead.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, SpecError
from .ndcore import WeightVector, zeros_like


@dataclass(frozen=True)
class SgdState:
    velocity: WeightVector
    momentum: float
    weight_decay: float

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise SpecError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0.0:
            raise SpecError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True)
class AdamState:
    m: WeightVector
    v: WeightVector
    beta1: float
    beta2: float
    eps: float
    t: int

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise SpecError(f"betas must be in [0, 1), got {self.beta1}, {self.beta2}")
        if self.t < 0:
            raise SpecError(f"step count must be >= 0, got {self.t}")


def sgd_init(w: WeightVector, momentum: float = 0.0, weight_decay: float = 0.0) -> SgdState:
    return SgdState(velocity=zeros_like(w), momentum=momentum, weight_decay=weight_decay)


def adam_init(
    w: WeightVector, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
) -> AdamState:
    return AdamState(m=zeros_like(w), v=zeros_like(w), beta1=beta1, beta2=beta2, eps=eps, t=0)


def reset(state, w: WeightVector):
    """Fresh zero state with the same hyperparameters (used after the live
    weights are replaced by an average, so stale velocity never applies to
    the new point)."""
    if isinstance(state, SgdState):
        return sgd_init(w, state.momentum, state.weight_decay)
    if isinstance(state, AdamState):
        return adam_init(w, state.beta1, state.beta2, state.eps)
    raise SpecError(f"unknown optimizer state {type(state).__name__}")


def _guard(values: np.ndarray, what: str) -> None:
    if not np.isfinite(values).all():
        raise NumericError(f"non-finite {what} in optimizer step")


def sgd_step(
    w: WeightVector, grad: WeightVector, lr: float, state: SgdState
) -> tuple[WeightVector, SgdState]:
    """g = grad + wd*w; velocity = momentum*velocity + g; w -= lr*velocity."""
    if lr <= 0:
        raise SpecError(f"lr must be positive, got {lr}")
    # Overflow surfaces as NumericError via the guard, not as a warning.
    with np.errstate(over="ignore"):
        g = grad.values
        if state.weight_decay != 0.0:
            g = g + state.weight_decay * w.values
        vel = state.momentum * state.velocity.values + g if state.momentum != 0.0 else g
        new_w = w.values - lr * vel
    _guard(new_w, "weights")
    return (
        WeightVector(new_w, w.layout_id),
        replace(state, velocity=WeightVector(vel, w.layout_id)),
    )


def adam_step(
    w: WeightVector, grad: WeightVector, lr: float, state: AdamState
) -> tuple[WeightVector, AdamState]:
    """Standard bias-corrected Adam."""
    t = state.t + 1
    m = state.beta1 * state.m.values + (1.0 - state.beta1) * grad.values
    v = state.beta2 * state.v.values + (1.0 - state.beta2) * grad.values**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_w = w.values - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    _guard(new_w, "weights")
    return (
        WeightVector(new_w, w.layout_id),
        replace(
            state,
            m=WeightVector(m, w.layout_id),
            v=WeightVector(v, w.layout_id),
            t=t,
        ),
    )
