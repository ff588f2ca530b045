"""Learning-rate schedules, evaluable at any iteration index.

Three kinds:

* ``backbone``: a high plateau, a linear decay, then a low plateau, all
  expressed in epochs. With total span L and fractions (p, d), epochs
  [0, pL) give lr_high, [pL, dL) decay linearly from lr_high to lr_low,
  and everything from dL on holds lr_low. The rate is a step function of
  the integer epoch index.
* ``constant``: one value forever.
* ``cyclic_linear``: within every cycle of c iterations the rate falls
  linearly from lr_high (first iteration) to lr_low (last), then resets.

Rates are functions of the iteration index, never wall time.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SpecError


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str  # "backbone" | "constant" | "cyclic_linear"
    steps_per_epoch: int
    lr_high: float
    lr_low: float
    total_epochs: int = 0  # backbone span L
    plateau_frac: float = 0.5
    decay_end_frac: float = 0.9
    cycle_len: int = 0  # cyclic_linear cycle length in iterations

    def __post_init__(self):
        if self.steps_per_epoch < 1:
            raise SpecError(f"steps_per_epoch must be >= 1, got {self.steps_per_epoch}")
        if self.lr_high <= 0 or self.lr_low <= 0:
            raise SpecError("learning rates must be positive")
        if self.lr_high < self.lr_low:
            raise SpecError(f"lr_high {self.lr_high} < lr_low {self.lr_low}")
        if self.kind == "backbone":
            if self.total_epochs < 1:
                raise SpecError("backbone schedule needs total_epochs >= 1")
            if not (0.0 < self.plateau_frac < self.decay_end_frac <= 1.0):
                raise SpecError(
                    f"need 0 < plateau_frac < decay_end_frac <= 1, got "
                    f"{self.plateau_frac}, {self.decay_end_frac}"
                )
        elif self.kind == "cyclic_linear":
            if self.cycle_len < 1:
                raise SpecError("cyclic_linear schedule needs cycle_len >= 1")
        elif self.kind != "constant":
            raise SpecError(f"unknown schedule kind {self.kind!r}")


def backbone(
    total_epochs: int,
    lr_high: float,
    lr_low: float,
    steps_per_epoch: int,
    plateau_frac: float = 0.5,
    decay_end_frac: float = 0.9,
) -> ScheduleSpec:
    return ScheduleSpec(
        kind="backbone",
        steps_per_epoch=steps_per_epoch,
        lr_high=lr_high,
        lr_low=lr_low,
        total_epochs=total_epochs,
        plateau_frac=plateau_frac,
        decay_end_frac=decay_end_frac,
    )


def constant(lr: float, steps_per_epoch: int) -> ScheduleSpec:
    return ScheduleSpec(
        kind="constant", steps_per_epoch=steps_per_epoch, lr_high=lr, lr_low=lr
    )


def cyclic_linear(
    cycle_len: int, lr_high: float, lr_low: float, steps_per_epoch: int
) -> ScheduleSpec:
    return ScheduleSpec(
        kind="cyclic_linear",
        steps_per_epoch=steps_per_epoch,
        lr_high=lr_high,
        lr_low=lr_low,
        cycle_len=cycle_len,
    )


def epoch_of(iteration: int, steps_per_epoch: int) -> int:
    if steps_per_epoch < 1:
        raise SpecError(f"steps_per_epoch must be >= 1, got {steps_per_epoch}")
    return iteration // steps_per_epoch


def lr_at(spec: ScheduleSpec, iteration: int) -> float:
    """Learning rate at a 0-based iteration index."""
    if iteration < 0:
        raise SpecError(f"iteration must be >= 0, got {iteration}")
    if spec.kind == "constant":
        return spec.lr_high
    if spec.kind == "cyclic_linear":
        if spec.cycle_len == 1:
            return spec.lr_high
        pos = iteration % spec.cycle_len
        if pos == 0:
            return spec.lr_high
        if pos == spec.cycle_len - 1:
            return spec.lr_low
        frac = pos / (spec.cycle_len - 1)
        return spec.lr_high + (spec.lr_low - spec.lr_high) * frac
    # backbone
    epoch = epoch_of(iteration, spec.steps_per_epoch)
    plateau_end = spec.plateau_frac * spec.total_epochs
    decay_end = spec.decay_end_frac * spec.total_epochs
    if epoch < plateau_end:
        return spec.lr_high
    if epoch >= decay_end:
        return spec.lr_low
    frac = (epoch - plateau_end) / (decay_end - plateau_end)
    return spec.lr_high + (spec.lr_low - spec.lr_high) * frac
