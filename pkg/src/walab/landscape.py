"""Loss-landscape line probe: train loss and test error along the line
through two solutions.

``line_probe`` evaluates a model at interpolated (and extrapolated)
points; ``probe_curve`` is the generic core, taking any evaluation
function, which is also how analytic surrogate surfaces are probed in
tests. Results serialize to a three-column CSV (t, train_loss,
test_error).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .averaging import evaluate
from .data import Dataset
from .errors import FormatError, SpecError
from .ndcore import WeightVector, interpolate
from .nn import ModelSpec

PROBE_HEADER = "t,train_loss,test_error"


@dataclass(frozen=True)
class ProbeResult:
    ts: tuple[float, ...]
    train_loss: tuple[float, ...]
    test_error: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.ts) == len(self.train_loss) == len(self.test_error)):
            raise SpecError("probe columns must have equal lengths")
        if any(b <= a for a, b in zip(self.ts, self.ts[1:])):
            raise SpecError("ts must be strictly increasing")


def default_ts(t_min: float = -0.25, t_max: float = 1.25, count: int = 21) -> list[float]:
    """Evenly spaced probe coefficients, extrapolating a bit past both ends."""
    return [float(t) for t in np.linspace(t_min, t_max, count)]


def probe_curve(
    eval_fn: Callable[[WeightVector], tuple[float, float]],
    w_a: WeightVector,
    w_b: WeightVector,
    ts: Sequence[float],
) -> ProbeResult:
    """Evaluate ``eval_fn`` (returning (train_loss, test_error)) along the line."""
    if len(ts) == 0:
        raise SpecError("ts must be non-empty")
    losses, errors = [], []
    for t in ts:
        loss, err = eval_fn(interpolate(w_a, w_b, float(t)))
        losses.append(loss)
        errors.append(err)
    return ProbeResult(tuple(float(t) for t in ts), tuple(losses), tuple(errors))


def line_probe(
    spec: ModelSpec,
    w_a: WeightVector,
    w_b: WeightVector,
    ts: Sequence[float],
    train_set: Dataset,
    test_set: Dataset,
    batch_size: int = 256,
    dtype=np.float64,
) -> ProbeResult:
    """Full-dataset train loss and test error at each point of the line."""

    def eval_fn(w: WeightVector) -> tuple[float, float]:
        train_loss, _ = evaluate(spec, w, train_set, batch_size, dtype)
        _, test_acc = evaluate(spec, w, test_set, batch_size, dtype)
        return train_loss, 1.0 - test_acc

    return probe_curve(eval_fn, w_a, w_b, ts)


def write_probe_csv(path: str | Path, result: ProbeResult) -> None:
    lines = [PROBE_HEADER]
    for t, loss, err in zip(result.ts, result.train_loss, result.test_error):
        lines.append(f"{t:.6g},{loss:.6g},{err:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_probe_csv(path: str | Path) -> ProbeResult:
    lines = Path(path).read_text().strip().split("\n")
    if not lines or lines[0] != PROBE_HEADER:
        raise FormatError(f"{path}: bad probe header {lines[0] if lines else ''!r}")
    cols = [[], [], []]
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}: bad probe row {ln!r}")
        for c, p in zip(cols, parts):
            c.append(float(p))
    return ProbeResult(tuple(cols[0]), tuple(cols[1]), tuple(cols[2]))
