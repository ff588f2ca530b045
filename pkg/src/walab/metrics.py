"""Per-epoch metrics rows and their CSV serialization.

The CSV schema is fixed: header
``epoch,lr,train_loss,train_acc,test_acc,controller_tag,wallclock_s``,
floats printed with 6 significant digits. ``lr`` is the rate of the
epoch's final iteration. Every column except wallclock_s is
deterministic for a given (plan, seed); reproducibility comparisons must
ignore wallclock_s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError

CSV_HEADER = "epoch,lr,train_loss,train_acc,test_acc,controller_tag,wallclock_s"


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    test_acc: float
    controller_tag: str
    wallclock_s: float

    def __post_init__(self):
        for name in ("train_acc", "test_acc"):
            v = getattr(self, name)
            if not math.isnan(v) and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1] or NaN, got {v}")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def format_row(r: MetricsRecord) -> str:
    return ",".join(
        [
            str(r.epoch),
            _fmt(r.lr),
            _fmt(r.train_loss),
            _fmt(r.train_acc),
            _fmt(r.test_acc),
            r.controller_tag,
            _fmt(r.wallclock_s),
        ]
    )


def write_csv(path: str | Path, rows: list[MetricsRecord]) -> None:
    lines = [CSV_HEADER] + [format_row(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> list[MetricsRecord]:
    text = Path(path).read_text()
    lines = text.strip().split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise FormatError(f"{path}: bad metrics header {lines[0] if lines else ''!r}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 7:
            raise FormatError(f"{path}: bad metrics row {ln!r}")
        rows.append(
            MetricsRecord(
                epoch=int(parts[0]),
                lr=float(parts[1]),
                train_loss=float(parts[2]),
                train_acc=float(parts[3]),
                test_acc=float(parts[4]),
                controller_tag=parts[5],
                wallclock_s=float(parts[6]),
            )
        )
    return rows
