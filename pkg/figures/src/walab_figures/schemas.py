"""Readers for the three walab CSV schemas, with column-diff errors."""

from __future__ import annotations

import csv
from pathlib import Path

METRICS_COLUMNS = [
    "epoch", "lr", "train_loss", "train_acc", "test_acc",
    "controller_tag", "wallclock_s",
]
PROBE_COLUMNS = ["t", "train_loss", "test_error"]
VARIANCE_COLUMNS = ["lr", "h_summary", "window", "var_final", "var_tail", "ratio"]


class SchemaError(Exception):
    """Input CSV does not match the expected schema."""


def _read_rows(path: str | Path, expected: list[str]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaError(
                f"{path}: column mismatch; missing {missing or 'none'}, "
                f"unexpected {extra or 'none'} (expected {expected})"
            )
        return list(reader)


def read_metrics(path: str | Path) -> list[dict]:
    """Per-epoch metrics rows; *_avg tags are auxiliary and filtered out."""
    rows = _read_rows(path, METRICS_COLUMNS)
    out = []
    for r in rows:
        if r["controller_tag"].endswith("_avg"):
            continue
        out.append({
            "epoch": int(r["epoch"]),
            "test_acc": float(r["test_acc"]),
            "train_loss": float(r["train_loss"]),
        })
    if not out:
        raise SchemaError(f"{path}: no primary metric rows")
    return out


def read_probe(path: str | Path) -> list[dict]:
    rows = _read_rows(path, PROBE_COLUMNS)
    if not rows:
        raise SchemaError(f"{path}: empty probe file")
    return [
        {"t": float(r["t"]), "train_loss": float(r["train_loss"]),
         "test_error": float(r["test_error"])}
        for r in rows
    ]


def read_variance(path: str | Path) -> list[dict]:
    rows = _read_rows(path, VARIANCE_COLUMNS)
    if not rows:
        raise SchemaError(f"{path}: empty variance file")
    return [
        {"window": int(r["window"]), "var_final": float(r["var_final"]),
         "var_tail": float(r["var_tail"]), "ratio": float(r["ratio"])}
        for r in rows
    ]
