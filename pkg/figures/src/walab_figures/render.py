"""Render figure specs to deterministic SVG files.

Identical CSV inputs must produce identical image bytes, so the style is
pinned (fixed rcParams, fixed hash salt) and no timestamps are embedded.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .schemas import SchemaError, read_metrics, read_probe, read_variance

KINDS = ("ta_curves", "probe_curve", "variance_bar")

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "svg.hashsalt": "walab-figures",
    "svg.fonttype": "none",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    labels: tuple[str, ...]
    output: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        if len(self.labels) != len(self.inputs):
            raise SchemaError(
                f"{len(self.labels)} labels for {len(self.inputs)} inputs"
            )


def _save(fig, output: str) -> None:
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, format="svg", metadata={"Date": None})
    plt.close(fig)


def _render_ta_curves(spec: FigureSpec):
    fig, ax = plt.subplots()
    for i, (path, label) in enumerate(zip(spec.inputs, spec.labels)):
        rows = read_metrics(path)
        ax.plot(
            [r["epoch"] for r in rows],
            [100 * r["test_acc"] for r in rows],
            label=label,
            color=_COLORS[i % len(_COLORS)],
        )
    ax.set_xlabel("epoch")
    ax.set_ylabel("test accuracy (%)")
    ax.legend()
    return fig


def _render_probe_curve(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise SchemaError("probe_curve takes exactly one CSV")
    rows = read_probe(spec.inputs[0])
    ts = [r["t"] for r in rows]
    fig, ax_loss = plt.subplots()
    ax_err = ax_loss.twinx()
    ax_loss.plot(ts, [r["train_loss"] for r in rows], color=_COLORS[0],
                 label=f"{spec.labels[0]} train loss")
    ax_err.plot(ts, [100 * r["test_error"] for r in rows], color=_COLORS[1],
                linestyle="--", label=f"{spec.labels[0]} test error")
    ax_loss.set_xlabel("interpolation coefficient t")
    ax_loss.set_ylabel("train loss")
    ax_err.set_ylabel("test error (%)")
    ax_err.grid(False)
    lines = ax_loss.get_lines() + ax_err.get_lines()
    ax_loss.legend(lines, [ln.get_label() for ln in lines])
    return fig


def _render_variance_bar(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise SchemaError("variance_bar takes exactly one CSV")
    rows = read_variance(spec.inputs[0])
    fig, ax = plt.subplots()
    xs = range(len(rows))
    width = 0.38
    ax.bar([x - width / 2 for x in xs], [r["var_final"] for r in rows], width,
           label="final iterate", color=_COLORS[0])
    ax.bar([x + width / 2 for x in xs], [r["var_tail"] for r in rows], width,
           label="tail mean", color=_COLORS[1])
    ax.set_xticks(list(xs))
    ax.set_xticklabels([f"window {r['window']}" for r in rows])
    ax.set_ylabel("across-seed variance")
    for x, r in zip(xs, rows):
        ax.annotate(f"ratio {r['ratio']:.2f}", (x + width / 2, r["var_tail"]),
                    ha="center", va="bottom", fontsize=8)
    ax.legend()
    return fig


def render(spec: FigureSpec) -> str:
    """Render the figure and return the output path."""
    with plt.rc_context(_STYLE):
        if spec.kind == "ta_curves":
            fig = _render_ta_curves(spec)
        elif spec.kind == "probe_curve":
            fig = _render_probe_curve(spec)
        else:
            fig = _render_variance_bar(spec)
        _save(fig, spec.output)
    return spec.output
