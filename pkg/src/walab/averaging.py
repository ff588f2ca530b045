"""Training controllers built on running weight averages.

Four controllers share one inner loop (stochastic gradient steps under a
schedule) and differ in how they fold weights into averages:

* :func:`swa_run` - one averaging pass: the incoming weights seed the
  average, training runs n iterations under its own (cyclical or
  constant) schedule, and the live weights are folded in every c
  iterations.
* :func:`dswa_run` / :func:`tswa_run` - two / three chained passes of
  n/2 / n/3 iterations; each pass restarts from the previous pass's
  average, so the total optimizer-step budget stays exactly n.
* :func:`pswa_run` - periodic averaging from early in training: plain
  steps under the unchanged backbone schedule, with consecutive windows
  of ``period_epochs`` epochs; within a window the live weights are
  sampled once per epoch into a fresh average, and at the window end the
  live weights are replaced by that window's mean (optimizer state is
  reset, so stale velocity never applies to the teleported point).
* :func:`sgd_baseline_run` - the plain loop the others are compared to.

All controllers are deterministic given (weights, plan, stream seed) and
report per-epoch metrics rows plus, optionally, the test accuracy of
every sampled weight vector.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import BatchStream, Dataset, next_batch
from .errors import NumericError, SpecError
from .metrics import MetricsRecord
from .ndcore import (
    RunningAverage,
    WeightVector,
    running_average_start,
    running_average_update,
)
from .nn import Batch, ModelSpec, backward, forward_loss
from .optim import AdamState, SgdState, adam_step, reset, sgd_step
from .schedule import ScheduleSpec, lr_at


@dataclass(frozen=True)
class SwaPlan:
    """One averaging pass: schedule, cycle length c, iteration budget n."""

    schedule: ScheduleSpec
    cycle_len: int
    total_iters: int

    def __post_init__(self):
        if self.cycle_len < 1:
            raise SpecError(f"cycle_len must be >= 1, got {self.cycle_len}")
        if self.total_iters < self.cycle_len or self.total_iters % self.cycle_len:
            raise SpecError(
                f"total_iters {self.total_iters} must be a positive multiple "
                f"of cycle_len {self.cycle_len}"
            )


@dataclass(frozen=True)
class PswaPlan:
    """Periodic averaging riding on the backbone schedule itself."""

    start_epoch: int
    period_epochs: int
    backbone_schedule: ScheduleSpec
    samples_per_epoch: int = 1

    def __post_init__(self):
        if self.start_epoch < 0:
            raise SpecError(f"start_epoch must be >= 0, got {self.start_epoch}")
        if self.period_epochs < 1:
            raise SpecError(f"period_epochs must be >= 1, got {self.period_epochs}")
        if self.samples_per_epoch < 1:
            raise SpecError(f"samples_per_epoch must be >= 1, got {self.samples_per_epoch}")


@dataclass(frozen=True)
class EvalConfig:
    """What to measure at epoch boundaries (and how)."""

    train: Dataset | None = None
    test: Dataset | None = None
    batch_size: int = 256
    dtype: type = np.float64
    eval_samples: bool = True  # test accuracy of every sampled weight vector
    log_avg: bool = True  # extra per-epoch rows for the running average


@dataclass
class ControllerOutput:
    final_weights: WeightVector
    per_epoch_metrics: list[MetricsRecord] = field(default_factory=list)
    sampled_weights_metrics: list[tuple[int, float]] = field(default_factory=list)
    checkpoints: dict[str, WeightVector] = field(default_factory=dict)
    samples: list[WeightVector] | None = None
    steps_taken: int = 0


def evaluate(
    spec: ModelSpec,
    w: WeightVector,
    dataset: Dataset,
    batch_size: int = 256,
    dtype=np.float64,
) -> tuple[float, float]:
    """Dataset-order loss and accuracy; deterministic sequential batching."""
    total_loss = 0.0
    correct = 0.0
    n = len(dataset)
    for start in range(0, n, batch_size):
        b = Batch(dataset.inputs[start:start + batch_size], dataset.labels[start:start + batch_size])
        loss, acc = forward_loss(spec, w, b, dtype)
        total_loss += loss * len(b)
        correct += acc * len(b)
    return total_loss / n, correct / n


def _row(
    spec: ModelSpec,
    w: WeightVector,
    cfg: EvalConfig,
    epoch: int,
    lr: float,
    tag: str,
    t0: float,
) -> MetricsRecord:
    train_loss = train_acc = test_acc = float("nan")
    if cfg.train is not None:
        train_loss, train_acc = evaluate(spec, w, cfg.train, cfg.batch_size, cfg.dtype)
    if cfg.test is not None:
        _, test_acc = evaluate(spec, w, cfg.test, cfg.batch_size, cfg.dtype)
    return MetricsRecord(
        epoch=epoch,
        lr=lr,
        train_loss=train_loss,
        train_acc=train_acc,
        test_acc=test_acc,
        controller_tag=tag,
        wallclock_s=time.perf_counter() - t0,
    )


def _step(w, grad, lr, state):
    if isinstance(state, SgdState):
        return sgd_step(w, grad, lr, state)
    if isinstance(state, AdamState):
        return adam_step(w, grad, lr, state)
    raise SpecError(f"unknown optimizer state {type(state).__name__}")


def _sample_steps(steps_per_epoch: int, samples_per_epoch: int) -> set[int]:
    """1-based step indices within an epoch after which a sample is taken."""
    return {
        max(1, round(steps_per_epoch * (j + 1) / samples_per_epoch))
        for j in range(samples_per_epoch)
    }


def swa_run(
    spec: ModelSpec,
    w_init: WeightVector,
    plan: SwaPlan,
    stream: BatchStream,
    opt,
    *,
    eval_cfg: EvalConfig = EvalConfig(),
    epoch_offset: int = 0,
    tag: str = "swa",
    keep_samples: bool = False,
    t0: float | None = None,
) -> ControllerOutput:
    """One averaging pass over a rewarmed trajectory.

    The average starts at ``w_init`` with count 1; every ``cycle_len``
    iterations the live weights are folded in, so after n iterations the
    mean holds n/c + 1 samples. Metrics rows report the running mean;
    ``sampled_weights_metrics`` reports each live sample's test accuracy.
    """
    t0 = time.perf_counter() if t0 is None else t0
    spe = stream.steps_per_epoch
    avg = running_average_start(w_init, count=1)
    w = w_init
    out = ControllerOutput(final_weights=w_init)
    if keep_samples:
        out.samples = [w_init]
    for i in range(1, plan.total_iters + 1):
        lr = lr_at(plan.schedule, i - 1)
        epoch_local, step = divmod(i - 1, spe)
        batch = next_batch(stream, epoch_offset + epoch_local, step)
        try:
            _, grad = backward(spec, w, batch, eval_cfg.dtype)
            w, opt = _step(w, grad, lr, opt)
        except NumericError as e:
            raise NumericError(f"{tag}: diverged at iteration {i}: {e}") from e
        if i % plan.cycle_len == 0:
            avg = running_average_update(avg, w)
            if keep_samples:
                out.samples.append(w)
            if eval_cfg.eval_samples and eval_cfg.test is not None:
                _, sample_acc = evaluate(spec, w, eval_cfg.test, eval_cfg.batch_size, eval_cfg.dtype)
                out.sampled_weights_metrics.append((i, sample_acc))
        if i % spe == 0:
            out.per_epoch_metrics.append(
                _row(spec, avg.mean, eval_cfg, epoch_offset + epoch_local + 1, lr, tag, t0)
            )
    out.final_weights = avg.mean
    out.steps_taken = plan.total_iters
    out.checkpoints["final"] = avg.mean
    return out


def _chained_swa(
    stages: int,
    spec: ModelSpec,
    w_init: WeightVector,
    schedule: ScheduleSpec,
    cycle_len: int,
    total_iters: int,
    stream: BatchStream,
    opt,
    *,
    eval_cfg: EvalConfig,
    epoch_offset: int,
    tag: str,
    keep_samples: bool,
    t0: float | None,
) -> ControllerOutput:
    if total_iters % stages:
        raise SpecError(f"{tag}: total_iters {total_iters} not divisible by {stages}")
    t0 = time.perf_counter() if t0 is None else t0
    per_stage = total_iters // stages
    plan = SwaPlan(schedule=schedule, cycle_len=cycle_len, total_iters=per_stage)
    out = ControllerOutput(final_weights=w_init)
    if keep_samples:
        out.samples = []
    w = w_init
    offset = epoch_offset
    for stage in range(1, stages + 1):
        stage_out = swa_run(
            spec,
            w,
            plan,
            stream,
            reset(opt, w),
            eval_cfg=eval_cfg,
            epoch_offset=offset,
            tag=tag,
            keep_samples=keep_samples,
            t0=t0,
        )
        w = stage_out.final_weights
        out.per_epoch_metrics.extend(stage_out.per_epoch_metrics)
        out.sampled_weights_metrics.extend(
            (i + (stage - 1) * per_stage, acc) for i, acc in stage_out.sampled_weights_metrics
        )
        out.steps_taken += stage_out.steps_taken
        out.checkpoints[f"stage{stage}"] = w
        if keep_samples:
            out.samples.extend(stage_out.samples)
        offset += per_stage // stream.steps_per_epoch
    out.final_weights = w
    out.checkpoints["final"] = w
    return out


def dswa_run(
    spec: ModelSpec,
    w_init: WeightVector,
    schedule: ScheduleSpec,
    cycle_len: int,
    total_iters: int,
    stream: BatchStream,
    opt,
    *,
    eval_cfg: EvalConfig = EvalConfig(),
    epoch_offset: int = 0,
    tag: str = "dswa",
    keep_samples: bool = False,
    t0: float | None = None,
) -> ControllerOutput:
    """Two chained averaging passes of total_iters/2 iterations each.

    The second pass is seeded with the first pass's mean; the optimizer
    state is reset at the seam. Equivalent by construction to two manual
    :func:`swa_run` calls with matched stream offsets.
    """
    return _chained_swa(
        2, spec, w_init, schedule, cycle_len, total_iters, stream, opt,
        eval_cfg=eval_cfg, epoch_offset=epoch_offset, tag=tag,
        keep_samples=keep_samples, t0=t0,
    )


def tswa_run(
    spec: ModelSpec,
    w_init: WeightVector,
    schedule: ScheduleSpec,
    cycle_len: int,
    total_iters: int,
    stream: BatchStream,
    opt,
    *,
    eval_cfg: EvalConfig = EvalConfig(),
    epoch_offset: int = 0,
    tag: str = "tswa",
    keep_samples: bool = False,
    t0: float | None = None,
) -> ControllerOutput:
    """Three chained averaging passes of total_iters/3 iterations each."""
    return _chained_swa(
        3, spec, w_init, schedule, cycle_len, total_iters, stream, opt,
        eval_cfg=eval_cfg, epoch_offset=epoch_offset, tag=tag,
        keep_samples=keep_samples, t0=t0,
    )


def sgd_baseline_run(
    spec: ModelSpec,
    w_init: WeightVector,
    schedule: ScheduleSpec,
    total_epochs: int,
    stream: BatchStream,
    opt,
    *,
    eval_cfg: EvalConfig = EvalConfig(),
    epoch_offset: int = 0,
    tag: str = "sgd",
    t0: float | None = None,
) -> ControllerOutput:
    """Plain training loop: the backbone the controllers are compared to."""
    t0 = time.perf_counter() if t0 is None else t0
    spe = stream.steps_per_epoch
    w = w_init
    out = ControllerOutput(final_weights=w_init)
    for e in range(total_epochs):
        epoch = epoch_offset + e
        lr = float("nan")
        for step in range(spe):
            it = epoch * spe + step
            lr = lr_at(schedule, it)
            batch = next_batch(stream, epoch, step)
            try:
                _, grad = backward(spec, w, batch, eval_cfg.dtype)
                w, opt = _step(w, grad, lr, opt)
            except NumericError as err:
                raise NumericError(f"{tag}: diverged at iteration {it + 1}: {err}") from err
            out.steps_taken += 1
        out.per_epoch_metrics.append(_row(spec, w, eval_cfg, epoch + 1, lr, tag, t0))
    out.final_weights = w
    out.checkpoints["final"] = w
    return out


def pswa_run(
    spec: ModelSpec,
    w_init: WeightVector,
    plan: PswaPlan,
    total_epochs: int,
    stream: BatchStream,
    opt,
    *,
    eval_cfg: EvalConfig = EvalConfig(),
    tag: str = "pswa",
    keep_samples: bool = False,
    t0: float | None = None,
) -> ControllerOutput:
    """Periodic averaging windows over an otherwise unchanged backbone run.

    Epochs before ``start_epoch`` are plain steps. After that, windows of
    ``period_epochs`` epochs each: live weights are sampled into a fresh
    (empty) average ``samples_per_epoch`` times per epoch, and at the
    window end the live weights are replaced by the window mean. The
    learning rate always follows the backbone schedule's global iteration
    index. With ``start_epoch >= total_epochs`` this degenerates exactly
    to the plain baseline.

    Per-epoch rows carry the live weights (tag); when ``log_avg`` is set,
    extra rows (tag + "_avg") carry the current window mean.
    """
    t0 = time.perf_counter() if t0 is None else t0
    spe = stream.steps_per_epoch
    sched = plan.backbone_schedule
    sample_at = _sample_steps(spe, plan.samples_per_epoch)
    w = w_init
    out = ControllerOutput(final_weights=w_init)
    if keep_samples:
        out.samples = []
    window_avg: RunningAverage | None = None
    window_index = 0
    for e in range(total_epochs):
        averaging = e >= plan.start_epoch
        if averaging and (e - plan.start_epoch) % plan.period_epochs == 0:
            window_index += 1
            window_avg = running_average_start(w, count=0)
        lr = float("nan")
        for step in range(spe):
            it = e * spe + step
            lr = lr_at(sched, it)
            batch = next_batch(stream, e, step)
            try:
                _, grad = backward(spec, w, batch, eval_cfg.dtype)
                w, opt = _step(w, grad, lr, opt)
            except NumericError as err:
                raise NumericError(f"{tag}: diverged at iteration {it + 1}: {err}") from err
            out.steps_taken += 1
            if averaging and (step + 1) in sample_at:
                window_avg = running_average_update(window_avg, w)
                if keep_samples:
                    out.samples.append(w)
                if eval_cfg.eval_samples and eval_cfg.test is not None:
                    _, acc = evaluate(spec, w, eval_cfg.test, eval_cfg.batch_size, eval_cfg.dtype)
                    out.sampled_weights_metrics.append((it + 1, acc))
        window_closed = (
            averaging and (e - plan.start_epoch + 1) % plan.period_epochs == 0
        )
        if window_closed:
            w = window_avg.mean
            opt = reset(opt, w)
            out.checkpoints[f"window{window_index}"] = w
            window_avg = None
        out.per_epoch_metrics.append(_row(spec, w, eval_cfg, e + 1, lr, tag, t0))
        if averaging and not window_closed and eval_cfg.log_avg and window_avg.count > 0:
            out.per_epoch_metrics.append(
                _row(spec, window_avg.mean, eval_cfg, e + 1, lr, tag + "_avg", t0)
            )
    out.final_weights = w
    out.checkpoints["final"] = w
    return out
