"""Experiment orchestration: declarative train plans, presets, runs.

A :class:`TrainPlan` fully describes one run (model, data, optimizer,
schedule, controller, seed, budgets) and serializes to TOML; the snapshot
written at run start is sufficient to reproduce the run byte for byte
(wallclock aside). A :class:`PlanBundle` groups related runs, optionally
sharing a backbone prefix: branch runs start from the backbone's final
checkpoint and continue its epoch numbering and shuffle stream.

The master seed fans out through named substreams (see :mod:`walab.rng`):
"init" for weight initialisation and "shuffle" for the batch stream, so
neither perturbs the other. Dataset subsetting is seeded separately (a
fixed per-plan ``subset_seed``, default 0) so every seed of a bundle
trains on the same subset.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import averaging, nn
from .averaging import EvalConfig, PswaPlan, SwaPlan
from .data import (
    BatchStream,
    Dataset,
    load_cifar10,
    load_mnist,
    subset_balanced,
    synthetic_blobs,
)
from .errors import FormatError, SpecError, UsageError, WalabError
from .metrics import MetricsRecord, read_csv, write_csv
from .ndcore import load_checkpoint, save_checkpoint
from .optim import adam_init, sgd_init
from .rng import derive_seed
from .schedule import ScheduleSpec, backbone, constant, cyclic_linear

DATA_DIR_ENV = "WALAB_DATA_DIR"

PRESET_NAMES = (
    "case1-backbone",
    "case2-backbone",
    "table3-desk",
    "table4-desk",
    "fig4-desk",
    "fig5-probe",
    "quad-variance",
    "blobs-smoke",
)


@dataclass(frozen=True)
class TrainPlan:
    name: str
    seed: int
    batch_size: int
    total_epochs: int
    model: dict
    dataset: dict
    schedule: dict
    optimizer: dict
    controller: dict
    eval: dict = field(default_factory=dict)
    epoch_offset: int = 0
    compute_dtype: str = "float64"
    init_checkpoint: str | None = None
    from_backbone: bool = False

    def to_dict(self) -> dict:
        run = {
            "name": self.name,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "total_epochs": self.total_epochs,
            "epoch_offset": self.epoch_offset,
            "compute_dtype": self.compute_dtype,
            "from_backbone": self.from_backbone,
        }
        if self.init_checkpoint is not None:
            run["init_checkpoint"] = self.init_checkpoint
        return {
            "run": run,
            "model": dict(self.model),
            "dataset": dict(self.dataset),
            "schedule": dict(self.schedule),
            "optimizer": dict(self.optimizer),
            "controller": dict(self.controller),
            "eval": dict(self.eval),
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainPlan":
        try:
            run = d["run"]
            return TrainPlan(
                name=run["name"],
                seed=int(run["seed"]),
                batch_size=int(run["batch_size"]),
                total_epochs=int(run["total_epochs"]),
                epoch_offset=int(run.get("epoch_offset", 0)),
                compute_dtype=run.get("compute_dtype", "float64"),
                init_checkpoint=run.get("init_checkpoint"),
                from_backbone=bool(run.get("from_backbone", False)),
                model=dict(d["model"]),
                dataset=dict(d["dataset"]),
                schedule=dict(d["schedule"]),
                optimizer=dict(d["optimizer"]),
                controller=dict(d["controller"]),
                eval=dict(d.get("eval", {})),
            )
        except KeyError as e:
            raise SpecError(f"train plan missing required field: {e}") from e


@dataclass(frozen=True)
class PlanBundle:
    """Related runs sharing a name and (optionally) a backbone prefix."""

    name: str
    branches: tuple[TrainPlan, ...]
    backbone: TrainPlan | None = None
    default_seeds: int = 3


# --- TOML emission -------------------------------------------------------

def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise SpecError(f"cannot serialize {type(v).__name__} to TOML")


def dump_toml(sections: dict, provenance: dict[str, str] | None = None) -> str:
    """Serialize a dict of sections to TOML. ``provenance`` maps dotted keys
    ("schedule.lr_high") to a trailing comment on that line. Dict values
    inside a section become subsections."""
    provenance = provenance or {}
    out = []

    def emit(table: str, body: dict):
        nested = {k: v for k, v in body.items() if isinstance(v, dict)}
        out.append(f"[{table}]")
        for key, value in body.items():
            if key in nested:
                continue
            line = f"{key} = {_toml_scalar(value)}"
            note = provenance.get(f"{table}.{key}")
            if note:
                line += f"  # {note}"
            out.append(line)
        out.append("")
        for key, value in nested.items():
            emit(f"{table}.{key}", value)

    for section, body in sections.items():
        emit(section, body)
    return "\n".join(out)


def load_plan(path: str | Path) -> TrainPlan:
    with open(path, "rb") as fh:
        return TrainPlan.from_dict(tomllib.load(fh))


# --- dataset / model / schedule resolution --------------------------------

def resolve_data_dir(plan_dir: str | None, cli_dir: str | None = None) -> Path:
    for cand in (cli_dir, plan_dir, os.environ.get(DATA_DIR_ENV), "data"):
        if cand:
            return Path(cand)
    return Path("data")


FETCH_HINTS = {
    "cifar10": (
        "CIFAR-10 binary batches not found. Fetch and unpack, e.g.:\n"
        "  curl -LO https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz\n"
        "  tar xzf cifar-10-binary.tar.gz -C <data-dir>\n"
        f"then point {DATA_DIR_ENV} (or --data-dir) at <data-dir>."
    ),
    "mnist": (
        "MNIST IDX files not found. Fetch train-images-idx3-ubyte(.gz),\n"
        "train-labels-idx1-ubyte(.gz), t10k-images-idx3-ubyte(.gz),\n"
        "t10k-labels-idx1-ubyte(.gz) into <data-dir> and point "
        f"{DATA_DIR_ENV} (or --data-dir) there."
    ),
}


def load_datasets(ds_cfg: dict, data_dir: str | None = None) -> tuple[Dataset, Dataset]:
    """Resolve a dataset config to (train, test)."""
    name = ds_cfg.get("name")
    if name == "blobs":
        classes = int(ds_cfg.get("classes", 10))
        dim = int(ds_cfg.get("dim", 48))
        sep = float(ds_cfg.get("separation", 3.0))
        blob_seed = int(ds_cfg.get("blobs_seed", 0))
        shape = tuple(ds_cfg["image_shape"]) if "image_shape" in ds_cfg else None
        train = synthetic_blobs(classes, int(ds_cfg.get("per_class", 100)), dim,
                                seed=blob_seed, separation=sep, shape=shape)
        test = synthetic_blobs(classes, int(ds_cfg.get("test_per_class", 50)), dim,
                               seed=blob_seed + 1000003, separation=sep, shape=shape)
        return train, test
    root = resolve_data_dir(ds_cfg.get("data_dir"), data_dir)
    if name == "cifar10":
        try:
            train = load_cifar10(root, "train")
            test = load_cifar10(root, "test")
        except FormatError as e:
            raise FormatError(f"{e}\n{FETCH_HINTS['cifar10']}") from e
    elif name == "mnist":
        try:
            train = load_mnist(root, "train")
            test = load_mnist(root, "test")
        except FormatError as e:
            raise FormatError(f"{e}\n{FETCH_HINTS['mnist']}") from e
    else:
        raise SpecError(f"unknown dataset {name!r}")
    if "subset_per_class" in ds_cfg:
        train = subset_balanced(
            train, int(ds_cfg["subset_per_class"]), seed=int(ds_cfg.get("subset_seed", 0))
        )
    return train, test


def resolve_model(model_cfg: dict) -> nn.ModelSpec:
    name = model_cfg.get("name")
    if name == "toy_cnn":
        return nn.toy_cnn_spec()
    if name == "mlp":
        return nn.mlp_spec(model_cfg["dims"])
    raise SpecError(f"unknown model {name!r}")


def fit_dataset_to_model(spec: nn.ModelSpec, dataset: Dataset) -> Dataset:
    """Flatten image datasets for flat-input models when the sizes agree."""
    shape = dataset.inputs.shape[1:]
    if spec.input_shape == shape:
        return dataset
    if len(spec.input_shape) == 1 and int(np.prod(shape)) == spec.input_shape[0]:
        return Dataset(
            dataset.name,
            dataset.split,
            dataset.inputs.reshape(len(dataset), -1),
            dataset.labels,
            dataset.class_count,
        )
    raise SpecError(
        f"dataset samples {shape} do not fit model input {spec.input_shape}"
    )


def resolve_schedule(sched_cfg: dict, steps_per_epoch: int) -> ScheduleSpec:
    kind = sched_cfg.get("kind")
    if kind == "backbone":
        return backbone(
            total_epochs=int(sched_cfg["span_epochs"]),
            lr_high=float(sched_cfg["lr_high"]),
            lr_low=float(sched_cfg["lr_low"]),
            steps_per_epoch=steps_per_epoch,
            plateau_frac=float(sched_cfg.get("plateau_frac", 0.5)),
            decay_end_frac=float(sched_cfg.get("decay_end_frac", 0.9)),
        )
    if kind == "constant":
        return constant(float(sched_cfg["lr"]), steps_per_epoch)
    if kind == "cyclic_linear":
        if "cycle_iters" in sched_cfg:
            cycle = int(sched_cfg["cycle_iters"])
        else:
            cycle = int(sched_cfg.get("cycle_epochs", 1)) * steps_per_epoch
        return cyclic_linear(
            cycle, float(sched_cfg["lr_high"]), float(sched_cfg["lr_low"]), steps_per_epoch
        )
    raise SpecError(f"unknown schedule kind {kind!r}")


def resolve_optimizer(opt_cfg: dict, w):
    kind = opt_cfg.get("kind")
    if kind == "sgd":
        return sgd_init(
            w,
            momentum=float(opt_cfg.get("momentum", 0.0)),
            weight_decay=float(opt_cfg.get("weight_decay", 0.0)),
        )
    if kind == "adam":
        return adam_init(
            w,
            beta1=float(opt_cfg.get("beta1", 0.9)),
            beta2=float(opt_cfg.get("beta2", 0.999)),
            eps=float(opt_cfg.get("eps", 1e-8)),
        )
    raise SpecError(f"unknown optimizer {kind!r}")


_DTYPES = {"float64": np.float64, "float32": np.float32}


# --- running --------------------------------------------------------------

class _RunLock:
    def __init__(self, out_dir: Path):
        self.path = out_dir / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WalabError(f"{self.path.parent} is locked by another run") from None
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)


def run_plan(
    plan: TrainPlan,
    out_dir: str | Path,
    data_dir: str | None = None,
    provenance: dict[str, str] | None = None,
) -> dict:
    """Execute one plan end to end; returns a summary dict.

    Writes config.toml (before training), metrics.csv, and checkpoints/
    under ``out_dir``. The directory is locked for the duration.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if (out_dir / "metrics.csv").exists():
        raise UsageError(f"{out_dir} already holds a completed run")
    t0 = time.perf_counter()
    with _RunLock(out_dir):
        (out_dir / "config.toml").write_text(dump_toml(plan.to_dict(), provenance))
        ckpt_dir = out_dir / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)

        train, test = load_datasets(plan.dataset, data_dir)
        spec = resolve_model(plan.model)
        train = fit_dataset_to_model(spec, train)
        test = fit_dataset_to_model(spec, test)
        if plan.compute_dtype not in _DTYPES:
            raise SpecError(f"unknown compute_dtype {plan.compute_dtype!r}")
        dtype = _DTYPES[plan.compute_dtype]

        if plan.init_checkpoint:
            w0 = load_checkpoint(plan.init_checkpoint)
        else:
            w0 = nn.init_weights(spec, derive_seed(plan.seed, "init"))
        save_checkpoint(ckpt_dir / "init.ckpt", w0)

        stream = BatchStream(train, plan.batch_size, derive_seed(plan.seed, "shuffle"))
        spe = stream.steps_per_epoch
        opt = resolve_optimizer(plan.optimizer, w0)
        eval_cfg = EvalConfig(
            train=train,
            test=test,
            batch_size=int(plan.eval.get("batch_size", 512)),
            dtype=dtype,
            eval_samples=bool(plan.eval.get("eval_samples", True)),
            log_avg=bool(plan.eval.get("log_avg", True)),
        )

        kind = plan.controller.get("kind")
        if kind == "sgd":
            sched = resolve_schedule(plan.schedule, spe)
            out = averaging.sgd_baseline_run(
                spec, w0, sched, plan.total_epochs, stream, opt,
                eval_cfg=eval_cfg, epoch_offset=plan.epoch_offset, tag=plan.name, t0=t0,
            )
        elif kind in ("swa", "dswa", "tswa"):
            sched = resolve_schedule(plan.schedule, spe)
            cycle = int(plan.controller.get("cycle_epochs", 1)) * spe
            n = plan.total_epochs * spe
            if kind == "swa":
                out = averaging.swa_run(
                    spec, w0, SwaPlan(sched, cycle, n), stream, opt,
                    eval_cfg=eval_cfg, epoch_offset=plan.epoch_offset, tag=plan.name, t0=t0,
                )
            else:
                runner = averaging.dswa_run if kind == "dswa" else averaging.tswa_run
                out = runner(
                    spec, w0, sched, cycle, n, stream, opt,
                    eval_cfg=eval_cfg, epoch_offset=plan.epoch_offset, tag=plan.name, t0=t0,
                )
        elif kind == "pswa":
            if plan.epoch_offset:
                raise SpecError("pswa runs from epoch 0; epoch_offset must be 0")
            sched = resolve_schedule(plan.schedule, spe)
            pplan = PswaPlan(
                start_epoch=int(plan.controller["start_epoch"]),
                period_epochs=int(plan.controller["period_epochs"]),
                backbone_schedule=sched,
                samples_per_epoch=int(plan.controller.get("samples_per_epoch", 1)),
            )
            out = averaging.pswa_run(
                spec, w0, pplan, plan.total_epochs, stream, opt,
                eval_cfg=eval_cfg, tag=plan.name, t0=t0,
            )
        else:
            raise SpecError(f"unknown controller {kind!r}")

        write_csv(out_dir / "metrics.csv", out.per_epoch_metrics)
        if out.sampled_weights_metrics:
            lines = ["iteration,test_acc"] + [
                f"{i},{acc:.6g}" for i, acc in out.sampled_weights_metrics
            ]
            (out_dir / "samples.csv").write_text("\n".join(lines) + "\n")
        for name, w in out.checkpoints.items():
            save_checkpoint(ckpt_dir / f"{name}.ckpt", w)

        _, final_acc = averaging.evaluate(
            spec, out.final_weights, test, eval_cfg.batch_size, dtype
        )
    summary = {
        "name": plan.name,
        "seed": plan.seed,
        "epochs": plan.total_epochs,
        "steps": out.steps_taken,
        "final_test_acc": final_acc,
        "wallclock_s": time.perf_counter() - t0,
        "out_dir": str(out_dir),
    }
    return summary


def run_bundle(
    bundle: PlanBundle,
    out_root: str | Path,
    seeds: list[int],
    data_dir: str | None = None,
    provenance: dict[str, str] | None = None,
    log=print,
) -> list[dict]:
    """Run every (seed, branch) of a bundle; backbone runs once per seed.

    Output layout: <out_root>/s<seed>/<branch-name>/.
    """
    out_root = Path(out_root)
    summaries = []
    for seed in seeds:
        seed_dir = out_root / f"s{seed}"
        backbone_ckpt = None
        backbone_epochs = 0
        if bundle.backbone is not None:
            plan = replace(bundle.backbone, seed=seed)
            summary = run_plan(plan, seed_dir / plan.name, data_dir, provenance)
            log(f"[{bundle.name}] seed {seed} {plan.name}: "
                f"TA {summary['final_test_acc']:.4f} ({summary['wallclock_s']:.0f}s)")
            summaries.append(summary)
            backbone_ckpt = str(seed_dir / plan.name / "checkpoints" / "final.ckpt")
            backbone_epochs = plan.total_epochs
        for branch in bundle.branches:
            plan = replace(branch, seed=seed)
            if branch.from_backbone:
                if backbone_ckpt is None:
                    raise SpecError(f"branch {branch.name} needs a backbone")
                plan = replace(
                    plan, init_checkpoint=backbone_ckpt, epoch_offset=backbone_epochs
                )
            summary = run_plan(plan, seed_dir / plan.name, data_dir, provenance)
            log(f"[{bundle.name}] seed {seed} {plan.name}: "
                f"TA {summary['final_test_acc']:.4f} ({summary['wallclock_s']:.0f}s)")
            summaries.append(summary)
    return summaries


# --- presets ---------------------------------------------------------------

def _desk_cifar_dataset() -> dict:
    # balanced 10k subset: 1000 per class, selection seeded independently
    # of the run seed so all seeds share the same subset
    return {"name": "cifar10", "subset_per_class": 1000, "subset_seed": 0}


_PROV_COMMON = {
    "run.batch_size": "reference: mini-batch size 128 across all experiments",
    "run.compute_dtype": "decision: CPU throughput; averaging math stays float64",
    "dataset.subset_per_class": "scaled: desk-size 10k balanced subset of the 50k train split",
    "dataset.subset_seed": "decision: subset fixed across run seeds",
    "schedule.lr_high": "reference: plateau rate 0.05",
    "schedule.lr_low": "reference: floor rate 0.01",
    "schedule.plateau_frac": "decision: high plateau covers the first half of the span",
    "schedule.decay_end_frac": "decision: linear decay ends at 0.9 of the span",
}


def preset(name: str):
    """Named experiment setups; returns (object, provenance) where object is
    a TrainPlan, PlanBundle, or a template dict for probe/quad presets."""
    if name == "case1-backbone":
        plan = TrainPlan(
            name="case1",
            seed=0,
            batch_size=128,
            total_epochs=160,
            compute_dtype="float32",
            model={"name": "toy_cnn"},
            dataset={"name": "cifar10"},
            schedule={"kind": "backbone", "span_epochs": 160, "lr_high": 0.05,
                      "lr_low": 0.01, "plateau_frac": 0.5, "decay_end_frac": 0.9},
            optimizer={"kind": "sgd", "momentum": 0.0, "weight_decay": 0.0},
            controller={"kind": "sgd"},
            eval={"eval_samples": False, "log_avg": False, "batch_size": 512},
        )
        prov = dict(_PROV_COMMON)
        prov["run.total_epochs"] = "reference: long-budget regime, 160 epochs"
        prov["schedule.span_epochs"] = "reference: schedule spans the full 160-epoch budget"
        prov["optimizer.momentum"] = "reference: momentum disabled for the clean ablation"
        prov["optimizer.weight_decay"] = "reference: weight decay disabled for the clean ablation"
        return plan, prov

    if name == "case2-backbone":
        plan, prov = preset("case1-backbone")
        plan = replace(
            plan,
            name="case2",
            total_epochs=30,
            schedule={**plan.schedule, "span_epochs": 30},
        )
        prov = dict(prov)
        prov["run.total_epochs"] = "reference: short-budget regime, 30 epochs, deliberately under-trained"
        prov["schedule.span_epochs"] = "reference: schedule compressed into the 30-epoch budget"
        return plan, prov

    if name in ("table3-desk", "table4-desk"):
        sgd_plan = TrainPlan(
            name="sgd",
            seed=0,
            batch_size=128,
            total_epochs=30,
            compute_dtype="float32",
            model={"name": "toy_cnn"},
            dataset=_desk_cifar_dataset(),
            schedule={"kind": "backbone", "span_epochs": 30, "lr_high": 0.05,
                      "lr_low": 0.01, "plateau_frac": 0.5, "decay_end_frac": 0.9},
            optimizer={"kind": "sgd", "momentum": 0.0, "weight_decay": 0.0},
            controller={"kind": "sgd"},
            eval={"eval_samples": False, "log_avg": False, "batch_size": 512},
        )
        chc = {"kind": "cyclic_linear", "cycle_epochs": 1, "lr_high": 0.05, "lr_low": 0.01}
        kinds = ["swa", "dswa"] if name == "table3-desk" else ["swa", "dswa", "tswa"]
        branches = tuple(
            replace(
                sgd_plan,
                name=k,
                total_epochs=12,
                schedule=dict(chc),
                controller={"kind": k, "cycle_epochs": 1},
                from_backbone=True,
            )
            for k in kinds
        )
        prov = dict(_PROV_COMMON)
        prov["run.total_epochs"] = "reference/decision: 30-epoch non-converged backbone; 12 averaging epochs"
        prov["schedule.span_epochs"] = "reference: short-budget backbone, 30 epochs"
        prov["schedule.cycle_epochs"] = "reference: one averaging cycle per epoch"
        prov["optimizer.momentum"] = "reference: momentum and weight decay disabled for this comparison"
        prov["optimizer.weight_decay"] = "reference: momentum and weight decay disabled for this comparison"
        prov["controller.cycle_epochs"] = "reference: one weight sample per epoch"
        return PlanBundle(name=name, backbone=sgd_plan, branches=branches), prov

    if name == "fig4-desk":
        base = TrainPlan(
            name="sgd",
            seed=0,
            batch_size=128,
            total_epochs=32,
            compute_dtype="float32",
            model={"name": "toy_cnn"},
            dataset=_desk_cifar_dataset(),
            schedule={"kind": "backbone", "span_epochs": 32, "lr_high": 0.05,
                      "lr_low": 0.01, "plateau_frac": 0.5, "decay_end_frac": 0.9},
            optimizer={"kind": "sgd", "momentum": 0.9, "weight_decay": 0.0005},
            controller={"kind": "sgd"},
            eval={"eval_samples": False, "log_avg": True, "batch_size": 512},
        )
        pswa = replace(
            base,
            name="pswa",
            controller={"kind": "pswa", "start_epoch": 8, "period_epochs": 4,
                        "samples_per_epoch": 1},
        )
        prov = dict(_PROV_COMMON)
        prov["run.total_epochs"] = "scaled: 160-epoch span shrunk 5x to 32"
        prov["schedule.span_epochs"] = "scaled: 160-epoch span shrunk 5x to 32"
        prov["optimizer.momentum"] = "reference: momentum factor 0.9"
        prov["optimizer.weight_decay"] = "reference: weight decay 0.0005"
        prov["controller.start_epoch"] = "scaled: reference starts after epoch 40 of 160; here 8 of 32"
        prov["controller.period_epochs"] = "scaled: reference period 20 of 160; here 4 of 32"
        prov["controller.samples_per_epoch"] = "reference: one weight sample per epoch"
        return PlanBundle(name=name, backbone=None, branches=(base, pswa)), prov

    if name == "fig5-probe":
        template = {
            "kind": "probe",
            "source": "table3-desk branch checkpoints (checkpoints/final.ckpt)",
            "t_min": -0.25,
            "t_max": 1.25,
            "t_count": 21,
            "dataset": _desk_cifar_dataset(),
        }
        prov = {
            "probe.t_min": "decision: extrapolate a quarter segment past each endpoint",
            "probe.t_count": "decision: 21 evenly spaced points",
        }
        return template, prov

    if name == "quad-variance":
        template = {
            "kind": "quad",
            "lr": 0.1,
            "h": [1.0],
            "sigma": 1.0,
            "steps": 2000,
            "window": 50,
            "seeds": 200,
        }
        prov = {"quad.window": "decision: tail window well past the 1/(lr*h) autocorrelation time"}
        return template, prov

    if name == "blobs-smoke":
        plan = TrainPlan(
            name="blobs-smoke",
            seed=0,
            batch_size=32,
            total_epochs=4,
            model={"name": "mlp", "dims": [16, 24, 4]},
            dataset={"name": "blobs", "classes": 4, "per_class": 64,
                     "test_per_class": 32, "dim": 16, "separation": 3.0,
                     "blobs_seed": 0},
            schedule={"kind": "constant", "lr": 0.05},
            optimizer={"kind": "sgd", "momentum": 0.9, "weight_decay": 0.0},
            controller={"kind": "sgd"},
            eval={"eval_samples": False, "log_avg": False, "batch_size": 128},
        )
        return plan, {}

    raise UsageError(
        f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
    )


# --- comparison ------------------------------------------------------------

def _primary_rows(rows: list[MetricsRecord]) -> list[MetricsRecord]:
    return [r for r in rows if not r.controller_tag.endswith("_avg")]


def compare_runs(dirs: list[str | Path]) -> dict:
    """Align test accuracy by epoch across runs and summarize final TAs.

    Returns {"labels", "epochs", "table", "summary", "csv"}; summary groups
    runs by controller tag with mean and sample std of the final TA.
    """
    series = []
    for d in dirs:
        d = Path(d)
        path = d / "metrics.csv"
        if not path.exists():
            raise FormatError(f"no metrics.csv under {d}")
        rows = _primary_rows(read_csv(path))
        if not rows:
            raise FormatError(f"{path}: no metric rows")
        tag = rows[-1].controller_tag
        series.append((d.name or str(d), tag, {r.epoch: r.test_acc for r in rows}))

    epochs = sorted({e for _, _, s in series for e in s})
    labels = [name for name, _, _ in series]
    table = {
        e: [s.get(e, float("nan")) for _, _, s in series] for e in epochs
    }

    groups: dict[str, list[float]] = {}
    for _, tag, s in series:
        groups.setdefault(tag, []).append(s[max(s)])
    summary = {}
    for tag, finals in groups.items():
        arr = np.asarray(finals)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        summary[tag] = (float(arr.mean()), std, len(arr))

    lines = ["epoch," + ",".join(labels)]
    for e in epochs:
        lines.append(str(e) + "," + ",".join(f"{v:.6g}" for v in table[e]))
    return {
        "labels": labels,
        "epochs": epochs,
        "table": table,
        "summary": summary,
        "csv": "\n".join(lines) + "\n",
    }


def format_summary(summary: dict) -> str:
    out = []
    for tag, (mean, std, n) in summary.items():
        out.append(f"{tag}: {100 * mean:.2f}±{100 * std:.2f} (n={n})")
    return "\n".join(out)
