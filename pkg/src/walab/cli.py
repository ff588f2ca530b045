"""Command-line interface.

Subcommands: train (presets or config files), probe (loss-landscape line
probe between two checkpoints), quad (noisy-quadratic variance report),
compare (align finished runs), preset (list/show). Exit codes: 0 ok,
2 usage errors, 3 data/format errors, 4 numeric failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import FormatError, NumericError, SpecError, UsageError, WalabError
from .harness import (
    PRESET_NAMES,
    PlanBundle,
    TrainPlan,
    compare_runs,
    dump_toml,
    fit_dataset_to_model,
    format_summary,
    load_datasets,
    load_plan,
    preset,
    resolve_model,
    run_bundle,
    run_plan,
)
from .landscape import default_ts, line_probe, write_probe_csv
from .ndcore import load_checkpoint
from .quadratic import (
    QuadSpec,
    variance_csv_row,
    variance_report,
    write_variance_csv,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="walab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a training plan or preset bundle")
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help=f"one of: {', '.join(PRESET_NAMES)}")
    src.add_argument("--config", help="TOML plan file (e.g. an emitted config.toml)")
    t.add_argument("--seed", type=int, default=None, help="master seed (base seed for bundles)")
    t.add_argument("--n-seeds", type=int, default=None, help="seed count for bundles")
    t.add_argument("--out", default="runs/run", help="output directory")
    t.add_argument("--data-dir", default=None, help="dataset root (or WALAB_DATA_DIR)")
    t.add_argument("--epochs", type=int, default=None, help="override total epochs")
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--dtype", choices=["float32", "float64"], default=None,
                   help="override compute dtype")

    pr = sub.add_parser("probe", help="loss/error along the line between two checkpoints")
    pr.add_argument("--ckpt-a", required=True)
    pr.add_argument("--ckpt-b", required=True)
    pr.add_argument("--t-min", type=float, default=-0.25)
    pr.add_argument("--t-max", type=float, default=1.25)
    pr.add_argument("--t-count", type=int, default=21)
    pr.add_argument("--model", default="toy_cnn", help="toy_cnn or mlp:d0,d1,...")
    pr.add_argument("--dataset", default="cifar10", choices=["cifar10", "mnist", "blobs"])
    pr.add_argument("--data-dir", default=None)
    pr.add_argument("--subset-per-class", type=int, default=None,
                    help="probe on a balanced train subset")
    pr.add_argument("--out", default="probe.csv")

    q = sub.add_parser("quad", help="noisy-quadratic tail-averaging variance report")
    q.add_argument("--lr", type=float, default=0.1)
    q.add_argument("--h", default="1.0", help="comma-separated curvatures")
    q.add_argument("--sigma", type=float, default=1.0)
    q.add_argument("--steps", type=int, default=2000)
    q.add_argument("--window", type=int, default=50)
    q.add_argument("--seeds", type=int, default=200)
    q.add_argument("--out", default=None, help="append a CSV report here")

    c = sub.add_parser("compare", help="align finished runs by epoch")
    c.add_argument("dirs", nargs="+")
    c.add_argument("--out", default=None, help="write the aligned table as CSV")

    pp = sub.add_parser("preset", help="list or show presets")
    pp.add_argument("action", choices=["list", "show"])
    pp.add_argument("name", nargs="?", default=None)
    return p


def _apply_overrides(plan: TrainPlan, args) -> TrainPlan:
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    if args.epochs is not None:
        plan = replace(plan, total_epochs=args.epochs)
    if args.batch_size is not None:
        plan = replace(plan, batch_size=args.batch_size)
    if args.dtype is not None:
        plan = replace(plan, compute_dtype=args.dtype)
    return plan


def _cmd_train(args) -> int:
    if args.config:
        plan = _apply_overrides(load_plan(args.config), args)
        summary = run_plan(plan, args.out, data_dir=args.data_dir)
        print(f"{plan.name}: final TA {summary['final_test_acc']:.4f} -> {args.out}")
        return 0
    obj, prov = preset(args.preset)
    if isinstance(obj, TrainPlan):
        plan = _apply_overrides(obj, args)
        summary = run_plan(plan, args.out, data_dir=args.data_dir, provenance=prov)
        print(f"{plan.name}: final TA {summary['final_test_acc']:.4f} -> {args.out}")
        return 0
    if isinstance(obj, PlanBundle):
        base = args.seed if args.seed is not None else 0
        count = args.n_seeds if args.n_seeds is not None else obj.default_seeds
        seeds = [base + i for i in range(count)]
        if args.epochs is not None or args.batch_size is not None:
            raise UsageError("--epochs/--batch-size apply to single plans, not bundles")
        if args.dtype is not None:
            obj = PlanBundle(
                name=obj.name,
                backbone=replace(obj.backbone, compute_dtype=args.dtype) if obj.backbone else None,
                branches=tuple(replace(b, compute_dtype=args.dtype) for b in obj.branches),
                default_seeds=obj.default_seeds,
            )
        summaries = run_bundle(obj, args.out, seeds, data_dir=args.data_dir, provenance=prov)
        by_branch = {}
        for s in summaries:
            by_branch.setdefault(s["name"], []).append(s["final_test_acc"])
        for name, accs in by_branch.items():
            mean = sum(accs) / len(accs)
            print(f"{obj.name}/{name}: mean final TA {mean:.4f} over {len(accs)} seed(s)")
        return 0
    raise UsageError(
        f"preset {args.preset!r} is a {obj.get('kind')} template; "
        "use the dedicated subcommand (probe/quad) with these defaults:\n"
        + dump_toml({obj.get("kind", "template"): {k: v for k, v in obj.items() if k != 'kind'}})
    )


def _cmd_probe(args) -> int:
    w_a = load_checkpoint(args.ckpt_a)
    w_b = load_checkpoint(args.ckpt_b)
    if args.model.startswith("mlp:"):
        model_cfg = {"name": "mlp", "dims": [int(d) for d in args.model[4:].split(",")]}
    else:
        model_cfg = {"name": args.model}
    spec = resolve_model(model_cfg)
    ds_cfg = {"name": args.dataset}
    if args.subset_per_class:
        ds_cfg["subset_per_class"] = args.subset_per_class
    train, test = load_datasets(ds_cfg, args.data_dir)
    train = fit_dataset_to_model(spec, train)
    test = fit_dataset_to_model(spec, test)
    ts = default_ts(args.t_min, args.t_max, args.t_count)
    result = line_probe(spec, w_a, w_b, ts, train, test)
    write_probe_csv(args.out, result)
    print(f"probe: {len(ts)} points -> {args.out}")
    return 0


def _cmd_quad(args) -> int:
    curvatures = tuple(float(x) for x in args.h.split(","))
    spec = QuadSpec(
        curvatures=curvatures,
        noise_std=args.sigma,
        lr=args.lr,
        steps=args.steps,
        tail_window=args.window,
    )
    report = variance_report(spec, n_seeds=args.seeds)
    print(
        f"var(final)={report.var_final:.6g} var(tail)={report.var_tail:.6g} "
        f"ratio={report.ratio:.4f} over {report.n_seeds} seeds"
    )
    if args.out:
        write_variance_csv(args.out, [variance_csv_row(spec, report)])
        print(f"-> {args.out}")
    return 0


def _cmd_compare(args) -> int:
    result = compare_runs(args.dirs)
    header = "epoch  " + "  ".join(f"{lbl:>12s}" for lbl in result["labels"])
    print(header)
    for e in result["epochs"]:
        cells = "  ".join(f"{v:12.4f}" for v in result["table"][e])
        print(f"{e:>5d}  {cells}")
    print()
    print(format_summary(result["summary"]))
    if args.out:
        Path(args.out).write_text(result["csv"])
        print(f"-> {args.out}")
    return 0


def _cmd_preset(args) -> int:
    if args.action == "list":
        for name in PRESET_NAMES:
            print(name)
        return 0
    if not args.name:
        raise UsageError("preset show needs a name")
    obj, prov = preset(args.name)
    if isinstance(obj, TrainPlan):
        print(dump_toml(obj.to_dict(), prov), end="")
    elif isinstance(obj, PlanBundle):
        plans = ([obj.backbone] if obj.backbone else []) + list(obj.branches)
        for plan in plans:
            print(f"# --- {obj.name}/{plan.name} ---")
            print(dump_toml(plan.to_dict(), prov))
    else:
        kind = obj.get("kind", "template")
        print(dump_toml({kind: {k: v for k, v in obj.items() if k != "kind"}}, prov), end="")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "probe":
            return _cmd_probe(args)
        if args.command == "quad":
            return _cmd_quad(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "preset":
            return _cmd_preset(args)
        raise UsageError(f"unknown command {args.command!r}")
    except (UsageError, SpecError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except WalabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
