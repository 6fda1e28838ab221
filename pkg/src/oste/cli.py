"""Command-line experiment runner.

Subcommands: ``run`` (method comparison over repeated splits), ``sweep``
(hyper-parameter sweeps), ``importance`` (permutation variable
importance), ``simulate`` (synthetic dataset generation). Reports are
written as deterministic JSON plus flat CSV tables. Failures print a
machine-readable JSON error record to stderr and exit nonzero. The
``OSTE_WORKERS`` environment variable sets the tree-growth worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import serialize_csv
from .errors import OsteError
from .forest import GrowParams, grow_forest, permutation_importance
from .harness import (
    ExperimentConfig,
    SimSpec,
    load_dataset,
    run_experiment,
    simulate_dataset,
    sweep,
)
from .seeding import IMPORTANCE_STREAM, derive_rng


def _workers() -> int:
    raw = os.environ.get("OSTE_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise OsteError(f"OSTE_WORKERS must be an integer, got {raw!r}") from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--data-config", required=True, help="column-role config JSON path")


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--methods", default="oste,rsf", help="comma list of oste,rsf,bagging")
    p.add_argument("--runs", type=int, default=20, help="independent random splits")
    p.add_argument("--train-fraction", type=float, default=0.70)
    p.add_argument("--lb-fraction", type=float, default=0.95,
                   help="fraction of train used for growing (rest validates selection)")
    p.add_argument("-B", "--n-trees", type=int, default=1000, dest="n_trees")
    p.add_argument("-M", "--m-fraction", type=float, default=0.20, dest="m_fraction",
                   help="top fraction of ranked trees eligible for selection")
    p.add_argument("-p", "--mtry", type=int, default=None,
                   help="features drawn per node (default: round(sqrt(d)))")
    p.add_argument("--min-node-size", type=int, default=3)
    p.add_argument("--seed", type=int, default=0, help="64-bit unsigned master seed")
    p.add_argument("--out-json", required=True, help="report JSON output path")
    p.add_argument("--out-csv", default=None, help="per-run CSV output path")


def _config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
        runs=args.runs,
        train_fraction=args.train_fraction,
        lb_fraction=args.lb_fraction,
        n_trees=args.n_trees,
        m_fraction=args.m_fraction,
        mtry=args.mtry,
        min_node_size=args.min_node_size,
        master_seed=args.seed,
        dataset_path=args.data,
        dataset_config_path=args.data_config,
        n_jobs=_workers(),
    )


def _cmd_run(args) -> int:
    report = run_experiment(_config_from_args(args))
    Path(args.out_json).write_text(report.to_json())
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv())
    print(f"wrote {args.out_json}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    reports = sweep(config, args.parameter, values)
    payload = [
        {"parameter": args.parameter, "value": v, "report": json.loads(r.to_json())}
        for v, r in zip(values, reports)
    ]
    Path(args.out_json).write_text(json.dumps(payload, sort_keys=True, indent=2))
    if args.out_csv:
        lines = ["parameter,value,run,method,ibs,c_index,size,wall_clock_s"]
        for v, r in zip(values, reports):
            for row in r.to_csv().splitlines()[1:]:
                lines.append(f"{args.parameter},{v!r},{row}")
        Path(args.out_csv).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out_json}")
    return 0


def _cmd_importance(args) -> int:
    ds = load_dataset(args.data, args.data_config)
    params = GrowParams(
        n_trees=args.n_trees,
        mtry=args.mtry,
        min_node_size=args.min_node_size,
        master_seed=args.seed,
    )
    forest = grow_forest(ds, params=params, n_jobs=_workers())
    report = permutation_importance(forest, ds, derive_rng(args.seed, IMPORTANCE_STREAM))
    Path(args.out_json).write_text(json.dumps(report.as_dict(), sort_keys=True, indent=2))
    if args.out_csv:
        Path(args.out_csv).write_text(report.to_csv())
    print(f"wrote {args.out_json}")
    return 0


def _cmd_simulate(args) -> int:
    spec = SimSpec(
        n=args.n,
        d=args.d,
        informative=args.informative,
        effect_size=args.effect_size,
        shape=args.shape,
        censoring_rate=args.censoring,
        censoring_model=args.censoring_model,
    )
    ds = simulate_dataset(spec, np.random.default_rng(args.seed))
    Path(args.out).write_text(serialize_csv(ds))
    config_out = args.config_out or str(Path(args.out).with_suffix(".config.json"))
    config = {
        "time_col": "time",
        "status_col": "status",
        "event_value": "1",
        "features": {name: "numeric" for name in ds.schema.names},
    }
    Path(config_out).write_text(json.dumps(config, sort_keys=True, indent=2))
    print(f"wrote {args.out} and {config_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oste",
        description="Survival tree ensembles with greedy sub-ensemble selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="compare methods over repeated random splits")
    _add_data_args(p_run)
    _add_experiment_args(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one hyper-parameter")
    _add_data_args(p_sweep)
    _add_experiment_args(p_sweep)
    p_sweep.add_argument("--parameter", required=True,
                         choices=["B", "n_trees", "M_fraction", "m_fraction", "p", "mtry"])
    p_sweep.add_argument("--values", required=True, help="comma list of values")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_imp = sub.add_parser("importance", help="permutation variable importance")
    _add_data_args(p_imp)
    p_imp.add_argument("-B", "--n-trees", type=int, default=1000, dest="n_trees")
    p_imp.add_argument("-p", "--mtry", type=int, default=None)
    p_imp.add_argument("--min-node-size", type=int, default=3)
    p_imp.add_argument("--seed", type=int, default=0)
    p_imp.add_argument("--out-json", required=True)
    p_imp.add_argument("--out-csv", default=None)
    p_imp.set_defaults(func=_cmd_importance)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset CSV + config")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--d", type=int, required=True)
    p_sim.add_argument("--informative", type=int, default=1)
    p_sim.add_argument("--effect-size", type=float, default=1.0)
    p_sim.add_argument("--shape", type=float, default=1.0, help="Weibull shape; 1 = exponential")
    p_sim.add_argument("--censoring", type=float, default=0.0, help="target censored fraction")
    p_sim.add_argument("--censoring-model", default="exponential",
                       choices=["exponential", "uniform"])
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True, help="dataset CSV output path")
    p_sim.add_argument("--config-out", default=None,
                       help="config JSON output path (default: <out>.config.json)")
    p_sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OsteError as e:
        record = {"error": type(e).__name__, "message": str(e)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - still emit a machine-readable record
        record = {"error": type(e).__name__, "message": str(e)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
