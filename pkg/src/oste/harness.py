"""Experiment harness: repeated random splits, method comparison, sweeps.

The protocol per run: split the data 70/30 into train and test; split
train 95/5 into a growing part and a selection-validation part; grow the
forest on the growing part; select the sub-ensemble against the
validation part; evaluate every requested method on the untouched test
part. Test rows are structurally invisible to growing, ranking and
selection, and that disjointness is asserted at run boundaries.

Reports are bit-identical across repeated invocations with the same
master seed and configuration; wall-clock timings are therefore kept out
of the JSON report and only appear in the CSV table.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .dataset import (
    NUMERIC,
    DatasetConfig,
    Feature,
    FeatureSchema,
    SplitIndices,
    SurvivalDataset,
    parse_csv,
    split,
)
from .errors import (
    ConcordanceUndefinedError,
    ConfigError,
    DegenerateSplitError,
    GrowthError,
    MetricUndefinedError,
    SelectionError,
)
from .estimators import censoring_km
from .forest import (
    GrowParams,
    ensemble_mortality,
    ensemble_survival_matrix,
    grow_forest,
)
from .metrics import brier_curve_from_matrix, c_index, default_eval_grid, _ipcw_table
from .seeding import BAGGING_STREAM, FOREST_STREAM, RUN_STREAM, derive_rng, derive_seed
from .selection import rank_trees, select

__all__ = [
    "ExperimentConfig",
    "RunReport",
    "SimSpec",
    "run_experiment",
    "sweep",
    "simulate_dataset",
    "load_dataset",
]

METHODS = ("oste", "rsf", "bagging")
_SWEEP_ALIASES = {
    "B": "n_trees",
    "n_trees": "n_trees",
    "M_fraction": "m_fraction",
    "M": "m_fraction",
    "m_fraction": "m_fraction",
    "p": "mtry",
    "mtry": "mtry",
}
_MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a reproducible experiment needs.

    ``mtry=None`` means round(sqrt(d)). ``runs`` defaults to a desk-scale
    20; scale it up for publication-grade averages.
    """

    methods: tuple[str, ...] = ("oste", "rsf")
    runs: int = 20
    train_fraction: float = 0.70
    lb_fraction: float = 0.95
    n_trees: int = 1000
    m_fraction: float = 0.20
    mtry: int | None = None
    min_node_size: int = 3
    master_seed: int = 0
    dataset_path: str | None = None
    dataset_config_path: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        methods = tuple(self.methods)
        if not methods or any(m not in METHODS for m in methods):
            raise ConfigError(f"methods must be a nonempty subset of {METHODS}")
        if not 0.0 < self.train_fraction < 1.0 or not 0.0 < self.lb_fraction < 1.0:
            raise ConfigError("train_fraction and lb_fraction must be in (0, 1)")
        if not 0.0 < self.m_fraction <= 1.0:
            raise ConfigError("m_fraction must be in (0, 1]")
        if self.runs < 1 or self.n_trees < 1:
            raise ConfigError("runs and n_trees must be >= 1")
        object.__setattr__(self, "methods", methods)

    def to_dict(self) -> dict:
        # n_jobs changes nothing observable, so it stays out of reports.
        return {
            "methods": list(self.methods),
            "runs": self.runs,
            "train_fraction": self.train_fraction,
            "lb_fraction": self.lb_fraction,
            "n_trees": self.n_trees,
            "m_fraction": self.m_fraction,
            "mtry": self.mtry,
            "min_node_size": self.min_node_size,
            "master_seed": self.master_seed,
            "dataset_path": self.dataset_path,
            "dataset_config_path": self.dataset_config_path,
        }


@dataclass
class RunReport:
    """Per-run, per-method metrics with mean/sd aggregates."""

    config: dict
    runs: list[dict]
    aggregate: dict

    def to_json(self) -> str:
        """Deterministic JSON (no timing fields)."""
        payload = {
            "config": self.config,
            "runs": [
                {
                    "run": r["run"],
                    "attempt": r["attempt"],
                    "seed": r["seed"],
                    "methods": {
                        m: {k: v for k, v in stats.items() if k != "wall_clock_s"}
                        for m, stats in r["methods"].items()
                    },
                }
                for r in self.runs
            ],
            "aggregate": self.aggregate,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        """One row per run and method, timings included."""
        lines = ["run,method,ibs,c_index,size,wall_clock_s"]
        for r in self.runs:
            for m, stats in sorted(r["methods"].items()):
                lines.append(
                    f"{r['run']},{m},{stats['ibs']!r},{stats['c_index']!r},"
                    f"{stats['size']},{stats['wall_clock_s']!r}"
                )
        return "\n".join(lines) + "\n"


def load_dataset(data_path, config_path) -> SurvivalDataset:
    """Parse a CSV dataset under the column-role config at ``config_path``."""
    cfg = DatasetConfig.from_json(Path(config_path).read_text())
    return parse_csv(Path(data_path).read_text(), cfg)


@dataclass
class _RunArtifacts:
    run: int
    attempt: int
    seed: int
    indices: SplitIndices
    forest: object
    ranking: np.ndarray
    bagging_forest: object | None
    grow_seconds: float
    rank_seconds: float
    bagging_seconds: float


def _probe_degeneracy(ds, indices):
    """Raise if any part of the split cannot support its role.

    All conditions checked here depend only on times/status, never on
    predictions, so a surviving split cannot fail later in evaluation.
    """
    for name, part in (("growing", indices.lb), ("validation", indices.lv), ("test", indices.test)):
        if not ds.status[part].any():
            raise DegenerateSplitError(f"{name} part contains no events")
    for name, part in (("validation", indices.lv), ("test", indices.test)):
        times, status = ds.times[part], ds.status[part]
        grid = default_eval_grid(times, status)
        ghat = censoring_km(times, status)
        _, _, usable = _ipcw_table(times, status, grid, ghat)
        if not usable.any():
            raise MetricUndefinedError(f"{name} IBS undefined at every grid point")
    # Concordance permissibility is score-independent; probe with zeros.
    test = indices.test
    c_index(np.zeros(test.size), ds.times[test], ds.status[test])


def _prepare_run(ds: SurvivalDataset, config: ExperimentConfig, r: int) -> _RunArtifacts:
    last_error = None
    for attempt in range(_MAX_ATTEMPTS):
        rng = derive_rng(config.master_seed, RUN_STREAM, r, attempt)
        try:
            outer = split(ds, config.train_fraction, rng)
            inner = split(ds, config.lb_fraction, rng, indices=outer.train)
            indices = SplitIndices(
                train=outer.train, test=outer.test, lb=inner.train, lv=inner.test
            )
            _probe_degeneracy(ds, indices)
            assert not np.intersect1d(indices.test, indices.train).size

            forest_seed = derive_seed(config.master_seed, FOREST_STREAM, r, attempt)
            params = GrowParams(
                n_trees=config.n_trees,
                mtry=config.mtry,
                min_node_size=config.min_node_size,
                master_seed=forest_seed,
            )
            t0 = time.perf_counter()
            forest = grow_forest(ds, indices.lb, params, n_jobs=config.n_jobs)
            t1 = time.perf_counter()
            ranking = rank_trees(forest, ds)
            t2 = time.perf_counter()

            bagging_forest = None
            t_bag = 0.0
            if "bagging" in config.methods:
                bag_seed = derive_seed(config.master_seed, BAGGING_STREAM, r, attempt)
                bag_params = replace(params, mtry=ds.d, master_seed=bag_seed)
                t3 = time.perf_counter()
                bagging_forest = grow_forest(ds, indices.lb, bag_params, n_jobs=config.n_jobs)
                t_bag = time.perf_counter() - t3
            return _RunArtifacts(
                run=r,
                attempt=attempt,
                seed=forest_seed,
                indices=indices,
                forest=forest,
                ranking=ranking,
                bagging_forest=bagging_forest,
                grow_seconds=t1 - t0,
                rank_seconds=t2 - t1,
                bagging_seconds=t_bag,
            )
        except (
            DegenerateSplitError,
            GrowthError,
            MetricUndefinedError,
            ConcordanceUndefinedError,
            ConfigError,
        ) as e:
            last_error = e
            continue
    raise RuntimeError(
        f"run {r}: no usable split after {_MAX_ATTEMPTS} attempts; last error: {last_error}"
    )


def _evaluate_trees(trees, test_ds, train_grid, eval_grid, ghat):
    surv = ensemble_survival_matrix(trees, test_ds.X, eval_grid)
    curve = brier_curve_from_matrix(
        test_ds.times, test_ds.status, surv, eval_grid, ghat, warn_on_skip=False
    )
    mortality = ensemble_mortality(trees, test_ds.X, train_grid)
    conc = c_index(mortality, test_ds.times, test_ds.status)
    return curve.ibs, conc.concordance


def _evaluate_run(ds: SurvivalDataset, config: ExperimentConfig, art: _RunArtifacts) -> dict:
    test_ds = ds.subset(art.indices.test)
    eval_grid = default_eval_grid(test_ds.times, test_ds.status)
    ghat = censoring_km(test_ds.times, test_ds.status)

    methods: dict[str, dict] = {}
    if "oste" in config.methods:
        t0 = time.perf_counter()
        selection = select(art.forest, art.ranking, config.m_fraction, ds.subset(art.indices.lv))
        trees = [art.forest.trees[i] for i in selection.accepted]
        ibs, conc = _evaluate_trees(trees, test_ds, art.forest.event_grid, eval_grid, ghat)
        elapsed = time.perf_counter() - t0
        size = len(selection.accepted)
        assert size <= math.ceil(config.m_fraction * config.n_trees)
        methods["oste"] = {
            "ibs": ibs,
            "c_index": conc,
            "size": size,
            "wall_clock_s": art.grow_seconds + art.rank_seconds + elapsed,
        }
    if "rsf" in config.methods:
        t0 = time.perf_counter()
        ibs, conc = _evaluate_trees(
            art.forest.trees, test_ds, art.forest.event_grid, eval_grid, ghat
        )
        elapsed = time.perf_counter() - t0
        methods["rsf"] = {
            "ibs": ibs,
            "c_index": conc,
            "size": art.forest.n_trees,
            "wall_clock_s": art.grow_seconds + elapsed,
        }
    if "bagging" in config.methods:
        t0 = time.perf_counter()
        ibs, conc = _evaluate_trees(
            art.bagging_forest.trees, test_ds, art.bagging_forest.event_grid, eval_grid, ghat
        )
        elapsed = time.perf_counter() - t0
        methods["bagging"] = {
            "ibs": ibs,
            "c_index": conc,
            "size": art.bagging_forest.n_trees,
            "wall_clock_s": art.bagging_seconds + elapsed,
        }
    for stats in methods.values():
        assert stats["size"] <= config.n_trees
    return {"run": art.run, "attempt": art.attempt, "seed": art.seed, "methods": methods}


def _aggregate(runs: list[dict], methods) -> dict:
    out = {}
    for m in methods:
        ibs = np.asarray([r["methods"][m]["ibs"] for r in runs])
        conc = np.asarray([r["methods"][m]["c_index"] for r in runs])
        size = np.asarray([r["methods"][m]["size"] for r in runs], dtype=float)
        def _sd(a):
            return float(np.std(a, ddof=1)) if a.size > 1 else 0.0
        out[m] = {
            "ibs_mean": float(ibs.mean()),
            "ibs_sd": _sd(ibs),
            "c_index_mean": float(conc.mean()),
            "c_index_sd": _sd(conc),
            "size_mean": float(size.mean()),
            "size_sd": _sd(size),
        }
    return out


def run_experiment(config: ExperimentConfig, ds: SurvivalDataset | None = None) -> RunReport:
    """Execute ``config.runs`` independent split/grow/select/evaluate runs.

    ``ds`` may be passed directly; otherwise it is loaded from the paths
    in the config. Runs that draw a degenerate split (a part without
    events, or an undefined metric) are re-drawn with the next derived
    seed, up to 100 attempts, then abort with diagnostics.
    """
    if ds is None:
        if config.dataset_path is None or config.dataset_config_path is None:
            raise ConfigError("either pass a dataset or set dataset_path and dataset_config_path")
        ds = load_dataset(config.dataset_path, config.dataset_config_path)
    artifacts = [_prepare_run(ds, config, r) for r in range(config.runs)]
    runs = [_evaluate_run(ds, config, art) for art in artifacts]
    return RunReport(config.to_dict(), runs, _aggregate(runs, config.methods))


def sweep(
    config: ExperimentConfig,
    parameter: str,
    values,
    ds: SurvivalDataset | None = None,
) -> list[RunReport]:
    """One experiment per value, sharing the master seeding scheme.

    ``parameter`` is one of ``B``/``n_trees``, ``M_fraction``/``m_fraction``
    or ``p``/``mtry``. Because per-run seeds depend only on the master
    seed, every report differs solely through the swept parameter. When
    only the selection pool size varies, the per-run forests are grown
    once and reused, which is exactly equivalent to rerunning them.
    """
    if parameter not in _SWEEP_ALIASES:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    name = _SWEEP_ALIASES[parameter]
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")

    if ds is None:
        if config.dataset_path is None or config.dataset_config_path is None:
            raise ConfigError("either pass a dataset or set dataset_path and dataset_config_path")
        ds = load_dataset(config.dataset_path, config.dataset_config_path)

    if name == "m_fraction":
        artifacts = [_prepare_run(ds, config, r) for r in range(config.runs)]
        reports = []
        for v in values:
            cfg = replace(config, m_fraction=float(v))
            runs = [_evaluate_run(ds, cfg, art) for art in artifacts]
            reports.append(RunReport(cfg.to_dict(), runs, _aggregate(runs, cfg.methods)))
        return reports

    reports = []
    for v in values:
        cfg = replace(config, **{name: int(v) if name == "n_trees" else v})
        reports.append(run_experiment(cfg, ds))
    return reports


@dataclass(frozen=True)
class SimSpec:
    """Synthetic proportional-hazards data specification.

    Event times follow a Weibull with the given shape (1 = exponential)
    and a log-linear effect of the first ``informative`` standard-normal
    features. Independent censoring (exponential or uniform) is tuned by
    root-finding to hit ``censoring_rate`` within about one part in n.
    """

    n: int
    d: int
    informative: int = 1
    effect_size: float = 1.0
    shape: float = 1.0
    baseline_scale: float = 1.0
    censoring_rate: float = 0.0
    censoring_model: str = "exponential"

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be >= 1")
        if not 0 <= self.informative <= self.d:
            raise ConfigError("informative must be in [0, d]")
        if not 0.0 <= self.censoring_rate < 1.0:
            raise ConfigError("censoring_rate must be in [0, 1)")
        if self.shape <= 0 or self.baseline_scale <= 0:
            raise ConfigError("shape and baseline_scale must be positive")
        if self.censoring_model not in ("exponential", "uniform"):
            raise ConfigError("censoring_model must be 'exponential' or 'uniform'")


def simulate_dataset(spec: SimSpec, rng: np.random.Generator | int | None = None) -> SurvivalDataset:
    """Draw a synthetic right-censored dataset per ``spec``.

    Deterministic given the generator state. The censoring scale is found
    by bisection against the fixed censoring draws, so the realized
    censored fraction matches the target up to the granularity of n.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    X = rng.standard_normal((spec.n, spec.d))
    beta = np.zeros(spec.d)
    beta[: spec.informative] = spec.effect_size
    eta = X @ beta
    u = rng.uniform(size=spec.n)
    t_event = spec.baseline_scale * (-np.log(u) / np.exp(eta)) ** (1.0 / spec.shape)

    if spec.censoring_rate == 0.0:
        times, status = t_event, np.ones(spec.n, dtype=bool)
    else:
        v = rng.uniform(size=spec.n)
        if spec.censoring_model == "exponential":
            def censored_fraction(scale_log10):
                c = -np.log(v) / 10.0**scale_log10
                return float(np.mean(c < t_event)) - spec.censoring_rate
        else:
            def censored_fraction(scale_log10):
                c = 10.0**scale_log10 * v
                return spec.censoring_rate - float(np.mean(c < t_event))
        scale_log10 = brentq(censored_fraction, -12.0, 12.0, xtol=1e-10)
        if spec.censoring_model == "exponential":
            t_cens = -np.log(v) / 10.0**scale_log10
        else:
            t_cens = 10.0**scale_log10 * v
        status = t_event <= t_cens
        times = np.minimum(t_event, t_cens)

    schema = FeatureSchema(tuple(Feature(f"x{j + 1}", NUMERIC) for j in range(spec.d)))
    return SurvivalDataset(schema, X, times, status)
