"""Bootstrapped ensembles of survival trees.

Growing ``n_trees`` trees with ``mtry < d`` features per node gives a
random survival forest; ``mtry = d`` gives bagging. Both run the same
code path, differing only in the feature-draw size. The module also
scores trees on their out-of-bag rows (1 - concordance) and computes
permutation variable importance from those scores.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .dataset import FeatureSchema, SurvivalDataset, bootstrap
from .errors import ConcordanceUndefinedError, GrowthError
from .estimators import StepFunction
from .metrics import c_index
from .seeding import IMPORTANCE_STREAM, TREE_STREAM, derive_rng
from .tree import SurvivalTree, grow_tree, mortality_from_curve, tree_from_json, tree_to_json

__all__ = [
    "GrowParams",
    "SurvivalForest",
    "ImportanceReport",
    "grow_forest",
    "ensemble_curve",
    "tree_survival_matrix",
    "ensemble_survival_matrix",
    "ensemble_mortality",
    "oob_error",
    "permutation_importance",
    "save_forest",
    "load_forest",
]


@dataclass(frozen=True)
class GrowParams:
    """Forest growth hyper-parameters.

    ``mtry=None`` resolves to round(sqrt(d)), the usual forest default;
    setting ``mtry=d`` disables feature subsampling (bagging).
    """

    n_trees: int
    mtry: int | None = None
    min_node_size: int = 3
    master_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")

    def resolved_mtry(self, d: int) -> int:
        if self.mtry is None:
            return max(1, int(round(math.sqrt(d))))
        return int(self.mtry)


@dataclass
class SurvivalForest:
    """Trees sharing one schema and growth configuration.

    ``event_grid`` is the sorted distinct event times of the growing
    sample; mortality risk scores are accumulated over it.
    """

    trees: list[SurvivalTree]
    schema: FeatureSchema
    params: GrowParams
    event_grid: np.ndarray

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def grow_forest(
    ds: SurvivalDataset,
    grow_indices=None,
    params: GrowParams | None = None,
    n_jobs: int = 1,
) -> SurvivalForest:
    """Grow ``params.n_trees`` independent bootstrap trees.

    Each tree draws its bootstrap and grows from its own generator seeded
    by ``(master_seed, tree_stream, tree_index)``, so forests are
    reproducible regardless of worker count and tree ``i`` is the same in
    any forest sharing the master seed.

    Raises
    ------
    GrowthError
        If the growing sample has no events, or a bootstrap draw for some
        tree ends up without events (reported with the tree index).
    """
    if params is None:
        raise ValueError("params is required")
    idx = np.arange(ds.n, dtype=np.int64) if grow_indices is None else np.asarray(grow_indices, dtype=np.int64)
    if idx.size == 0 or not ds.status[idx].any():
        raise GrowthError("growing sample contains no events")
    grow_times = ds.times[idx]
    event_grid = np.unique(grow_times[ds.status[idx]])
    mtry = params.resolved_mtry(ds.d)

    def _one(i: int) -> SurvivalTree:
        rng = derive_rng(params.master_seed, TREE_STREAM, i)
        in_bag, oob = bootstrap(idx, rng)
        try:
            return grow_tree(ds, in_bag, mtry, params.min_node_size, rng, oob=oob, seed=i)
        except GrowthError as e:
            raise GrowthError(f"tree {i}: {e}") from e

    if n_jobs == 1:
        trees = [_one(i) for i in range(params.n_trees)]
    else:
        trees = Parallel(n_jobs=n_jobs)(delayed(_one)(i) for i in range(params.n_trees))
    return SurvivalForest(trees, ds.schema, replace(params, mtry=mtry), event_grid)


def ensemble_curve(trees, x) -> StepFunction:
    """Pointwise mean of the trees' survival curves for one feature row.

    Evaluated on the union of the member curves' knots, which is exact
    for step functions (no interpolation).
    """
    trees = list(trees)
    if not trees:
        raise ValueError("need at least one tree")
    curves = [t.predict_curve(x) for t in trees]
    nonempty = [c.knots for c in curves if c.knots.size]
    if not nonempty:
        return StepFunction(np.empty(0), np.empty(0), 1.0)
    knots = np.unique(np.concatenate(nonempty))
    values = np.mean([c(knots) for c in curves], axis=0)
    return StepFunction(knots, values, 1.0)


def tree_survival_matrix(tree: SurvivalTree, X, grid) -> np.ndarray:
    """Per-row leaf survival probabilities on ``grid``, shape (n, len(grid)).

    Rows mapping to the same leaf share one curve evaluation.
    """
    X = np.asarray(X, dtype=float)
    grid = np.asarray(grid, dtype=float)
    leaves = tree.assign_leaves(X)
    out = np.empty((X.shape[0], grid.size))
    cache: dict[int, np.ndarray] = {}
    for i, leaf in enumerate(leaves):
        key = id(leaf)
        vals = cache.get(key)
        if vals is None:
            vals = np.asarray(leaf.curve(grid))
            cache[key] = vals
        out[i] = vals
    return out


def ensemble_survival_matrix(trees, X, grid) -> np.ndarray:
    """Mean of :func:`tree_survival_matrix` over the trees."""
    trees = list(trees)
    if not trees:
        raise ValueError("need at least one tree")
    acc = np.zeros((np.asarray(X).shape[0], np.asarray(grid).size))
    for t in trees:
        acc += tree_survival_matrix(t, X, grid)
    return acc / len(trees)


def ensemble_mortality(trees, X, grid) -> np.ndarray:
    """Risk score per row: -log of the mean survival curve summed over grid."""
    surv = ensemble_survival_matrix(trees, X, grid)
    return -np.log(np.clip(surv, 1e-12, None)).sum(axis=1)


def oob_error(tree: SurvivalTree, ds: SurvivalDataset, grid=None) -> float:
    """1 - concordance of the tree's mortality scores on its out-of-bag rows.

    ``grid`` defaults to the distinct event times of ``ds`` (pass the
    forest's ``event_grid`` to pin the growing-sample grid). Returns NaN
    as an unusable-tree sentinel when the out-of-bag rows admit no
    permissible pair; ranking places such trees last rather than dropping
    them, preserving the tree count for selection bookkeeping.
    """
    oob = tree.oob
    if oob.size < 2:
        return float("nan")
    if grid is None:
        grid = np.unique(ds.times[ds.status])
    surv = tree_survival_matrix(tree, ds.X[oob], grid)
    scores = -np.log(np.clip(surv, 1e-12, None)).sum(axis=1)
    try:
        result = c_index(scores, ds.times[oob], ds.status[oob])
    except ConcordanceUndefinedError:
        return float("nan")
    return result.error


@dataclass(frozen=True)
class ImportanceReport:
    """Mean out-of-bag error increase per feature after permutation."""

    names: tuple[str, ...]
    importances: tuple[float, ...]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.importances))

    def to_csv(self) -> str:
        lines = ["feature,importance"]
        lines += [f"{n},{v!r}" for n, v in zip(self.names, self.importances)]
        return "\n".join(lines) + "\n"


def permutation_importance(
    forest: SurvivalForest,
    ds: SurvivalDataset,
    rng: np.random.Generator | int | None = None,
) -> ImportanceReport:
    """Permutation variable importance from out-of-bag error.

    For every usable tree and every feature, the feature's values are permuted
    among the tree's out-of-bag rows, the rows are dropped down the tree
    again, and the increase of the out-of-bag error over the unpermuted
    baseline is recorded; importances are these increases averaged over
    trees. Larger means more predictive. Deterministic given the seed.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    grid = forest.event_grid
    d = len(forest.schema)
    sums = np.zeros(d)
    used = 0
    for tree in forest.trees:
        baseline = oob_error(tree, ds, grid)
        if math.isnan(baseline):
            continue
        used += 1
        oob = tree.oob
        times, status = ds.times[oob], ds.status[oob]
        X_oob = ds.X[oob]
        for f in range(d):
            perm = rng.permutation(oob.size)
            Xp = X_oob.copy()
            Xp[:, f] = X_oob[perm, f]
            surv = tree_survival_matrix(tree, Xp, grid)
            scores = -np.log(np.clip(surv, 1e-12, None)).sum(axis=1)
            permuted = c_index(scores, times, status).error
            sums[f] += permuted - baseline
    if used == 0:
        raise GrowthError("no tree has a usable out-of-bag sample")
    return ImportanceReport(forest.schema.names, tuple((sums / used).tolist()))


def _schema_hash(schema: FeatureSchema) -> str:
    canon = json.dumps(schema.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def save_forest(forest: SurvivalForest, directory) -> None:
    """Write one JSON file per tree plus a manifest (params, seed, schema hash)."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "n_trees": forest.n_trees,
        "mtry": forest.params.mtry,
        "min_node_size": forest.params.min_node_size,
        "master_seed": forest.params.master_seed,
        "event_grid": forest.event_grid.tolist(),
        "schema": forest.schema.to_dict(),
        "schema_sha256": _schema_hash(forest.schema),
        "tree_files": [f"tree_{i:05d}.json" for i in range(forest.n_trees)],
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for i, tree in enumerate(forest.trees):
        (path / manifest["tree_files"][i]).write_text(tree_to_json(tree))


def load_forest(directory, schema: FeatureSchema) -> SurvivalForest:
    """Load a forest saved by :func:`save_forest`, checking the schema hash."""
    path = Path(directory)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest["schema_sha256"] != _schema_hash(schema):
        raise ValueError("forest was grown under a different feature schema")
    trees = [tree_from_json((path / name).read_text()) for name in manifest["tree_files"]]
    params = GrowParams(
        n_trees=manifest["n_trees"],
        mtry=manifest["mtry"],
        min_node_size=manifest["min_node_size"],
        master_seed=manifest["master_seed"],
    )
    return SurvivalForest(trees, schema, params, np.asarray(manifest["event_grid"], dtype=float))
