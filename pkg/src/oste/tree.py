"""Survival trees grown with log-rank split selection.

Each tree is grown on an in-bag multiset of rows. At every node a random
subset of features is drawn; candidate splits are scored with the
standardized two-sample log-rank statistic and the best admissible split
wins. Leaves carry the Kaplan-Meier curve of their members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import CATEGORICAL, SurvivalDataset
from .errors import GrowthError
from .estimators import StepFunction, kaplan_meier

__all__ = [
    "SplitRule",
    "LeafNode",
    "InternalNode",
    "SurvivalTree",
    "logrank_statistic",
    "grow_tree",
    "mortality_from_curve",
    "tree_to_json",
    "tree_from_json",
]

MORTALITY_CLAMP = 1e-12


def logrank_statistic(times_a, status_a, times_b, status_b) -> float:
    """Standardized two-sample log-rank statistic.

    Over the pooled distinct event times t_j, with d_j pooled events,
    n_j pooled at-risk and n_aj group-a at-risk counts:

        O_a = sum d_aj
        E_a = sum d_j * n_aj / n_j
        V   = sum d_j * (n_aj/n_j) * (1 - n_aj/n_j) * (n_j - d_j) / (n_j - 1)

    and the statistic is (O_a - E_a)^2 / V. Symmetric in the two groups.
    Returns 0 when the pooled sample has no events or V = 0 (the split is
    uninformative, not an error).
    """
    ta = np.asarray(times_a, dtype=float)
    sa = np.asarray(status_a, dtype=bool)
    tb = np.asarray(times_b, dtype=float)
    sb = np.asarray(status_b, dtype=bool)
    if ta.size == 0 or tb.size == 0:
        raise ValueError("both groups must be nonempty")

    t = np.concatenate((ta, tb))
    s = np.concatenate((sa, sb))
    event_times = np.unique(t[s])
    if event_times.size == 0:
        return 0.0

    ta_sorted = np.sort(ta)
    t_sorted = np.sort(t)
    n_a = ta.size - np.searchsorted(ta_sorted, event_times, side="left")
    n_tot = t.size - np.searchsorted(t_sorted, event_times, side="left")

    ea_sorted = np.sort(ta[sa])
    e_sorted = np.sort(t[s])
    d_a = np.searchsorted(ea_sorted, event_times, side="right") - np.searchsorted(
        ea_sorted, event_times, side="left"
    )
    d = np.searchsorted(e_sorted, event_times, side="right") - np.searchsorted(
        e_sorted, event_times, side="left"
    )

    frac_a = n_a / n_tot
    denom = np.where(n_tot > 1, n_tot - 1.0, 1.0)
    var_terms = d * frac_a * (1.0 - frac_a) * (n_tot - d) / denom
    variance = float(var_terms.sum())
    if variance <= 0.0:
        return 0.0
    observed = float(d_a.sum())
    expected = float((d * frac_a).sum())
    return (observed - expected) ** 2 / variance


@dataclass(frozen=True)
class SplitRule:
    """Routing rule of an internal node.

    Numeric and integer features use ``threshold`` (value <= threshold
    goes left; the threshold lies strictly between two observed values).
    Categorical features use ``left_levels``, a nonempty proper subset of
    the level codes observed at the node.
    """

    feature: int
    threshold: float | None = None
    left_levels: frozenset[int] | None = None

    def __post_init__(self):
        if (self.threshold is None) == (self.left_levels is None):
            raise ValueError("exactly one of threshold / left_levels must be set")
        if self.left_levels is not None:
            object.__setattr__(self, "left_levels", frozenset(int(v) for v in self.left_levels))

    @property
    def is_categorical(self) -> bool:
        return self.left_levels is not None


@dataclass
class LeafNode:
    curve: StepFunction
    n_members: int


@dataclass
class InternalNode:
    rule: SplitRule
    left: "LeafNode | InternalNode"
    right: "LeafNode | InternalNode"
    n_members: int
    # Routing fallback for level codes never seen at this node during growth:
    # send them with the in-bag majority (ties go left).
    fallback_left: bool = True
    seen_levels: frozenset[int] | None = None


def _route_left_mask(node: InternalNode, col: np.ndarray) -> np.ndarray:
    rule = node.rule
    if rule.threshold is not None:
        return col <= rule.threshold
    codes = col.astype(np.int64)
    left = np.isin(codes, sorted(rule.left_levels))
    seen = np.isin(codes, sorted(node.seen_levels))
    return np.where(seen, left, node.fallback_left)


@dataclass
class SurvivalTree:
    """A grown survival tree with its bootstrap bookkeeping.

    ``in_bag`` is the multiset of training row indices the tree was grown
    on (repeats kept); ``oob`` the sorted set of rows left out of the
    bootstrap, usable as a private test set.
    """

    root: LeafNode | InternalNode
    in_bag: np.ndarray
    oob: np.ndarray
    p: int
    min_node_size: int
    seed: int | None = None

    def predict_curve(self, x) -> StepFunction:
        """Route one feature row to its leaf and return the leaf curve."""
        x = np.asarray(x, dtype=float)
        node = self.root
        while isinstance(node, InternalNode):
            go_left = bool(_route_left_mask(node, x[node.rule.feature : node.rule.feature + 1])[0])
            node = node.left if go_left else node.right
        return node.curve

    def predict_mortality(self, x, grid) -> float:
        """Aggregate predicted risk: cumulative hazard summed over ``grid``."""
        return float(mortality_from_curve(self.predict_curve(x), grid))

    def assign_leaves(self, X: np.ndarray) -> np.ndarray:
        """Leaf object per row of ``X`` (vectorized routing)."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=object)

        def _descend(node, idx):
            if isinstance(node, LeafNode):
                out[idx] = node
                return
            mask = _route_left_mask(node, X[idx, node.rule.feature])
            _descend(node.left, idx[mask])
            _descend(node.right, idx[~mask])

        _descend(self.root, np.arange(X.shape[0]))
        return out

    def leaves(self) -> list[LeafNode]:
        found = []

        def _walk(node):
            if isinstance(node, LeafNode):
                found.append(node)
            else:
                _walk(node.left)
                _walk(node.right)

        _walk(self.root)
        return found


def mortality_from_curve(curve: StepFunction, grid) -> float:
    """Sum of -log survival over the grid, clamped below at 1e-12.

    This is the cumulative-hazard-style scalar risk score used for
    concordance ranking: larger means higher predicted risk.
    """
    s = np.clip(np.asarray(curve(np.asarray(grid, dtype=float))), MORTALITY_CLAMP, None)
    return float(-np.log(s).sum())


class _NodeBuilder:
    def __init__(self, ds: SurvivalDataset, p: int, min_node_size: int, rng: np.random.Generator):
        self.ds = ds
        self.p = p
        self.min_node_size = min_node_size
        self.rng = rng
        self.kinds = [f.kind for f in ds.schema.features]

    def build(self, rows: np.ndarray):
        times = self.ds.times[rows]
        status = self.ds.status[rows]
        if rows.size < 2 * self.min_node_size or not status.any():
            return self._leaf(rows, times, status)
        found = self._best_split(rows, times, status)
        if found is None:
            return self._leaf(rows, times, status)
        rule = found
        mask = (
            self.ds.X[rows, rule.feature] <= rule.threshold
            if rule.threshold is not None
            else np.isin(self.ds.X[rows, rule.feature].astype(np.int64), sorted(rule.left_levels))
        )
        left_rows = rows[mask]
        right_rows = rows[~mask]
        seen = (
            frozenset(np.unique(self.ds.X[rows, rule.feature]).astype(np.int64).tolist())
            if rule.is_categorical
            else None
        )
        return InternalNode(
            rule=rule,
            left=self.build(left_rows),
            right=self.build(right_rows),
            n_members=int(rows.size),
            fallback_left=left_rows.size >= right_rows.size,
            seen_levels=seen,
        )

    def _leaf(self, rows, times, status):
        return LeafNode(kaplan_meier(times, status), int(rows.size))

    def _best_split(self, rows, times, status):
        d = self.ds.d
        if self.p >= d:
            feats = np.arange(d)
        else:
            feats = np.sort(self.rng.choice(d, size=self.p, replace=False))

        # Pooled event-time table, shared by every candidate at this node.
        u = np.unique(times[status])
        risk = (times[:, None] >= u[None, :]).astype(float)
        n_tot = risk.sum(axis=0)
        ev_sorted = np.sort(times[status])
        d_tot = (
            np.searchsorted(ev_sorted, u, side="right") - np.searchsorted(ev_sorted, u, side="left")
        ).astype(float)
        dn = d_tot / n_tot
        denom = np.where(n_tot > 1, n_tot - 1.0, 1.0)
        # V = sum_j coeff_j * n_aj * (n_j - n_aj)
        coeff = d_tot * (n_tot - d_tot) / (denom * n_tot**2)
        ev_flag = status.astype(float)
        tables = (risk, n_tot, dn, coeff, ev_flag)

        numeric = [f for f in feats if self.kinds[f] != CATEGORICAL]
        candidates: dict[int, tuple[float, SplitRule]] = {}

        if numeric:
            found = self._best_numeric(rows, numeric, tables)
            if found is not None:
                f = found[1].feature
                candidates[f] = found
        for f in feats:
            if self.kinds[f] == CATEGORICAL:
                found = self._best_categorical(f, self.ds.X[rows, f], times, tables)
                if found is not None:
                    candidates[f] = found

        best_stat = 0.0
        best_rule = None
        for f in feats:  # ascending, so strict > breaks ties toward lower index
            if f in candidates and candidates[f][0] > best_stat:
                best_stat, best_rule = candidates[f]
        return best_rule

    @staticmethod
    def _stats(n_a, observed, valid, tables):
        """Log-rank statistics per candidate, -1 where not admissible."""
        _, n_tot, dn, coeff, _ = tables
        expected = n_a @ dn
        variance = (n_a * (n_tot - n_a)) @ coeff
        safe = np.where(variance > 0, variance, 1.0)
        return np.where(valid & (variance > 0), (observed - expected) ** 2 / safe, -1.0)

    def _best_numeric(self, rows, numeric, tables):
        """Best threshold split over all drawn numeric features at once.

        Sorting, risk-set prefixes and the statistic are batched into a
        (features x boundaries) array so per-node overhead stays flat in
        the feature-draw size; the flattened argmax respects the
        (feature index, threshold) tie-break order.
        """
        risk, _, _, _, ev_flag = tables
        n = rows.size
        cols = self.ds.X[rows][:, numeric]
        orders = np.argsort(cols, axis=0, kind="stable")
        sorted_cols = np.take_along_axis(cols, orders, axis=0)
        sizes = np.arange(1, n)
        size_ok = (sizes >= self.min_node_size) & (n - sizes >= self.min_node_size)
        valid = (np.diff(sorted_cols, axis=0) > 0).T & size_ok
        if not valid.any():
            return None
        prefix_risk = np.cumsum(risk[orders.T], axis=1)[:, :-1, :]
        prefix_obs = np.cumsum(ev_flag[orders.T], axis=1)[:, :-1]
        stats = self._stats(prefix_risk, prefix_obs, valid, tables)
        flat = int(np.argmax(stats))
        best = float(stats.ravel()[flat])
        if best <= 0.0:
            return None
        fi, b = divmod(flat, n - 1)
        threshold = float((sorted_cols[b, fi] + sorted_cols[b + 1, fi]) / 2.0)
        return best, SplitRule(int(numeric[fi]), threshold=threshold)

    def _best_categorical(self, f, col, times, tables):
        risk, _, _, _, ev_flag = tables
        codes = col.astype(np.int64)
        levels = np.unique(codes)
        L = levels.size
        if L < 2:
            return None
        onehot = (codes[:, None] == levels[None, :]).astype(float)
        level_risk = onehot.T @ risk
        level_obs = onehot.T @ ev_flag
        counts = onehot.sum(axis=0)
        if L <= 8:
            # All nonempty proper subsets, enumerated by ascending bitmask
            # over the sorted level codes. The largest observed level stays
            # on the right, so each two-way partition is scored exactly once
            # (a subset and its complement are the same split).
            bitmasks = np.arange(1, 2 ** (L - 1))
            subset = ((bitmasks[:, None] >> np.arange(L)[None, :]) & 1).astype(float)
        else:
            # Too many levels for exhaustive search: order levels by mean
            # observed time and split that ordering like a numeric feature.
            mean_time = (onehot.T @ times) / counts
            order = np.lexsort((levels, mean_time))
            subset = np.zeros((L - 1, L))
            for q in range(L - 1):
                subset[q, order[: q + 1]] = 1.0
        sizes = subset @ counts
        admissible = np.minimum(sizes, col.size - sizes) >= self.min_node_size
        if not admissible.any():
            return None
        n_a = subset @ level_risk
        observed = subset @ level_obs
        stats = self._stats(n_a, observed, admissible, tables)
        k = int(np.argmax(stats))  # first max: lowest subset bitmask wins ties
        if stats[k] <= 0.0:
            return None
        left = frozenset(levels[subset[k].astype(bool)].tolist())
        return float(stats[k]), SplitRule(int(f), left_levels=left)


def grow_tree(
    ds: SurvivalDataset,
    in_bag,
    p: int,
    min_node_size: int = 3,
    rng: np.random.Generator | int | None = None,
    oob=None,
    seed: int | None = None,
) -> SurvivalTree:
    """Grow one survival tree on an in-bag multiset of rows.

    At each node ``p`` features are drawn without replacement (all of
    them when ``p == d``, consuming no randomness, which makes the search
    exhaustive). Candidate splits are every midpoint between consecutive
    distinct values for numeric/integer features and level subsets for
    categoricals; the log-rank-maximizing admissible split wins, with
    ties broken toward the lower feature index and lower threshold.
    A node becomes a leaf when it has fewer than ``2 * min_node_size``
    members, no events, or no admissible split with a positive score.

    Parameters
    ----------
    ds : SurvivalDataset
    in_bag : array of row indices, repeats allowed
        Multiset the tree is grown on; repeats count in risk sets.
    p : int
        Features drawn per node, 1 <= p <= d.
    min_node_size : int
        Minimum in-bag members per leaf.
    rng : Generator or seed
        Source of feature-draw randomness.
    oob : array of row indices, optional
        Out-of-bag rows recorded on the tree for later scoring.
    seed : int, optional
        Identifier recorded on the tree (no effect on growth).

    Raises
    ------
    GrowthError
        If the in-bag sample contains no events.
    """
    in_bag = np.asarray(in_bag, dtype=np.int64)
    if in_bag.size == 0 or not ds.status[in_bag].any():
        raise GrowthError("in-bag sample contains no events")
    if not 1 <= p <= ds.d:
        raise ValueError(f"p must be in [1, {ds.d}], got {p}")
    if min_node_size < 1:
        raise ValueError("min_node_size must be >= 1")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    builder = _NodeBuilder(ds, p, min_node_size, rng)
    root = builder.build(in_bag)
    oob_arr = np.asarray([] if oob is None else oob, dtype=np.int64)
    return SurvivalTree(root, in_bag, oob_arr, int(p), int(min_node_size), seed)


def _node_to_dict(node) -> dict:
    if isinstance(node, LeafNode):
        return {
            "kind": "leaf",
            "n_members": node.n_members,
            "curve": {
                "knots": node.curve.knots.tolist(),
                "values": node.curve.values.tolist(),
                "initial_value": node.curve.initial_value,
            },
        }
    rule = node.rule
    return {
        "kind": "split",
        "feature": rule.feature,
        "threshold": rule.threshold,
        "left_levels": sorted(rule.left_levels) if rule.left_levels is not None else None,
        "seen_levels": sorted(node.seen_levels) if node.seen_levels is not None else None,
        "fallback_left": node.fallback_left,
        "n_members": node.n_members,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(data) -> LeafNode | InternalNode:
    if data["kind"] == "leaf":
        c = data["curve"]
        return LeafNode(
            StepFunction(np.asarray(c["knots"]), np.asarray(c["values"]), c["initial_value"]),
            int(data["n_members"]),
        )
    rule = SplitRule(
        int(data["feature"]),
        threshold=data["threshold"],
        left_levels=frozenset(data["left_levels"]) if data["left_levels"] is not None else None,
    )
    return InternalNode(
        rule=rule,
        left=_node_from_dict(data["left"]),
        right=_node_from_dict(data["right"]),
        n_members=int(data["n_members"]),
        fallback_left=bool(data["fallback_left"]),
        seen_levels=frozenset(data["seen_levels"]) if data["seen_levels"] is not None else None,
    )


def tree_to_json(tree: SurvivalTree) -> str:
    """Serialize a tree (structure, rules, leaf curves, index sets) to JSON."""
    payload = {
        "p": tree.p,
        "min_node_size": tree.min_node_size,
        "seed": tree.seed,
        "in_bag": tree.in_bag.tolist(),
        "oob": tree.oob.tolist(),
        "root": _node_to_dict(tree.root),
    }
    return json.dumps(payload, sort_keys=True)


def tree_from_json(text: str) -> SurvivalTree:
    data = json.loads(text)
    return SurvivalTree(
        root=_node_from_dict(data["root"]),
        in_bag=np.asarray(data["in_bag"], dtype=np.int64),
        oob=np.asarray(data["oob"], dtype=np.int64),
        p=int(data["p"]),
        min_node_size=int(data["min_node_size"]),
        seed=data["seed"],
    )
