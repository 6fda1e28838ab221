"""The full selection workflow, step by step.

Grow a forest on one part of the training data, rank its trees by
out-of-bag error, greedily keep the top-ranked trees that lower the
validation integrated Brier score, and compare the resulting
sub-ensemble against the full forest on held-out test rows.
"""

import numpy as np

from oste import GrowParams, SimSpec, grow_forest, simulate_dataset, split
from oste.estimators import censoring_km
from oste.forest import ensemble_mortality, ensemble_survival_matrix
from oste.metrics import brier_curve_from_matrix, c_index, default_eval_grid
from oste.selection import predict, rank_trees, select

rng = np.random.default_rng(11)
ds = simulate_dataset(SimSpec(n=400, d=8, informative=3, censoring_rate=0.3), rng)

# 70/30 train/test, then 95/5 within train: the big part grows trees,
# the small part validates selection, the test part stays untouched.
outer = split(ds, 0.70, rng)
inner = split(ds, 0.95, rng, indices=outer.train)
lb, lv, test = inner.train, inner.test, outer.test
print(f"rows: grow {lb.size}, validate {lv.size}, test {test.size}")

forest = grow_forest(ds, lb, GrowParams(n_trees=300, master_seed=42))
print(f"forest: {forest.n_trees} trees, mtry {forest.params.mtry}")

ranking = rank_trees(forest, ds)
print(f"best-ranked tree: index {ranking[0]}")

# Greedy pass over the top 20%: a tree stays only if adding it strictly
# lowers the validation IBS.
selection = select(forest, ranking, 0.20, ds.subset(lv))
print(f"pool {len(selection.m_pool)}, accepted {len(selection.accepted)}")
print("validation IBS trajectory:",
      " -> ".join(f"{v:.4f}" for v in selection.ibs_trajectory[:6]),
      "..." if len(selection.ibs_trajectory) > 6 else "")

# Held-out comparison: sub-ensemble vs the full forest.
test_ds = ds.subset(test)
grid = default_eval_grid(test_ds.times, test_ds.status)
ghat = censoring_km(test_ds.times, test_ds.status)
for name, trees in (
    ("sub-ensemble", [forest.trees[i] for i in selection.accepted]),
    ("full forest ", forest.trees),
):
    surv = ensemble_survival_matrix(trees, test_ds.X, grid)
    ibs = brier_curve_from_matrix(test_ds.times, test_ds.status, surv, grid, ghat).ibs
    scores = ensemble_mortality(trees, test_ds.X, forest.event_grid)
    conc = c_index(scores, test_ds.times, test_ds.status).concordance
    print(f"{name}: {len(trees):3d} trees, test IBS {ibs:.4f}, test C {conc:.3f}")

# Predictions for a new subject come from the accepted trees only.
curve = predict(selection, forest, ds.X[test[0]])
print(f"\nnew-subject survival at t=1.0: {curve(1.0):.3f}")
