"""Nonparametric survival estimation on right-censored data.

Walks through the three estimators: the Kaplan-Meier survival curve, the
Nelson-Aalen cumulative hazard, and the censoring-distribution estimate
used for inverse-probability-of-censoring weights.
"""

import numpy as np

from oste import SimSpec, censoring_km, kaplan_meier, nelson_aalen, simulate_dataset

rng = np.random.default_rng(7)
ds = simulate_dataset(SimSpec(n=200, d=1, censoring_rate=0.35), rng)
print(f"simulated {ds.n} subjects, {ds.n_events} events, "
      f"{ds.n - ds.n_events} right-censored")

# The survival curve drops only at event times; censored subjects leave
# the risk set without a drop.
surv = kaplan_meier(ds.times, ds.status)
print(f"\nKaplan-Meier: {surv.knots.size} distinct event times")
for q in (0.25, 0.5, 1.0, 2.0):
    print(f"  S({q:>4}) = {surv(q):.4f}")

# The cumulative hazard is the running sum of d_j / n_j; for small
# hazards exp(-H) approximates the survival curve.
hazard = nelson_aalen(ds.times, ds.status)
print(f"\nNelson-Aalen: H(1.0) = {hazard(1.0):.4f}, "
      f"exp(-H(1.0)) = {np.exp(-hazard(1.0)):.4f} vs S(1.0) = {surv(1.0):.4f}")

# Swapping the roles of events and censorings estimates the probability
# of still being uncensored; its left limit weighs event residuals in
# the Brier score.
ghat = censoring_km(ds.times, ds.status)
t = float(np.median(ds.times))
print(f"\ncensoring survival G({t:.3f}) = {ghat(t):.4f}, "
      f"IPCW weight 1/G = {1.0 / ghat(t):.3f}")

# Step functions serialize to (time, value) CSV for external plotting.
print("\nfirst CSV lines of the survival curve:")
print("\n".join(surv.to_csv().splitlines()[:5]))
