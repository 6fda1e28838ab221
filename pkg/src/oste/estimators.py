"""Nonparametric estimators for right-censored survival data.

Kaplan-Meier survival curves, Nelson-Aalen cumulative hazards, and the
reversed-status Kaplan-Meier estimate of the censoring distribution used
for inverse-probability-of-censoring weighting. All estimators return
right-continuous :class:`StepFunction` objects.

Tie convention: subjects censored at the same instant as an event remain
in the risk set for that event (the standard product-limit convention).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "StepFunction",
    "kaplan_meier",
    "nelson_aalen",
    "censoring_km",
    "is_survival_curve",
    "is_cumulative_hazard",
]


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on [0, infinity).

    The function equals ``initial_value`` on ``[0, knots[0])`` and
    ``values[j]`` on ``[knots[j], knots[j+1])``. Knots must be strictly
    increasing and nonnegative. With no knots the function is constant.

    Survival curves use ``initial_value=1`` with non-increasing values in
    [0, 1]; cumulative hazards use ``initial_value=0`` with non-decreasing
    nonnegative values.
    """

    knots: np.ndarray
    values: np.ndarray
    initial_value: float = 1.0

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or values.shape != knots.shape:
            raise ValueError("knots and values must be 1-d arrays of equal length")
        if knots.size:
            if knots[0] < 0:
                raise ValueError("knots must be nonnegative")
            if np.any(np.diff(knots) <= 0):
                raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial_value", float(self.initial_value))

    def __call__(self, t):
        """Evaluate at ``t`` (scalar or array), right-continuously."""
        t_arr = np.asarray(t, dtype=float)
        if self.knots.size == 0:
            out = np.full(t_arr.shape, self.initial_value)
        else:
            idx = np.searchsorted(self.knots, t_arr, side="right") - 1
            out = np.where(idx < 0, self.initial_value, self.values[np.clip(idx, 0, None)])
        return float(out) if t_arr.ndim == 0 else out

    def left_limit(self, t):
        """Value just before ``t``: the step value at the largest knot < t."""
        t_arr = np.asarray(t, dtype=float)
        if self.knots.size == 0:
            out = np.full(t_arr.shape, self.initial_value)
        else:
            idx = np.searchsorted(self.knots, t_arr, side="left") - 1
            out = np.where(idx < 0, self.initial_value, self.values[np.clip(idx, 0, None)])
        return float(out) if t_arr.ndim == 0 else out

    def to_csv(self) -> str:
        """Serialize as ``time,value`` rows for external plotting.

        A leading row at time 0 carries the initial value unless the first
        knot already sits at 0.
        """
        buf = io.StringIO()
        buf.write("time,value\n")
        if self.knots.size == 0 or self.knots[0] > 0:
            buf.write(f"{0.0!r},{self.initial_value!r}\n")
        for k, v in zip(self.knots, self.values):
            buf.write(f"{float(k)!r},{float(v)!r}\n")
        return buf.getvalue()


def is_survival_curve(f: StepFunction, tol: float = 0.0) -> bool:
    """True when ``f`` starts at 1 and decreases through [0, 1]."""
    if f.initial_value != 1.0:
        return False
    v = f.values
    if v.size == 0:
        return True
    if np.any(v < -tol) or np.any(v > 1.0 + tol):
        return False
    return bool(np.all(np.diff(np.concatenate(([1.0], v))) <= tol))


def is_cumulative_hazard(f: StepFunction, tol: float = 0.0) -> bool:
    """True when ``f`` starts at 0 and is non-decreasing and nonnegative."""
    if f.initial_value != 0.0:
        return False
    v = f.values
    if v.size == 0:
        return True
    if np.any(v < -tol):
        return False
    return bool(np.all(np.diff(np.concatenate(([0.0], v))) >= -tol))


def _risk_table(times, status):
    """Distinct observed times with event counts and at-risk counts.

    At-risk counts are taken just before each distinct time, so subjects
    censored at an event time are still counted at risk for it.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(status, dtype=bool)
    if t.ndim != 1 or t.shape != s.shape:
        raise ValueError("times and status must be 1-d arrays of equal length")
    if t.size == 0:
        raise ValueError("at least one observation is required")
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise ValueError("times must be finite and nonnegative")
    order = np.argsort(t, kind="stable")
    ts = t[order]
    ss = s[order].astype(np.int64)
    first = np.empty(ts.size, dtype=bool)
    first[0] = True
    np.greater(ts[1:], ts[:-1], out=first[1:])
    starts = np.flatnonzero(first)
    events = np.add.reduceat(ss, starts)
    # rows before the first occurrence of a time are exactly the dropouts
    at_risk = t.size - starts
    return ts[starts], events, at_risk


def kaplan_meier(times, status) -> StepFunction:
    """Product-limit estimate of the survival function.

    S(t) = prod over distinct event times t_j <= t of (1 - d_j / n_j),
    where d_j counts events at t_j and n_j counts subjects at risk just
    before t_j.

    Parameters
    ----------
    times : array-like of float
        Observed times, nonnegative.
    status : array-like of bool
        True where the event was observed, False for right-censored rows.

    Returns
    -------
    StepFunction
        Survival curve with knots at the distinct event times.
    """
    uniq, d, n = _risk_table(times, status)
    has_event = d > 0
    surv = np.cumprod(1.0 - d[has_event] / n[has_event])
    return StepFunction(uniq[has_event], surv, initial_value=1.0)


def nelson_aalen(times, status) -> StepFunction:
    """Nelson-Aalen estimate of the cumulative hazard.

    H(t) = sum over distinct event times t_j <= t of d_j / n_j, with the
    same risk-set convention as :func:`kaplan_meier`.
    """
    uniq, d, n = _risk_table(times, status)
    has_event = d > 0
    hazard = np.cumsum(d[has_event] / n[has_event])
    return StepFunction(uniq[has_event], hazard, initial_value=0.0)


def censoring_km(times, status) -> StepFunction:
    """Kaplan-Meier estimate G of the censoring distribution.

    Identical to :func:`kaplan_meier` with the status indicator inverted,
    so censorings play the role of events. Used as the
    inverse-probability-of-censoring weight denominator.

    Where G reaches 0, weights of the form 1/G are defined to be 0 and the
    affected rows are excluded from weighted means (see the metrics
    module); this avoids infinities at the cost of dropping information
    past the last censoring time.
    """
    s = np.asarray(status, dtype=bool)
    return kaplan_meier(times, ~s)
