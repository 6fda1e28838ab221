"""Evaluation metrics for right-censored predictions.

Concordance index over permissible pairs, the inverse-probability-of-
censoring-weighted Brier score, and its trapezoidal integral over an
event-time grid.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import SurvivalDataset
from .errors import ConcordanceUndefinedError, MetricUndefinedError
from .estimators import StepFunction, censoring_km

__all__ = [
    "ConcordanceResult",
    "BrierCurve",
    "c_index",
    "brier_score",
    "integrated_brier_score",
    "brier_curve_from_matrix",
    "default_eval_grid",
]


@dataclass(frozen=True)
class ConcordanceResult:
    """Concordance over permissible pairs.

    ``concordant`` is the total credit awarded (counting 0.5 credits),
    so ``concordance = concordant / permissible_pairs``.
    """

    concordance: float
    permissible_pairs: int
    concordant: float
    error: float


def c_index(scores, times, status) -> ConcordanceResult:
    """Concordance index of risk scores against observed outcomes.

    Higher scores must mean higher predicted risk (earlier predicted
    failure). All unordered pairs are considered, then two kinds of pair
    are discarded as non-permissible: pairs sharing the same time where
    both are events, and pairs whose earlier time is censored.

    Each permissible pair earns credit:

    * 1.0 - times differ and the shorter-lived subject has the higher
      score; or times are equal with exactly one event and the event
      subject has the higher score; or times and scores are both equal.
    * 0.5 - scores are tied for unequal times; scores differ for equal
      times with no event; or times are equal with one event but the
      censored subject has the higher score.
    * 0.0 - otherwise (the longer-lived subject was scored riskier).

    Raises
    ------
    ConcordanceUndefinedError
        If no permissible pair exists.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(times, dtype=float)
    d = np.asarray(status, dtype=bool)
    if s.ndim != 1 or s.shape != t.shape or s.shape != d.shape:
        raise ValueError("scores, times and status must be 1-d arrays of equal length")
    if s.size < 2:
        raise ValueError("need at least two observations")
    if np.any(~np.isfinite(s)):
        raise ValueError("scores must be finite")

    iu, ju = np.triu_indices(s.size, k=1)
    ti, tj = t[iu], t[ju]
    si, sj = s[iu], s[ju]
    di, dj = d[iu], d[ju]

    eq_t = ti == tj
    i_earlier = ti < tj
    j_earlier = tj < ti
    discard = (eq_t & di & dj) | (i_earlier & ~di) | (j_earlier & ~dj)
    perm = ~discard

    credit = np.zeros(perm.shape)

    uneq = perm & ~eq_t
    s_early = np.where(i_earlier, si, sj)
    s_late = np.where(i_earlier, sj, si)
    credit[uneq & (s_early > s_late)] = 1.0
    credit[uneq & (s_early == s_late)] = 0.5

    one_event = perm & eq_t & (di ^ dj)
    s_event = np.where(di, si, sj)
    s_cens = np.where(di, sj, si)
    credit[one_event & (s_event >= s_cens)] = 1.0
    credit[one_event & (s_event < s_cens)] = 0.5

    both_cens = perm & eq_t & ~di & ~dj
    credit[both_cens & (si == sj)] = 1.0
    credit[both_cens & (si != sj)] = 0.5

    n_perm = int(perm.sum())
    if n_perm == 0:
        raise ConcordanceUndefinedError("no permissible pairs")
    concordant = float(credit[perm].sum())
    conc = concordant / n_perm
    return ConcordanceResult(conc, n_perm, concordant, 1.0 - conc)


@dataclass(frozen=True)
class BrierCurve:
    """Brier scores over a grid with their normalized trapezoidal integral.

    ``grid`` holds only the evaluable time points; points where the
    censoring estimate made the score undefined are listed in ``skipped``.
    ``t_star`` is the upper integration limit (the end of the requested
    grid) and the integral is normalized by ``t_star - grid[0]``.
    """

    grid: np.ndarray
    scores: np.ndarray
    ibs: float
    t_star: float
    skipped: tuple[float, ...] = ()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        scores = np.asarray(self.scores, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "scores", scores)

    def to_csv(self) -> str:
        """``time,brier_score`` rows for external plotting."""
        buf = io.StringIO()
        buf.write("time,brier_score\n")
        for t, b in zip(self.grid, self.scores):
            buf.write(f"{float(t)!r},{float(b)!r}\n")
        return buf.getvalue()

    def summary_record(self) -> str:
        """One-line CSV record: ibs, t_star, number of skipped grid points."""
        return f"{self.ibs!r},{self.t_star!r},{len(self.skipped)}"


def default_eval_grid(times, status) -> np.ndarray:
    """Distinct event times in (0, t_star], t_star being the last event time.

    The Brier score is a step function between event times, so this grid
    captures every change point.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(status, dtype=bool)
    event_times = np.unique(t[s])
    event_times = event_times[event_times > 0]
    if event_times.size == 0:
        raise MetricUndefinedError("evaluation sample has no positive event time")
    return event_times


def _ipcw_table(times, status, grid, ghat):
    """Weight matrix, effective denominators, and usability per grid point.

    Weights follow the censoring-reweighting convention: rows surviving
    past t0 weigh 1/G(t0); event rows at or before t0 weigh 1/G(T-);
    rows censored at or before t0 weigh 0 but stay in the denominator.
    Rows whose weight would divide by G = 0 are dropped from the
    denominator; a grid point with survivors past t0 but G(t0) = 0 is
    unusable outright.
    """
    n = times.size
    g_t0 = np.asarray(ghat(grid), dtype=float)
    g_left = np.asarray(ghat.left_limit(times), dtype=float)

    after = times[:, None] > grid[None, :]
    event_by = ~after & status[:, None]

    weights = np.zeros((n, grid.size))
    with np.errstate(divide="ignore"):
        w_after = np.where(g_t0 > 0, 1.0 / np.where(g_t0 > 0, g_t0, 1.0), 0.0)
        w_event = np.where(g_left > 0, 1.0 / np.where(g_left > 0, g_left, 1.0), 0.0)
    weights += after * w_after[None, :]
    weights += event_by * w_event[:, None]

    excluded = event_by & (g_left == 0)[:, None]
    n_eff = n - excluded.sum(axis=0)
    unusable = ((g_t0 == 0) & after.any(axis=0)) | (n_eff == 0)
    return weights, n_eff.astype(float), ~unusable


def _surv_matrix(predict, X, grid):
    rows = [np.asarray(predict(X[i])(grid), dtype=float) for i in range(X.shape[0])]
    return np.vstack(rows) if rows else np.empty((0, grid.size))


def brier_score(predict, eval_rows: SurvivalDataset, t0: float, ghat: StepFunction | None = None) -> float:
    """Censoring-weighted Brier score at a single time point.

    BS(t0) = (1/n) * sum_i w_i * (I(T_i > t0) - S(t0 | x_i))^2 with the
    weights of :func:`_ipcw_table`. With no censoring every weight is 1
    and this reduces to the plain mean squared residual.

    Parameters
    ----------
    predict : callable
        Maps a feature row to a survival :class:`StepFunction`.
    eval_rows : SurvivalDataset
        Evaluation sample; also the default sample for ``ghat``.
    t0 : float
        Evaluation time within the observed time range.
    ghat : StepFunction, optional
        Censoring survival estimate; computed from ``eval_rows`` when
        omitted.

    Raises
    ------
    MetricUndefinedError
        When the censoring estimate vanishes at ``t0`` while rows survive
        past it, leaving the score undefined.
    """
    times, status = eval_rows.times, eval_rows.status
    if not 0.0 <= t0 <= times.max():
        raise ValueError("t0 must lie within the observed time range")
    if ghat is None:
        ghat = censoring_km(times, status)
    grid = np.asarray([t0], dtype=float)
    weights, n_eff, usable = _ipcw_table(times, status, grid, ghat)
    if not usable[0]:
        raise MetricUndefinedError(f"Brier score undefined at t0={t0!r} (censoring estimate is 0)")
    surv = _surv_matrix(predict, eval_rows.X, grid)
    resid = (times[:, None] > grid[None, :]).astype(float) - surv
    return float((weights[:, 0] * resid[:, 0] ** 2).sum() / n_eff[0])


def brier_curve_from_matrix(
    times,
    status,
    surv_matrix,
    grid,
    ghat: StepFunction,
    t_star: float | None = None,
    warn_on_skip: bool = True,
) -> BrierCurve:
    """Brier curve from precomputed survival probabilities.

    ``surv_matrix[i, j]`` must hold the predicted survival of row ``i`` at
    ``grid[j]``. This is the fast path used by ensemble evaluation and
    selection; :func:`integrated_brier_score` is the per-row wrapper and
    the two agree exactly.

    Grid points where the score is undefined are skipped (with a warning)
    and excluded from the integral; if every point is skipped,
    :class:`MetricUndefinedError` is raised. The integral is the
    trapezoidal rule over the retained points, normalized by
    ``t_star - grid[0]``; a single retained point yields its own score.
    """
    times = np.asarray(times, dtype=float)
    status = np.asarray(status, dtype=bool)
    grid = np.asarray(grid, dtype=float)
    surv = np.asarray(surv_matrix, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be nonempty and strictly increasing")
    if grid[0] <= 0:
        raise ValueError("grid must start after time 0")
    if surv.shape != (times.size, grid.size):
        raise ValueError("surv_matrix must be (n_rows, n_grid)")
    if t_star is None:
        t_star = float(grid[-1])

    weights, n_eff, usable = _ipcw_table(times, status, grid, ghat)
    if not usable.any():
        raise MetricUndefinedError("Brier score undefined at every grid point")
    skipped = tuple(float(t) for t in grid[~usable])
    if skipped and warn_on_skip:
        warnings.warn(
            f"skipped {len(skipped)} grid point(s) where the censoring estimate vanished",
            stacklevel=2,
        )

    indicator = (times[:, None] > grid[None, :]).astype(float)
    scores_all = (weights * (indicator - surv) ** 2).sum(axis=0) / n_eff
    kept_grid = grid[usable]
    kept_scores = scores_all[usable]
    if kept_grid.size == 1:
        ibs = float(kept_scores[0])
    else:
        ibs = float(np.trapezoid(kept_scores, kept_grid) / (t_star - kept_grid[0]))
    return BrierCurve(kept_grid, kept_scores, ibs, float(t_star), skipped)


def integrated_brier_score(
    predict,
    eval_rows: SurvivalDataset,
    grid=None,
    ghat: StepFunction | None = None,
) -> BrierCurve:
    """Integrated Brier score of a survival predictor on an evaluation sample.

    By default the grid is every distinct event time of the evaluation
    sample in (0, t_star] with t_star the largest event time, and the
    censoring estimate is computed on the evaluation sample itself. A
    custom grid must be strictly increasing within (0, max observed
    time]; its last point becomes the upper integration limit.
    """
    times, status = eval_rows.times, eval_rows.status
    if ghat is None:
        ghat = censoring_km(times, status)
    if grid is None:
        grid = default_eval_grid(times, status)
    else:
        grid = np.asarray(grid, dtype=float)
        if grid.size and grid[-1] > times.max():
            raise ValueError("grid extends past the observed time range")
    surv = _surv_matrix(predict, eval_rows.X, grid)
    return brier_curve_from_matrix(times, status, surv, grid, ghat)
