"""Per-stratum baseline hazards: Breslow steps, monotone penalized-spline
smoothing, and hazard-ratio summaries.

The cumulative baseline hazard of stratum s jumps at each stratum-s event
by the inverse of the risk set's exponentiated-linear-predictor sum; under
sampled risk sets the jump is rescaled by pool size over sample size so it
estimates the full denominator. Smoothing fits a cubic B-spline with a
second-difference penalty to the step function, constrained to
nondecreasing coefficients so the implied hazard is nonnegative by
construction; the hazard is the analytic spline derivative.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.interpolate
import scipy.optimize

from ._util import fmt12, round12
from .errors import BaselineError
from .fitting import FitResult
from .likelihood import Parameters, event_log_denominators
from .model_data import ModelData
from .strata import StratumLabel

logger = logging.getLogger(__name__)


@dataclass
class StepCumulativeHazard:
    """Breslow step function of one stratum: jump times and increments."""

    stratum: StratumLabel
    times: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.increments = np.asarray(self.increments, dtype=np.float64)
        if len(self.times) != len(self.increments):
            raise BaselineError("times and increments must align")
        if len(self.times) and np.any(np.diff(self.times) <= 0):
            raise BaselineError("jump times must be strictly increasing")
        if np.any(self.increments <= 0):
            raise BaselineError("Breslow increments must be positive")

    @property
    def n_jumps(self) -> int:
        return len(self.times)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments)

    def total(self) -> float:
        return float(self.increments.sum())

    def value_at(self, t) -> np.ndarray:
        """Right-continuous step evaluation (0 before the first jump)."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=np.float64),
                              side="right")
        cum = np.concatenate([[0.0], self.cumulative()])
        return cum[idx]


def breslow(data: ModelData, fit: FitResult | Parameters,
            ) -> dict[StratumLabel, StepCumulativeHazard]:
    """Breslow cumulative baseline hazard per stratum at fitted parameters.

    Strata with no events are omitted from the result (and logged).
    """
    params = fit.params() if isinstance(fit, FitResult) else fit
    logdenos = event_log_denominators(data, params)
    sample_sizes = np.diff(data.indptr)
    rescale = data.pool_sizes / sample_sizes
    increments = np.exp(-logdenos) / rescale

    out: dict[StratumLabel, StepCumulativeHazard] = {}
    for label in StratumLabel:
        mask = data.event_strata == int(label)
        if not mask.any():
            logger.warning("stratum %s has no events; curve omitted", label.tag)
            continue
        out[label] = StepCumulativeHazard(label, data.times[mask],
                                          increments[mask])
    return out


@dataclass
class SplineConfig:
    n_basis: int = 20
    degree: int = 3
    penalty_order: int = 2
    penalty_weight: float | None = None  # None selects by GCV over the grid
    penalty_grid: np.ndarray = field(
        default_factory=lambda: np.logspace(-3, 5, 20))
    grid_size: int = 200
    min_jumps_to_smooth: int = 10


@dataclass
class SmoothHazardCurve:
    """Smoothed cumulative hazard and its derivative on a uniform grid."""

    stratum: StratumLabel
    grid: np.ndarray
    cumhaz: np.ndarray
    hazard: np.ndarray
    n_basis: int
    penalty_weight: float | None
    unsmoothed: bool = False


def _greville(knots: np.ndarray, degree: int, n_basis: int) -> np.ndarray:
    return np.array([knots[j + 1:j + degree + 1].mean()
                     for j in range(n_basis)])


def _difference_penalty(greville: np.ndarray, order: int) -> np.ndarray:
    """Divided-difference penalty rows, normalized to be scale-free.

    Uses divided differences at the Greville abscissae so the null space is
    exactly the coefficient sequences linear in time: under an infinite
    penalty the spline collapses to a straight line (constant hazard) for
    any knot layout. Multiplying by the mean spacing recovers the classic
    ``[1, -2, 1]`` stencil when the knots are uniform.
    """
    xi = greville
    n = len(xi)
    h_bar = (xi[-1] - xi[0]) / max(n - 1, 1)
    if order == 1:
        d = np.zeros((n - 1, n))
        for i in range(n - 1):
            w = h_bar / (xi[i + 1] - xi[i])
            d[i, i] = -w
            d[i, i + 1] = w
        return d
    if order == 2:
        d = np.zeros((n - 2, n))
        for i in range(n - 2):
            h0 = xi[i + 1] - xi[i]
            h1 = xi[i + 2] - xi[i + 1]
            scale = h_bar ** 2
            d[i, i] = scale * 2.0 / (h0 * (h0 + h1))
            d[i, i + 1] = -scale * 2.0 / (h0 * h1)
            d[i, i + 2] = scale * 2.0 / (h1 * (h0 + h1))
        return d
    raise BaselineError(f"unsupported penalty order {order}")


def _knot_vector(x: np.ndarray, n_basis: int, degree: int) -> tuple[np.ndarray, int]:
    """Clamped knot vector with interior knots at jump-time quantiles.

    Duplicate quantiles (heavily tied designs) are merged, shrinking the
    basis; the effective size is returned alongside.
    """
    n_interior = n_basis - degree - 1
    if n_interior > 0:
        probs = np.arange(1, n_interior + 1) / (n_interior + 1)
        interior = np.quantile(x, probs)
        interior = interior[(interior > x[0]) & (interior < x[-1])]
        interior = np.unique(interior)
    else:
        interior = np.empty(0)
    if len(interior) < n_interior:
        logger.warning("collapsed %d duplicate interior knots",
                       n_interior - len(interior))
    t = np.concatenate([np.full(degree + 1, x[0]), interior,
                        np.full(degree + 1, x[-1])])
    return t, len(interior) + degree + 1


def _gcv_weight(basis: np.ndarray, y: np.ndarray, pen: np.ndarray,
                grid: np.ndarray) -> float:
    btb = basis.T @ basis
    ptp = pen.T @ pen
    bty = basis.T @ y
    n = len(y)
    best = (np.inf, float(grid[0]))
    for lam in grid:
        a = btb + lam * ptp
        try:
            coef = np.linalg.solve(a, bty)
            edf = float(np.trace(np.linalg.solve(a, btb)))
        except np.linalg.LinAlgError:
            continue
        rss = float(np.sum((y - basis @ coef) ** 2))
        denom = max(n - edf, 1e-8)
        gcv = n * rss / denom ** 2
        if gcv < best[0]:
            best = (gcv, float(lam))
    return best[1]


def _unsmoothed_curve(step: StepCumulativeHazard) -> SmoothHazardCurve:
    cum = step.cumulative()
    dt = np.diff(np.concatenate([[0.0], step.times]))
    dt[dt <= 0] = np.finfo(float).eps
    return SmoothHazardCurve(stratum=step.stratum, grid=step.times.copy(),
                             cumhaz=cum, hazard=step.increments / dt,
                             n_basis=0, penalty_weight=None, unsmoothed=True)


def pspline_smooth(step: StepCumulativeHazard,
                   config: SplineConfig | None = None) -> SmoothHazardCurve:
    """Monotone penalized-spline smooth of a Breslow step function.

    Strata with fewer than ``min_jumps_to_smooth`` jumps return the raw
    step curve flagged ``unsmoothed``. The coefficient sequence is
    constrained nondecreasing (fit by nonnegative least squares on the
    coefficient increments), which makes the cumulative curve monotone and
    the hazard nonnegative exactly.
    """
    cfg = config or SplineConfig()
    if step.n_jumps < cfg.min_jumps_to_smooth:
        return _unsmoothed_curve(step)

    x = step.times
    y = step.cumulative()
    n_basis = min(cfg.n_basis, step.n_jumps)
    knots, n_basis = _knot_vector(x, n_basis, cfg.degree)
    basis = scipy.interpolate.BSpline.design_matrix(
        x, knots, cfg.degree).toarray()
    pen = _difference_penalty(_greville(knots, cfg.degree, n_basis),
                              cfg.penalty_order)

    lam = cfg.penalty_weight
    if lam is None:
        lam = _gcv_weight(basis, y, pen, cfg.penalty_grid)

    # reparametrize coefficients as cumulative sums of nonnegative steps
    tri = np.tril(np.ones((n_basis, n_basis)))
    design = np.vstack([basis @ tri, np.sqrt(lam) * (pen @ tri)])
    target = np.concatenate([y, np.zeros(pen.shape[0])])
    gamma, _ = scipy.optimize.nnls(design, target)
    coef = tri @ gamma

    spline = scipy.interpolate.BSpline(knots, coef, cfg.degree)
    grid = np.linspace(x[0], x[-1], cfg.grid_size)
    cumhaz = spline(grid)
    hazard = np.clip(spline.derivative()(grid), 0.0, None)
    return SmoothHazardCurve(stratum=step.stratum, grid=grid, cumhaz=cumhaz,
                             hazard=hazard, n_basis=n_basis,
                             penalty_weight=float(lam), unsmoothed=False)


@dataclass
class StratumRatio:
    stratum: StratumLabel
    grid: np.ndarray
    ratio: np.ndarray
    mean_ratio: float
    n_excluded: int


@dataclass
class RatioSummary:
    """Hazard ratio of each stratum against the spontaneous stratum."""

    ratios: dict[StratumLabel, StratumRatio]

    def mean_ratios(self) -> dict[str, float]:
        return {r.stratum.tag: r.mean_ratio for r in self.ratios.values()}

    def to_json_dict(self) -> dict:
        return {
            label.tag: {
                "mean_ratio": round12(r.mean_ratio),
                "n_points": int(len(r.grid)),
                "n_excluded": int(r.n_excluded),
            }
            for label, r in self.ratios.items()
        }


def hazard_ratio_summary(curves: dict[StratumLabel, SmoothHazardCurve],
                         n_points: int = 100,
                         floor: float = 1e-12) -> RatioSummary:
    """Per-stratum hazard ratio curves against the spontaneous baseline.

    Ratios are evaluated on the central 80% of the common time support of
    each stratum/spontaneous pair; points where the spontaneous hazard
    falls below ``floor`` are excluded (and counted).
    """
    if StratumLabel.SPONTANEOUS not in curves:
        raise BaselineError("spontaneous stratum curve required for ratios")
    spont = curves[StratumLabel.SPONTANEOUS]

    ratios: dict[StratumLabel, StratumRatio] = {}
    for label, curve in curves.items():
        if label is StratumLabel.SPONTANEOUS:
            continue
        lo = max(curve.grid[0], spont.grid[0])
        hi = min(curve.grid[-1], spont.grid[-1])
        if hi <= lo:
            ratios[label] = StratumRatio(label, np.empty(0), np.empty(0),
                                         float("nan"), 0)
            continue
        span = hi - lo
        grid = np.linspace(lo + 0.1 * span, hi - 0.1 * span, n_points)
        h_s = np.interp(grid, curve.grid, curve.hazard)
        h_0 = np.interp(grid, spont.grid, spont.hazard)
        keep = h_0 >= floor
        n_excluded = int((~keep).sum())
        if n_excluded:
            logger.warning("excluded %d near-zero spontaneous-hazard points "
                           "from the %s ratio", n_excluded, label.tag)
        ratio = h_s[keep] / h_0[keep]
        mean = float(ratio.mean()) if len(ratio) else float("nan")
        ratios[label] = StratumRatio(label, grid[keep], ratio, mean, n_excluded)
    return RatioSummary(ratios)


def curves_to_csv(curves: dict[StratumLabel, SmoothHazardCurve],
                  stream: TextIO | None = None) -> str | None:
    """Plot-ready export: CSV ``stratum,time,cumhaz,hazard``."""
    out = stream if stream is not None else io.StringIO()
    out.write("stratum,time,cumhaz,hazard\n")
    for label in sorted(curves):
        c = curves[label]
        for t, ch, hz in zip(c.grid, c.cumhaz, c.hazard):
            out.write(f"{label.tag},{fmt12(t)},{fmt12(ch)},{fmt12(hz)}\n")
    if stream is None:
        return out.getvalue()
    return None


def summary_json_dict(curves: dict[StratumLabel, SmoothHazardCurve],
                      ratios: RatioSummary | None = None) -> dict:
    """Per-stratum mean ratios plus the unsmoothed flags."""
    out: dict = {
        "strata": {
            label.tag: {"unsmoothed": bool(c.unsmoothed),
                        "n_basis": int(c.n_basis),
                        "penalty_weight": (round12(c.penalty_weight)
                                           if c.penalty_weight is not None else None)}
            for label, c in curves.items()
        }
    }
    if ratios is not None:
        out["hazard_ratios"] = ratios.to_json_dict()
    return out
