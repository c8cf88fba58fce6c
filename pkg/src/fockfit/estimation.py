"""Weighted least-squares estimation of quadrature variances from Fock
count histograms: weight rules (Beta-posterior, naive MLE, uniform), the
weighted sum of squared residuals, and the constrained two-stage fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    QuadratureVariances,
    SqueezedThermalState,
    _all_probs_batch,
    _all_probs_scalar,
    from_variances,
    to_variances,
)

__all__ = [
    "FockHistogram",
    "PriorShape",
    "WeightVector",
    "FitResult",
    "posterior_weights",
    "mle_weights",
    "uniform_weights",
    "objective",
    "fit",
    "fit_frequencies",
]


@dataclass(frozen=True)
class FockHistogram:
    """Observed counts k_0..k_{n_max}, an overflow count for events above
    n_max, and the total number of measurements."""

    counts: tuple[int, ...]
    overflow_count: int
    total: int

    def __post_init__(self):
        if len(self.counts) < 2:
            raise ValueError("need at least bins 0 and 1")
        if any(k < 0 for k in self.counts) or self.overflow_count < 0:
            raise ValueError("counts must be nonnegative")
        if self.total < 1:
            raise ValueError("total must be >= 1")
        if sum(self.counts) + self.overflow_count != self.total:
            raise ValueError("counts plus overflow must sum to total")

    @property
    def n_max(self) -> int:
        return len(self.counts) - 1

    @property
    def frequencies(self) -> np.ndarray:
        """Observed frequencies f_n = k_n / N for all n_max + 2 bins."""
        return np.array(self.counts + (self.overflow_count,)) / self.total


@dataclass(frozen=True)
class PriorShape:
    """Shape parameters (nu, eta) of the Beta prior on a bin probability."""

    nu: float
    eta: float

    def __post_init__(self):
        if not (self.nu > 0.0 and self.eta > 0.0):
            raise ValueError(f"shape parameters must be positive, got {self}")


@dataclass(frozen=True)
class WeightVector:
    """One positive, finite weight per histogram bin (overflow included)."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(w) and w > 0.0 for w in self.weights):
            raise ValueError("all weights must be finite and positive")


@dataclass(frozen=True)
class FitResult:
    """Constrained minimizer of the weighted residuals.

    ``state`` is exactly from_variances(variances); ``evaluations`` counts
    objective evaluations across both search stages.
    """

    variances: QuadratureVariances
    state: SqueezedThermalState
    objective: float
    converged: bool
    evaluations: int


def _beta_posterior_variance(k: float, total: float, prior: PriorShape) -> float:
    s = prior.nu + total + prior.eta
    return (k + prior.nu) * (total + prior.eta - k) / (s * s * (s + 1.0))


def posterior_weights(h: FockHistogram, prior: PriorShape = PriorShape(1.0, 1.0)) -> WeightVector:
    """Inverse Beta-posterior variances, one per bin:

        Var(p_n | k_n) = (k_n + nu)(N + eta - k_n) / [(nu+N+eta)^2 (nu+N+eta+1)]

    Finite and positive for every bin, including k_n = 0.
    """
    return WeightVector(
        tuple(
            1.0 / _beta_posterior_variance(k, h.total, prior)
            for k in (*h.counts, h.overflow_count)
        )
    )


# Zero and full bins make the naive binomial variance vanish; half a count
# substituted on the offending side keeps this baseline runnable.
_MLE_FALLBACK_COUNT = 0.5


def mle_weights(h: FockHistogram) -> WeightVector:
    """Naive inverse-variance weights N^3 / [k_n (N - k_n)] from the
    binomial maximum-likelihood plug-in, with the half-count substitution
    applied whenever k_n is 0 or N.  Kept for comparison studies; the
    posterior weights are the estimator of record."""
    n = h.total
    out = []
    for k in (*h.counts, h.overflow_count):
        num = max(float(k), _MLE_FALLBACK_COUNT)
        rem = max(float(n - k), _MLE_FALLBACK_COUNT)
        out.append(n ** 3 / (num * rem))
    return WeightVector(tuple(out))


def uniform_weights(h: FockHistogram) -> WeightVector:
    """Unit weight for every bin (the unweighted baseline)."""
    return WeightVector((1.0,) * (h.n_max + 2))


def _check_lengths(n_bins: int, w: WeightVector) -> None:
    if len(w.weights) != n_bins:
        raise ValueError(f"expected {n_bins} weights, got {len(w.weights)}")


def objective(v: QuadratureVariances, h: FockHistogram, w: WeightVector) -> float:
    """Weighted sum of squared residuals over all bins, overflow included:

        Delta = sum_n w_n [P(n | vq, vp) - f_n]^2.
    """
    _check_lengths(h.n_max + 2, w)
    return _delta(v.vq, v.vp, h.frequencies.tolist(), list(w.weights), h.n_max)


def _delta(vq: float, vp: float, freqs: list, wts: list, n_max: int) -> float:
    probs = _all_probs_scalar(vq, vp, n_max)
    d = 0.0
    for i in range(n_max + 2):
        res = probs[i] - freqs[i]
        d += wts[i] * res * res
    return d


# Nelder-Mead coefficients: reflection, expansion, contraction, shrink.
_NM_ALPHA, _NM_GAMMA, _NM_RHO, _NM_SIGMA = 1.0, 2.0, 0.5, 0.5

# Coordinates closer to a bound than this are candidates for an exact
# boundary solution; the statistical resolution of any realistic fit is
# orders of magnitude coarser.
_BOUNDARY_SNAP = 1e-6


def _nelder_mead(fun, x0, steps, tol, budget):
    """Minimize fun over the nonnegative quadrant starting from x0.

    Candidate points are folded across the axes (theta -> |theta|), which
    implements reflection onto the bounds r >= 0, nbar >= 0.  Stops when
    the simplex spread is below tol in both coordinates or the evaluation
    budget is exhausted.  Returns (best_x, best_f, evals, converged).
    """
    pts = [np.abs(np.asarray(x0, dtype=float))]
    for i, s in enumerate(steps):
        p = pts[0].copy()
        p[i] += s
        pts.append(np.abs(p))
    vals = [fun(p) for p in pts]
    evals = len(pts)
    while True:
        order = np.argsort(vals)
        pts = [pts[i] for i in order]
        vals = [vals[i] for i in order]
        spread = np.max(pts, axis=0) - np.min(pts, axis=0)
        if spread[0] < tol and spread[1] < tol:
            return pts[0], vals[0], evals, True
        if evals >= budget:
            return pts[0], vals[0], evals, False

        centroid = (pts[0] + pts[1]) / 2.0
        xr = np.abs(centroid + _NM_ALPHA * (centroid - pts[2]))
        fr = fun(xr)
        evals += 1
        if vals[0] <= fr < vals[1]:
            pts[2], vals[2] = xr, fr
            continue
        if fr < vals[0]:
            xe = np.abs(centroid + _NM_GAMMA * (xr - centroid))
            fe = fun(xe)
            evals += 1
            if fe < fr:
                pts[2], vals[2] = xe, fe
            else:
                pts[2], vals[2] = xr, fr
            continue
        xc = np.abs(centroid + _NM_RHO * (pts[2] - centroid))
        fc = fun(xc)
        evals += 1
        if fc < vals[2]:
            pts[2], vals[2] = xc, fc
            continue
        for i in (1, 2):
            pts[i] = pts[0] + _NM_SIGMA * (pts[i] - pts[0])
            vals[i] = fun(pts[i])
            evals += 1


def fit_frequencies(
    frequencies,
    w: WeightVector,
    *,
    r_max: float = 3.5,
    nbar_max: float = 7.0,
    grid_size: int = 60,
    simplex_tol: float = 1e-9,
    max_evals: int = 10_000,
) -> FitResult:
    """Fit (vq, vp) to a frequency vector (bins 0..n_max plus overflow).

    Two stages in (r, nbar) coordinates, where the physical constraints
    vq <= vp and vq*vp >= 1/4 become the simple bounds r >= 0, nbar >= 0:

    1. a coarse grid, ``grid_size`` points linear in r over [0, r_max] by
       ``grid_size`` points log-spaced in (1 + nbar) over [1, 1 + nbar_max];
    2. Nelder-Mead refinement from the best grid point, with reflection
       onto the bounds, run twice (the second pass restarts with a small
       simplex to guard against premature collapse).

    The returned point is the best one seen across all evaluations, so its
    objective never exceeds that of any probed grid point.
    """
    freqs = np.asarray(frequencies, dtype=float)
    if freqs.ndim != 1 or freqs.shape[0] < 3:
        raise ValueError("frequencies must be a 1-D vector with >= 3 bins")
    n_max = freqs.shape[0] - 2
    _check_lengths(n_max + 2, w)
    w_arr = np.asarray(w.weights)

    r_vals = np.linspace(0.0, r_max, grid_size)
    nbar_vals = np.expm1(np.linspace(0.0, math.log1p(nbar_max), grid_size))
    rg, ng = map(np.ravel, np.meshgrid(r_vals, nbar_vals, indexing="ij"))
    half = 0.5 * (2.0 * ng + 1.0)
    pg = _all_probs_batch(half * np.exp(-2.0 * rg), half * np.exp(2.0 * rg), n_max)
    deltas = np.square(pg - freqs) @ w_arr
    i0 = int(np.argmin(deltas))
    evals = deltas.shape[0]

    f_list = freqs.tolist()
    w_list = w_arr.tolist()
    best_x = np.array([rg[i0], ng[i0]])
    best_f = float(deltas[i0])

    def delta_of(theta):
        nonlocal best_x, best_f
        half = 0.5 * (2.0 * theta[1] + 1.0)
        e2 = math.exp(2.0 * theta[0])
        d = _delta(half / e2, half * e2, f_list, w_list, n_max)
        if d < best_f:
            best_f = d
            best_x = theta.copy()
        return d

    converged = False
    nm_evals = 0
    steps = (max(r_max / (grid_size - 1), 1e-3), max(nbar_max / (grid_size - 1), 1e-3))
    for _attempt in range(2):
        remaining = max_evals - nm_evals
        if remaining <= 3:
            break
        _, _, used, converged = _nelder_mead(
            delta_of, best_x, steps, simplex_tol, remaining
        )
        nm_evals += used
        if not converged:
            break
        steps = (1e-5 * (1.0 + best_x[0]), 1e-5 * (1.0 + best_x[1]))
    evals += nm_evals

    # An active constraint is reported exactly on the bound: coordinates
    # below the search resolution are snapped to 0 when that does not
    # worsen the objective.  Without this, replicate estimates never pile
    # up at r = 0 or nbar = 0 and boundary-state intervals misbehave.
    snapped = np.where(best_x < _BOUNDARY_SNAP, 0.0, best_x)
    if snapped[0] != best_x[0] or snapped[1] != best_x[1]:
        half = 0.5 * (2.0 * snapped[1] + 1.0)
        e2 = math.exp(2.0 * snapped[0])
        d = _delta(half / e2, half * e2, f_list, w_list, n_max)
        evals += 1
        if d <= best_f:
            best_x, best_f = snapped, d

    variances = to_variances(SqueezedThermalState(best_x[0], best_x[1]))
    return FitResult(
        variances=variances,
        state=from_variances(variances),
        objective=best_f,
        converged=converged,
        evaluations=evals,
    )


def fit(h: FockHistogram, w: WeightVector, **options) -> FitResult:
    """Constrained weighted least-squares fit of a count histogram.

    Non-convergence is reported through FitResult.converged, never
    silently.  Keyword options are forwarded to fit_frequencies.
    """
    return fit_frequencies(h.frequencies, w, **options)
