"""Single-mode squeezed thermal states.

Parameterizations (squeezing/temperature vs. quadrature variances), the
Fock-number probability distribution in a numerically stable closed form,
an independent quadrature-based evaluation of the same probabilities for
cross-checks, and the fidelity between two zero-mean Gaussian states.

Units: hbar = 1 with vacuum quadrature variance 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.laguerre import lagval

from .numerics import scaled_legendre

__all__ = [
    "HEISENBERG_SLACK",
    "MAX_FOCK",
    "SqueezedThermalState",
    "QuadratureVariances",
    "FockDistribution",
    "to_variances",
    "from_variances",
    "fock_probability",
    "fock_distribution",
    "fock_probability_oracle",
    "fidelity",
]

# Tolerance below the exact Heisenberg floor vq*vp >= 1/4; absorbs rounding
# when variances come out of exp/log round trips.
HEISENBERG_SLACK = 1e-12

# Largest Fock number the closed-form path is validated for.
MAX_FOCK = 64

_ORACLE_MAX_FOCK = 30


@dataclass(frozen=True)
class SqueezedThermalState:
    """Physical parameters of the state: squeezing r and mean thermal
    occupation nbar.

    The convention vq <= vp absorbs the sign of squeezing, so r >= 0.
    """

    r: float
    nbar: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.nbar)):
            raise ValueError("state parameters must be finite")
        if self.r < 0.0:
            raise ValueError(f"squeezing r must be >= 0, got {self.r}")
        if self.nbar < 0.0:
            raise ValueError(f"thermal occupation nbar must be >= 0, got {self.nbar}")


@dataclass(frozen=True)
class QuadratureVariances:
    """Diagonal of the covariance matrix: (vq, vp) with vq <= vp.

    These are the fit's native coordinates.  Valid instances satisfy the
    Heisenberg bound vq * vp >= 1/4 (up to HEISENBERG_SLACK).
    """

    vq: float
    vp: float

    def __post_init__(self):
        if not (math.isfinite(self.vq) and math.isfinite(self.vp)):
            raise ValueError("variances must be finite")
        if self.vq <= 0.0 or self.vp <= 0.0:
            raise ValueError(f"variances must be positive, got ({self.vq}, {self.vp})")
        if self.vq > self.vp:
            raise ValueError(f"require vq <= vp, got ({self.vq}, {self.vp})")
        if self.vq * self.vp < 0.25 - HEISENBERG_SLACK:
            raise ValueError(
                f"Heisenberg bound violated: vq*vp = {self.vq * self.vp} < 0.25"
            )


@dataclass(frozen=True)
class FockDistribution:
    """Model probabilities P(0..n_max) plus the aggregate overflow bin for
    every Fock number above n_max.  Entries sum to 1."""

    n_max: int
    probs: tuple[float, ...]
    overflow: float

    def __post_init__(self):
        if len(self.probs) != self.n_max + 1:
            raise ValueError("probs must have n_max + 1 entries")
        if any(p < 0.0 or p > 1.0 for p in self.probs) or not 0.0 <= self.overflow <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(self.probs) + self.overflow - 1.0) > 1e-12:
            raise ValueError("probabilities and overflow must sum to 1")

    @property
    def all_probs(self) -> np.ndarray:
        """Probabilities for all n_max + 2 measurement categories."""
        return np.array(self.probs + (self.overflow,))


def to_variances(state: SqueezedThermalState) -> QuadratureVariances:
    """Quadrature variances of a squeezed thermal state:

    vq = (2 nbar + 1) exp(-2r) / 2,   vp = (2 nbar + 1) exp(+2r) / 2.
    """
    half = 0.5 * (2.0 * state.nbar + 1.0)
    return QuadratureVariances(half * math.exp(-2.0 * state.r), half * math.exp(2.0 * state.r))


def from_variances(v: QuadratureVariances) -> SqueezedThermalState:
    """Invert to_variances: r = ln(vp/vq)/4 and nbar = sqrt(vq*vp) - 1/2.

    Values are clamped at the physical boundary so that rounding noise in a
    state sitting exactly on r = 0 or nbar = 0 cannot produce a negative
    parameter.
    """
    r = 0.25 * math.log(v.vp / v.vq)
    nbar = math.sqrt(v.vq * v.vp) - 0.5
    return SqueezedThermalState(max(r, 0.0), max(nbar, 0.0))


def _legendre_args(vq: float, vp: float) -> tuple[float, float, float]:
    """Return (chat, uhat, p0) for the stable closed form.

    With A = (2vq-1)(2vp-1), B = (2vq+1)(2vp+1) and c = 4 vq vp - 1 the
    probability is P(n) = P(0) B**-n G_n(c, A*B).  By homogeneity
    (G_n(s*c, s^2*u) = s^n G_n(c, u)) this equals P(0) * G_n(c/B, A/B);
    the scaled arguments stay in (-1, 1), so the recurrence cannot
    overflow even at extreme variances.
    """
    big_b = (2.0 * vq + 1.0) * (2.0 * vp + 1.0)
    chat = (4.0 * vq * vp - 1.0) / big_b
    uhat = ((2.0 * vq - 1.0) * (2.0 * vp - 1.0)) / big_b
    p0 = 2.0 / math.sqrt(big_b)
    return chat, uhat, p0


def fock_probability(v: QuadratureVariances, n: int) -> float:
    """Probability of measuring Fock number n in the state with variances v.

    Evaluated as P(0) * G_n via numerics.scaled_legendre, with P(0) =
    [1/4 + vq*vp + (vq+vp)/2]**(-1/2).  Exact for thermal states
    (nbar**n / (nbar+1)**(n+1)) and reproduces the parity zeros of squeezed
    vacuum.
    """
    if n < 0 or n > MAX_FOCK:
        raise ValueError(f"n must be in [0, {MAX_FOCK}], got {n}")
    chat, uhat, p0 = _legendre_args(v.vq, v.vp)
    g = scaled_legendre(chat, uhat, n)[n]
    return max(float(p0 * g), 0.0)


def _all_probs_scalar(vq: float, vp: float, n_max: int) -> list[float]:
    """[P(0), ..., P(n_max), overflow] as plain floats.

    Same arithmetic as fock_probability, unrolled for the optimizer's hot
    loop.  The overflow entry is 1 minus the partial sum, clamped at 0 so
    the result is always a valid multinomial parameter vector.
    """
    big_b = (2.0 * vq + 1.0) * (2.0 * vp + 1.0)
    chat = (4.0 * vq * vp - 1.0) / big_b
    uhat = ((2.0 * vq - 1.0) * (2.0 * vp - 1.0)) / big_b
    p0 = 2.0 / math.sqrt(big_b)

    out = [0.0] * (n_max + 2)
    out[0] = p0
    total = p0
    g_prev = 1.0
    g = chat
    if n_max >= 1:
        pn = p0 * g
        if pn < 0.0:
            pn = 0.0
        out[1] = pn
        total += pn
    for k in range(1, n_max):
        g_prev, g = g, ((2 * k + 1) * chat * g - k * uhat * g_prev) / (k + 1)
        pn = p0 * g
        if pn < 0.0:
            pn = 0.0
        out[k + 1] = pn
        total += pn
    tail = 1.0 - total
    out[n_max + 1] = tail if tail > 0.0 else 0.0
    return out


def _all_probs_batch(vq: np.ndarray, vp: np.ndarray, n_max: int) -> np.ndarray:
    """Vectorized _all_probs_scalar: given 1-D variance arrays of length m,
    return an (m, n_max + 2) matrix of probabilities including overflow."""
    big_b = (2.0 * vq + 1.0) * (2.0 * vp + 1.0)
    chat = (4.0 * vq * vp - 1.0) / big_b
    uhat = ((2.0 * vq - 1.0) * (2.0 * vp - 1.0)) / big_b
    p0 = 2.0 / np.sqrt(big_b)

    out = np.zeros((vq.shape[0], n_max + 2))
    out[:, 0] = p0
    g_prev = np.ones_like(chat)
    g = chat.copy()
    if n_max >= 1:
        out[:, 1] = np.maximum(p0 * g, 0.0)
    for k in range(1, n_max):
        g_prev, g = g, ((2 * k + 1) * chat * g - k * uhat * g_prev) / (k + 1)
        out[:, k + 1] = np.maximum(p0 * g, 0.0)
    out[:, n_max + 1] = np.maximum(1.0 - out[:, : n_max + 1].sum(axis=1), 0.0)
    return out


def fock_distribution(v: QuadratureVariances, n_max: int = 20) -> FockDistribution:
    """Model distribution over the n_max + 2 measurement categories
    (Fock numbers 0..n_max plus one overflow bin for everything above)."""
    if not 1 <= n_max <= MAX_FOCK:
        raise ValueError(f"n_max must be in [1, {MAX_FOCK}], got {n_max}")
    all_probs = _all_probs_scalar(v.vq, v.vp, n_max)
    return FockDistribution(n_max, tuple(all_probs[:-1]), all_probs[-1])


@lru_cache(maxsize=8)
def _gauss_hermite(m: int) -> tuple[np.ndarray, np.ndarray]:
    return hermgauss(m)


def fock_probability_oracle(v: QuadratureVariances, n: int, nodes: int = 48) -> float:
    """Slow, independent evaluation of fock_probability by numerically
    overlapping the state's Wigner function with the Fock state's.

    The Gaussian Wigner function of the state times the Fock Wigner factor
    exp(-q^2 - p^2) is reduced to the Gauss-Hermite weight by rescaling
    each axis, leaving a bivariate polynomial (a Laguerre polynomial of
    2q^2 + 2p^2) that the tensor-product rule integrates exactly once the
    node count exceeds the polynomial degree.
    """
    if n < 0 or n > _ORACLE_MAX_FOCK:
        raise ValueError(f"oracle supports n in [0, {_ORACLE_MAX_FOCK}], got {n}")
    if nodes <= n:
        raise ValueError("need more quadrature nodes than the polynomial degree")
    x, w = _gauss_hermite(nodes)
    sq2 = 2.0 * v.vq / (2.0 * v.vq + 1.0)
    sp2 = 2.0 * v.vp / (2.0 * v.vp + 1.0)
    arg = 2.0 * (sq2 * x[:, None] ** 2 + sp2 * x[None, :] ** 2)
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    integral = w @ lagval(arg, coeffs) @ w
    sign = -1.0 if n % 2 else 1.0
    return float(
        sign / (math.pi * math.sqrt(v.vq * v.vp)) * math.sqrt(sq2 * sp2) * integral
    )


def fidelity(a: QuadratureVariances, b: QuadratureVariances) -> float:
    """Fidelity between two zero-mean single-mode Gaussian states.

    For diagonal covariances the closed form reduces to

        Xi  = (vq1 + vq2)(vp1 + vp2)
        Lam = 4 (vq1*vp1 - 1/4)(vq2*vp2 - 1/4)
        F   = (sqrt(Xi + Lam) - sqrt(Lam))**-1
            = (sqrt(Xi + Lam) + sqrt(Lam)) / Xi,

    where the rationalized last form is branch- and cancellation-free.
    Returns a value in (0, 1], exactly 1 for identical states.
    """
    xi = (a.vq + b.vq) * (a.vp + b.vp)
    det_a = max(a.vq * a.vp - 0.25, 0.0)
    det_b = max(b.vq * b.vp - 0.25, 0.0)
    lam = 4.0 * det_a * det_b
    return min((math.sqrt(xi + lam) + math.sqrt(lam)) / xi, 1.0)
