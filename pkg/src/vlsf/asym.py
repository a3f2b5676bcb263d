"""Second-order expansion coefficients of the two-decoder rate region.

The maximum log codebook size behaves like C*l/(1-eps) minus a square-root
term; the coefficients of that term differ between the achievable and the
converse side.  The converse coefficient couples the two decoders through a
generalized Gaussian quantile and two clipped-Gaussian expectations, all
evaluated here to quadrature accuracy.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .channel import BroadcastPair
from .errors import BracketFailure

SQRT_2PI = math.sqrt(2.0 * math.pi)
QUANTILE_BRACKET = 40.0  # Phi saturates far before this, guaranteeing a sign change
QUAD_ABS_TOL = 1e-10


def gauss_phi(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x) / SQRT_2PI


def gauss_cdf(x):
    return ndtr(x)


def gauss_upper(x):
    """Upper tail Q(x) = P[Z > x], accurate in both tails."""
    return ndtr(-np.asarray(x, dtype=np.float64))


def gauss_upper_inv(p: float) -> float:
    return float(-ndtri(p))


def coupled_gauss_quantile(eps: float, rho1: float, rho2: float) -> float:
    """Root y of Phi(rho1*y)*Phi(rho2*y) + eps*(1 + min_k Phi(rho_k*y)) = 1.

    This generalizes the Gaussian upper quantile to two decoders whose
    dispersions differ by the fourth-root ratios rho_k; at rho1 = rho2 = 1 it
    collapses to the ordinary quantile of eps.  The left side is continuous
    and strictly increasing in y, so the root is unique.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if abs(rho1 * rho2 - 1.0) > 1e-6:
        raise ValueError("rho1 * rho2 must equal 1")

    def lhs(y):
        f1 = ndtr(rho1 * y)
        f2 = ndtr(rho2 * y)
        return f1 * f2 + eps * (1.0 + min(f1, f2)) - 1.0

    lo, hi = -QUANTILE_BRACKET, QUANTILE_BRACKET
    if lhs(lo) >= 0.0 or lhs(hi) <= 0.0:
        raise BracketFailure("no sign change for the quantile equation in [-40, 40]")
    root = brentq(lhs, lo, hi, xtol=1e-13, rtol=8.9e-16)
    if abs(lhs(root)) > 1e-12:
        raise BracketFailure("quantile root did not converge to residual 1e-12")
    return float(root)


def expected_min_gauss(c: float, rho: float) -> float:
    """E[min(c, rho*Z)] for Z standard normal, in closed form."""
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    a = c / rho
    return c * float(gauss_upper(a)) - rho * gauss_phi(a)


def expected_min_max_gauss(c: float, rho1: float, rho2: float) -> float:
    """E[min(c, max(rho1*Z1, rho2*Z2))] with independent standard normals.

    Uses E[min(c, X)] = c - integral of the cdf of X up to c; the cdf of the
    max factorizes.  Quadrature from 40 rescaled deviations below c leaves a
    remainder under 1e-300.
    """
    if rho1 <= 0.0 or rho2 <= 0.0:
        raise ValueError("rho factors must be positive")
    from scipy.integrate import quad

    lo = c - QUANTILE_BRACKET * max(rho1, rho2)
    integral, _ = quad(
        lambda z: ndtr(z / rho1) * ndtr(z / rho2), lo, c, epsabs=QUAD_ABS_TOL, limit=200
    )
    return c - integral


def sqrt_coeff_achievability(pair: BroadcastPair, eps: float) -> float:
    """Square-root coefficient on the achievable side: sqrt((V1+V2)/(2 pi (1-eps)))."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    return math.sqrt((pair.v1 + pair.v2) / (2.0 * math.pi * (1.0 - eps)))


def _check_equal_capacities(pair: BroadcastPair) -> None:
    c = max(pair.capacity, 1e-300)
    if abs(pair.c1 - pair.c2) / c > 1e-6:
        warnings.warn(
            "subchannel capacities differ; the square-root penalty vanishes in "
            "that regime and these curves overstate it",
            stacklevel=3,
        )


def sqrt_coeff_converse(pair: BroadcastPair, eps: float) -> float:
    """Square-root coefficient on the converse side.

    Assembles sqrt(V/(1-eps)^3) times the bracket built from the coupled
    quantile and the two clipped-Gaussian expectations.  Requires positive
    dispersions on both links; warns when the capacities are unequal.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if not (pair.v1 > 0.0 and pair.v2 > 0.0):
        raise ValueError("both dispersions must be positive")
    _check_equal_capacities(pair)
    y = coupled_gauss_quantile(eps, pair.rho1, pair.rho2)
    e_max = expected_min_max_gauss(y, pair.rho1, pair.rho2)
    e_single = min(
        expected_min_gauss(y, pair.rho1), expected_min_gauss(y, pair.rho2)
    )
    bracket = e_max - eps * (2.0 * y - e_single)
    return math.sqrt(pair.v_geo / (1.0 - eps) ** 3) * bracket


def symmetric_converse_bracket(eps: float) -> float:
    """Closed form of the converse bracket when both dispersion ratios are 1."""
    u = gauss_upper_inv(eps)
    return (1.0 / math.sqrt(math.pi)) * (1.0 - float(gauss_upper(math.sqrt(2.0) * u))) + (
        eps - 2.0
    ) * gauss_phi(u)


def critical_epsilon_symmetric() -> float:
    """Error rate at which the symmetric converse bracket changes sign.

    Below this value the square-root penalty in the converse expansion is
    strictly positive.
    """
    lo, hi = 0.01, 0.5
    if not (symmetric_converse_bracket(lo) > 0.0 > symmetric_converse_bracket(hi)):
        raise BracketFailure("bracket endpoints do not straddle the sign change")
    return float(brentq(symmetric_converse_bracket, lo, hi, xtol=1e-10))


def second_order_curves(pair: BroadcastPair, eps: float, l_grid):
    """Asymptotic lower/upper log-codebook curves over a blocklength grid.

    Both curves drop the unquantified remainder terms and are meaningful only
    for large l; callers should label them as asymptotic.
    """
    l = np.asarray(l_grid, dtype=np.float64)
    if np.any(l <= 0.0):
        raise ValueError("blocklengths must be positive")
    first = pair.capacity * l / (1.0 - eps)
    lower = first - sqrt_coeff_achievability(pair, eps) * np.sqrt(l)
    upper = first - sqrt_coeff_converse(pair, eps) * np.sqrt(l)
    return lower, upper
