"""Max-of-two-walks stopping times, stripped of channel semantics.

Two random walks with a joint increment law cross a shared threshold; the
expected maximum of their crossing times expands as the Wald term plus a
square-root correction whenever the drifts coincide.  This module simulates
the pair, evaluates the remainder-free expansion, and fits the empirical
square-root coefficient for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import montecarlo
from .channel import BroadcastPair
from .errors import NonpositiveDrift

MEAN_EQUALITY_TOL = 1e-12
MAX_STEPS_DRIFT_FACTOR = 50


@dataclass(frozen=True)
class WalkSpec:
    """Joint increment atoms (w, z, prob) of two walks plus derived moments."""

    atoms: tuple
    r_moment: int = 3

    def __post_init__(self):
        atoms = tuple((float(w), float(z), float(p)) for w, z, p in self.atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        probs = np.array([a[2] for a in atoms])
        if np.any(probs < 0.0):
            raise ValueError("atom probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must sum to 1 within 1e-12")
        if self.r_moment < 3:
            raise ValueError("moment order must be at least 3")
        object.__setattr__(self, "atoms", atoms)
        w = np.array([a[0] for a in atoms])
        z = np.array([a[1] for a in atoms])
        mu_w = float(probs @ w)
        mu_z = float(probs @ z)
        if mu_w <= 0.0 or mu_z <= 0.0:
            raise NonpositiveDrift(f"walk means must be positive, got {mu_w:g}, {mu_z:g}")
        object.__setattr__(self, "_mu_w", mu_w)
        object.__setattr__(self, "_mu_z", mu_z)
        ratio = w / mu_w - z / mu_z
        mean_ratio = float(probs @ ratio)
        object.__setattr__(self, "_sigma2", float(probs @ (ratio - mean_ratio) ** 2))

    @property
    def mu_w(self) -> float:
        return self._mu_w

    @property
    def mu_z(self) -> float:
        return self._mu_z

    @property
    def sigma2(self) -> float:
        """Var(W/mu_W - Z/mu_Z), the spread entering the sqrt coefficient."""
        return self._sigma2

    @property
    def equal_means(self) -> bool:
        return abs(self.mu_w - self.mu_z) <= MEAN_EQUALITY_TOL

    @classmethod
    def from_channel_pair(cls, pair: BroadcastPair, r_moment: int = 3) -> "WalkSpec":
        """Increments of the two density walks driven by a shared input."""
        from .channel import info_density

        p = pair.pstar.probs
        atoms = []
        for x in range(len(p)):
            for y1 in range(pair.w1.output_size):
                w1 = pair.w1.matrix[x, y1]
                if w1 == 0.0:
                    continue
                for y2 in range(pair.w2.output_size):
                    w2 = pair.w2.matrix[x, y2]
                    prob = p[x] * w1 * w2
                    if prob == 0.0:
                        continue
                    atoms.append(
                        (
                            info_density(pair.pstar, pair.w1, x, y1),
                            info_density(pair.pstar, pair.w2, x, y2),
                            prob,
                        )
                    )
        return cls(tuple(atoms), r_moment=r_moment)

    @classmethod
    def from_margins(cls, w_atoms, z_atoms, r_moment: int = 3) -> "WalkSpec":
        """Product law of two independent per-walk increment distributions."""
        atoms = [
            (wv, zv, wp * zp) for wv, wp in w_atoms for zv, zp in z_atoms if wp * zp > 0.0
        ]
        return cls(tuple(atoms), r_moment=r_moment)


@dataclass(frozen=True)
class StoppingStats:
    """Monte Carlo estimate of E[max(tau1, tau2)] at one threshold."""

    gamma: float
    mean_max: float
    std_error: float
    trials: int
    mean_tau1: float
    mean_tau2: float


def _walk_system(spec: WalkSpec, gamma: float, debug: bool) -> montecarlo.WalkSystem:
    probs = np.array([a[2] for a in spec.atoms])
    w = np.array([a[0] for a in spec.atoms])
    z = np.array([a[1] for a in spec.atoms])
    rows = [w, z]
    thresholds = [gamma, gamma]
    if debug:
        # combined walk whose crossing precedes at least one of tau1, tau2
        rows.append(w / spec.mu_w + z / spec.mu_z)
        thresholds.append(gamma * (spec.mu_w + spec.mu_z) / (spec.mu_w * spec.mu_z))
    return montecarlo.atoms_to_system(probs, np.vstack(rows), thresholds)


def simulate_walk_pair(
    spec: WalkSpec,
    gamma: float,
    trials: int,
    seed: int,
    max_steps: int | None = None,
    threads: int | None = None,
    debug: bool = False,
):
    """Estimate E[max(tau1, tau2)] where tau_k is each walk's crossing time.

    Thresholds at or below 0 cross immediately at step 0 (empty sum).  With
    ``debug`` a third, rescaled-sum walk is tracked and its mean crossing time
    returned alongside.
    """
    if max_steps is None:
        max_steps = max(16, int(MAX_STEPS_DRIFT_FACTOR * max(gamma, 1.0) / min(spec.mu_w, spec.mu_z)))
    system = _walk_system(spec, gamma, debug)
    hint = int(max(gamma, 0.0) / min(spec.mu_w, spec.mu_z)) + 8
    taus = montecarlo.run_walks(system, trials, seed, max_steps, hint_steps=hint, threads=threads)
    if np.any(taus[:, :2] == montecarlo.CENSORED):
        raise RuntimeError(
            "some trials hit the step cap; raise max_steps (drift too small for gamma)"
        )
    max_tau = np.maximum(taus[:, 0], taus[:, 1]).astype(np.float64)
    mean_max, se = montecarlo.mean_and_stderr(max_tau)
    stats = StoppingStats(
        gamma=gamma,
        mean_max=mean_max,
        std_error=se,
        trials=trials,
        mean_tau1=float(taus[:, 0].mean()),
        mean_tau2=float(taus[:, 1].mean()),
    )
    if debug:
        return stats, float(taus[:, 2].mean())
    return stats


def expansion_upper_bound(spec: WalkSpec, gamma: float) -> float:
    """Remainder-free expansion of E[max(tau1, tau2)].

    gamma/min(mu) plus the sqrt term sigma/sqrt(2 pi) * sqrt(gamma/mu_W),
    which only enters when the two drifts agree to within 1e-12.  The dropped
    remainder grows slower than sqrt(gamma), so this is not a hard bound at
    finite gamma.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    value = gamma / min(spec.mu_w, spec.mu_z)
    if spec.equal_means:
        value += math.sqrt(spec.sigma2 / (2.0 * math.pi)) * math.sqrt(gamma / spec.mu_w)
    return value


def folded_normal_excess(x: float) -> float:
    """sqrt(pi/2) * (E|x - Z| - |x|) for standard normal Z.

    Even, equal to 1 at x = 0, strictly decreasing in |x| and exponentially
    small for large |x|.
    """
    sign = 0.0 if x == 0.0 else math.copysign(1.0, x)
    return math.exp(-0.5 * x * x) + x * math.sqrt(math.pi / 2.0) * (
        math.erf(x / math.sqrt(2.0)) - sign
    )


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares slope of (mean_max - gamma/mu) against sqrt(gamma)."""

    slope: float
    ci_low: float
    ci_high: float
    intercept: float
    gammas: tuple
    excesses: tuple
    std_errors: tuple

    @property
    def predicted_slope_form(self) -> str:
        return "sigma / sqrt(2 pi mu_w)"


def sqrt_slope_regression(
    spec: WalkSpec,
    gammas: Sequence[float],
    trials: int,
    seed: int,
    threads: int | None = None,
) -> SlopeFit:
    """Fit the empirical sqrt coefficient of the max-crossing excess.

    All thresholds reuse the same seed, so trials are coupled across the grid
    and the fitted slope is much steadier than independent runs would give.
    The 95% interval comes from the OLS covariance with the Monte Carlo
    standard errors propagated in.
    """
    if len(gammas) < 2:
        raise ValueError("need at least two thresholds to fit a slope")
    mu = min(spec.mu_w, spec.mu_z)
    excess, ses = [], []
    for gamma in gammas:
        stats = simulate_walk_pair(spec, gamma, trials, seed, threads=threads)
        excess.append(stats.mean_max - gamma / mu)
        ses.append(stats.std_error)
    x = np.sqrt(np.asarray(gammas, dtype=np.float64))
    y = np.asarray(excess)
    design = np.column_stack([x, np.ones_like(x)])
    coef, residuals, _, _ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    dof = max(len(gammas) - 2, 1)
    resid_var = float(residuals[0]) / dof if len(residuals) else float(np.mean(np.square(ses)))
    # add the Monte Carlo level so the interval cannot collapse on a lucky fit
    total_var = resid_var + float(np.mean(np.square(ses)))
    cov = np.linalg.inv(design.T @ design) * total_var
    half = 1.96 * math.sqrt(cov[0, 0])
    return SlopeFit(
        slope=slope,
        ci_low=slope - half,
        ci_high=slope + half,
        intercept=intercept,
        gammas=tuple(float(g) for g in gammas),
        excesses=tuple(float(e) for e in excess),
        std_errors=tuple(float(s) for s in ses),
    )
