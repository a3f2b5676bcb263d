"""Achievable side: threshold stopping at both decoders, simulated and bounded.

Each decoder accumulates its own information density of the common input and
stops once it passes a threshold; the transmitter keeps sending until both
have stopped, so the blocklength is max(tau1, tau2).  Shared randomness is
realized as a single biased coin that, with probability q, stops both
decoders immediately at time 0: this discounts the average blocklength by
(1 - q) and adds q to the error, and is accounted for analytically rather
than simulated.  Decoding errors are bounded by (M - 1) times the chance
that an independent impostor codeword crosses the threshold first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import montecarlo
from .channel import BroadcastPair
from .converse import BoundPoint
from .errors import RecipeInfeasible

MAX_STEPS_DRIFT_FACTOR = 50  # default cap: 50x the Wald crossing time


@dataclass(frozen=True)
class SimConfig:
    """Thresholds, early-stop coin, and reproducibility knobs for one run."""

    gamma1: float
    gamma2: float
    q: float
    trials: int
    seed: int
    max_steps: int | None = None

    def __post_init__(self):
        if self.gamma1 < 0.0 or self.gamma2 < 0.0:
            raise ValueError("thresholds must be nonnegative")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("need at least one trial")


@dataclass(frozen=True)
class StoppingEstimate:
    """Monte Carlo summary of the paired stopping times.

    ``censored_fraction`` counts trials that hit the step cap; any censoring
    invalidates the estimates (they are reported but flagged).
    """

    mean_max_tau: float
    std_error: float
    mean_tau1: float
    mean_tau2: float
    trials: int
    censored_fraction: float
    pairwise_error1: tuple[float, float] | None = None
    pairwise_error2: tuple[float, float] | None = None

    @property
    def valid(self) -> bool:
        return self.censored_fraction == 0.0


def _density_row(pstar, w):
    """Per-(x, y) information density values at the shared optimal input."""
    pw = pstar.probs @ w.matrix
    support = w.matrix > 0.0
    logw = np.log(np.where(support, w.matrix, 1.0))
    logpw = np.log(np.where(pw > 0.0, pw, 1.0))
    return np.where(support, logw - logpw[None, :], -np.inf)


def _stopping_system(pair: BroadcastPair, gammas, impostor: bool) -> montecarlo.WalkSystem:
    """Joint atom table for (x, y1, y2[, impostor x']) with one row per walk.

    With an impostor, its two walks are observers: they score the independent
    codeword against the same outputs (the density can be -inf there, which
    simply never crosses) and do not hold the trial open.
    """
    p = pair.pstar.probs
    d1 = _density_row(pair.pstar, pair.w1)
    d2 = _density_row(pair.pstar, pair.w2)
    nx = len(p)
    xs, y1s, y2s = np.meshgrid(
        np.arange(nx), np.arange(pair.w1.output_size), np.arange(pair.w2.output_size),
        indexing="ij",
    )
    xs, y1s, y2s = xs.ravel(), y1s.ravel(), y2s.ravel()
    probs = p[xs] * pair.w1.matrix[xs, y1s] * pair.w2.matrix[xs, y2s]
    rows = [d1[xs, y1s], d2[xs, y2s]]
    thresholds = list(gammas)
    if impostor:
        xbar = np.repeat(np.arange(nx), len(xs))
        xs, y1s, y2s = np.tile(xs, nx), np.tile(y1s, nx), np.tile(y2s, nx)
        probs = np.tile(probs, nx) * p[xbar]
        rows = [d1[xs, y1s], d2[xs, y2s], d1[xbar, y1s], d2[xbar, y2s]]
        thresholds = list(gammas) + list(gammas)
    keep = probs > 0.0
    incs = np.vstack([row[keep] for row in rows])
    return montecarlo.WalkSystem(
        np.cumsum(probs[keep]),
        incs,
        np.asarray(thresholds, dtype=np.float64),
        n_primary=2,
    )


def _default_max_steps(pair: BroadcastPair, gammas) -> int:
    drift = min(pair.c1, pair.c2)
    if drift <= 0.0:
        raise ValueError("pair has nonpositive density drift; walks may never cross")
    return max(16, int(MAX_STEPS_DRIFT_FACTOR * max(gammas) / drift))


def simulate_stopping(
    pair: BroadcastPair,
    cfg: SimConfig,
    estimate_pairwise: bool = False,
    threads: int | None = None,
) -> StoppingEstimate:
    """Monte Carlo of both decoders' stopping times at the optimal input.

    Outputs at the two decoders are drawn conditionally independently given
    the common input symbol.  With ``estimate_pairwise`` an impostor codeword
    is scored against the same outputs to estimate P[tau_k >= impostor tau_k],
    the per-codeword pairwise error.
    """
    gammas = (cfg.gamma1, cfg.gamma2)
    max_steps = cfg.max_steps if cfg.max_steps is not None else _default_max_steps(pair, gammas)
    system = _stopping_system(pair, gammas, impostor=estimate_pairwise)
    hint = int(max(gammas) / max(min(pair.c1, pair.c2), 1e-12)) + 8
    taus = montecarlo.run_walks(
        system, cfg.trials, cfg.seed, max_steps, hint_steps=hint, threads=threads
    )
    censored = np.any(taus == montecarlo.CENSORED, axis=1)
    effective = np.where(taus == montecarlo.CENSORED, max_steps, taus)
    max_tau = np.maximum(effective[:, 0], effective[:, 1]).astype(np.float64)
    mean_max, se = montecarlo.mean_and_stderr(max_tau)
    est = dict(
        mean_max_tau=mean_max,
        std_error=se,
        mean_tau1=float(effective[:, 0].mean()),
        mean_tau2=float(effective[:, 1].mean()),
        trials=cfg.trials,
        censored_fraction=float(censored.mean()),
    )
    if estimate_pairwise:
        for k, name in ((0, "pairwise_error1"), (1, "pairwise_error2")):
            crossed = taus[:, k + 2] != montecarlo.CENSORED
            err = (crossed & (taus[:, k + 2] <= effective[:, k])).astype(np.float64)
            est[name] = montecarlo.mean_and_stderr(err)
    return StoppingEstimate(**est)


def stop_error_bound(
    gamma: float, q: float, m: float | None = None, log_m: float | None = None
) -> float:
    """Closed-form error bound q + (1 - q)(M - 1)e^{-gamma}, clipped to [0, 1].

    Pass ``log_m`` for codebook sizes too large to represent directly; the
    (M - 1)e^{-gamma} factor is then evaluated in log space.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if (m is None) == (log_m is None):
        raise ValueError("pass exactly one of m and log_m")
    if m is not None:
        if m < 1.0:
            raise ValueError("codebook size must be at least 1")
        pairwise = (m - 1.0) * math.exp(-gamma)
    else:
        pairwise = math.exp(log_m - gamma) - math.exp(-gamma)
    return min(1.0, max(0.0, q + (1.0 - q) * pairwise))


@dataclass(frozen=True)
class DesignPoint:
    """Outcome of the closed-form design recipe plus its Monte Carlo audit."""

    point: BoundPoint
    config: SimConfig
    estimate: StoppingEstimate
    log_m: float
    gamma: float
    q: float
    error_bound: float
    budget_respected: bool  # measured E[max tau] <= l_prime

    @property
    def l_std_error(self) -> float:
        return (1.0 - self.q) * self.estimate.std_error


def threshold_margin(pair: BroadcastPair, l_prime: float, r: int, b1: float) -> float:
    """Blocklength margin g(x) reserved for the max-of-two-walks overshoot."""
    x = pair.capacity * l_prime
    if x <= 1.0:
        raise RecipeInfeasible("effective budget C*l' must exceed 1")
    lead = math.sqrt((pair.v1 + pair.v2) / (2.0 * math.pi * pair.capacity**2))
    power = (r + 1.0) / (4.0 * r + 2.0)
    return lead * math.sqrt(x / pair.capacity) + b1 * x**power * math.log(x)


def design_achievable_point(
    pair: BroadcastPair,
    l_prime: float,
    epsilon: float,
    r: int = 3,
    b1: float = 1.0,
    trials: int = 10_000,
    seed: int = 0,
    max_steps: int | None = None,
    threads: int | None = None,
) -> DesignPoint:
    """Build an achievable (l, log M, eps) point from the closed-form recipe.

    The early-stop coin bias is q = (l'*eps - 1)/(l' - 1), the common
    threshold gamma = C*(l' - g(C*l')), and log M = gamma - log l'; these make
    the error bound collapse to eps exactly.  A Monte Carlo run then audits
    the budget E[max(tau1, tau2)] <= l' and supplies the measured average
    blocklength l = (1 - q) * E[max(tau1, tau2)].
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if l_prime <= 1.0 / epsilon:
        raise ValueError("l' must exceed 1/epsilon so the coin bias is nonnegative")
    if r < 3 or int(r) != r:
        raise ValueError("moment order r must be an integer >= 3")
    if pair.capacity <= 0.0:
        raise RecipeInfeasible("pair capacity must be positive")
    q = (l_prime * epsilon - 1.0) / (l_prime - 1.0)
    gamma = pair.capacity * (l_prime - threshold_margin(pair, l_prime, int(r), b1))
    if gamma <= 0.0:
        raise RecipeInfeasible(
            f"threshold {gamma:.3f} <= 0: l' too small for b1={b1:g}, r={r}"
        )
    log_m = gamma - math.log(l_prime)
    cfg = SimConfig(gamma1=gamma, gamma2=gamma, q=q, trials=trials, seed=seed, max_steps=max_steps)
    est = simulate_stopping(pair, cfg, threads=threads)
    l_value = (1.0 - q) * est.mean_max_tau
    point = BoundPoint(l_value, log_m, "achievability", certified=False)
    return DesignPoint(
        point=point,
        config=cfg,
        estimate=est,
        log_m=log_m,
        gamma=gamma,
        q=q,
        error_bound=stop_error_bound(gamma, q, log_m=log_m),
        budget_respected=est.mean_max_tau <= l_prime,
    )
