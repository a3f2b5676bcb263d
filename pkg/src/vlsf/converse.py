"""Converse side: how long any stop-feedback code must run on average.

For each time t the probability that both decoders have stopped by t is
bounded by L_t, a product/minimum combination of per-channel maximum tail
probabilities at a threshold that shrinks with t.  Summing (1 - L_t)^+ lower
bounds the average blocklength of every code with the given codebook size and
error rate; inverting that sum by bisection caps the log codebook size
attainable at a target average blocklength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import tailprob
from .channel import BroadcastPair
from .errors import BracketFailure
from .tailprob import DEFAULT_MAX_CELLS, DEFAULT_STEP, DEFAULT_TYPE_CAP

DEFAULT_DELTA = 1e-3  # slack in the threshold; effect on the bound is O(delta)
DEFAULT_ZERO_RUN = 64
DEFAULT_T_CEILING = 200_000
BISECT_TOL = 1e-3  # nats


@dataclass(frozen=True)
class BoundPoint:
    """One (average blocklength, log codebook size) point with provenance."""

    avg_blocklength: float
    log_m: float
    kind: str  # "converse" | "achievability" | "asymptotic"
    certified: bool

    def __post_init__(self):
        if self.avg_blocklength < 0.0:
            raise ValueError("average blocklength cannot be negative")
        if self.kind not in ("converse", "achievability", "asymptotic"):
            raise ValueError(f"unknown bound kind: {self.kind}")

    @property
    def log_m_bits(self) -> float:
        return self.log_m / math.log(2.0)


@dataclass(frozen=True)
class ConverseConfig:
    """Inputs of the converse evaluation.

    ``log_m`` is the natural log of the codebook size and must exceed 1 so
    that log log M is defined.  ``t_max`` seeds the summation horizon; the
    sum auto-extends until a long run of zero summands regardless.
    """

    log_m: float
    epsilon: float
    delta: float = DEFAULT_DELTA
    t_max: int | None = None
    tail_mode: str = "exact"
    step: float = DEFAULT_STEP
    type_cap: int = DEFAULT_TYPE_CAP
    max_cells: int = DEFAULT_MAX_CELLS
    zero_run: int = DEFAULT_ZERO_RUN
    t_ceiling: int = DEFAULT_T_CEILING

    def __post_init__(self):
        if not self.log_m > 1.0:
            raise ValueError("log M must exceed 1 (codebook larger than e)")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if self.tail_mode not in ("exact", "clt"):
            raise ValueError("tail_mode must be 'exact' or 'clt'")
        if not self.step > 0.0:
            raise ValueError("step must be positive")

    @classmethod
    def for_codebook(cls, m: float, epsilon: float, **kwargs) -> "ConverseConfig":
        return cls(log_m=math.log(m), epsilon=epsilon, **kwargs)

    @property
    def epsilon_m(self) -> float:
        """Inflated error parameter epsilon + 1/log M used inside the bound."""
        return self.epsilon + 1.0 / self.log_m


def log_threshold(cfg: ConverseConfig, t: int, input_size: int) -> float:
    """Density threshold at time t: log M - log log M - delta - (|X|-1) log(t+1)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return (
        cfg.log_m
        - math.log(cfg.log_m)
        - cfg.delta
        - (input_size - 1) * math.log(t + 1.0)
    )


def stop_prob_bound(cfg: ConverseConfig, pair: BroadcastPair, t: int) -> tailprob.TailProbability:
    """Upper bound L_t on P[both decoders stopped by time t]; may exceed 1.

    Upper-bounded tails only push L_t up, which keeps the blocklength lower
    bound valid, so the certified flag of the tail mode carries over.
    """
    lam = log_threshold(cfg, t, pair.w1.input_size)
    kwargs = dict(
        mode=cfg.tail_mode, step=cfg.step, max_cells=cfg.max_cells, type_cap=cfg.type_cap
    )
    tail1 = tailprob.max_tail_over_types(t, pair.w1, lam, **kwargs)
    if pair.w1.matrix is pair.w2.matrix or np.array_equal(pair.w1.matrix, pair.w2.matrix):
        tail2 = tail1
    else:
        tail2 = tailprob.max_tail_over_types(t, pair.w2, lam, **kwargs)
    eps_m = cfg.epsilon_m
    value = tail1.value * tail2.value + eps_m * (1.0 + min(tail1.value, tail2.value))
    return tailprob.TailProbability(value, tail1.certified and tail2.certified)


@dataclass(frozen=True)
class ConverseBound:
    """Partial sum of (1 - L_t)^+ with how the summation stopped.

    Every partial sum is itself a valid lower bound on the average
    blocklength because the summands are nonnegative.
    """

    value: float
    t_stop: int
    stopping_rule: str  # "zero-run" | "ceiling" | "vacuous" | "abort"
    certified: bool


def min_avg_blocklength(
    cfg: ConverseConfig, pair: BroadcastPair, abort_above: float | None = None
) -> ConverseBound:
    """Lower bound on the average blocklength of any admissible code.

    Sums (1 - L_t)^+ from t = 0, stopping after ``zero_run`` consecutive zero
    summands (always valid since the summands are nonnegative: early
    truncation can only weaken the bound) or at the ceiling.  An explicit
    ``t_max`` acts as a minimum horizon.  ``abort_above`` short-circuits once
    the partial sum exceeds it (used by the bisection predicate, where only
    the comparison matters).
    """
    if cfg.epsilon_m >= 1.0:
        return ConverseBound(0.0, 0, "vacuous", True)
    min_t = cfg.t_max if cfg.t_max is not None else 0
    total = 0.0
    zeros = 0
    certified = True
    t = 0
    while True:
        l_t = stop_prob_bound(cfg, pair, t)
        certified = certified and l_t.certified
        term = max(0.0, 1.0 - l_t.value)
        total += term
        zeros = zeros + 1 if term == 0.0 else 0
        if abort_above is not None and total > abort_above:
            return ConverseBound(total, t, "abort", certified)
        if zeros >= cfg.zero_run and t >= min_t:
            return ConverseBound(total, t, "zero-run", certified)
        if t >= cfg.t_ceiling:
            return ConverseBound(total, t, "ceiling", certified)
        t += 1


def _seed_log_m(l_target: float, epsilon: float, pair: BroadcastPair) -> float | None:
    """Gaussian-expansion estimate of the inversion answer, used only to seed
    the bisection bracket (endpoint checks below keep the result exact)."""
    if not (pair.v1 > 0.0 and pair.v2 > 0.0):
        return None
    from .asym import coupled_gauss_quantile, expected_min_gauss, expected_min_max_gauss

    c, v = pair.capacity, pair.v_geo
    y = coupled_gauss_quantile(epsilon, pair.rho1, pair.rho2)
    e_max = expected_min_max_gauss(y, pair.rho1, pair.rho2)
    e_single = min(expected_min_gauss(y, pair.rho1), expected_min_gauss(y, pair.rho2))
    log_m = c * l_target / (1.0 - epsilon)
    for _ in range(3):
        eps_m = epsilon + 1.0 / max(log_m, 2.0)
        bracket = e_max - eps_m * (2.0 * y - e_single)
        # solve (1-eps_m)/C * lam + bracket * sqrt(V lam / C^3) = l for lam
        a_coef = (1.0 - eps_m) / c
        b_coef = bracket * math.sqrt(v / c**3)
        disc = b_coef * b_coef + 4.0 * a_coef * l_target
        if disc <= 0.0:
            return None
        sqrt_lam = (-b_coef + math.sqrt(disc)) / (2.0 * a_coef)
        lam = sqrt_lam * sqrt_lam
        log_m = lam + math.log(max(log_m, 2.0)) + math.log(lam / c + 1.0)
    return log_m


@dataclass(frozen=True)
class InversionResult:
    """Largest admissible log codebook size at a target average blocklength."""

    log_m: float
    certified: bool
    at_bracket_top: bool
    method: str  # "bisection" | "grid-scan"

    def point(self, l_target: float) -> BoundPoint:
        return BoundPoint(l_target, self.log_m, "converse", self.certified)


def max_log_codebook(
    l_target: float,
    epsilon: float,
    pair: BroadcastPair,
    delta: float = DEFAULT_DELTA,
    tail_mode: str = "exact",
    step: float = DEFAULT_STEP,
    type_cap: int = DEFAULT_TYPE_CAP,
    max_cells: int = DEFAULT_MAX_CELLS,
    t_ceiling: int = DEFAULT_T_CEILING,
) -> InversionResult:
    """Invert the blocklength bound: the largest log M it cannot rule out.

    The bound is treated as monotone in log M inside the bisection; a final
    bracketing check re-evaluates at the answer and just above it, and a
    coarse grid scan takes over if monotonicity fails there.  Any log M whose
    bound stays at or below ``l_target`` remains admissible, so the returned
    value is a valid cap in either case.
    """
    if l_target <= 0.0:
        raise ValueError("l_target must be positive")
    if pair.capacity <= 0.0:
        raise ValueError("pair has zero capacity; every rate bound is trivial")

    def make_cfg(log_m: float) -> ConverseConfig:
        return ConverseConfig(
            log_m=log_m,
            epsilon=epsilon,
            delta=delta,
            tail_mode=tail_mode,
            step=step,
            type_cap=type_cap,
            max_cells=max_cells,
            t_ceiling=t_ceiling,
        )

    certified = tail_mode == "exact"

    def feasible(log_m: float) -> bool:
        bound = min_avg_blocklength(make_cfg(log_m), pair, abort_above=l_target)
        return bound.value <= l_target

    lo = math.log(3.0)
    hi = max(pair.capacity * l_target * 10.0, lo + 1.0)
    if not feasible(lo):
        return InversionResult(lo, certified, False, "bisection")
    if feasible(hi):
        return InversionResult(hi, certified, True, "bisection")
    # two probes around the Gaussian seed shrink the bracket like ordinary
    # bisection steps, so a poor seed costs nothing but these evaluations
    seed = _seed_log_m(l_target, epsilon, pair)
    a, b = lo, hi
    if seed is not None:
        for probe in (seed - 6.0, seed + 6.0):
            if a < probe < b:
                if feasible(probe):
                    a = probe
                else:
                    b = probe
    while b - a > BISECT_TOL:
        mid = 0.5 * (a + b)
        if feasible(mid):
            a = mid
        else:
            b = mid
    # bracketing check: the answer must be admissible and +0.01 must not be
    if feasible(a) and not feasible(a + 0.01):
        return InversionResult(a, certified, False, "bisection")
    # monotonicity lost: coarse scan from the top, keep the largest admissible
    grid = np.linspace(hi, lo, 201)
    for log_m in grid:
        if feasible(float(log_m)):
            return InversionResult(float(log_m), certified, False, "grid-scan")
    raise BracketFailure("no admissible log M found on the fallback grid")
