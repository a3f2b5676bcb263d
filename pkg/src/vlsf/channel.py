"""Discrete memoryless channels and their single-letter statistics.

Everything downstream (tail bounds, simulators, expansion coefficients) is
driven by the objects defined here: a row-stochastic channel matrix, an input
distribution, the per-letter information density log(W(y|x)/PW(y)), and its
first three moments.  All logarithms are natural; rates are in nats.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CommonMaximizerViolation

ROW_SUM_TOL = 1e-12
NAT_PER_BIT = math.log(2.0)


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(values, dtype=dtype))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DMChannel:
    """A finite channel given by its transition matrix, rows indexed by input."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen_array(self.matrix)
        if m.ndim != 2:
            raise ValueError("channel matrix must be two-dimensional")
        if m.shape[0] < 2 or m.shape[1] < 2:
            raise ValueError("degenerate alphabet: need at least 2 inputs and 2 outputs")
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise ValueError("channel entries must lie in [0, 1]")
        rows = m.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > ROW_SUM_TOL):
            raise ValueError(f"channel rows must sum to 1 within {ROW_SUM_TOL:g}")
        object.__setattr__(self, "matrix", m)

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]

    def permuted_outputs(self, perm: Sequence[int]) -> "DMChannel":
        return DMChannel(self.matrix[:, list(perm)])

    def to_json(self) -> str:
        return json.dumps(
            {
                "input_size": self.input_size,
                "output_size": self.output_size,
                "rows": self.matrix.tolist(),
            }
        )


@dataclass(frozen=True)
class InputDistribution:
    """A probability vector over the channel input alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen_array(self.probs)
        if p.ndim != 1:
            raise ValueError("input distribution must be a vector")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(p.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"probabilities must sum to 1 within {ROW_SUM_TOL:g}")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n: int) -> "InputDistribution":
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class ChannelStatistics:
    """Mean, variance and third absolute central moment of the information density."""

    mutual_information: float  # nats
    info_variance: float  # nats^2
    third_abs_moment: float  # nats^3


@dataclass(frozen=True)
class BroadcastPair:
    """Two channels on a common input alphabet plus the shared optimal input.

    ``rho1``/``rho2`` are the fourth-root dispersion ratios (their product is 1
    whenever both variances are positive); ``v_geo`` is the geometric mean of
    the two dispersions.  ``common_maximizer_gap`` records how far apart the
    two independently optimized inputs were.
    """

    w1: DMChannel
    w2: DMChannel
    pstar: InputDistribution
    c1: float
    c2: float
    v1: float
    v2: float
    capacity: float
    rho1: float
    rho2: float
    v_geo: float
    common_maximizer_gap: float

    @property
    def symmetric_dispersion(self) -> bool:
        return self.v1 > 0 and self.v2 > 0 and abs(self.v1 - self.v2) <= 1e-9 * max(self.v1, self.v2)


# ---------------------------------------------------------------------------
# shorthand / file parsing
# ---------------------------------------------------------------------------


def bsc(p: float) -> DMChannel:
    """Binary symmetric channel with crossover probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("crossover probability must lie in [0, 1]")
    return DMChannel(np.array([[1.0 - p, p], [p, 1.0 - p]]))


def bec(e: float) -> DMChannel:
    """Binary erasure channel; outputs are (0, 1, erasure)."""
    if not 0.0 <= e <= 1.0:
        raise ValueError("erasure probability must lie in [0, 1]")
    return DMChannel(np.array([[1.0 - e, 0.0, e], [0.0, 1.0 - e, e]]))


def zchannel(d: float) -> DMChannel:
    """Z-channel: input 0 is noiseless, input 1 flips to 0 with probability d."""
    if not 0.0 <= d <= 1.0:
        raise ValueError("flip probability must lie in [0, 1]")
    return DMChannel(np.array([[1.0, 0.0], [d, 1.0 - d]]))


_SHORTHAND = {"bsc": bsc, "bec": bec, "zchan": zchannel}


def channel_from_json(text: str) -> DMChannel:
    obj = json.loads(text)
    rows = np.asarray(obj["rows"], dtype=np.float64)
    if "input_size" in obj and rows.shape[0] != int(obj["input_size"]):
        raise ValueError("input_size does not match the number of rows")
    if "output_size" in obj and rows.shape[1] != int(obj["output_size"]):
        raise ValueError("output_size does not match the row length")
    return DMChannel(rows)


def parse_channel(spec: str) -> DMChannel:
    """Parse "bsc:0.11" style shorthand, a JSON literal, or a JSON file path."""
    spec = spec.strip()
    if ":" in spec and not spec.startswith("{"):
        name, _, arg = spec.partition(":")
        name = name.lower()
        if name in _SHORTHAND:
            return _SHORTHAND[name](float(arg))
    if spec.startswith("{"):
        return channel_from_json(spec)
    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            return channel_from_json(fh.read())
    raise ValueError(f"unrecognized channel spec: {spec!r}")


# ---------------------------------------------------------------------------
# information density and its moments
# ---------------------------------------------------------------------------


def output_marginal(p: InputDistribution, w: DMChannel) -> np.ndarray:
    if len(p) != w.input_size:
        raise ValueError("input distribution and channel have mismatched alphabets")
    return p.probs @ w.matrix


def info_density(p: InputDistribution, w: DMChannel, x: int, y: int) -> float:
    """Per-letter density log(W(y|x)/PW(y)) in nats.

    Returns -inf when W(y|x) = 0.  A positive W(y|x) with a zero output
    marginal cannot happen for consistent inputs and is reported as corrupted
    state.
    """
    pw = output_marginal(p, w)
    wxy = float(w.matrix[x, y])
    pwy = float(pw[y])
    if wxy == 0.0:
        return -math.inf
    if pwy == 0.0:
        raise ValueError("W(y|x) > 0 but the output marginal is 0: corrupted state")
    return math.log(wxy) - math.log(pwy)


def _density_table(p_vec: np.ndarray, w: np.ndarray):
    """Joint weights and density values over the (x, y) support."""
    pw = p_vec @ w
    weights = p_vec[:, None] * w
    support = weights > 0.0
    logw = np.log(np.where(support, w, 1.0))
    logpw = np.log(np.where(pw > 0.0, pw, 1.0))
    dens = np.where(support, logw - logpw[None, :], 0.0)
    return weights, dens, support


def channel_statistics(p: InputDistribution, w: DMChannel) -> ChannelStatistics:
    """Exact finite-alphabet moments of the information density under P x W.

    Pairs with zero joint probability are skipped, so -inf densities never
    enter the sums.
    """
    weights, dens, support = _density_table(p.probs, w.matrix)
    wgt = weights[support]
    d = dens[support]
    mi = float(np.sum(wgt * d))
    centered = d - mi
    var = float(np.sum(wgt * centered * centered))
    third = float(np.sum(wgt * np.abs(centered) ** 3))
    # tiny negative round-off is clipped; genuine negatives cannot occur
    return ChannelStatistics(mi, max(var, 0.0), max(third, 0.0))


def mutual_information(p: InputDistribution, w: DMChannel) -> float:
    return channel_statistics(p, w).mutual_information


# ---------------------------------------------------------------------------
# capacity optimization
# ---------------------------------------------------------------------------


def _capacity_input(w: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000):
    """Alternating maximization of I(P, W) over the input simplex.

    Returns (argmax P, duality gap at exit).  The stopping rule is the
    standard capacity duality gap max_x D(W(.|x) || PW) - I(P, W), relative
    to max(1, I).
    """
    nx = w.shape[0]
    r = np.full(nx, 1.0 / nx)
    logw = np.where(w > 0.0, np.log(np.where(w > 0.0, w, 1.0)), 0.0)
    gap = math.inf
    for _ in range(max_iter):
        pw = r @ w
        cols = pw > 0.0
        logpw = np.where(cols, np.log(np.where(cols, pw, 1.0)), 0.0)
        # relative entropies D(W(.|x) || PW)
        d = np.sum(np.where(w > 0.0, w * (logw - logpw[None, :]), 0.0), axis=1)
        i_low = float(r @ d)
        gap = float(np.max(d) - i_low)
        if gap <= tol * max(1.0, i_low):
            break
        r = r * np.exp(d - np.max(d))
        r = r / r.sum()
    return r, gap


def _simplex_grid_check(w: np.ndarray, p_opt: np.ndarray, slack: float = 1e-6) -> None:
    """Coarse grid sweep guard for small alphabets; raises if the optimizer lost."""
    nx = w.shape[0]
    if nx > 3:
        return
    best = channel_statistics(InputDistribution(p_opt), DMChannel(w)).mutual_information
    steps = np.linspace(0.0, 1.0, 51)
    if nx == 2:
        cands = [np.array([a, 1.0 - a]) for a in steps]
    else:
        cands = [
            np.array([a, b, 1.0 - a - b])
            for a in steps
            for b in steps
            if a + b <= 1.0 + 1e-12
        ]
    for cand in cands:
        cand = np.clip(cand, 0.0, 1.0)
        cand = cand / cand.sum()
        mi = channel_statistics(InputDistribution(cand), DMChannel(w)).mutual_information
        if mi > best + slack:
            raise RuntimeError("capacity optimizer converged below a grid candidate")


def optimize_common_input(
    w1: DMChannel, w2: DMChannel, tolerance: float = 1e-4
) -> BroadcastPair:
    """Find the shared capacity-achieving input of two channels.

    Each channel is maximized independently; the sup-norm distance between
    the two maximizers is the ``common_maximizer_gap`` diagnostic.  When it
    exceeds ``tolerance`` the pair is rejected with
    :class:`CommonMaximizerViolation` since the two-decoder theory does not
    apply.  Uniqueness of the maximizer is assumed, not verified.
    """
    if w1.input_size != w2.input_size:
        raise ValueError("channels must share an input alphabet")
    p1, _ = _capacity_input(w1.matrix)
    p2, _ = _capacity_input(w2.matrix)
    _simplex_grid_check(w1.matrix, p1)
    _simplex_grid_check(w2.matrix, p2)
    gap = float(np.max(np.abs(p1 - p2)))
    if gap > tolerance:
        raise CommonMaximizerViolation(gap, tolerance)
    pstar = InputDistribution(p1)
    s1 = channel_statistics(pstar, w1)
    s2 = channel_statistics(pstar, w2)
    v1, v2 = s1.info_variance, s2.info_variance
    if v1 > 0.0 and v2 > 0.0:
        rho1 = (v1 / v2) ** 0.25
        rho2 = (v2 / v1) ** 0.25
    else:
        rho1 = rho2 = math.nan
    return BroadcastPair(
        w1=w1,
        w2=w2,
        pstar=pstar,
        c1=s1.mutual_information,
        c2=s2.mutual_information,
        v1=v1,
        v2=v2,
        capacity=min(s1.mutual_information, s2.mutual_information),
        rho1=rho1,
        rho2=rho2,
        v_geo=math.sqrt(v1 * v2),
        common_maximizer_gap=gap,
    )
