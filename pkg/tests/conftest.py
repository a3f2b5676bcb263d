"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's own computation paths:
brute-force enumeration over output sequences, grid search over input
distributions, straight-line reimplementations of the simulators.
"""

import itertools
import math

import numpy as np
import pytest

import vlsf


@pytest.fixture(scope="session")
def pair_bsc011():
    return vlsf.optimize_common_input(vlsf.bsc(0.11), vlsf.bsc(0.11))


@pytest.fixture(scope="session")
def pair_bsc0():
    return vlsf.optimize_common_input(vlsf.bsc(0.0), vlsf.bsc(0.0))


def brute_force_tail(counts, w, lam):
    """P[sum of per-symbol densities > lam] by enumerating all output tuples.

    Uses exact (unrounded) density values under the type's marginal; this is
    the ground truth the quantized computation must upper-bound.
    """
    t = sum(counts)
    if t == 0:
        return 1.0 if lam < 0.0 else 0.0
    symbols = [x for x, c in enumerate(counts) for _ in range(c)]
    marginal = (np.asarray(counts, dtype=float) / t) @ w.matrix
    total = 0.0
    for outputs in itertools.product(range(w.output_size), repeat=t):
        prob = 1.0
        value = 0.0
        for x, y in zip(symbols, outputs):
            wxy = w.matrix[x, y]
            if wxy == 0.0:
                prob = 0.0
                break
            prob *= wxy
            value += math.log(wxy) - math.log(marginal[y])
        if prob > 0.0 and value > lam:
            total += prob
    return total


def grid_search_capacity(w, points=1001):
    """Best mutual information over a 1-d grid of binary input distributions."""
    assert w.input_size == 2
    best_mi, best_p = -1.0, None
    for p in np.linspace(0.0, 1.0, points):
        dist = vlsf.InputDistribution(np.array([p, 1.0 - p]))
        mi = vlsf.channel_statistics(dist, w).mutual_information
        if mi > best_mi:
            best_mi, best_p = mi, p
    return best_mi, best_p


def straight_line_walk_sim(w_vals, z_vals, probs, gamma, trials, rng):
    """Independent reimplementation of the paired-walk simulation.

    Plain Python accumulation with numpy's default PCG stream; used as a
    3-sigma cross-check of the kernel-based simulator.
    """
    cum = np.cumsum(probs)
    maxes = np.empty(trials)
    for i in range(trials):
        s1 = s2 = 0.0
        n = t1 = t2 = 0
        while t1 == 0 or t2 == 0:
            k = int(np.searchsorted(cum, rng.random(), side="right"))
            k = min(k, len(probs) - 1)
            n += 1
            s1 += w_vals[k]
            s2 += z_vals[k]
            if t1 == 0 and s1 >= gamma:
                t1 = n
            if t2 == 0 and s2 >= gamma:
                t2 = n
        maxes[i] = max(t1, t2)
    return float(maxes.mean()), float(maxes.std(ddof=1) / math.sqrt(trials))
