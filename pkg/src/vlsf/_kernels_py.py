"""Pure-numpy fallback for the hot kernels.

Mirrors the compiled extension in ``_kernels.pyx``.  The walk kernel is
bit-compatible with the compiled one (same uniform stream consumption, same
sequential-addition rounding via ``cumsum``); the tail kernel agrees to
floating-point noise.  Selection happens in ``_backend``.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "fallback"


def walk_chunk(u, cum, incs, sums, taus, thresholds, n_start, n_primary):
    """Advance all pending walks of one trial across a chunk of uniforms.

    Each uniform drives one time step: the atom index is the first position
    where ``cum`` exceeds it, and every pending walk adds its increment for
    that atom.  A walk whose running sum reaches its threshold records the
    1-based global step in ``taus``.  The trial ends once the first
    ``n_primary`` walks have all stopped; the remaining observer walks only
    count crossings that happen up to that step.  Returns True when every
    primary walk has stopped.
    """
    n_atoms = len(cum)
    idx = np.searchsorted(cum, u, side="right")
    np.minimum(idx, n_atoms - 1, out=idx)
    for w in range(len(thresholds)):
        if taus[w] >= 0:
            continue
        # seeding cumsum with the carried sum reproduces sequential rounding
        path = np.cumsum(np.concatenate(([sums[w]], incs[w].take(idx))))[1:]
        hits = np.nonzero(path >= thresholds[w])[0]
        if hits.size:
            taus[w] = n_start + int(hits[0]) + 1
        sums[w] = path[-1]
    done = bool(np.all(taus[:n_primary] >= 0))
    if done:
        # observers are only observable until the last primary crossing
        t_end = int(taus[:n_primary].max())
        for w in range(n_primary, len(thresholds)):
            if taus[w] > t_end:
                taus[w] = -1
    return done


def _binom_masses(n, p):
    """Binomial(n, p) pmf via the ratio recurrence, seeded at the mode."""
    if n == 0:
        return np.ones(1)
    q = 1.0 - p
    j0 = min(max(int((n + 1) * p), 0), n)
    log_seed = (
        math.lgamma(n + 1)
        - math.lgamma(j0 + 1)
        - math.lgamma(n - j0 + 1)
        + j0 * math.log(p)
        + (n - j0) * math.log(q)
    )
    m = np.zeros(n + 1)
    m[j0] = math.exp(log_seed)
    j = np.arange(n, dtype=np.float64)
    up = ((n - j) / (j + 1.0)) * (p / q)  # m[j+1] / m[j]
    if j0 < n:
        m[j0 + 1 :] = m[j0] * np.cumprod(up[j0:])
    if j0 > 0:
        down = 1.0 / up[:j0]
        m[:j0] = (m[j0] * np.cumprod(down[::-1]))[::-1]
    return m


def _row_lattice(row, pw, step, count):
    """Grid atoms of one symbol repeated ``count`` times.

    Returns (base, d, p, n) describing values base + k*d for k = 0..n with
    Binomial(n, p) masses; d == 0 or n == 0 collapse to a point mass at
    ``base``.  Upward value rounding throughout.
    """
    support = np.nonzero(row > 0.0)[0]
    vals = np.log(row[support]) - np.log(pw[support])
    idxs = np.ceil(vals / step).astype(np.int64)
    if count == 0:
        return 0, 0, 0.0, 0
    if len(support) == 1:
        return count * int(idxs[0]), 0, 0.0, 0
    hi, lo = (0, 1) if idxs[0] >= idxs[1] else (1, 0)
    d = int(idxs[hi] - idxs[lo])
    base = count * int(idxs[lo])
    if d == 0:
        return base, 0, 0.0, 0
    p_hi = float(row[support[hi]])
    return base, d, p_hi, count


def max_tail_two_symbol(w, t, lam, step):
    """Max over binary-alphabet compositions of the certified upper tail.

    ``w`` is a 2 x ny row-stochastic matrix whose rows each have at most two
    positive entries, so the length-t accumulated density under any
    composition is a sum of two binomial lattices.  Values are rounded up
    onto the grid; the returned probability upper-bounds the true tail for
    every composition count.
    """
    if t == 0:
        return (1.0 if lam < 0.0 else 0.0), 0
    q = lam / step
    cut = math.floor(q - 2e-15 * abs(q))  # tail := indices > cut; slack covers fp division
    w = np.asarray(w, dtype=np.float64)
    best = -1.0
    best_a = 0
    for a in range(t + 1):
        b = t - a
        pw = (a * w[0] + b * w[1]) / t
        base_a, d_a, p_a, n_a = _row_lattice(w[0], pw, step, a)
        base_b, d_b, p_b, n_b = _row_lattice(w[1], pw, step, b)
        if n_a == 0:
            m_a = np.ones(1)
            vals_a = np.array([base_a], dtype=np.int64)
            miss_a = 0.0
        else:
            m_a = _binom_masses(n_a, p_a)
            vals_a = base_a + d_a * np.arange(n_a + 1, dtype=np.int64)
            miss_a = max(0.0, 1.0 - float(m_a.sum()))
        resid = cut - base_b - vals_a
        if n_b == 0:
            tail = float(m_a[resid < 0].sum()) + miss_a
        else:
            m_b = _binom_masses(n_b, p_b)
            miss_b = max(0.0, 1.0 - float(m_b.sum()))
            suffix = np.concatenate([np.cumsum(m_b[::-1])[::-1], [0.0]])
            kmin = np.floor_divide(resid, d_b) + 1
            np.clip(kmin, 0, n_b + 1, out=kmin)
            tail = float(m_a @ suffix[kmin]) + miss_b * float(m_a.sum()) + miss_a
        if tail > best:
            best = tail
            best_a = a
    return min(best, 1.0), best_a
