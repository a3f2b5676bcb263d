# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: walk stepping and the binary-alphabet tail scan.

Semantics match ``_kernels_py`` exactly; the walk kernel is bit-compatible
(same atom lookup, same sequential addition order), the tail kernel agrees to
floating-point noise.
"""

import numpy as np

from libc.math cimport ceil, exp, fabs, floor, lgamma, log

NAME = "compiled"


def walk_chunk(const double[::1] u, const double[::1] cum, const double[:, ::1] incs,
               double[::1] sums, long long[::1] taus,
               const double[::1] thresholds, long long n_start, long long n_primary):
    """Advance all pending walks of one trial across a chunk of uniforms.

    The trial ends when the first ``n_primary`` walks have all crossed;
    observer walks past that count only record crossings up to that step.
    """
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t n_walks = thresholds.shape[0]
    cdef Py_ssize_t n_atoms = cum.shape[0]
    cdef Py_ssize_t i, wk, lo, hi, mid
    cdef double uu, s
    cdef bint all_done = False
    with nogil:
        for i in range(m):
            uu = u[i]
            lo = 0
            hi = n_atoms
            while lo < hi:
                mid = (lo + hi) >> 1
                if cum[mid] <= uu:
                    lo = mid + 1
                else:
                    hi = mid
            if lo >= n_atoms:
                lo = n_atoms - 1
            for wk in range(n_walks):
                if taus[wk] < 0:
                    s = sums[wk] + incs[wk, lo]
                    sums[wk] = s
                    if s >= thresholds[wk]:
                        taus[wk] = n_start + i + 1
            all_done = True
            for wk in range(n_primary):
                if taus[wk] < 0:
                    all_done = False
                    break
            if all_done:
                break
    return bool(all_done)


cdef inline long long _fdiv(long long n, long long d) nogil:
    # floor division, d > 0
    cdef long long q = n / d
    if n % d != 0 and n < 0:
        q -= 1
    return q


cdef inline double _binom_fill(double* m, long long n, double p) nogil:
    """Fill Binomial(n, p) masses via the mode-seeded ratio recurrence.

    Returns the mass actually placed; the (provably tiny) residual is the
    caller's to account on the conservative side.
    """
    cdef double q = 1.0 - p
    cdef long long j0 = <long long>((n + 1) * p)
    cdef long long j
    cdef double total
    if j0 < 0:
        j0 = 0
    if j0 > n:
        j0 = n
    m[j0] = exp(lgamma(n + 1.0) - lgamma(j0 + 1.0) - lgamma(n - j0 + 1.0)
                + j0 * log(p) + (n - j0) * log(q))
    for j in range(j0, n):
        m[j + 1] = m[j] * ((n - j) / (j + 1.0)) * (p / q)
    for j in range(j0, 0, -1):
        m[j - 1] = m[j] * (j / (n - j + 1.0)) * (q / p)
    total = 0.0
    for j in range(n + 1):
        total += m[j]
    return total


def max_tail_two_symbol(const double[:, ::1] w, long long t, double lam, double step):
    """Max over binary-alphabet compositions of the certified upper tail.

    Rows of ``w`` must each carry at most two positive entries; the caller
    checks this and falls back to the generic convolution path otherwise.
    """
    if t == 0:
        return (1.0 if lam < 0.0 else 0.0), 0

    sup0 = np.nonzero(np.asarray(w)[0] > 0.0)[0]
    sup1 = np.nonzero(np.asarray(w)[1] > 0.0)[0]
    if len(sup0) > 2 or len(sup1) > 2:
        raise ValueError("rows must have at most two positive entries")

    cdef long long s00 = sup0[0]
    cdef long long s01 = sup0[-1]
    cdef long long s10 = sup1[0]
    cdef long long s11 = sup1[-1]
    cdef bint two0 = len(sup0) == 2
    cdef bint two1 = len(sup1) == 2
    cdef double lw00 = log(w[0, s00])
    cdef double lw01 = log(w[0, s01]) if two0 else 0.0
    cdef double lw10 = log(w[1, s10])
    cdef double lw11 = log(w[1, s11]) if two1 else 0.0

    buf = np.empty((3, t + 2), dtype=np.float64)
    cdef double[:, ::1] bufv = buf
    cdef double* m_a = &bufv[0, 0]
    cdef double* m_b = &bufv[1, 0]
    cdef double* s_b = &bufv[2, 0]

    cdef double qq = lam / step
    cdef long long cut = <long long>floor(qq - 2e-15 * fabs(qq))

    cdef long long a, b, j, k, i1, i2, kmin
    cdef long long base_a, d_a, n_a, base_b, d_b, n_b, v_a
    cdef double p_a, p_b, pw1, pw2, tail, miss_a, miss_b, acc
    cdef double best = -1.0
    cdef long long best_a = 0

    with nogil:
        for a in range(t + 1):
            b = t - a

            # lattice of the symbol-0 part: values base_a + j*d_a, Binomial(n_a, p_a)
            base_a = 0
            d_a = 0
            p_a = 0.0
            n_a = 0
            if a > 0:
                pw1 = (a * w[0, s00] + b * w[1, s00]) / t
                i1 = <long long>ceil((lw00 - log(pw1)) / step)
                if two0:
                    pw2 = (a * w[0, s01] + b * w[1, s01]) / t
                    i2 = <long long>ceil((lw01 - log(pw2)) / step)
                    if i1 == i2:
                        base_a = a * i1
                    elif i1 > i2:
                        base_a = a * i2
                        d_a = i1 - i2
                        p_a = w[0, s00]
                        n_a = a
                    else:
                        base_a = a * i1
                        d_a = i2 - i1
                        p_a = w[0, s01]
                        n_a = a
                else:
                    base_a = a * i1

            base_b = 0
            d_b = 0
            p_b = 0.0
            n_b = 0
            if b > 0:
                pw1 = (a * w[0, s10] + b * w[1, s10]) / t
                i1 = <long long>ceil((lw10 - log(pw1)) / step)
                if two1:
                    pw2 = (a * w[0, s11] + b * w[1, s11]) / t
                    i2 = <long long>ceil((lw11 - log(pw2)) / step)
                    if i1 == i2:
                        base_b = b * i1
                    elif i1 > i2:
                        base_b = b * i2
                        d_b = i1 - i2
                        p_b = w[1, s10]
                        n_b = b
                    else:
                        base_b = b * i1
                        d_b = i2 - i1
                        p_b = w[1, s11]
                        n_b = b
                else:
                    base_b = b * i1

            miss_a = 0.0
            if n_a > 0:
                acc = _binom_fill(m_a, n_a, p_a)
                if acc < 1.0:
                    miss_a = 1.0 - acc
            else:
                m_a[0] = 1.0

            tail = miss_a
            if n_b > 0:
                acc = _binom_fill(m_b, n_b, p_b)
                miss_b = 1.0 - acc if acc < 1.0 else 0.0
                s_b[n_b + 1] = 0.0
                for k in range(n_b, -1, -1):
                    s_b[k] = s_b[k + 1] + m_b[k]
                for j in range(n_a + 1):
                    v_a = base_a + j * d_a
                    kmin = _fdiv(cut - base_b - v_a, d_b) + 1
                    if kmin < 0:
                        kmin = 0
                    elif kmin > n_b + 1:
                        kmin = n_b + 1
                    tail += m_a[j] * (s_b[kmin] + miss_b)
            else:
                for j in range(n_a + 1):
                    v_a = base_a + j * d_a
                    if v_a + base_b > cut:
                        tail += m_a[j]

            if tail > best:
                best = tail
                best_a = a

    if best > 1.0:
        best = 1.0
    return best, int(best_a)
