"""Exact upper tails of the accumulated information density over input types.

Given a composition (symbol counts) of a length-t input, the accumulated
density is a sum of t independent per-symbol atoms.  Atom values are rounded
onto a uniform grid; with upward rounding every reported tail probability is
a certified upper bound on the true one (each atom moves up by less than one
step, so the sum moves up by less than t steps).  The distribution itself is
assembled by binary-exponentiation convolution over the grid, with a
closed-form lattice shortcut for binary alphabets whose rows carry at most
two atoms.

All value arithmetic is carried out on integer grid indices; only masses are
floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _backend
from .channel import DMChannel, InputDistribution
from .errors import GridOverflow, TypeEnumerationOverflow

DEFAULT_STEP = 1e-5  # nats; cumulative shift t*step stays negligible at t ~ 1e4
DEFAULT_MAX_CELLS = 2**26
DEFAULT_TYPE_CAP = 10**5
MERGE_DRIFT_TOL = 1e-12
CLT_CONSTANT = 6.0  # Gaussian-estimate slack multiplier; results are approximate

ROUNDINGS = ("up", "down", "nearest")


class TailProbability(NamedTuple):
    """A tail value plus whether it is a certified upper bound."""

    value: float
    certified: bool


@dataclass(frozen=True)
class CompositionType:
    """Symbol counts of a length-t input sequence."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def t(self) -> int:
        return sum(self.counts)

    def distribution(self) -> InputDistribution:
        if self.t == 0:
            raise ValueError("empty composition has no distribution")
        return InputDistribution(np.asarray(self.counts, dtype=np.float64) / self.t)


@dataclass(frozen=True)
class QuantizedPMF:
    """A pmf supported on origin + step * {0, 1, ..., len(masses) - 1}."""

    origin: float
    step: float
    masses: np.ndarray

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError("grid step must be positive")
        m = np.ascontiguousarray(self.masses, dtype=np.float64)
        if np.any(m < 0.0):
            raise ValueError("masses must be nonnegative")
        if abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("masses must sum to 1 within 1e-9")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    def values(self) -> np.ndarray:
        return self.origin + self.step * np.arange(len(self.masses))

    def mean(self) -> float:
        return float(self.values() @ self.masses)

    def support(self):
        """(values, masses) restricted to the nonzero cells."""
        nz = np.nonzero(self.masses)[0]
        return self.origin + self.step * nz, self.masses[nz]


# ---------------------------------------------------------------------------
# composition enumeration
# ---------------------------------------------------------------------------


def composition_count(t: int, n_symbols: int) -> int:
    return math.comb(t + n_symbols - 1, n_symbols - 1)


def compositions(t: int, n_symbols: int) -> Iterator[CompositionType]:
    """All symbol-count vectors of total t, lexicographic in the first symbol."""

    def rec(prefix, remaining, slots):
        if slots == 1:
            yield CompositionType(prefix + (remaining,))
            return
        for c in range(remaining + 1):
            yield from rec(prefix + (c,), remaining - c, slots - 1)

    yield from rec((), t, n_symbols)


# ---------------------------------------------------------------------------
# sparse grid atoms
# ---------------------------------------------------------------------------


def _round_to_grid(values: np.ndarray, step: float, rounding: str) -> np.ndarray:
    q = values / step
    if rounding == "up":
        return np.ceil(q).astype(np.int64)
    if rounding == "down":
        return np.floor(q).astype(np.int64)
    if rounding == "nearest":
        return np.rint(q).astype(np.int64)
    raise ValueError(f"rounding must be one of {ROUNDINGS}")


def tail_cut_index(lam: float, step: float) -> int:
    """Largest grid index NOT in the strict tail {value > lam}.

    The relative slack covers the rounding error of the division, biasing
    near-boundary cells into the tail: the result can only be more
    conservative, never less.  An exactly representable quotient (e.g.
    lam = 0) stays sharp.
    """
    q = lam / step
    return int(math.floor(q - 2e-15 * abs(q)))


def _merge_atoms(idx: np.ndarray, mass: np.ndarray):
    """Sum masses of equal grid indices; refuses to renormalize drift."""
    before = float(mass.sum())
    uniq, inverse = np.unique(idx, return_inverse=True)
    merged = np.bincount(inverse, weights=mass, minlength=len(uniq))
    after = float(merged.sum())
    if abs(after - before) > MERGE_DRIFT_TOL * max(1.0, before):
        raise ValueError("mass drift while merging grid atoms exceeds 1e-12")
    return uniq, merged


def _check_cells(idx_min: int, idx_max: int, max_cells: int) -> None:
    span = int(idx_max) - int(idx_min) + 1
    if span > max_cells:
        raise GridOverflow(
            f"support needs {span} grid cells, cap is {max_cells}; coarsen the step"
        )


_DENSE_PRODUCT_LIMIT = 4_000_000


def _conv_atoms(a, b, max_cells: int):
    """Convolution of two sparse atom sets on the shared integer grid."""
    idx_a, m_a = a
    idx_b, m_b = b
    lo = int(idx_a[0]) + int(idx_b[0])
    hi = int(idx_a[-1]) + int(idx_b[-1])
    _check_cells(lo, hi, max_cells)
    if len(idx_a) * len(idx_b) <= _DENSE_PRODUCT_LIMIT:
        idx = (idx_a[:, None] + idx_b[None, :]).ravel()
        mass = (m_a[:, None] * m_b[None, :]).ravel()
        return _merge_atoms(idx, mass)
    # too many cross terms to materialize: accumulate densely over the span
    span = hi - lo + 1
    if span > _DENSE_PRODUCT_LIMIT * 8:
        raise GridOverflow(
            f"convolution needs {span} dense cells to stay within memory; coarsen the step"
        )
    dense = np.zeros(span)
    for shift, m in zip(idx_b, m_b):
        dense[idx_a + (int(shift) - lo)] += m_a * m
    nz = np.nonzero(dense)[0]
    return nz + lo, dense[nz]


def _power_atoms(atoms, n: int, max_cells: int):
    """n-fold self-convolution by binary exponentiation."""
    result = (np.zeros(1, dtype=np.int64), np.ones(1))
    base = atoms
    while n > 0:
        if n & 1:
            result = _conv_atoms(result, base, max_cells)
        n >>= 1
        if n:
            base = _conv_atoms(base, base, max_cells)
    return result


def _symbol_atoms(comp: CompositionType, w: DMChannel, x: int, step: float, rounding: str):
    """Grid atoms of one per-symbol density term under the type's marginal."""
    row = w.matrix[x]
    marginal = comp.distribution().probs @ w.matrix
    support = np.nonzero(row > 0.0)[0]
    values = np.log(row[support]) - np.log(marginal[support])
    idx = _round_to_grid(values, step, rounding)
    return _merge_atoms(idx, row[support].copy())


def _atoms_to_pmf(idx: np.ndarray, mass: np.ndarray, step: float, max_cells: int) -> QuantizedPMF:
    _check_cells(idx[0], idx[-1], max_cells)
    dense = np.zeros(int(idx[-1]) - int(idx[0]) + 1)
    dense[idx - idx[0]] = mass
    return QuantizedPMF(origin=float(idx[0]) * step, step=step, masses=dense)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def symbol_density_pmf(
    comp: CompositionType,
    w: DMChannel,
    x: int,
    step: float = DEFAULT_STEP,
    rounding: str = "up",
    max_cells: int = DEFAULT_MAX_CELLS,
) -> QuantizedPMF:
    """Law of one symbol's density log(W(Y|x)/PW(Y)), Y ~ W(.|x).

    The marginal PW is taken under the normalized composition, which must use
    symbol x at least once.  Zero-probability outputs contribute nothing, so
    the -inf density value never appears.
    """
    if len(comp.counts) != w.input_size:
        raise ValueError("composition length must match the input alphabet")
    if comp.counts[x] <= 0:
        raise ValueError("composition must actually use symbol x")
    idx, mass = _symbol_atoms(comp, w, x, step, rounding)
    return _atoms_to_pmf(idx, mass, step, max_cells)


def type_density_pmf(
    comp: CompositionType,
    w: DMChannel,
    step: float = DEFAULT_STEP,
    rounding: str = "up",
    max_cells: int = DEFAULT_MAX_CELLS,
) -> QuantizedPMF:
    """Full law of the length-t accumulated density for one composition."""
    if comp.t == 0:
        return QuantizedPMF(origin=0.0, step=step, masses=np.ones(1))
    atoms = _type_atoms(comp, w, step, rounding, max_cells)
    return _atoms_to_pmf(atoms[0], atoms[1], step, max_cells)


def _type_atoms(comp, w, step, rounding, max_cells):
    total = (np.zeros(1, dtype=np.int64), np.ones(1))
    for x, count in enumerate(comp.counts):
        if count == 0:
            continue
        sym = _symbol_atoms(comp, w, x, step, rounding)
        total = _conv_atoms(total, _power_atoms(sym, count, max_cells), max_cells)
    return total


def type_tail_prob(
    comp: CompositionType,
    w: DMChannel,
    lam: float,
    step: float = DEFAULT_STEP,
    rounding: str = "up",
    max_cells: int = DEFAULT_MAX_CELLS,
) -> TailProbability:
    """P[accumulated density > lam] for one composition, on the rounded grid.

    With upward rounding the result upper-bounds the true tail and exceeds it
    by at most the mass the true law puts in (lam - t*step, lam].  Length 0
    uses the empty-sum convention (the density is exactly 0).
    """
    certified = rounding == "up"
    if comp.t == 0:
        return TailProbability(1.0 if lam < 0.0 else 0.0, certified)
    if lam == -math.inf:
        return TailProbability(1.0, certified)
    if lam == math.inf:
        return TailProbability(0.0, certified)
    idx, mass = _type_atoms(comp, w, step, rounding, max_cells)
    cut = tail_cut_index(lam, step)
    value = float(mass[idx > cut].sum())
    return TailProbability(min(value, 1.0), certified)


def _two_symbol_fast_path(w: DMChannel) -> bool:
    if w.input_size != 2:
        return False
    return all(np.count_nonzero(w.matrix[x] > 0.0) <= 2 for x in range(2))


def _density_value_cap(w: DMChannel, t: int) -> float:
    """Upper bound on any per-symbol density value under any length-t type.

    The marginal at output y is at least the smallest positive column entry
    when every input reaches y, and at least W(y|x)/t through the symbol's
    own count otherwise; either way log(W(y|x)/PW(y)) is capped.
    """
    m = w.matrix
    cap = -math.inf
    needs_log_t = False
    for y in range(w.output_size):
        col = m[:, y]
        pos = col[col > 0.0]
        if pos.size == 0:
            continue
        if pos.size == w.input_size:
            cap = max(cap, math.log(float(pos.max())) - math.log(float(pos.min())))
        else:
            needs_log_t = True
    if needs_log_t:
        cap = max(cap, math.log(max(t, 1)))
    return cap


def _clt_tails(t: int, w: DMChannel, lam: float) -> np.ndarray:
    """Gaussian-estimate tails for every composition, vectorized.

    Adds the universal slack CLT_CONSTANT * T / (sqrt(t) V^{3/2}); this keeps
    the estimate on the conservative side but is not certified.
    """
    n = w.input_size
    counts = np.array([c.counts for c in compositions(t, n)], dtype=np.float64)
    p = counts / t
    pw = p @ w.matrix
    wm = w.matrix[None, :, :]
    joint = p[:, :, None] * wm
    support = joint > 0.0
    logw = np.log(np.where(wm > 0.0, wm, 1.0))
    logpw = np.log(np.where(pw > 0.0, pw, 1.0))
    dens = np.where(support, logw - logpw[:, None, :], 0.0)
    mi = np.sum(joint * dens, axis=(1, 2))
    centered = np.where(support, dens - mi[:, None, None], 0.0)
    var = np.sum(joint * centered**2, axis=(1, 2))
    third = np.sum(joint * np.abs(centered) ** 3, axis=(1, 2))

    tails = np.empty(len(counts))
    degen = var <= 0.0
    tails[degen] = (t * mi[degen] > lam).astype(np.float64)
    ok = ~degen
    if np.any(ok):
        from scipy.special import ndtr

        z = (lam - t * mi[ok]) / np.sqrt(t * var[ok])
        slack = CLT_CONSTANT * third[ok] / (math.sqrt(t) * var[ok] ** 1.5)
        tails[ok] = np.clip(ndtr(-z) + slack, 0.0, 1.0)
    return tails


def max_tail_over_types(
    t: int,
    w: DMChannel,
    lam: float,
    mode: str = "exact",
    step: float = DEFAULT_STEP,
    rounding: str = "up",
    max_cells: int = DEFAULT_MAX_CELLS,
    type_cap: int = DEFAULT_TYPE_CAP,
) -> TailProbability:
    """Maximum of the per-composition tail over all length-t compositions.

    Exact mode is certified (upward rounding); clt mode trades certification
    for speed via the Gaussian estimate and is flagged accordingly.
    """
    if t == 0:
        return TailProbability(1.0 if lam < 0.0 else 0.0, mode == "exact" and rounding == "up")
    if mode == "clt":
        if composition_count(t, w.input_size) > type_cap:
            raise TypeEnumerationOverflow(
                f"{composition_count(t, w.input_size)} compositions exceed cap {type_cap}"
            )
        return TailProbability(float(_clt_tails(t, w, lam).max()), False)
    if mode != "exact":
        raise ValueError("mode must be 'exact' or 'clt'")
    n_types = composition_count(t, w.input_size)
    if n_types > type_cap:
        raise TypeEnumerationOverflow(f"{n_types} compositions exceed cap {type_cap}")
    if lam == -math.inf:
        return TailProbability(1.0, rounding == "up")
    if lam == math.inf:
        return TailProbability(0.0, rounding == "up")
    if lam >= t * (_density_value_cap(w, t) + step):
        # beyond the largest reachable grid value: every composition's tail is 0
        return TailProbability(0.0, rounding == "up")
    if rounding == "up" and _two_symbol_fast_path(w):
        value, _ = _backend.max_tail_two_symbol(w.matrix, t, lam, step)
        return TailProbability(float(value), True)
    best = 0.0
    for comp in compositions(t, w.input_size):
        best = max(best, type_tail_prob(comp, w, lam, step, rounding, max_cells).value)
        if best >= 1.0:
            break
    return TailProbability(best, rounding == "up")
