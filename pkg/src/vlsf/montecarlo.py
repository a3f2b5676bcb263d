"""Seeded Monte Carlo driver for threshold-crossing random walks.

Every trial owns a counter-based substream: a Philox generator keyed by
(seed, trial index).  Trials are therefore independent of execution order and
of the worker count, and a run is reproducible bit-for-bit from (system,
trials, seed) alone.  Several walks advance in lockstep within a trial,
sharing one atom draw per step; each walk stops the first time its running
sum reaches its threshold (step 0 counts as crossed when the threshold is
non-positive, matching the empty-sum convention).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend

THREAD_ENV_VAR = "VLSF_THREADS"
CENSORED = -1  # tau sentinel for walks that never crossed within max_steps


@dataclass(frozen=True)
class WalkSystem:
    """Joint increment law of several coupled walks.

    ``cum`` is the cumulative atom distribution (last entry 1), ``increments``
    has one row per walk and one column per atom, ``thresholds`` one crossing
    level per walk.  A trial ends once the first ``n_primary`` walks have all
    crossed; any further rows are observers whose crossings are recorded only
    up to that point.
    """

    cum: np.ndarray
    increments: np.ndarray
    thresholds: np.ndarray
    n_primary: int | None = None

    def __post_init__(self):
        cum = np.ascontiguousarray(self.cum, dtype=np.float64)
        incs = np.ascontiguousarray(self.increments, dtype=np.float64)
        thr = np.ascontiguousarray(self.thresholds, dtype=np.float64)
        if incs.ndim != 2 or incs.shape[1] != len(cum):
            raise ValueError("increment table must be (n_walks, n_atoms)")
        if len(thr) != incs.shape[0]:
            raise ValueError("one threshold per walk required")
        if abs(cum[-1] - 1.0) > 1e-9:
            raise ValueError("atom probabilities must sum to 1")
        n_primary = incs.shape[0] if self.n_primary is None else int(self.n_primary)
        if not 1 <= n_primary <= incs.shape[0]:
            raise ValueError("n_primary must select a nonempty prefix of the walks")
        object.__setattr__(self, "n_primary", n_primary)
        for name, arr in (("cum", cum), ("increments", incs), ("thresholds", thr)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_walks(self) -> int:
        return self.increments.shape[0]


def atoms_to_system(probs, increment_rows, thresholds) -> WalkSystem:
    """Build a WalkSystem from raw atom probabilities, dropping zero atoms."""
    probs = np.asarray(probs, dtype=np.float64)
    rows = np.asarray(increment_rows, dtype=np.float64)
    keep = probs > 0.0
    probs = probs[keep]
    rows = rows[:, keep]
    cum = np.cumsum(probs)
    return WalkSystem(cum, rows, np.asarray(thresholds, dtype=np.float64))


def default_threads() -> int:
    raw = os.environ.get(THREAD_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _chunk_plan(hint_steps: int, max_steps: int):
    first = min(max_steps, max(64, int(1.1 * hint_steps) + 64))
    follow = max(256, first // 4)
    return first, follow


def _trial(gen, system: WalkSystem, max_steps: int, first: int, follow: int) -> np.ndarray:
    taus = np.full(system.n_walks, CENSORED, dtype=np.int64)
    taus[system.thresholds <= 0.0] = 0
    if np.all(taus[: system.n_primary] >= 0):
        return taus
    sums = np.zeros(system.n_walks)
    steps = 0
    chunk = first
    while steps < max_steps:
        m = min(chunk, max_steps - steps)
        u = gen.random(m)
        done = _backend.walk_chunk(
            u,
            system.cum,
            system.increments,
            sums,
            taus,
            system.thresholds,
            steps,
            system.n_primary,
        )
        if done:
            break
        steps += m
        chunk = follow
    return taus


def run_walks(
    system: WalkSystem,
    trials: int,
    seed: int,
    max_steps: int,
    hint_steps: int | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Stopping times for every (trial, walk); CENSORED marks non-crossings.

    The result is a (trials, n_walks) int64 array, identical for any thread
    count because trial i always consumes substream (seed, i).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    if hint_steps is None:
        hint_steps = max_steps
    first, follow = _chunk_plan(hint_steps, max_steps)
    out = np.empty((trials, system.n_walks), dtype=np.int64)

    def run_block(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            key = np.array([seed & 0xFFFFFFFFFFFFFFFF, i], dtype=np.uint64)
            gen = np.random.Generator(np.random.Philox(key=key))
            out[i] = _trial(gen, system, max_steps, first, follow)

    n_threads = default_threads() if threads is None else max(1, threads)
    if n_threads == 1:
        run_block(0, trials)
    else:
        bounds = np.linspace(0, trials, n_threads * 4 + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = [
                pool.submit(run_block, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for fut in futures:
                fut.result()
    return out


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error (sequential summation order)."""
    n = len(values)
    mean = float(values.mean())
    if n < 2:
        return mean, 0.0
    var = float(np.square(values - mean).sum()) / (n - 1)
    return mean, (var / n) ** 0.5
