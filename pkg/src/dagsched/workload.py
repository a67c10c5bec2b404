"""Interfering-workload bounds for a higher-priority DAG task.

For an analysis window of length delta, an interfering task contributes
body jobs (whole jobs inside the window), a carry-in job (tail of a job
released before the window) and a carry-out job (head of a job released
inside it).  Body workload has a closed form; carry-in workload follows
from the full-WCET unrestricted ASAP schedule of one job; carry-out
workload is bounded by the exact optimum from `carryout`.  The total bound
maximizes over the number of releases inside the window and, for each
count, over the feasible carry-in/carry-out window splits.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass
from fractions import Fraction
from math import floor

import numpy as np

from .carryout import work_curve
from .dag import asap_start_times

__all__ = [
    "WindowSplit", "WorkloadQuery", "body_workload", "carry_in_workload",
    "melani_workload", "window_splits", "interfering_workload",
]


@dataclass(frozen=True)
class WindowSplit:
    """Carry-in / carry-out window lengths of one problem-window alignment."""

    ci_len: int
    co_len: int


@dataclass(frozen=True)
class WorkloadQuery:
    """Inputs of one interfering-workload evaluation."""

    delta: int
    interferer_response: int
    processors: int

    def check(self, task):
        # only tasks already shown schedulable interfere during the analysis
        if self.interferer_response > task.deadline:
            raise ValueError(
                f"interferer response bound {self.interferer_response} exceeds "
                f"deadline {task.deadline}")


def body_workload(task, delta, r_i) -> int:
    """Workload of jobs entirely inside a window of length delta."""
    if delta < 0:
        return 0
    jobs = (delta - task.span + r_i) // task.period - 1
    return max(jobs * task.work, 0)


_starts_cache = weakref.WeakKeyDictionary()
_ci_cache = weakref.WeakKeyDictionary()
_co_cache = weakref.WeakKeyDictionary()
_cache_lock = threading.RLock()


def _full_wcet_starts(task):
    with _cache_lock:
        starts = _starts_cache.get(task)
        if starts is None:
            starts = tuple(asap_start_times(task.dag, list(task.dag.wcets)))
            _starts_cache[task] = starts
    return starts


def carry_in_workload(task, ci_len) -> int:
    """Workload of the last ci_len time units of the full-WCET ASAP schedule.

    Per vertex: max{C_k - max(L - S_k - ci_len, 0), 0} with S_k the ASAP
    start at full WCETs; the whole job (work C) fits once ci_len >= span.
    """
    if ci_len < 0:
        raise ValueError("ci_len must be non-negative")
    if ci_len >= task.span:
        return task.work
    starts = _full_wcet_starts(task)
    length = task.span
    return sum(max(c - max(length - s - ci_len, 0), 0)
               for c, s in zip(task.dag.wcets, starts))


def _carry_in_table(task):
    """carry_in_workload for every length 0..span, as an int64 array."""
    with _cache_lock:
        table = _ci_cache.get(task)
        if table is None:
            starts = np.array(_full_wcet_starts(task), dtype=np.int64)
            wcets = np.array(task.dag.wcets, dtype=np.int64)
            ci = np.arange(task.span + 1, dtype=np.int64)[:, None]
            overhang = np.maximum(task.span - starts[None, :] - ci, 0)
            table = np.maximum(wcets[None, :] - overhang, 0).sum(axis=1)
            _ci_cache[task] = table
    return table


def _carry_out_table(task, m):
    """min(carry-out optimum, m*len), capped at work, for lengths 0..span."""
    with _cache_lock:
        per_m = _co_cache.get(task)
        if per_m is None:
            per_m = {}
            _co_cache[task] = per_m
        table = per_m.get(m)
        if table is None:
            curve = work_curve(task)
            table = np.array(
                [min(curve.obj(d), m * d, task.work) for d in range(task.span + 1)],
                dtype=np.int64)
            per_m[m] = table
    return table


def melani_workload(task, delta, r_i, m) -> int:
    """Full-parallelism baseline bound: the interferer's jobs are assumed to
    run perfectly parallel on all m processors (exact rational arithmetic,
    floored to an integer workload)."""
    if delta < 0:
        return 0
    base = Fraction(delta + r_i) - Fraction(task.work, m)
    if base < 0:
        return 0
    jobs = base // task.period
    rem = base - jobs * task.period
    value = jobs * task.work + min(Fraction(task.work), m * rem)
    return floor(value)


def _gamma(task, delta, r_i):
    """Combined carry-in + carry-out window length for the dense pattern.

    For q = floor((delta - span + r_i)/T) >= 1 this is span + residue.  At
    q = 0 the residue formula would make the carry-in and carry-out job the
    same release; the carry-out job is then the next release, giving
    delta + r_i - T (see the window-split notes in the docs).
    """
    G = delta - task.span + r_i
    if G < 0:
        return None
    if G // task.period >= 1:
        return task.span + G % task.period
    return max(delta + r_i - task.period, 0)


def _split_range(length, gamma):
    """Inclusive carry-out length range of the split sweep (gamma <= 2L)."""
    return max(gamma - length, 0), min(gamma, length)


def window_splits(task, delta, r_i):
    """Feasible (carry-in, carry-out) window-length pairs, largest carry-in
    first.  Empty when the window cannot reach a carry-in alignment; a
    single saturated split when both windows reach the span."""
    gamma = _gamma(task, delta, r_i)
    if gamma is None:
        return []
    length = task.span
    if gamma == 0:
        return [WindowSplit(0, 0)]
    if gamma >= 2 * length:
        return [WindowSplit(length, length)]
    co_lo, co_hi = _split_range(length, gamma)
    return [WindowSplit(gamma - co, co) for co in range(co_lo, co_hi + 1)]


def interfering_workload(task, delta, r_i, m, carryout_fn=None) -> int:
    """Upper bound on the workload an interferer puts in a window of length
    delta, given its own response bound r_i.

    Maximizes over the number s of releases inside the window: s-1 jobs
    contribute their whole work, the last release contributes carry-out
    workload, and a job released before the window contributes carry-in
    workload; with both end jobs present their window lengths share a
    budget of delta + r_i - s*T.  The densest pattern (s = floor((delta -
    span + r_i)/T)) reproduces the body-count / window-split formula; the
    sparser terms cover placements where a job is exposed to (more of) the
    window alone, which can exceed the dense bound when the task is wider
    than the processor count.

    carryout_fn(co_len) supplies the carry-out bound (must be non-decreasing);
    None selects the built-in exact bound, min of the model optimum and
    m*co_len.  Every addend is capped at min(work, m * window-part) and the
    result at m * delta.  The bound is non-decreasing in delta.
    """
    if delta <= 0:
        return 0
    C, L, T = task.work, task.span, task.period

    fast = carryout_fn is None
    if not fast:
        co_fn = carryout_fn
    else:
        co_table = _carry_out_table(task, m)

        def co_fn(d):
            return int(co_table[d]) if d <= L else min(C, m * d)

    ci_table = _carry_in_table(task)

    def ci_term(ci):
        w = int(ci_table[ci]) if ci <= L else C
        return min(w, C, m * ci)

    def co_term(co):
        return min(co_fn(co), C, m * co)

    def split_peak(budget):
        """max carry-in + carry-out over window lengths summing to budget."""
        if budget <= 0:
            return 0
        if budget > 2 * L:
            # beyond the span both bounds saturate at the work, so only the
            # concave cap line min(C, m*ci) + min(C, m*co) binds; its maximum
            # sits at the balanced split (inside [L, budget-L] here), and
            # sweeping either end below L never beats it (the workload values
            # stay below the cap line there)
            half = budget // 2
            return min(C, m * half) + min(C, m * (budget - half))
        if fast:
            cis = np.arange(0, budget + 1, dtype=np.int64)
            cos = budget - cis
            ci_vals = np.where(cis <= L, ci_table[np.minimum(cis, L)], C)
            ci_vals = np.minimum(ci_vals, m * cis)
            co_vals = np.where(cos <= L, co_table[np.minimum(cos, L)], C)
            co_vals = np.minimum(np.minimum(co_vals, C), m * cos)
            return int((ci_vals + co_vals).max())
        return max(ci_term(ci) + co_term(budget - ci) for ci in range(budget + 1))

    best = ci_term(delta)  # no release inside the window at all
    s = 1
    while True:
        head = delta - (s - 1) * T   # window left of the s-th release at worst
        base = (s - 1) * C
        if head <= 0 or base >= m * delta:
            break
        cand = base + co_term(head)
        budget = delta + r_i - s * T
        if budget > 0:
            cand = max(cand, base + split_peak(budget))
        best = max(best, cand)
        s += 1
    return min(best, m * delta)
