"""Discrete-event simulator for preemptive global fixed-priority scheduling.

All subtasks of a task share its priority; at every instant the m
highest-ranked ready subtasks run (rank = task priority, then job release,
then subtask id).  Events happen at integer releases and completions only.
Subtasks drawn with zero execution time complete the instant they become
ready without occupying a processor.

The trace records per-processor execution segments, from which critical
chains are rebuilt (walking last-completing predecessors) and critical
interference is measured, both in total and split per interfering task.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationError


@dataclass(frozen=True)
class Segment:
    proc: int
    task_index: int
    job_index: int
    subtask: int
    start: int
    end: int


@dataclass
class Job:
    task_index: int
    job_index: int
    release: int
    abs_deadline: int
    exec_times: tuple
    subtask_ready: list = field(default_factory=list)
    subtask_completion: list = field(default_factory=list)
    completion: int | None = None

    @property
    def response(self):
        if self.completion is None:
            return None
        return self.completion - self.release


@dataclass
class SimResult:
    taskset: object
    processors: int
    horizon: int
    segments: list
    jobs: list

    def response_times(self):
        return [(j.task_index, j.job_index, j.response)
                for j in self.jobs if j.completion is not None]

    def segments_of(self, job, subtask=None):
        return [s for s in self.segments
                if s.task_index == job.task_index and s.job_index == job.job_index
                and (subtask is None or s.subtask == subtask)]


def _release_times(taskset, horizon, policy, rng):
    if isinstance(policy, dict):
        out = {}
        for idx, task in enumerate(taskset.tasks):
            times = sorted(policy.get(idx, []))
            for a, b in zip(times, times[1:]):
                if b - a < task.period:
                    raise SimulationError(
                        f"scripted releases of task {idx} violate the period")
            out[idx] = times
        return out
    if policy == "periodic":
        return {idx: list(range(0, horizon, t.period))
                for idx, t in enumerate(taskset.tasks)}
    if policy == "sporadic":
        out = {}
        for idx, task in enumerate(taskset.tasks):
            times, t = [], 0
            while t < horizon:
                times.append(t)
                t += task.period + int(rng.integers(0, task.period // 2 + 1))
            out[idx] = times
        return out
    raise SimulationError(f"unknown release policy {policy!r}")


def _draw_exec(task, task_index, job_index, policy, rng):
    wcets = task.dag.wcets
    if isinstance(policy, dict):
        times = policy.get((task_index, job_index), wcets)
    elif policy == "wcet":
        times = wcets
    elif policy == "random":
        times = tuple(int(rng.integers(0, w + 1)) for w in wcets)
    elif callable(policy):
        times = policy(task_index, job_index, task, rng)
    else:
        raise SimulationError(f"unknown execution policy {policy!r}")
    times = tuple(int(x) for x in times)
    if len(times) != task.dag.n or any(not 0 <= x <= w for x, w in zip(times, wcets)):
        raise SimulationError("execution times must lie in [0, WCET] per subtask")
    return times


class _ActiveJob:
    __slots__ = ("job", "dag", "remaining", "pending", "ready", "left")

    def __init__(self, job, dag):
        self.job = job
        self.dag = dag
        self.remaining = list(job.exec_times)
        self.pending = [len(dag.preds[v]) for v in range(dag.n)]
        self.ready = set()
        self.left = dag.n

    def complete(self, v, now, newly_ready):
        self.job.subtask_completion[v] = now
        self.ready.discard(v)
        self.left -= 1
        for b in self.dag.succs[v]:
            self.pending[b] -= 1
            if self.pending[b] == 0:
                self.job.subtask_ready[b] = now
                newly_ready.append(b)

    def admit_ready(self, vs, now):
        """Mark subtasks ready; zero-length ones complete instantly."""
        stack = list(vs)
        while stack:
            v = stack.pop()
            if self.remaining[v] == 0:
                more = []
                self.complete(v, now, more)
                stack.extend(more)
            else:
                self.ready.add(v)
        if self.left == 0:
            self.job.completion = now


def simulate(taskset, m, horizon, release_policy="periodic",
             exec_policy="wcet", rng=None) -> SimResult:
    """Run the task set for `horizon` time units (releases stop at horizon;
    released jobs run to completion)."""
    if m <= 0:
        raise SimulationError("need at least one processor")
    if horizon < max(t.period for t in taskset.tasks):
        raise SimulationError("horizon must cover at least the largest period")
    if rng is None:
        rng = np.random.default_rng(0)

    release_map = _release_times(taskset, horizon, release_policy, rng)
    releases = sorted(
        (time, idx, j)
        for idx, times in release_map.items()
        for j, time in enumerate(times))

    jobs = []
    segments = []
    active = []
    ptr = 0
    if not releases:
        return SimResult(taskset, m, horizon, segments, jobs)
    t = releases[0][0]

    while True:
        while ptr < len(releases) and releases[ptr][0] == t:
            _, idx, jnum = releases[ptr]
            ptr += 1
            task = taskset.tasks[idx]
            exec_times = _draw_exec(task, idx, jnum, exec_policy, rng)
            job = Job(idx, jnum, t, t + task.deadline, exec_times,
                      subtask_ready=[None] * task.dag.n,
                      subtask_completion=[None] * task.dag.n)
            jobs.append(job)
            state = _ActiveJob(job, task.dag)
            sources = [v for v in range(task.dag.n) if not task.dag.preds[v]]
            for v in sources:
                job.subtask_ready[v] = t
            state.admit_ready(sources, t)
            if state.left:
                active.append(state)

        ranked = []
        for state in active:
            prio = taskset.tasks[state.job.task_index].priority
            for v in state.ready:
                ranked.append((prio, state.job.release, state.job.job_index, v, state))
        ranked.sort(key=lambda r: r[:4])
        running = ranked[:m]

        next_release = releases[ptr][0] if ptr < len(releases) else None
        if not running:
            if next_release is None:
                break
            t = next_release
            continue
        t_next = t + min(state.remaining[v] for *_, v, state in running)
        if next_release is not None:
            t_next = min(t_next, next_release)
        dt = t_next - t

        finished = []
        for slot, (_, _, _, v, state) in enumerate(running):
            segments.append(Segment(slot, state.job.task_index,
                                    state.job.job_index, v, t, t_next))
            state.remaining[v] -= dt
            if state.remaining[v] == 0:
                finished.append((state, v))
        for state, v in finished:
            newly = []
            state.complete(v, t_next, newly)
            state.admit_ready(newly, t_next)
            if state.left == 0:
                active.remove(state)
        t = t_next

    return SimResult(taskset, m, horizon, segments, jobs)


# --------------------------------------------------------------------------
# Critical chains and critical interference

def extract_critical_chain(sim, job):
    """Chain of subtask ids rebuilt through last-completing predecessors.

    Ties among equal completion times break toward the lowest subtask id.
    """
    if job.completion is None:
        raise SimulationError("job did not complete within the trace")
    dag = sim.taskset.tasks[job.task_index].dag
    comp = job.subtask_completion
    last = min(v for v in range(dag.n) if comp[v] == max(comp))
    chain = [last]
    while dag.preds[chain[0]]:
        preds = dag.preds[chain[0]]
        best = max(comp[p] for p in preds)
        chain.insert(0, min(p for p in preds if comp[p] == best))
    return chain


def _chain_windows(sim, job, chain):
    """Consecutive [ready, completion) windows covering the job's response."""
    comp = job.subtask_completion
    start = job.release
    windows = []
    for v in chain:
        if job.subtask_ready[v] != start:
            raise SimulationError("chain/trace mismatch: ready times do not chain")
        windows.append((v, start, comp[v]))
        start = comp[v]
    if start != job.completion:
        raise SimulationError("chain/trace mismatch: chain does not end the job")
    return windows


def _blocked_intervals(sim, job, chain):
    """Intervals where the current critical subtask is ready but not running."""
    blocked = []
    for v, lo, hi in _chain_windows(sim, job, chain):
        execs = sorted((s.start, s.end) for s in sim.segments_of(job, v))
        cur = lo
        for a, b in execs:
            if a > cur:
                blocked.append((cur, a))
            cur = max(cur, b)
        if cur < hi:
            blocked.append((cur, hi))
    return blocked


def critical_interference(sim, job, chain, by_task=None) -> int:
    """Total time the job's critical chain is ready but denied a processor.

    With by_task set, returns that task's processor time (summed across
    processors) during those instants instead.
    """
    blocked = _blocked_intervals(sim, job, chain)
    if by_task is None:
        return sum(b - a for a, b in blocked)
    total = 0
    for seg in sim.segments:
        if seg.task_index != by_task:
            continue
        for a, b in blocked:
            total += max(0, min(seg.end, b) - max(seg.start, a))
    return total


def interference_by_task(sim, job, chain) -> dict:
    """I_{i,k} for every task index i (including the job's own task)."""
    return {i: critical_interference(sim, job, chain, by_task=i)
            for i in range(len(sim.taskset.tasks))}


def chain_execution(sim, job, chain) -> int:
    return sum(job.exec_times[v] for v in chain)


# --------------------------------------------------------------------------
# Trace auditor

def audit_trace(sim) -> None:
    """Assert work conservation, precedence and priority rules on a trace."""
    by_proc = {}
    for seg in sim.segments:
        by_proc.setdefault(seg.proc, []).append(seg)
    for proc, segs in by_proc.items():
        segs.sort(key=lambda s: s.start)
        for a, b in zip(segs, segs[1:]):
            assert a.end <= b.start, f"processor {proc} overlaps: {a} / {b}"

    job_map = {(j.task_index, j.job_index): j for j in sim.jobs}
    for seg in sim.segments:
        job = job_map[(seg.task_index, seg.job_index)]
        ready = job.subtask_ready[seg.subtask]
        assert ready is not None and seg.start >= ready, \
            f"segment {seg} starts before readiness {ready}"
        dag = sim.taskset.tasks[seg.task_index].dag
        for p in dag.preds[seg.subtask]:
            comp = job.subtask_completion[p]
            assert comp is not None and seg.start >= comp, \
                f"segment {seg} starts before predecessor {p} completes"

    # priority correctness + work conservation at every event boundary
    points = sorted({s.start for s in sim.segments} | {s.end for s in sim.segments}
                    | {j.release for j in sim.jobs})
    m = sim.processors

    def rank(job, v):
        return (sim.taskset.tasks[job.task_index].priority, job.release,
                job.job_index, v)

    for lo, hi in zip(points, points[1:]):
        running = {(s.task_index, s.job_index, s.subtask)
                   for s in sim.segments if s.start <= lo and s.end >= hi}
        waiting = []
        for job in sim.jobs:
            if job.release > lo:
                continue
            for v in range(len(job.exec_times)):
                ready = job.subtask_ready[v]
                comp = job.subtask_completion[v]
                if ready is not None and ready <= lo and (comp is None or comp > lo):
                    if job.exec_times[v] > 0 and (job.task_index, job.job_index, v) not in running:
                        waiting.append(rank(job, v))
        if waiting:
            assert len(running) == m, \
                f"work conservation violated in [{lo},{hi}): {len(running)} running"
            worst_running = max(rank(job_map[(ti, ji)], v) for ti, ji, v in running)
            assert worst_running < min(waiting), \
                f"priority inversion in [{lo},{hi})"
