"""DAG task model: parallel tasks whose jobs are precedence-constrained subtasks.

Time is integral everywhere.  A task's *work* is the sum of its subtask
WCETs, its *span* the length of a longest precedence chain; constrained
deadlines require span <= deadline <= period.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import PathExplosionError, ValidationError

DEFAULT_PATH_CAP = 100_000


@dataclass(frozen=True)
class Subtask:
    """A sequential unit of work, identified by its index within the task."""

    id: int
    wcet: int


class Dag:
    """Immutable DAG over dense vertex ids 0..n-1 with integer WCETs."""

    def __init__(self, wcets, edges):
        self.wcets = tuple(int(w) for w in wcets)
        self.n = len(self.wcets)
        # deduplicate while keeping a canonical order for serialization
        self.edges = tuple(sorted(set((int(a), int(b)) for a, b in edges)))
        validate(self)
        self.preds = tuple(tuple(a for a, b in self.edges if b == v) for v in range(self.n))
        self.succs = tuple(tuple(b for a, b in self.edges if a == v) for v in range(self.n))

    @property
    def vertices(self):
        return [Subtask(i, w) for i, w in enumerate(self.wcets)]

    def sources(self):
        has_pred = {b for _, b in self.edges}
        return [v for v in range(self.n) if v not in has_pred]

    def sinks(self):
        has_succ = {a for a, _ in self.edges}
        return [v for v in range(self.n) if v not in has_succ]

    def __eq__(self, other):
        return (isinstance(other, Dag)
                and self.wcets == other.wcets and self.edges == other.edges)

    def __hash__(self):
        return hash((self.wcets, self.edges))

    def __repr__(self):
        return f"Dag(n={self.n}, work={work(self)}, span={span(self)})"


def validate(dag) -> None:
    """Check structural rules; raise ValidationError naming the first violated one."""
    n = dag.n
    for a, b in dag.edges:
        if not (0 <= a < n and 0 <= b < n):
            raise ValidationError("dangling-edge", f"edge ({a},{b}) references a vertex outside 0..{n - 1}")
    for a, b in dag.edges:
        if a == b:
            raise ValidationError("self-loop", f"vertex {a} has a self-loop")
    for w in dag.wcets:
        if w < 0:
            raise ValidationError("wcet", "subtask WCETs must be non-negative")
    # Kahn's algorithm; leftovers mean a cycle
    indeg = [0] * n
    for _, b in dag.edges:
        indeg[b] += 1
    queue = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    succs = [[] for _ in range(n)]
    for a, b in dag.edges:
        succs[a].append(b)
    while queue:
        v = queue.pop()
        seen += 1
        for b in succs[v]:
            indeg[b] -= 1
            if indeg[b] == 0:
                queue.append(b)
    if seen != n:
        raise ValidationError("cycle", "edge set contains a directed cycle")


def topological_order(dag):
    """Deterministic topological order (smallest vertex id first among ready)."""
    indeg = [len(dag.preds[v]) for v in range(dag.n)]
    import heapq

    heap = [v for v in range(dag.n) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for b in dag.succs[v]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(heap, b)
    return order


def work(dag) -> int:
    return sum(dag.wcets)


def span(dag) -> int:
    """Longest-path length by dynamic programming over a topological order."""
    finish = [0] * dag.n
    best = 0
    for v in topological_order(dag):
        start = max((finish[p] for p in dag.preds[v]), default=0)
        finish[v] = start + dag.wcets[v]
        best = max(best, finish[v])
    return best


def normalize_source_sink(dag) -> Dag:
    """Return an equivalent DAG with exactly one source and one sink.

    Dummy zero-WCET vertices are appended at the end only when needed, so
    the operation is idempotent and preserves work, span and start times
    of the original vertices.
    """
    sources = dag.sources()
    sinks = dag.sinks()
    if len(sources) == 1 and len(sinks) == 1:
        return dag
    wcets = list(dag.wcets)
    edges = list(dag.edges)
    if len(sources) > 1:
        src = len(wcets)
        wcets.append(0)
        edges.extend((src, v) for v in sources)
    if len(sinks) > 1:
        snk = len(wcets)
        wcets.append(0)
        edges.extend((v, snk) for v in sinks)
    return Dag(wcets, edges)


def asap_start_times(dag, exec_times):
    """Start times of the unrestricted-processor schedule for given exec times.

    start[v] = max over predecessors b of (start[b] + exec_times[b]), i.e.
    the longest distance from any source to v.  Rejects exec times outside
    [0, wcet].
    """
    if len(exec_times) != dag.n:
        raise ValueError("exec_times must cover every vertex")
    for v, (x, c) in enumerate(zip(exec_times, dag.wcets)):
        if not (0 <= x <= c):
            raise ValueError(f"exec time {x} of vertex {v} outside [0, {c}]")
    start = [0] * dag.n
    for v in topological_order(dag):
        start[v] = max((start[p] + exec_times[p] for p in dag.preds[v]), default=0)
    return start


def count_paths(dag, v) -> int:
    """Number of source-to-v paths (single-source DAG assumed)."""
    counts = [0] * dag.n
    order = topological_order(dag)
    for u in order:
        if not dag.preds[u]:
            counts[u] = 1
        else:
            counts[u] = sum(counts[p] for p in dag.preds[u])
        if u == v:
            break
    return counts[v]


def enumerate_paths(dag, v, cap=DEFAULT_PATH_CAP):
    """All source-to-v paths of a normalized DAG, as vertex-id tuples.

    Refuses with PathExplosionError when the path count exceeds ``cap``;
    callers should fall back to the edge-recursive formulation then.
    """
    if count_paths(dag, v) > cap:
        raise PathExplosionError(
            f"path explosion: more than {cap} paths to vertex {v}; "
            "use the edge-recursive formulation")
    paths = []

    def walk(u, suffix):
        if not dag.preds[u]:
            paths.append((u, *suffix))
            return
        for p in dag.preds[u]:
            walk(p, (u, *suffix))

    walk(v, ())
    return paths


@dataclass(eq=False)  # identity semantics: tasks key caches and memo tables
class DagTask:
    """A sporadic DAG task with constrained deadline (span <= D <= T)."""

    dag: Dag
    deadline: int
    period: int
    priority: int | None = None
    work: int = field(init=False)
    span: int = field(init=False)

    def __post_init__(self):
        self.work = work(self.dag)
        self.span = span(self.dag)
        if self.period <= 0 or self.deadline <= 0:
            raise ValidationError("deadline", "period and deadline must be positive")
        if not (self.span <= self.deadline <= self.period):
            raise ValidationError(
                "deadline",
                f"constrained deadline violated: span {self.span} <= deadline "
                f"{self.deadline} <= period {self.period} required")

    def utilization(self):
        return self.work / self.period

    def parallelism(self):
        return self.work / self.span


@dataclass
class TaskSet:
    """Priority-ordered tasks plus processor count; index order = priority order."""

    tasks: list
    processors: int

    def __post_init__(self):
        if self.processors <= 0:
            raise ValidationError("processors", "processor count must be positive")
        for rank, task in enumerate(self.tasks):
            if task.priority is None:
                self.tasks[rank] = replace(task, priority=rank)
        prios = [t.priority for t in self.tasks]
        if len(set(prios)) != len(prios):
            raise ValidationError("priority", "task priorities must be distinct")
        if prios != sorted(prios):
            raise ValidationError("priority", "tasks must be listed in priority order")

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def utilization(self):
        return sum(t.utilization() for t in self.tasks)


# --- JSON schema -----------------------------------------------------------
#
# {"tasks": [{"period": int, "deadline": int,
#             "vertices": [{"wcet": int}, ...],
#             "edges": [[src, dst], ...]}, ...],
#  "processors": int}
#
# Priorities are implicit in list order.

def taskset_to_dict(ts) -> dict:
    return {
        "tasks": [
            {
                "period": t.period,
                "deadline": t.deadline,
                "vertices": [{"wcet": w} for w in t.dag.wcets],
                "edges": [[a, b] for a, b in t.dag.edges],
            }
            for t in ts.tasks
        ],
        "processors": ts.processors,
    }


def taskset_from_dict(doc) -> TaskSet:
    try:
        raw_tasks = doc["tasks"]
        m = doc["processors"]
    except (KeyError, TypeError) as exc:
        raise ValidationError("schema", f"task-set document missing key: {exc}") from exc
    tasks = []
    for idx, entry in enumerate(raw_tasks):
        try:
            dag = Dag([v["wcet"] for v in entry["vertices"]], entry["edges"])
            tasks.append(DagTask(dag, entry["deadline"], entry["period"], priority=idx))
        except (KeyError, TypeError) as exc:
            raise ValidationError("schema", f"tasks[{idx}] malformed: {exc}") from exc
    return TaskSet(tasks, m)


def save_taskset(ts, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(taskset_to_dict(ts), fh, indent=1)
        fh.write("\n")


def load_taskset(path) -> TaskSet:
    with open(path, encoding="utf-8") as fh:
        return taskset_from_dict(json.load(fh))
