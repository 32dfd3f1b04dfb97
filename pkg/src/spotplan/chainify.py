"""DAG job model, critical path, and the DAG-to-chain transformation.

A job is a DAG of malleable tasks. Every task i has a workload ``size``
(instance-time), a ``parallelism`` bound, and therefore a minimum execution
time size/parallelism. To make deadline splitting tractable the DAG is
flattened into a pseudo-job with a chain precedence constraint: schedule
every task as early as possible at full parallelism, slice the resulting
occupancy profile at task start/finish breakpoints, and turn each slice
into one pseudo-task whose parallelism is the total instance count active
in that slice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

BREAKPOINT_TOL = 1e-9


class CycleError(ValueError):
    """The edge relation contains a directed cycle."""


class InfeasibleJobError(ValueError):
    """The job cannot finish by its deadline even at full parallelism."""


@dataclass(frozen=True)
class TaskSpec:
    """One task: workload in instance-time units and a parallelism cap."""

    id: int
    size: float
    parallelism: int

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"task {self.id}: size must be positive, got {self.size}")
        if self.parallelism < 1 or int(self.parallelism) != self.parallelism:
            raise ValueError(f"task {self.id}: parallelism must be a positive integer")

    @property
    def min_exec_time(self) -> float:
        return self.size / self.parallelism


def _toposort(task_ids: Sequence[int], edges: Iterable[tuple[int, int]]) -> list[int]:
    """Kahn topological order; raises CycleError on cycles."""
    succ: dict[int, list[int]] = {i: [] for i in task_ids}
    indeg: dict[int, int] = {i: 0 for i in task_ids}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    ready = sorted(i for i in task_ids if indeg[i] == 0)
    order: list[int] = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
        ready.sort()
    if len(order) != len(list(task_ids)):
        raise CycleError("edge relation contains a cycle")
    return order


@dataclass(frozen=True)
class DagJob:
    """A DAG job with arrival, deadline, tasks, and precedence edges.

    Edges are (i1, i2) pairs of task ids meaning i2 starts only after i1
    finishes. Construction rejects cyclic edge sets and jobs whose window
    is shorter than the critical path.
    """

    id: int
    arrival: float
    deadline: float
    tasks: tuple[TaskSpec, ...]
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids")
        known = set(ids)
        for a, b in self.edges:
            if a not in known or b not in known or a == b:
                raise ValueError(f"edge ({a}, {b}) references unknown task")
        cp = critical_path(self, _validate=False)
        object.__setattr__(self, "_cp", cp)
        if self.deadline - self.arrival < cp - BREAKPOINT_TOL:
            raise InfeasibleJobError(
                f"job {self.id}: window {self.deadline - self.arrival} shorter "
                f"than critical path {cp}"
            )

    @property
    def critical_path_len(self) -> float:
        return self._cp

    @property
    def total_size(self) -> float:
        return sum(t.size for t in self.tasks)


@dataclass(frozen=True)
class PseudoSchedule:
    """Earliest-possible schedule of a DAG at full parallelism.

    start_times maps task id -> earliest start q_i (absolute time);
    completion is max(q_i + e_i); breakpoints are the sorted distinct
    values of {q_i} U {q_i + e_i}.
    """

    start_times: dict[int, float]
    completion: float
    breakpoints: np.ndarray


@dataclass(frozen=True)
class ChainJob:
    """Chain-precedence pseudo-job produced by transform().

    pseudo_tasks run strictly in list order. origin_map[k] lists the
    (original task id, workload share) pairs folded into pseudo-task k;
    shares sum to the source job's total workload.
    """

    id: int
    arrival: float
    deadline: float
    pseudo_tasks: tuple[TaskSpec, ...]
    origin_map: tuple[tuple[tuple[int, float], ...], ...]

    @property
    def total_size(self) -> float:
        return sum(t.size for t in self.pseudo_tasks)

    @property
    def min_exec_times(self) -> np.ndarray:
        return np.array([t.min_exec_time for t in self.pseudo_tasks])

    @property
    def parallelisms(self) -> np.ndarray:
        return np.array([t.parallelism for t in self.pseudo_tasks], dtype=float)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([t.size for t in self.pseudo_tasks])


def critical_path(dag: DagJob, _validate: bool = True) -> float:
    """Length of the longest directed path, summing min execution times.

    Equals the minimum feasible makespan when every task runs at full
    parallelism.
    """
    if _validate and not isinstance(dag, DagJob):
        raise TypeError("expected a DagJob")
    e = {t.id: t.min_exec_time for t in dag.tasks}
    order = _toposort([t.id for t in dag.tasks], dag.edges)
    preds: dict[int, list[int]] = {i: [] for i in e}
    for a, b in dag.edges:
        preds[b].append(a)
    finish: dict[int, float] = {}
    for i in order:
        start = max((finish[p] for p in preds[i]), default=0.0)
        finish[i] = start + e[i]
    return max(finish.values()) if finish else 0.0


def pseudo_schedule(dag: DagJob) -> PseudoSchedule:
    """Run every task as early as possible on its full parallelism.

    Source tasks start at the job arrival; any other task starts when its
    last predecessor finishes. Breakpoints are deduplicated with absolute
    tolerance 1e-9.
    """
    e = {t.id: t.min_exec_time for t in dag.tasks}
    order = _toposort([t.id for t in dag.tasks], dag.edges)
    preds: dict[int, list[int]] = {i: [] for i in e}
    for a, b in dag.edges:
        preds[b].append(a)
    q: dict[int, float] = {}
    for i in order:
        q[i] = max((q[p] + e[p] for p in preds[i]), default=dag.arrival)
    completion = max(q[i] + e[i] for i in q)
    raw = sorted(set(q.values()) | {q[i] + e[i] for i in q})
    points = [raw[0]]
    for t in raw[1:]:
        if t - points[-1] > BREAKPOINT_TOL:
            points.append(t)
    return PseudoSchedule(start_times=q, completion=completion,
                          breakpoints=np.array(points))


def is_chain(dag: DagJob) -> bool:
    """True when the precedence forces one total order (unique toposort)."""
    succ: dict[int, list[int]] = {t.id: [] for t in dag.tasks}
    indeg: dict[int, int] = {t.id: 0 for t in dag.tasks}
    for a, b in dag.edges:
        succ[a].append(b)
        indeg[b] += 1
    ready = [i for i in indeg if indeg[i] == 0]
    seen = 0
    while ready:
        if len(ready) > 1:
            return False
        i = ready.pop()
        seen += 1
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    return seen == len(dag.tasks)


def transform(dag: DagJob) -> ChainJob:
    """Flatten a DAG job into an equivalent chain-precedence pseudo-job.

    Chains pass through task-for-task. Otherwise each breakpoint interval
    I_k of the earliest-start schedule becomes a pseudo-task with
    parallelism sum(delta_i over tasks active in I_k) and size
    parallelism * |I_k|; intervals in which nothing runs are skipped.
    """
    if is_chain(dag):
        order = _toposort([t.id for t in dag.tasks], dag.edges)
        by_id = {t.id: t for t in dag.tasks}
        tasks = tuple(TaskSpec(id=k + 1, size=by_id[i].size,
                               parallelism=by_id[i].parallelism)
                      for k, i in enumerate(order))
        origin = tuple(((i, by_id[i].size),) for i in order)
        return ChainJob(id=dag.id, arrival=dag.arrival, deadline=dag.deadline,
                        pseudo_tasks=tasks, origin_map=origin)

    sched = pseudo_schedule(dag)
    q = sched.start_times
    pseudo: list[TaskSpec] = []
    origin: list[tuple[tuple[int, float], ...]] = []
    pts = sched.breakpoints
    for k in range(len(pts) - 1):
        lo, hi = pts[k], pts[k + 1]
        width = hi - lo
        active = [t for t in dag.tasks
                  if q[t.id] <= lo + BREAKPOINT_TOL
                  and q[t.id] + t.min_exec_time >= hi - BREAKPOINT_TOL]
        if not active:
            continue
        delta = sum(t.parallelism for t in active)
        pseudo.append(TaskSpec(id=len(pseudo) + 1, size=delta * width,
                               parallelism=delta))
        origin.append(tuple((t.id, t.parallelism * width) for t in active))
    return ChainJob(id=dag.id, arrival=dag.arrival, deadline=dag.deadline,
                    pseudo_tasks=tuple(pseudo), origin_map=tuple(origin))


def chain_as_dag(job: ChainJob) -> DagJob:
    """View a chain job as a DagJob with consecutive edges (for re-transform)."""
    edges = frozenset((k, k + 1) for k in range(1, len(job.pseudo_tasks)))
    return DagJob(id=job.id, arrival=job.arrival, deadline=job.deadline,
                  tasks=job.pseudo_tasks, edges=edges)


# --- JSON wire format: {id, arrival, deadline, tasks: [{id, size, parallelism}],
#     edges: [[i, j]]} ---

def dag_to_dict(dag: DagJob) -> dict:
    return {
        "id": dag.id,
        "arrival": dag.arrival,
        "deadline": dag.deadline,
        "tasks": [{"id": t.id, "size": t.size, "parallelism": t.parallelism}
                  for t in dag.tasks],
        "edges": sorted([a, b] for a, b in dag.edges),
    }


def dag_from_dict(d: dict) -> DagJob:
    return DagJob(
        id=d["id"],
        arrival=float(d["arrival"]),
        deadline=float(d["deadline"]),
        tasks=tuple(TaskSpec(id=t["id"], size=float(t["size"]),
                             parallelism=int(t["parallelism"]))
                    for t in d["tasks"]),
        edges=frozenset((int(a), int(b)) for a, b in d["edges"]),
    )


def dump_jobs(jobs: Sequence[DagJob], path) -> None:
    with open(path, "w") as fh:
        json.dump([dag_to_dict(j) for j in jobs], fh, indent=1)


def load_jobs(path) -> list[DagJob]:
    with open(path) as fh:
        return [dag_from_dict(d) for d in json.load(fh)]
