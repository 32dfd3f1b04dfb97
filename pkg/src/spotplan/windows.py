"""Per-task deadline (time window) allocation for a chain of tasks.

Given a chain job executing in [arrival, deadline], every task i gets a
window of size at least its minimum execution time e_i. Extra slack raises
the expected workload a task can push onto cheap spot capacity, linearly
at rate rate/(1-rate)*parallelism until the window reaches e_i/rate, after
which the whole task fits on spot. The greedy allocator pours slack into
tasks in non-increasing parallelism order, which maximizes the total
expected spot workload.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .chainify import ChainJob, TaskSpec

if TYPE_CHECKING:
    from .policy import PolicyTuple

FEASIBILITY_TOL = 1e-9


class InfeasibleWindowError(ValueError):
    """Window shorter than the minimum execution time; carries the deficit."""

    def __init__(self, message: str, deficit: float = 0.0):
        super().__init__(message)
        self.deficit = deficit


@dataclass(frozen=True)
class WindowPlan:
    """Consecutive execution windows for a chain of tasks.

    sizes[i] is the window length of task i; boundaries are the l+1
    absolute times arrival = b_0 < b_1 < ... < b_l <= deadline; slack[i]
    = sizes[i] - e_i >= 0.
    """

    sizes: np.ndarray
    boundaries: np.ndarray
    slack: np.ndarray

    def validate(self, min_exec: Sequence[float], deadline: float) -> None:
        sizes = np.asarray(self.sizes)
        e = np.asarray(min_exec)
        if np.any(sizes < e - FEASIBILITY_TOL):
            raise InfeasibleWindowError("window smaller than minimum execution time")
        if np.any(np.diff(self.boundaries) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        if self.boundaries[-1] > deadline + FEASIBILITY_TOL:
            raise ValueError("last boundary exceeds the deadline")
        if np.any(self.slack < -FEASIBILITY_TOL):
            raise ValueError("negative slack")


def spot_capacity(task: TaskSpec, window: float, rate: float) -> float:
    """Expected workload of `task` that spot instances absorb in `window`.

    rate is the per-unit-time spot availability in (0, 1]. Zero at
    window = e_i, linear in the slack up to window = e_i/rate, then
    saturates at the full task size.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    e = task.min_exec_time
    if window < e - 1e-12:
        raise InfeasibleWindowError(
            f"window {window} below minimum execution time {e}", deficit=e - window)
    if window >= e / rate:
        return task.size
    return rate / (1.0 - rate) * task.parallelism * (window - e)


def total_spot_capacity(tasks: Sequence[TaskSpec], sizes: Sequence[float],
                        rate: float) -> float:
    return sum(spot_capacity(t, w, rate) for t, w in zip(tasks, sizes))


def dealloc_sizes(e: np.ndarray, delta: np.ndarray, total: float,
                  rate: float) -> np.ndarray:
    """Vectorized core of dealloc: window sizes for min-exec-times e and
    parallelism bounds delta summing to at most `total`.

    Slack is granted in non-increasing-parallelism order (stable by task
    index), each recipient capped at e_i/rate - e_i; any slack left after
    all caps are filled stays unallocated.
    """
    e = np.asarray(e, dtype=float)
    delta = np.asarray(delta, dtype=float)
    slack_total = total - float(e.sum())
    if slack_total < -FEASIBILITY_TOL:
        raise InfeasibleWindowError(
            f"window deficit {-slack_total:.6g}", deficit=-slack_total)
    slack_total = max(slack_total, 0.0)
    order = np.argsort(-delta, kind="stable")
    caps = e / rate - e
    filled = np.minimum(np.cumsum(caps[order]), slack_total)
    grants = np.diff(filled, prepend=0.0)
    x = np.zeros_like(e)
    x[order] = grants
    return e + x


def dealloc(tasks: Sequence[TaskSpec], span: tuple[float, float],
            rate: float) -> WindowPlan:
    """Optimal greedy window allocation over [a, d] for availability `rate`.

    Every task starts at its minimum window e_i; the remaining slack
    d - a - sum(e) goes to tasks in non-increasing parallelism order, each
    capped at e_i/rate - e_i. The result maximizes the total expected spot
    workload given spot_capacity().
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    a, d = span
    e = np.array([t.min_exec_time for t in tasks])
    delta = np.array([t.parallelism for t in tasks], dtype=float)
    sizes = dealloc_sizes(e, delta, d - a, rate)
    boundaries = np.concatenate(([a], a + np.cumsum(sizes)))
    return WindowPlan(sizes=sizes, boundaries=boundaries, slack=sizes - e)


def plan_windows(job: ChainJob, policy: "PolicyTuple",
                 owned_count: int) -> WindowPlan:
    """Window allocation a policy prescribes for one chain job.

    With no self-owned instances (or a sufficiency index above the spot
    availability belief) windows come from dealloc at rate beta; when
    owned capacity exists and beta0 <= beta, the tighter beta0 drives the
    allocation so tasks keep room for self-owned work.
    """
    span = (job.arrival, job.deadline)
    if owned_count > 0 and policy.beta0 is not None and policy.beta0 <= policy.beta:
        return dealloc(job.pseudo_tasks, span, policy.beta0)
    return dealloc(job.pseudo_tasks, span, policy.beta)
