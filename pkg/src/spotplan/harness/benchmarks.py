"""Baseline policies: greedy bidding, even window split, naive self-owned.

Greedy ignores per-task windows: the current task bids for its full
parallelism in spot capacity until the critical path of the remaining
workload catches up with the time left to the job deadline, then
everything left runs on-demand. Even splits the job's slack uniformly
across tasks and reuses the standard per-window engine. The naive
self-owned rule grabs as many idle owned instances as fit under the
parallelism bound, first come first served.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..chainify import ChainJob, TaskSpec
from ..instances import TIME_TOL
from ..market import ONDEMAND_PRICE, AvailabilityProfile
from ..windows import InfeasibleWindowError, WindowPlan


@dataclass(frozen=True)
class GreedyOutcome:
    """Per-job ledger of a greedy run."""

    spot_work: float
    spot_cost: float
    ondemand_work: float
    ondemand_cost: float
    switch_time: float | None
    completion: float


def greedy_run(job: ChainJob, profile: AvailabilityProfile) -> GreedyOutcome:
    """Replay the greedy policy for one job against a recorded market.

    While spot is granted the current task advances at full parallelism,
    so the remaining critical path sum(remaining_i / delta_i) shrinks
    exactly as fast as the clock; the all-on-demand switch therefore fires
    when the cumulative spot-unavailable time since arrival reaches the
    job's slack, after which on-demand lanes finish exactly at the
    deadline.
    """
    a, d = job.arrival, job.deadline
    e = job.min_exec_times
    deltas = job.parallelisms
    need = float(e.sum())
    slack = (d - a) - need
    if slack < -TIME_TOL:
        raise InfeasibleWindowError("job window below its critical path",
                                    deficit=-slack)
    a0, u0, c0 = profile.measures_at(a)
    t_switch = max(float(profile.first_time_unavail(u0 + max(slack, 0.0))), a)
    t_done = float(profile.first_time_avail(a0 + need))
    prefix = np.cumsum(e)

    if t_done <= t_switch + TIME_TOL:
        bounds = np.maximum(profile.first_time_avail(a0 + prefix), a)
        _, _, cs = profile.measures_at(np.concatenate(([a], bounds)))
        spot_cost = float(np.sum(deltas * np.diff(cs)))
        total = float(job.sizes.sum())
        return GreedyOutcome(spot_work=total, spot_cost=spot_cost,
                             ondemand_work=0.0, ondemand_cost=0.0,
                             switch_time=None, completion=t_done)

    a_sw, _, _ = profile.measures_at(t_switch)
    credit = np.minimum(prefix, a_sw - a0)
    bounds = np.maximum(profile.first_time_avail(a0 + credit), a)
    _, _, cs = profile.measures_at(np.concatenate(([a], bounds)))
    spot_work = deltas * np.diff(np.concatenate(([0.0], credit)))
    spot_cost = float(np.sum(deltas * np.diff(cs)))
    od_work = float(job.sizes.sum() - spot_work.sum())
    return GreedyOutcome(spot_work=float(spot_work.sum()), spot_cost=spot_cost,
                         ondemand_work=od_work,
                         ondemand_cost=ONDEMAND_PRICE * od_work,
                         switch_time=t_switch, completion=d)


def even_plan(job: ChainJob) -> WindowPlan:
    """Split the job slack evenly: every window is e_i + slack / l."""
    e = job.min_exec_times
    slack = (job.deadline - job.arrival) - float(e.sum())
    if slack < -TIME_TOL:
        raise InfeasibleWindowError("job window below its critical path",
                                    deficit=-slack)
    sizes = e + max(slack, 0.0) / len(e)
    boundaries = np.concatenate(([job.arrival], job.arrival + np.cumsum(sizes)))
    return WindowPlan(sizes=sizes, boundaries=boundaries, slack=sizes - e)


def naive_self_owned(task: TaskSpec, window: tuple[float, float], pool) -> int:
    """Reserve as many idle owned instances as the parallelism bound allows."""
    w0, w1 = window
    r = min(pool.idle_min(w0, w1), task.parallelism)
    if r > 0 and not pool.reserve(w0, w1, r):
        raise RuntimeError("pool refused a reservation within its idle minimum")
    return r
