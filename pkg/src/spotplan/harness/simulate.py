"""Event-loop simulation of a job stream under one allocation policy.

Every job's windows are fixed at arrival; each task then reserves
self-owned instances at its window start (a strictly time-ordered event
stream, so the pool reduces to a heap of reservation ends) and replays the
spot/on-demand engine against the recorded price trace. Per-job money and
workload are tracked by instance class.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from ..chainify import ChainJob
from ..instances import replay_windows, run_task_window
from ..market import (MonotonePool, OwnedPool, SpotMarket,
                      availability_profile)
from ..policy import PolicyTuple
from ..windows import dealloc_sizes
from .benchmarks import even_plan, greedy_run, naive_self_owned

POOL_TOL = 1e-9


@dataclass
class CostLedger:
    """Per-job workload and money split by instance class."""

    workload: np.ndarray
    spot_cost: np.ndarray
    ondemand_cost: np.ndarray
    spot_work: np.ndarray
    ondemand_work: np.ndarray
    owned_work: np.ndarray

    @property
    def job_costs(self) -> np.ndarray:
        return self.spot_cost + self.ondemand_cost

    def check_conservation(self, rel_tol: float = 1e-6) -> None:
        got = self.spot_work + self.ondemand_work + self.owned_work
        if not np.allclose(got, self.workload, rtol=rel_tol, atol=1e-9):
            worst = np.argmax(np.abs(got - self.workload))
            raise AssertionError(
                f"workload leak on job {worst}: {got[worst]} != {self.workload[worst]}")


@dataclass(frozen=True)
class CellResult:
    """Aggregates of one (policy, job set) simulation."""

    label: str
    ledger: CostLedger
    owned_alloc_total: float

    @property
    def total_cost(self) -> float:
        return float(self.ledger.job_costs.sum())

    @property
    def total_workload(self) -> float:
        return float(self.ledger.workload.sum())

    @property
    def alpha(self) -> float:
        return self.total_cost / self.total_workload

    @property
    def owned_work_total(self) -> float:
        return float(self.ledger.owned_work.sum())


class JobSetContext:
    """Flattened task arrays plus caches shared across policy cells."""

    def __init__(self, chains: list[ChainJob], market: SpotMarket):
        self.chains = chains
        self.market = market
        counts = [len(c.pseudo_tasks) for c in chains]
        self.job_start = np.concatenate(([0], np.cumsum(counts)))
        self.n_jobs = len(chains)
        self.n_tasks = int(self.job_start[-1])
        self.task_job = np.repeat(np.arange(self.n_jobs), counts)
        self.task_e = np.concatenate([c.min_exec_times for c in chains])
        self.task_delta = np.concatenate([c.parallelisms for c in chains])
        self.task_z = np.concatenate([c.sizes for c in chains])
        self.job_arrival = np.array([c.arrival for c in chains])
        self.job_deadline = np.array([c.deadline for c in chains])
        self.job_workload = np.bincount(self.task_job, weights=self.task_z,
                                        minlength=self.n_jobs)
        self._windows: dict = {}
        self._orders: dict = {}
        self._profiles: dict = {}

    def profile(self, bid: float | None):
        # A null bid models fixed-price markets that always deliver: every
        # slot is available.
        if bid not in self._profiles:
            self._profiles[bid] = availability_profile(
                self.market, np.inf if bid is None else bid)
        return self._profiles[bid]

    def windows(self, key) -> tuple[np.ndarray, np.ndarray]:
        """Per-task absolute window bounds for a plan key: ('dealloc', rate)
        or ('even',)."""
        if key not in self._windows:
            w0 = np.empty(self.n_tasks)
            w1 = np.empty(self.n_tasks)
            for j, chain in enumerate(self.chains):
                lo, hi = self.job_start[j], self.job_start[j + 1]
                span = chain.deadline - chain.arrival
                if key[0] == "even":
                    slack = span - self.task_e[lo:hi].sum()
                    sizes = self.task_e[lo:hi] + max(slack, 0.0) / (hi - lo)
                else:
                    sizes = dealloc_sizes(self.task_e[lo:hi],
                                          self.task_delta[lo:hi], span, key[1])
                ends = chain.arrival + np.cumsum(sizes)
                w0[lo:hi] = np.concatenate(([chain.arrival], ends[:-1]))
                w1[lo:hi] = ends
            self._windows[key] = (w0, w1)
            self._orders[key] = np.argsort(w0, kind="stable")
        return self._windows[key]

    def order(self, key) -> np.ndarray:
        self.windows(key)
        return self._orders[key]

    def plan_key(self, policy: PolicyTuple, owned_capacity: int,
                 window_mode: str):
        if window_mode == "even":
            return ("even",)
        if owned_capacity > 0 and policy.beta0 is not None \
                and policy.beta0 <= policy.beta:
            return ("dealloc", policy.beta0)
        return ("dealloc", policy.beta)


def pool_pass(order: np.ndarray, w0: np.ndarray, w1: np.ndarray,
              want: np.ndarray, capacity: int) -> np.ndarray:
    """Grant min(want, idle) owned instances per task in window-start order.

    Reservations release at their window end; since grants happen at the
    interval start, the idle minimum over a window equals the idle count
    at its start.
    """
    granted = np.zeros(len(w0))
    if capacity <= 0:
        return granted
    busy = 0.0
    ends: list[tuple[float, float]] = []
    for idx in order:
        w = want[idx]
        t0 = w0[idx]
        while ends and ends[0][0] <= t0 + POOL_TOL:
            busy -= heapq.heappop(ends)[1]
        give = min(w, capacity - busy)
        if give > 0:
            granted[idx] = give
            busy += give
            heapq.heappush(ends, (w1[idx], give))
    return granted


def owned_demand(ctx: JobSetContext, sizes: np.ndarray, beta0,
                 owned_mode: str) -> np.ndarray:
    """Target owned-instance count per task before pool limits."""
    if owned_mode == "none":
        return np.zeros(ctx.n_tasks)
    if owned_mode == "naive":
        return ctx.task_delta.copy()
    beta0 = np.asarray(beta0, dtype=float)
    need = (ctx.task_z - ctx.task_delta * sizes * beta0) / (sizes * (1.0 - beta0))
    need = np.maximum(need, 0.0)
    want = np.where(need > 1e-9, np.ceil(need - 1e-9), 0.0)
    return np.minimum(want, ctx.task_delta)


def _ledger_from_tasks(ctx, owned_work, spot_work, spot_cost, od_work,
                       od_cost) -> CostLedger:
    def per_job(v):
        return np.bincount(ctx.task_job, weights=v, minlength=ctx.n_jobs)

    return CostLedger(workload=ctx.job_workload.copy(),
                      spot_cost=per_job(spot_cost),
                      ondemand_cost=per_job(od_cost),
                      spot_work=per_job(spot_work),
                      ondemand_work=per_job(od_work),
                      owned_work=per_job(owned_work))


def run_framework_cell(ctx: JobSetContext, policy: PolicyTuple,
                       owned_capacity: int, window_mode: str = "policy",
                       owned_mode: str | None = None,
                       label: str | None = None) -> CellResult:
    """One fixed-policy simulation over the whole job set."""
    if owned_mode is None:
        owned_mode = "policy" if owned_capacity > 0 else "none"
    if owned_capacity == 0:
        owned_mode = "none"
    key = ctx.plan_key(policy, owned_capacity, window_mode)
    w0, w1 = ctx.windows(key)
    sizes = w1 - w0
    want = owned_demand(ctx, sizes, policy.beta0 if policy.beta0 else 0.0,
                        owned_mode)
    if owned_mode == "none":
        r = np.zeros(ctx.n_tasks)
    else:
        r = pool_pass(ctx.order(key), w0, w1, want, owned_capacity)
    cloud = np.maximum(ctx.task_z - r * sizes, 0.0)
    cap = ctx.task_delta - r
    spot_work, spot_cost, od_work, od_cost, _, _ = replay_windows(
        ctx.profile(policy.bid), w0, w1, cloud, np.maximum(cap, 1.0))
    owned_work = np.minimum(r * sizes, ctx.task_z)
    ledger = _ledger_from_tasks(ctx, owned_work, spot_work, spot_cost,
                                od_work, od_cost)
    return CellResult(label=label or policy.label(), ledger=ledger,
                      owned_alloc_total=float(r.sum()))


def run_greedy_cell(ctx: JobSetContext, bid: float,
                    label: str | None = None) -> CellResult:
    profile = ctx.profile(bid)
    n = ctx.n_jobs
    spot_cost = np.zeros(n)
    od_cost = np.zeros(n)
    spot_work = np.zeros(n)
    od_work = np.zeros(n)
    for j, chain in enumerate(ctx.chains):
        out = greedy_run(chain, profile)
        spot_cost[j] = out.spot_cost
        od_cost[j] = out.ondemand_cost
        spot_work[j] = out.spot_work
        od_work[j] = out.ondemand_work
    ledger = CostLedger(workload=ctx.job_workload.copy(), spot_cost=spot_cost,
                        ondemand_cost=od_cost, spot_work=spot_work,
                        ondemand_work=od_work, owned_work=np.zeros(n))
    return CellResult(label=label or f"greedy,bid={bid:.4g}", ledger=ledger,
                      owned_alloc_total=0.0)


def run_mixed_cell(ctx: JobSetContext, policies: list[PolicyTuple],
                   assignment: np.ndarray, owned_capacity: int,
                   window_mode: str = "policy",
                   owned_mode: str | None = None) -> CostLedger:
    """Live run where job j uses policies[assignment[j]] (learning mode).

    Greedy-family policies are handled by the caller; this covers window
    plans plus the per-window engine with a shared owned pool.
    """
    if owned_mode is None:
        owned_mode = "policy" if owned_capacity > 0 else "none"
    if owned_capacity == 0:
        owned_mode = "none"
    w0 = np.empty(ctx.n_tasks)
    w1 = np.empty(ctx.n_tasks)
    beta0_task = np.zeros(ctx.n_tasks)
    bid_task = np.empty(ctx.n_tasks)
    for p_idx, pol in enumerate(policies):
        jobs_mask = assignment == p_idx
        if not jobs_mask.any():
            continue
        rows = jobs_mask[ctx.task_job]
        kw0, kw1 = ctx.windows(ctx.plan_key(pol, owned_capacity, window_mode))
        w0[rows] = kw0[rows]
        w1[rows] = kw1[rows]
        beta0_task[rows] = pol.beta0 if pol.beta0 else 0.0
        bid_task[rows] = pol.bid if pol.bid is not None else np.inf
    sizes = w1 - w0
    want = owned_demand(ctx, sizes, beta0_task, owned_mode)
    if owned_mode == "none":
        r = np.zeros(ctx.n_tasks)
    else:
        r = pool_pass(np.argsort(w0, kind="stable"), w0, w1, want,
                      owned_capacity)
    cloud = np.maximum(ctx.task_z - r * sizes, 0.0)
    cap = np.maximum(ctx.task_delta - r, 1.0)
    spot_work = np.zeros(ctx.n_tasks)
    spot_cost = np.zeros(ctx.n_tasks)
    od_work = np.zeros(ctx.n_tasks)
    od_cost = np.zeros(ctx.n_tasks)
    for bid in np.unique(bid_task):
        rows = bid_task == bid
        sw, sc, ow, oc, _, _ = replay_windows(
            ctx.profile(None if np.isinf(bid) else float(bid)), w0[rows],
            w1[rows], cloud[rows], cap[rows])
        spot_work[rows] = sw
        spot_cost[rows] = sc
        od_work[rows] = ow
        od_cost[rows] = oc
    owned_work = np.minimum(r * sizes, ctx.task_z)
    return _ledger_from_tasks(ctx, owned_work, spot_work, spot_cost, od_work,
                              od_cost)


def run_policy_traced(chains: list[ChainJob], market: SpotMarket,
                      policy: PolicyTuple, owned_capacity: int,
                      window_mode: str = "policy",
                      owned_mode: str | None = None):
    """Slow reference run through the per-slot engine, with trace rows.

    Returns (CostLedger, trace) where trace rows are (job id, time, task
    id, owned, spot granted, ondemand, remaining). Events are processed in
    global (window start, job id, task index) order so pool reservations
    match the fast path.
    """
    from ..windows import plan_windows

    if owned_mode is None:
        owned_mode = "policy" if owned_capacity > 0 else "none"
    if owned_capacity == 0:
        owned_mode = "none"
    pool = OwnedPool(owned_capacity)
    events = []
    for j, chain in enumerate(chains):
        plan = (even_plan(chain) if window_mode == "even"
                else plan_windows(chain, policy, owned_capacity))
        for i, task in enumerate(chain.pseudo_tasks):
            events.append((plan.boundaries[i], chain.id, i, j, task,
                           plan.boundaries[i + 1]))
    events.sort(key=lambda ev: (ev[0], ev[1], ev[2]))

    n = len(chains)
    ledger = CostLedger(workload=np.array([c.total_size for c in chains]),
                        spot_cost=np.zeros(n), ondemand_cost=np.zeros(n),
                        spot_work=np.zeros(n), ondemand_work=np.zeros(n),
                        owned_work=np.zeros(n))
    trace: list[tuple] = []
    owned_alloc_total = 0.0
    for t0, job_id, i, j, task, t1 in events:
        if owned_mode == "naive":
            r = naive_self_owned(task, (t0, t1), pool)
        elif owned_mode == "policy":
            from ..instances import allocate_self_owned
            r = allocate_self_owned(task, (t0, t1), pool, policy.beta0)
        else:
            r = 0
        owned_alloc_total += r
        rows: list[tuple] = []
        out = run_task_window(task, (t0, t1), r, market, policy.bid,
                              trace=rows)
        trace.extend((job_id, *row) for row in rows)
        ledger.spot_cost[j] += out.spot_cost
        ledger.ondemand_cost[j] += out.ondemand_cost
        ledger.spot_work[j] += out.spot_work
        ledger.ondemand_work[j] += out.ondemand_work
        ledger.owned_work[j] += out.owned_work
        if out.completion > chains[j].deadline + 1e-6:
            raise AssertionError(f"job {job_id} missed its deadline")
    ledger.check_conservation()
    return ledger, trace, owned_alloc_total
