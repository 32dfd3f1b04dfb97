"""Experiment orchestration: policy sweeps, online learning, metrics.

Four experiment families mirror the evaluation protocol:
  1. spot/on-demand only: the window allocator against greedy and even
     baselines (x1 = 0);
  2. full framework with self-owned instances against even windows plus
     naive first-come-first-served owned allocation;
  3. the owned-allocation rule alone against the naive rule under the
     same window allocator;
  4. online learning (multiplicative weights) over each policy family.

alpha is money per unit workload; rho = 1 - alpha/alpha' is the cost
improvement of the best proposed policy over the best benchmark policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..chainify import transform
from ..learning import (pick_policy, regret_bound, uniform_weights,
                        update_weights)
from ..market import ONDEMAND_PRICE, sample_price_trace
from ..policy import BID_GRID, PolicyTuple, owned_policy_set, spot_policy_set
from .benchmarks import greedy_run
from .generator import GeneratorConfig, generate_jobs
from .simulate import (CellResult, JobSetContext, run_framework_cell,
                       run_greedy_cell, run_mixed_cell)

_CONTEXT_CACHE: dict = {}


def build_context(seed: int, job_type: int, n_jobs: int,
                  config: GeneratorConfig | None = None) -> JobSetContext:
    """Jobs + market for one (seed, job type); cached within a process."""
    key = (seed, job_type, n_jobs, config)
    if key not in _CONTEXT_CACHE:
        cfg = config or GeneratorConfig()
        cfg = GeneratorConfig(**{**cfg.__dict__, "seed": seed,
                                 "job_type": job_type, "job_count": n_jobs})
        jobs = generate_jobs(cfg)
        chains = [transform(j) for j in jobs]
        horizon = max(c.deadline for c in chains) + 1.0
        market = sample_price_trace(seed, horizon)
        _CONTEXT_CACHE[key] = JobSetContext(chains, market)
    return _CONTEXT_CACHE[key]


def best_cell(cells: list[CellResult]) -> CellResult:
    return min(cells, key=lambda c: c.alpha)


@dataclass
class SweepOutcome:
    """One experiment cell: best proposed vs best benchmark, per seed."""

    x1: int
    x2: int
    rho_by_benchmark: dict[str, float]
    mu: float | None
    alpha_proposed: float
    alpha_benchmarks: dict[str, float]
    policy_alphas: dict[str, float] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def _proposed_cells(ctx, x1: int, policies=None) -> list[CellResult]:
    policies = policies or (owned_policy_set() if x1 > 0 else spot_policy_set())
    return [run_framework_cell(ctx, p, owned_capacity=x1) for p in policies]


def experiment_spot_only(seed: int, job_type: int, n_jobs: int,
                         policies=None, bids=BID_GRID,
                         config=None) -> SweepOutcome:
    """Experiment 1: window allocator vs greedy and even baselines, x1=0."""
    ctx = build_context(seed, job_type, n_jobs, config)
    proposed = _proposed_cells(ctx, 0, policies)
    greedy = [run_greedy_cell(ctx, b) for b in bids]
    even = [run_framework_cell(ctx, PolicyTuple(beta=0.5, bid=b),
                               owned_capacity=0, window_mode="even",
                               label=f"even,bid={b:.4g}") for b in bids]
    best_p, best_g, best_e = best_cell(proposed), best_cell(greedy), best_cell(even)
    return SweepOutcome(
        x1=0, x2=job_type,
        rho_by_benchmark={"greedy": 1 - best_p.alpha / best_g.alpha,
                          "even": 1 - best_p.alpha / best_e.alpha},
        mu=None, alpha_proposed=best_p.alpha,
        alpha_benchmarks={"greedy": best_g.alpha, "even": best_e.alpha},
        policy_alphas={c.label: c.alpha for c in proposed + greedy + even})


def experiment_owned(seed: int, job_type: int, n_jobs: int, x1: int,
                     policies=None, bids=BID_GRID, betas=None,
                     config=None) -> SweepOutcome:
    """Experiments 2 and 3 with x1 self-owned instances.

    Benchmarks: "even_naive" (even windows + naive owned rule, swept over
    bids) for the whole framework, and "naive_owned" (the window allocator
    at rate beta + naive owned rule, swept over (beta, bid)) isolating the
    owned-allocation policy. mu is the owned instance-time of the best
    proposed cell over the best naive_owned cell.
    """
    from ..policy import BETA_GRID
    ctx = build_context(seed, job_type, n_jobs, config)
    proposed = _proposed_cells(ctx, x1, policies)
    even_naive = [run_framework_cell(ctx, PolicyTuple(beta=0.5, bid=b),
                                     owned_capacity=x1, window_mode="even",
                                     owned_mode="naive",
                                     label=f"even+naive,bid={b:.4g}")
                  for b in bids]
    naive_owned = [run_framework_cell(ctx, PolicyTuple(beta=beta, bid=b),
                                      owned_capacity=x1, owned_mode="naive",
                                      label=f"naive,beta={beta:.4g},bid={b:.4g}")
                   for beta in (betas or BETA_GRID) for b in bids]
    best_p = best_cell(proposed)
    best_en = best_cell(even_naive)
    best_no = best_cell(naive_owned)
    mu = (best_p.owned_work_total / best_no.owned_work_total
          if best_no.owned_work_total > 0 else None)
    return SweepOutcome(
        x1=x1, x2=job_type,
        rho_by_benchmark={"even_naive": 1 - best_p.alpha / best_en.alpha,
                          "naive_owned": 1 - best_p.alpha / best_no.alpha},
        mu=mu, alpha_proposed=best_p.alpha,
        alpha_benchmarks={"even_naive": best_en.alpha,
                          "naive_owned": best_no.alpha},
        policy_alphas={c.label: c.alpha for c in proposed + even_naive + naive_owned},
        extras={"owned_alloc_proposed": best_p.owned_alloc_total})


@dataclass
class LearningResult:
    """Online-learning run over one policy family."""

    family: str
    alpha: float
    total_cost: float
    total_workload: float
    assignment: np.ndarray
    weight_log: list[tuple]
    cost_matrix: np.ndarray
    live_costs: np.ndarray
    d: float
    n_regret_jobs: int
    regret_per_job: float
    regret_bound_01: float
    best_policy: int
    policy_labels: list[str]


def _family_cost_matrix(ctx: JobSetContext, family: str,
                        policies: list[PolicyTuple], x1: int) -> np.ndarray:
    """Counterfactual per-job costs for every policy (private owned pool)."""
    cols = []
    for pol in policies:
        if family == "greedy":
            profile = ctx.profile(pol.bid)
            outs = [greedy_run(c, profile) for c in ctx.chains]
            cols.append(np.array([o.spot_cost + o.ondemand_cost for o in outs]))
        else:
            window_mode = "even" if family == "even_naive" else "policy"
            owned_mode = "naive" if family == "even_naive" else None
            cell = _private_pool_cell(ctx, pol, x1, window_mode, owned_mode)
            cols.append(cell.ledger.job_costs)
    return np.column_stack(cols)


def _private_pool_cell(ctx, pol, x1, window_mode, owned_mode) -> CellResult:
    """Framework cell where each job sees the whole owned capacity."""
    from ..instances import replay_windows
    from .simulate import _ledger_from_tasks, owned_demand
    if owned_mode is None:
        owned_mode = "policy" if x1 > 0 else "none"
    if x1 == 0:
        owned_mode = "none"
    key = ctx.plan_key(pol, x1, window_mode)
    w0, w1 = ctx.windows(key)
    sizes = w1 - w0
    want = owned_demand(ctx, sizes, pol.beta0 if pol.beta0 else 0.0, owned_mode)
    r = np.minimum(want, x1)
    cloud = np.maximum(ctx.task_z - r * sizes, 0.0)
    cap = np.maximum(ctx.task_delta - r, 1.0)
    sw, sc, ow, oc, _, _ = replay_windows(ctx.profile(pol.bid), w0, w1,
                                          cloud, cap)
    owned_work = np.minimum(r * sizes, ctx.task_z)
    ledger = _ledger_from_tasks(ctx, owned_work, sw, sc, ow, oc)
    return CellResult(label=pol.label(), ledger=ledger,
                      owned_alloc_total=float(r.sum()))


def run_learning(ctx: JobSetContext, policies: list[PolicyTuple], x1: int,
                 seed: int, family: str = "framework") -> LearningResult:
    """TOLA: sample a policy per arriving job, update weights once per job
    as soon as its deadline horizon has passed.

    Weight updates consume counterfactual costs normalized by the
    all-on-demand bound (on-demand price times job workload), keeping them
    in [0, 1]. The maximum relative deadline d comes from the realized job
    set. Returns the live ledger metrics plus the empirical regret against
    the best fixed policy in the family.
    """
    n = len(policies)
    n_jobs = ctx.n_jobs
    arrivals = ctx.job_arrival
    d = float(np.max(ctx.job_deadline - arrivals))
    norm = ONDEMAND_PRICE * ctx.job_workload
    cost_matrix = _family_cost_matrix(ctx, family, policies, x1)
    norm_costs = cost_matrix / norm[:, None]

    rng = np.random.default_rng(seed)
    weights = uniform_weights(n)
    assignment = np.full(n_jobs, -1, dtype=int)
    events = sorted([(arrivals[j], 0, j) for j in range(n_jobs)] +
                    [(arrivals[j] + d, 1, j) for j in range(n_jobs)])
    weight_log: list[tuple] = []
    for t, kind, j in events:
        if kind == 0:
            assignment[j] = pick_policy(weights, rng)
        else:
            weights = update_weights(weights, norm_costs[j], t, d)
            weight_log.extend((weights.kappa - 1, t, p, weights.weights[p])
                              for p in range(n))

    if family == "greedy":
        live_costs = np.empty(n_jobs)
        for j, chain in enumerate(ctx.chains):
            out = greedy_run(chain, ctx.profile(policies[assignment[j]].bid))
            live_costs[j] = out.spot_cost + out.ondemand_cost
    else:
        window_mode = "even" if family == "even_naive" else "policy"
        owned_mode = "naive" if family == "even_naive" else None
        ledger = run_mixed_cell(ctx, policies, assignment, x1,
                                window_mode=window_mode, owned_mode=owned_mode)
        live_costs = ledger.job_costs

    # Prop-6 regret window: jobs arriving after the first horizon d; at
    # desk scale that window can be empty, in which case all jobs count.
    tail = np.flatnonzero(arrivals >= d)
    if len(tail) == 0:
        tail = np.arange(n_jobs)
    totals = norm_costs[tail].sum(axis=0)
    best = int(np.argmin(cost_matrix.sum(axis=0)))
    best_tail = int(np.argmin(totals))
    live_norm = live_costs[tail] / norm[tail]
    regret = float((live_norm.sum() - totals[best_tail]) / len(tail))
    return LearningResult(
        family=family, alpha=float(live_costs.sum() / ctx.job_workload.sum()),
        total_cost=float(live_costs.sum()),
        total_workload=float(ctx.job_workload.sum()),
        assignment=assignment, weight_log=weight_log,
        cost_matrix=cost_matrix, live_costs=live_costs, d=d,
        n_regret_jobs=len(tail), regret_per_job=regret,
        regret_bound_01=regret_bound(n, d, len(tail), 0.1),
        best_policy=best,
        policy_labels=[p.label() for p in policies])


def experiment_learning(seed: int, job_type: int, n_jobs: int, x1: int,
                        config=None) -> dict:
    """Experiment 4: TOLA over the proposed family vs TOLA over the
    benchmark family; rho_bar compares their realized unit costs."""
    ctx = build_context(seed, job_type, n_jobs, config)
    if x1 > 0:
        proposed = run_learning(ctx, owned_policy_set(), x1, seed,
                                family="framework")
        bench_pols = [PolicyTuple(beta=0.5, bid=b) for b in BID_GRID]
        benchmark = run_learning(ctx, bench_pols, x1, seed + 10 ** 6,
                                 family="even_naive")
    else:
        proposed = run_learning(ctx, spot_policy_set(), 0, seed,
                                family="framework")
        bench_pols = [PolicyTuple(beta=0.5, bid=b) for b in BID_GRID]
        benchmark = run_learning(ctx, bench_pols, 0, seed + 10 ** 6,
                                 family="greedy")
    return {"proposed": proposed, "benchmark": benchmark,
            "rho_bar": 1 - proposed.alpha / benchmark.alpha}
