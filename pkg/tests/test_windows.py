import numpy as np
import pytest

from spotplan.chainify import ChainJob, TaskSpec
from spotplan.policy import PolicyTuple
from spotplan.windows import (InfeasibleWindowError, dealloc, plan_windows,
                              spot_capacity, total_spot_capacity)


def task(z, d, tid=1):
    return TaskSpec(id=tid, size=z, parallelism=d)


# The four-task instance of the worked allocation example.
GOLDEN_TASKS = tuple(task(z, d, i + 1)
                     for i, (z, d) in enumerate(zip((1.5, 0.5, 2.5, 0.5),
                                                    (2, 1, 3, 1))))


def test_spot_capacity_linear_region():
    # z=1.5, delta=2 (e=0.75), rate 0.5, window 4/3 -> 7/6
    assert spot_capacity(task(1.5, 2), 4 / 3, 0.5) == pytest.approx(7 / 6)


def test_spot_capacity_zero_at_minimum_window():
    assert spot_capacity(task(3.3, 4), 3.3 / 4, 0.7) == 0.0


def test_spot_capacity_saturates_at_full_size():
    # window = e/rate exactly: the whole task fits on spot
    assert spot_capacity(task(2.5, 3), 5 / 3, 0.5) == pytest.approx(2.5)
    assert spot_capacity(task(2.5, 3), 7.0, 0.5) == 2.5


def test_spot_capacity_continuous_at_junction():
    t = task(4.0, 2)
    e = t.min_exec_time
    for rate in (0.3, 0.5, 0.9):
        below = spot_capacity(t, e / rate - 1e-9, rate)
        assert below == pytest.approx(t.size, abs=1e-6)


def test_spot_capacity_rejects_short_window():
    with pytest.raises(InfeasibleWindowError):
        spot_capacity(task(2.0, 1), 1.5, 0.5)


def test_spot_capacity_monotone_in_window(rng):
    for _ in range(50):
        t = task(float(rng.uniform(0.5, 8)), int(rng.integers(1, 8)))
        rate = float(rng.uniform(0.1, 0.95))
        grid = np.linspace(t.min_exec_time, 3 * t.min_exec_time / rate, 80)
        vals = [spot_capacity(t, w, rate) for w in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[-1] == t.size


def test_dealloc_golden_example():
    plan = dealloc(GOLDEN_TASKS, (0.0, 4.0), 0.5)
    assert np.allclose(plan.sizes, [4 / 3, 1 / 2, 5 / 3, 1 / 2], atol=1e-9)
    objective = total_spot_capacity(GOLDEN_TASKS, plan.sizes, 0.5)
    assert objective == pytest.approx(22 / 6, abs=1e-9)
    assert np.allclose(plan.boundaries,
                       np.concatenate(([0.0], np.cumsum(plan.sizes))), atol=1e-12)


def test_dealloc_zero_slack_gives_minimal_windows(rng):
    tasks = [task(float(rng.uniform(0.5, 4)), int(rng.integers(1, 6)), i)
             for i in range(5)]
    total = sum(t.min_exec_time for t in tasks)
    plan = dealloc(tasks, (1.0, 1.0 + total), 0.4)
    assert np.allclose(plan.sizes, [t.min_exec_time for t in tasks], atol=1e-12)
    assert total_spot_capacity(tasks, plan.sizes, 0.4) == 0.0


def test_dealloc_infeasible_window_reports_deficit():
    with pytest.raises(InfeasibleWindowError) as err:
        dealloc(GOLDEN_TASKS, (0.0, 2.0), 0.5)
    assert err.value.deficit == pytest.approx(sum(t.min_exec_time
                                                  for t in GOLDEN_TASKS) - 2.0)


def test_dealloc_rate_one_allocates_no_slack():
    plan = dealloc(GOLDEN_TASKS, (0.0, 4.0), 1.0)
    assert np.allclose(plan.sizes, [t.min_exec_time for t in GOLDEN_TASKS])


def brute_force_best(tasks, span, rate, steps=200):
    """Grid search over slack splits; independent of the greedy path.

    Enumerates every grid assignment to all tasks but the last; each
    per-task workload table is nondecreasing in the granted slack, so the
    last task optimally takes whatever budget remains.
    """
    a, d = span
    e = np.array([t.min_exec_time for t in tasks])
    delta = np.array([t.parallelism for t in tasks], dtype=float)
    slack = (d - a) - e.sum()
    step = slack / steps
    tables = []
    for i, t in enumerate(tasks):
        cap = e[i] / rate - e[i]
        n_i = min(steps, int(np.ceil(cap / step - 1e-9)) + 1) if step > 0 else 0
        x = np.arange(n_i + 1) * step
        tables.append(np.where(e[i] + x >= e[i] / rate - 1e-12, t.size,
                               rate / (1 - rate) * delta[i] * x))
    last = tables[-1]
    if len(tables) == 1:
        best = last[min(steps, len(last) - 1)]
    else:
        grids = np.meshgrid(*[np.arange(len(tb)) for tb in tables[:-1]],
                            indexing="ij")
        used = sum(grids)
        obj = sum(tb[g] for tb, g in zip(tables[:-1], grids))
        residual = np.clip(steps - used, 0, len(last) - 1)
        total = np.where(used <= steps, obj + last[residual], -np.inf)
        best = float(total.max())
    return best, step * float(np.max(rate / (1 - rate) * delta))


def test_dealloc_matches_brute_force_oracle(rng):
    for _ in range(40):
        l = int(rng.integers(1, 5))
        tasks = [task(float(rng.uniform(0.5, 4)), int(rng.integers(1, 6)), i)
                 for i in range(l)]
        rate = float(rng.uniform(0.2, 0.8))
        total_e = sum(t.min_exec_time for t in tasks)
        span = (0.0, total_e * float(rng.uniform(1.05, 2.5)))
        plan = dealloc(tasks, span, rate)
        got = total_spot_capacity(tasks, plan.sizes, rate)
        best, tol = brute_force_best(tasks, span, rate)
        assert got >= best - 1e-9
        assert abs(got - best) <= tol + 1e-9


def test_dealloc_exchange_optimality(rng):
    """Moving slack from a higher-parallelism recipient to a lower one
    never increases the objective."""
    for _ in range(60):
        l = int(rng.integers(2, 6))
        tasks = [task(float(rng.uniform(0.5, 4)), int(rng.integers(1, 6)), i)
                 for i in range(l)]
        rate = float(rng.uniform(0.2, 0.8))
        total_e = sum(t.min_exec_time for t in tasks)
        plan = dealloc(tasks, (0.0, total_e * 1.6), rate)
        base = total_spot_capacity(tasks, plan.sizes, rate)
        slack = plan.slack
        donors = [i for i in range(l) if slack[i] > 1e-6]
        for i in donors:
            for j in range(l):
                if j == i or tasks[j].parallelism > tasks[i].parallelism:
                    continue
                eps = min(1e-3, slack[i] / 2)
                sizes = plan.sizes.copy()
                sizes[i] -= eps
                sizes[j] += eps
                assert total_spot_capacity(tasks, sizes, rate) <= base + 1e-9


def test_dealloc_plan_always_valid(rng):
    for _ in range(60):
        l = int(rng.integers(1, 7))
        tasks = [task(float(rng.uniform(0.5, 4)), int(rng.integers(1, 6)), i)
                 for i in range(l)]
        rate = float(rng.uniform(0.1, 1.0))
        total_e = sum(t.min_exec_time for t in tasks)
        a = float(rng.uniform(0, 3))
        d = a + total_e * float(rng.uniform(1.0, 3.0))
        plan = dealloc(tasks, (a, d), rate)
        plan.validate([t.min_exec_time for t in tasks], d)
        assert plan.boundaries[0] == a


def chain_of(tasks, arrival, deadline):
    return ChainJob(id=1, arrival=arrival, deadline=deadline,
                    pseudo_tasks=tuple(tasks),
                    origin_map=tuple(((t.id, t.size),) for t in tasks))


def test_plan_windows_branch_selection():
    job = chain_of(GOLDEN_TASKS, 0.0, 4.0)
    base_beta = dealloc(GOLDEN_TASKS, (0.0, 4.0), 0.5)
    base_beta0 = dealloc(GOLDEN_TASKS, (0.0, 4.0), 0.3)

    no_owned = plan_windows(job, PolicyTuple(beta=0.5, beta0=0.3), owned_count=0)
    assert np.allclose(no_owned.sizes, base_beta.sizes)

    owned_low_beta0 = plan_windows(job, PolicyTuple(beta=0.5, beta0=0.3),
                                   owned_count=7)
    assert np.allclose(owned_low_beta0.sizes, base_beta0.sizes)

    owned_high_beta0 = plan_windows(job, PolicyTuple(beta=0.5, beta0=0.7),
                                    owned_count=7)
    assert np.allclose(owned_high_beta0.sizes, base_beta.sizes)
