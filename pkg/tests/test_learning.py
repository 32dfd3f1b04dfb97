import math

import numpy as np
import pytest

from spotplan.chainify import ChainJob, TaskSpec
from spotplan.learning import (SequencingError, WeightVector,
                               counterfactual_cost, learning_rate, pick_policy,
                               regret_bound, uniform_weights, update_weights)
from spotplan.market import SpotMarket, availability_profile
from spotplan.policy import PolicyTuple
from spotplan.windows import plan_windows


def chain(sizes, deltas, arrival=0.0, deadline=None):
    tasks = tuple(TaskSpec(id=i + 1, size=z, parallelism=d)
                  for i, (z, d) in enumerate(zip(sizes, deltas)))
    e_total = sum(t.min_exec_time for t in tasks)
    if deadline is None:
        deadline = arrival + 2.5 * e_total
    return ChainJob(id=1, arrival=arrival, deadline=deadline,
                    pseudo_tasks=tasks,
                    origin_map=tuple(((t.id, t.size),) for t in tasks))


def test_weight_vector_validates():
    with pytest.raises(ValueError):
        WeightVector(weights=np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        WeightVector(weights=np.array([1.5, -0.5]))


def test_pick_policy_degenerate():
    w = WeightVector(weights=np.array([1.0, 0.0, 0.0]))
    rng = np.random.default_rng(0)
    assert all(pick_policy(w, rng) == 0 for _ in range(50))


def test_pick_policy_uniform_frequencies():
    n, draws = 8, 100_000
    w = uniform_weights(n)
    rng = np.random.default_rng(42)
    counts = np.bincount([pick_policy(w, rng) for _ in range(draws)], minlength=n)
    p = 1 / n
    sigma = math.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) < 3 * sigma)


def test_pick_policy_seed_reproducible():
    w = WeightVector(weights=np.array([0.2, 0.3, 0.5]))
    seq1 = [pick_policy(w, np.random.default_rng(7)) for _ in range(10)]
    seq2 = [pick_policy(w, np.random.default_rng(7)) for _ in range(10)]
    assert seq1 == seq2


def test_learning_rate_formula():
    # sqrt(2 ln 25 / (3 * 3))
    assert learning_rate(25, 3, 6) == pytest.approx(0.8457574941196797)
    with pytest.raises(SequencingError):
        learning_rate(25, 3.0, 3.0)


def test_update_weights_two_policies():
    w = WeightVector(weights=np.array([0.5, 0.5]))
    # choose t so that eta = 1 exactly: 2 ln 2 / (d (t-d)) = 1
    d = 1.0
    t = d + 2 * math.log(2)
    out = update_weights(w, [0.0, 1.0], t, d)
    assert out.weights[0] == pytest.approx(1 / (1 + math.exp(-1)))
    assert out.weights[1] == pytest.approx(math.exp(-1) / (1 + math.exp(-1)))
    assert out.kappa == 2


def test_update_weights_equal_costs_no_change():
    w = WeightVector(weights=np.array([0.1, 0.2, 0.7]))
    out = update_weights(w, [0.4, 0.4, 0.4], t=10.0, d=2.0)
    assert np.allclose(out.weights, w.weights, atol=1e-12)


def test_update_weights_mass_conserved(rng):
    w = uniform_weights(6)
    t = 3.0
    for _ in range(300):
        t += 0.1
        w = update_weights(w, rng.uniform(0, 1, size=6), t, d=2.0)
        assert abs(w.weights.sum() - 1.0) < 1e-12
    assert w.kappa == 301


def test_weights_converge_to_dominant_policy(rng):
    """A policy cheaper by >= 0.2 (normalized) collects > 0.9 weight
    within 500 updates."""
    w = uniform_weights(5)
    t = 4.0
    for _ in range(500):
        t += 0.25
        costs = rng.uniform(0.4, 0.8, size=5)
        costs[2] = rng.uniform(0.05, 0.15)
        w = update_weights(w, costs, t, d=3.0)
    assert w.weights[2] > 0.9


def test_regret_bound_values():
    assert regret_bound(25, 9, 10_000, 0.1) == pytest.approx(0.8972340841855683)
    # shrinks with more jobs
    assert regret_bound(25, 9, 40_000, 0.1) == pytest.approx(
        regret_bound(25, 9, 10_000, 0.1) / 2)
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            regret_bound(25, 9, 100, bad)


def test_counterfactual_full_availability_is_spot_only():
    job = chain([4.0, 2.0], [2, 1], deadline=20.0)
    market = SpotMarket(prices=np.full(260, 0.2))
    policy = PolicyTuple(beta=0.5, bid=0.9)  # bid above every price
    cost = counterfactual_cost(job, policy, market)
    # spot runs each task at full parallelism for e_i: cost = sum(price*z)
    assert cost == pytest.approx(0.2 * (4.0 + 2.0), abs=1e-9)


def test_counterfactual_zero_availability_is_all_ondemand():
    job = chain([4.0, 2.0], [2, 1], deadline=9.0)
    market = SpotMarket(prices=np.full(120, 0.5))
    policy = PolicyTuple(beta=0.5, bid=0.12)  # below the price floor
    cost = counterfactual_cost(job, policy, market)
    assert cost == pytest.approx(1.0 * (4.0 + 2.0), abs=1e-9)


def test_counterfactual_deterministic():
    job = chain([4.0, 2.0, 3.0], [2, 1, 3], deadline=12.0)
    market = SpotMarket(prices=np.tile([0.13, 0.4, 0.2], 60))
    policy = PolicyTuple(beta=0.6, bid=0.21)
    assert counterfactual_cost(job, policy, market) == \
        counterfactual_cost(job, policy, market)


def test_counterfactual_with_owned_capacity_cheaper():
    job = chain([6.0, 3.0], [3, 2], deadline=7.0)
    market = SpotMarket(prices=np.full(100, 0.5))
    policy = PolicyTuple(beta=0.5, bid=0.3, beta0=0.3)
    base = counterfactual_cost(job, policy, market, owned_capacity=0)
    with_pool = counterfactual_cost(job, policy, market, owned_capacity=4)
    assert with_pool < base


def test_counterfactual_requires_trace_coverage():
    job = chain([4.0], [1], deadline=50.0)
    market = SpotMarket(prices=np.full(12, 0.2))
    with pytest.raises(ValueError):
        counterfactual_cost(job, PolicyTuple(beta=0.5, bid=0.3), market)
