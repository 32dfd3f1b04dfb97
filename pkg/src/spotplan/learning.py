"""Online learning over parametric policies by multiplicative weights.

Jobs are processed with policies sampled from a weight vector. Once a
job's deadline has passed, the recorded price trace pins down what every
policy in the set would have paid for it, and the weights are updated
with exponential factors exp(-eta * cost). Costs are normalized by the
all-on-demand bound (on-demand price times total workload) so they live
in [0, 1] as the update requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chainify import ChainJob
from .instances import replay_windows, required_self_owned
from .market import SpotMarket, availability_profile
from .policy import PolicyTuple
from .windows import plan_windows

WEIGHT_TOL = 1e-12


class SequencingError(RuntimeError):
    """Weight update requested before the warm-up horizon d has passed."""


@dataclass(frozen=True)
class WeightVector:
    """Probability weights over n policies plus the update counter."""

    weights: np.ndarray
    kappa: int = 1

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")

    @property
    def n(self) -> int:
        return len(self.weights)


def uniform_weights(n: int) -> WeightVector:
    return WeightVector(weights=np.full(n, 1.0 / n), kappa=1)


def pick_policy(weights: WeightVector, rng: np.random.Generator) -> int:
    """Sample a policy index from the categorical weight distribution."""
    return int(rng.choice(weights.n, p=weights.weights))


def learning_rate(n: int, d: float, t: float) -> float:
    """Step size sqrt(2 log n / (d (t - d))) for an update at time t > d."""
    if t <= d:
        raise SequencingError(f"update time {t} must exceed the horizon {d}")
    return math.sqrt(2.0 * math.log(n) / (d * (t - d)))


def update_weights(weights: WeightVector, costs, t: float, d: float) -> WeightVector:
    """One multiplicative-weights update from one job's per-policy costs.

    costs must be normalized to [0, 1]. New weights are proportional to
    w * exp(-eta_t * cost) and renormalized; the counter advances.
    """
    costs = np.asarray(costs, dtype=float)
    if len(costs) != weights.n:
        raise ValueError("one cost per policy required")
    eta = learning_rate(weights.n, d, t)
    scaled = weights.weights * np.exp(-eta * costs)
    total = scaled.sum()
    if total <= 0:
        raise ValueError("all weights collapsed to zero")
    return WeightVector(weights=scaled / total, kappa=weights.kappa + 1)


def regret_bound(n: int, d: float, n_jobs: int, confidence: float) -> float:
    """Per-job regret bound 9 * sqrt(2 d log(n / confidence) / n_jobs)."""
    if n_jobs <= 0:
        raise ValueError("n_jobs must be positive")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    return 9.0 * math.sqrt(2.0 * d * math.log(n / confidence) / n_jobs)


def counterfactual_cost(job: ChainJob, policy: PolicyTuple, market: SpotMarket,
                        owned_capacity: int = 0,
                        profile=None) -> float:
    """Money the policy would have spent on `job` against the recorded trace.

    Deterministic pure replay: plans windows, allocates self-owned
    instances against a private pool holding the full capacity (no
    contention from other jobs), and replays the spot/on-demand engine
    over the price trace. No live state is touched.
    """
    if job.deadline > market.horizon + 1e-9:
        raise ValueError("price trace does not cover the job window")
    plan = plan_windows(job, policy, owned_capacity)
    if profile is None:
        profile = availability_profile(market, policy.bid)
    sizes = job.sizes
    deltas = job.parallelisms
    owned = np.zeros(len(sizes))
    if owned_capacity > 0 and policy.beta0 is not None:
        for i, task in enumerate(job.pseudo_tasks):
            need = required_self_owned(task, plan.sizes[i], policy.beta0)
            want = 0 if need <= 1e-9 else math.ceil(need - 1e-9)
            owned[i] = min(want, owned_capacity, task.parallelism)
    cloud = np.maximum(sizes - owned * plan.sizes, 0.0)
    cap = deltas - owned
    _, spot_cost, _, od_cost, _, _ = replay_windows(
        profile, plan.boundaries[:-1], plan.boundaries[1:], cloud, cap)
    return float(spot_cost.sum() + od_cost.sum())
