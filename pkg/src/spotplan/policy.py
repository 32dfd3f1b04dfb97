"""Parametric allocation policies and the default experiment grids.

A policy is a tuple (beta0, beta, bid): beta0 steers how many self-owned
instances each task receives, beta is the planner's belief about per-slot
spot availability, and bid is the price offered for spot capacity (None in
fixed-price markets that take no bid).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product


@dataclass(frozen=True)
class PolicyTuple:
    """Learnable policy parameters {beta0, beta, bid}."""

    beta: float
    bid: float | None = None
    beta0: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.beta0 is not None and not 0.0 < self.beta0 <= 1.0:
            raise ValueError(f"beta0 must be in (0, 1], got {self.beta0}")
        if self.bid is not None and self.bid < 0.0:
            raise ValueError(f"bid must be nonnegative, got {self.bid}")

    def label(self) -> str:
        parts = [f"beta={self.beta:.4g}"]
        if self.beta0 is not None:
            parts.insert(0, f"beta0={self.beta0:.4g}")
        if self.bid is not None:
            parts.append(f"bid={self.bid:.4g}")
        return ",".join(parts)


# Default parameter grids for the experiment sweeps.
BETA0_GRID = (2 / 12, 4 / 14, 6 / 16, 8 / 18, 1 / 2, 0.6, 0.7)
BETA_GRID = (1.0, 1 / 1.3, 1 / 1.6, 1 / 1.9, 1 / 2.2)
BID_GRID = (0.18, 0.21, 0.24, 0.27, 0.30)


def spot_policy_set(betas=BETA_GRID, bids=BID_GRID) -> list[PolicyTuple]:
    """Policies for a user with no self-owned instances: (beta, bid) pairs."""
    return [PolicyTuple(beta=b, bid=p) for b, p in product(betas, bids)]


def owned_policy_set(beta0s=BETA0_GRID, betas=BETA_GRID,
                     bids=BID_GRID) -> list[PolicyTuple]:
    """Policies when self-owned instances exist: (beta0, beta, bid) triples."""
    return [PolicyTuple(beta=b, bid=p, beta0=b0)
            for b0, b, p in product(beta0s, betas, bids)]
