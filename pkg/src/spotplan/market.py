"""Spot price process, billing rules, and the self-owned instance pool.

Time is divided into fixed market slots of width 1/12; the spot price is
redrawn i.i.d. per slot from an exponential (mean 0.13) rejection-sampled
into [0.12, 1.0]. A bid wins a slot when bid >= price (all-or-nothing per
task per slot). On-demand capacity is always available at the normalized
price 1 and, like spot, is billed pro rata by instance-time. Self-owned
capacity costs nothing but is finite: reservations hold instances over
closed intervals and may be refused.
"""

from __future__ import annotations

import bisect
import csv
import heapq
from dataclasses import dataclass, field

import numpy as np

SLOT_WIDTH = 1.0 / 12.0
ONDEMAND_PRICE = 1.0
PRICE_MEAN = 0.13
PRICE_LO = 0.12
PRICE_HI = 1.0


class HorizonError(IndexError):
    """A slot index beyond the sampled price trace was requested."""


@dataclass(frozen=True)
class SpotMarket:
    """Immutable per-slot spot price trace plus the fixed on-demand price."""

    prices: np.ndarray
    slot_width: float = SLOT_WIDTH
    ondemand_price: float = ONDEMAND_PRICE

    @property
    def n_slots(self) -> int:
        return len(self.prices)

    @property
    def horizon(self) -> float:
        return self.n_slots * self.slot_width

    def price(self, slot_index: int) -> float:
        if not 0 <= slot_index < self.n_slots:
            raise HorizonError(f"slot {slot_index} outside trace of {self.n_slots}")
        return float(self.prices[slot_index])

    def slot_of(self, t: float) -> int:
        return int(np.floor(t / self.slot_width + 1e-9))


def sample_price_trace(seed: int, horizon: float, mean: float = PRICE_MEAN,
                       lo: float = PRICE_LO, hi: float = PRICE_HI) -> SpotMarket:
    """Sample a price trace covering `horizon` time units.

    Draws are exponential with the given mean, rejection-resampled until
    they land in [lo, hi] (no probability atom at either bound).
    Deterministic for a fixed seed.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    n = int(np.ceil(horizon / SLOT_WIDTH)) + 1
    out = np.empty(n)
    todo = n
    filled = 0
    while todo:
        draws = rng.exponential(mean, size=2 * todo + 16)
        ok = draws[(draws >= lo) & (draws <= hi)][:todo]
        out[filled:filled + len(ok)] = ok
        filled += len(ok)
        todo -= len(ok)
    return SpotMarket(prices=out)


def grant_spot(market: SpotMarket, slot_index: int, bid: float,
               requested: int) -> int:
    """Instances granted for one slot: all of `requested` when bid >= price."""
    if requested < 0:
        raise ValueError("requested must be nonnegative")
    return requested if bid >= market.price(slot_index) else 0


def bill(kind: str, count: float, duration: float,
         slot_price: float | None = None) -> float:
    """Money owed for `count` instances of one class running `duration`."""
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if kind == "ondemand":
        return ONDEMAND_PRICE * count * duration
    if kind == "spot":
        if slot_price is None:
            raise ValueError("spot billing needs the slot price")
        return slot_price * count * duration
    if kind == "selfowned":
        return 0.0
    raise ValueError(f"unknown instance class {kind!r}")


def save_price_trace(market: SpotMarket, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot_index", "price"])
        for k, p in enumerate(market.prices):
            writer.writerow([k, repr(float(p))])


def load_price_trace(path) -> SpotMarket:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    prices = np.empty(len(rows))
    for row in rows:
        prices[int(row["slot_index"])] = float(row["price"])
    return SpotMarket(prices=prices)


class OwnedPool:
    """Self-owned instances reservable over time intervals.

    Keeps an exact piecewise-constant occupancy over reservation endpoints
    (no time discretization). idle(t) is the instantaneous free count;
    idle_min(t1, t2) is the largest count free throughout [t1, t2].
    reserve() refuses (returns False) rather than oversubscribe.
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be nonnegative")
        self.capacity = int(capacity)
        self._times: list[float] = [-np.inf]
        self._occ: list[int] = [0]

    def idle(self, t: float) -> int:
        i = bisect.bisect_right(self._times, t) - 1
        return self.capacity - self._occ[i]

    def idle_min(self, t1: float, t2: float) -> int:
        """N(t1, t2): min idle count over the closed interval [t1, t2]."""
        if t2 < t1:
            raise ValueError("empty interval")
        lo = bisect.bisect_right(self._times, t1) - 1
        hi = bisect.bisect_right(self._times, t2) - 1
        return self.capacity - max(self._occ[lo:hi + 1])

    def reserve(self, t1: float, t2: float, count: int) -> bool:
        """Hold `count` instances over [t1, t2); False when short of capacity."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        if count == 0:
            return True
        if self.idle_min(t1, t2) < count:
            return False
        for t in (t1, t2):
            i = bisect.bisect_right(self._times, t) - 1
            if self._times[i] != t:
                self._times.insert(i + 1, t)
                self._occ.insert(i + 1, self._occ[i])
        lo = bisect.bisect_left(self._times, t1)
        hi = bisect.bisect_left(self._times, t2)
        for i in range(lo, hi):
            self._occ[i] += count
        return True


class MonotonePool:
    """Heap-backed pool for time-ordered workloads.

    Valid when every reserve/idle_min call uses a start time no earlier
    than any previous call's start time (the event loop's case: tasks
    reserve at their window start). Then occupancy over [t1, t2] peaks at
    t1, so idle_min(t1, t2) = idle(t1).
    """

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self._busy = 0
        self._ends: list[tuple[float, int]] = []
        self._front = -np.inf

    def _advance(self, t: float) -> None:
        if t < self._front - 1e-9:
            raise ValueError("MonotonePool requires nondecreasing start times")
        self._front = max(self._front, t)
        while self._ends and self._ends[0][0] <= t + 1e-12:
            _, c = heapq.heappop(self._ends)
            self._busy -= c

    def idle_min(self, t1: float, t2: float) -> int:
        self._advance(t1)
        return self.capacity - self._busy

    def reserve(self, t1: float, t2: float, count: int) -> bool:
        self._advance(t1)
        if count > self.capacity - self._busy:
            return False
        if count > 0:
            self._busy += count
            heapq.heappush(self._ends, (t2, count))
        return True


@dataclass(frozen=True)
class AvailabilityProfile:
    """Cumulative spot availability under a fixed bid, for fast replays.

    For slot boundaries t = k/12, cum_avail[k] is the total time with
    bid >= price in [0, t], cum_unavail[k] the complement, and cum_cost[k]
    the integral of price over the available time. Values at arbitrary t
    interpolate linearly inside the slot. avail may be fractional in
    [0, 1] (used by deterministic-availability replays); the market grant
    rule itself produces only 0/1 columns.
    """

    avail: np.ndarray
    cum_avail: np.ndarray
    cum_unavail: np.ndarray
    cum_cost: np.ndarray
    prices: np.ndarray
    slot_width: float = SLOT_WIDTH

    @property
    def horizon(self) -> float:
        return len(self.avail) * self.slot_width

    def measures_at(self, t):
        """(available time, unavailable time, available price integral) on [0, t]."""
        t = np.asarray(t, dtype=float)
        x = t / self.slot_width
        k = np.minimum(np.floor(x + 1e-9).astype(int), len(self.avail) - 1)
        frac = np.maximum(t - k * self.slot_width, 0.0)
        a = self.cum_avail[k] + self.avail[k] * frac
        u = self.cum_unavail[k] + (1.0 - self.avail[k]) * frac
        c = self.cum_cost[k] + self.avail[k] * self.prices[k] * frac
        return a, u, c

    def first_time_unavail(self, target):
        """Earliest t with cumulative unavailable time >= target (vectorized)."""
        return _inverse_cumulative(self.cum_unavail, target, self.slot_width)

    def first_time_avail(self, target):
        """Earliest t with cumulative available time >= target (vectorized)."""
        return _inverse_cumulative(self.cum_avail, target, self.slot_width)


def _inverse_cumulative(cum: np.ndarray, target, width: float):
    """Generalized inverse of a piecewise-linear cumulative measure.

    cum[k] is the measure of [0, k*width]; the measure is linear inside a
    slot. Returns the earliest t with measure >= target, or +inf when the
    whole trace never accumulates that much. searchsorted(side="left")
    guarantees cum[i-1] < target strictly, so the crossing slot has a
    strictly positive slope and one interpolation covers equality cases.
    """
    arr = np.asarray(target, dtype=float)
    scalar = arr.ndim == 0
    tgt = np.maximum(np.atleast_1d(arr), 0.0)
    # Targets within 1e-9 of a boundary value count as crossed there, so
    # float noise in cumulative sums cannot push a crossing past a flat
    # (zero-slope) run and silently extend the measured interval.
    i = np.searchsorted(cum, tgt - 1e-9, side="left")
    out = np.full(tgt.shape, np.inf)
    out[i == 0] = 0.0
    ok = (i >= 1) & (i < len(cum))
    j = np.clip(i - 1, 0, len(cum) - 2)
    slope = (cum[j + 1] - cum[j]) / width
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.minimum(j * width + (tgt - cum[j]) / slope, i * width)
    out[ok] = t[ok]
    return float(out[0]) if scalar else out


def availability_profile(market: SpotMarket, bid: float | None,
                         avail: np.ndarray | None = None) -> AvailabilityProfile:
    """Build the cumulative availability profile for a bid (or an explicit
    per-slot availability vector, overriding the grant rule)."""
    if avail is None:
        if bid is None:
            raise ValueError("need a bid or an explicit availability vector")
        avail = (market.prices <= bid).astype(float)
    else:
        avail = np.asarray(avail, dtype=float)
        if len(avail) != market.n_slots:
            raise ValueError("availability vector must cover the whole trace")
    w = market.slot_width
    cum_a = np.concatenate(([0.0], np.cumsum(avail * w)))
    cum_u = np.concatenate(([0.0], np.cumsum((1.0 - avail) * w)))
    cum_c = np.concatenate(([0.0], np.cumsum(avail * market.prices * w)))
    return AvailabilityProfile(avail=avail, cum_avail=cum_a, cum_unavail=cum_u,
                               cum_cost=cum_c, prices=market.prices,
                               slot_width=w)
