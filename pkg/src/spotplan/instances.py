"""Per-task instance allocation inside a fixed execution window.

A task assigned r self-owned instances over its window [w0, w1] leaves a
cloud share z - r*(w1 - w0) for spot and on-demand capacity, subject to
the parallelism residue cap = delta - r. While the task retains
flexibility (remaining / cap < w1 - t) it gambles on spot; the moment the
margin closes the engine switches permanently to cap on-demand instances,
which then finish exactly at w1. The switch instant is solved in closed
form inside a slot, so the deadline is never overshot.

Two equivalent execution paths exist: a per-slot reference stepper
(advance_slot) that also emits trace records, and a vectorized replay over
cumulative availability profiles used by the experiment sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .chainify import TaskSpec
from .market import (AvailabilityProfile, ONDEMAND_PRICE, SpotMarket,
                     grant_spot)

TIME_TOL = 1e-9
WORK_TOL = 1e-9


class SequencingError(RuntimeError):
    """A slot was fed to the engine out of order or outside the window."""


class InconsistentStateError(RuntimeError):
    """Positive remaining work but no cloud parallelism left to run it."""


class Phase(Enum):
    SPOT = "spot"
    ON_DEMAND = "ondemand"
    DONE = "done"


def required_self_owned(task: TaskSpec, window_size: float, x: float) -> float:
    """Self-owned instances that make spot alone (at availability x)
    sufficient to finish the task within its window.

    max{(z - delta*w*x) / (w*(1-x)), 0}; ranges in [0, z/w]. Non-increasing
    in x: more reliable spot means fewer owned instances are needed.
    """
    if x >= 1.0:
        raise ValueError(f"availability index must be below 1, got {x}")
    if x < 0.0:
        raise ValueError(f"availability index must be nonnegative, got {x}")
    if window_size < task.min_exec_time - 1e-12:
        raise ValueError("window below minimum execution time")
    val = (task.size - task.parallelism * window_size * x) / (window_size * (1.0 - x))
    return max(val, 0.0)


def allocate_self_owned(task: TaskSpec, window: tuple[float, float], pool,
                        beta0: float) -> int:
    """Reserve min{ceil(f(beta0)), idle pool minimum, parallelism} owned
    instances over the window and return the count."""
    w0, w1 = window
    need = required_self_owned(task, w1 - w0, beta0)
    want = 0 if need <= WORK_TOL else math.ceil(need - 1e-9)
    r = min(want, pool.idle_min(w0, w1), task.parallelism)
    if r > 0:
        if not pool.reserve(w0, w1, r):
            raise RuntimeError("pool refused a reservation within its idle minimum")
    return r


@dataclass(frozen=True)
class TaskRuntimeState:
    """Execution state of one task between slot steps.

    remaining is only the spot/on-demand share: the self-owned share
    owned_alloc * (w1 - w0) is subtracted up front and processed
    continuously until the window closes. spot_request/ondemand_request
    hold while the task keeps flexibility; after the turning point the
    engine requests cap = parallelism - owned_alloc on-demand instances.
    """

    task: TaskSpec
    window: tuple[float, float]
    owned_alloc: int
    remaining: float
    phase: Phase
    spot_request: int
    ondemand_request: int
    clock: float
    turning_point: float | None = None
    completion: float | None = None
    spot_work: float = 0.0
    ondemand_work: float = 0.0

    @property
    def cloud_cap(self) -> int:
        return self.task.parallelism - self.owned_alloc


def new_task_state(task: TaskSpec, window: tuple[float, float], owned_alloc: int,
                   spot_request: int | None = None,
                   ondemand_request: int = 0) -> TaskRuntimeState:
    """Initial state at the window start.

    The default request split is all-spot (the cost-optimal strategy);
    an explicit split must satisfy spot + ondemand = parallelism - owned.
    """
    w0, w1 = window
    if w1 <= w0:
        raise ValueError("window must have positive length")
    if not 0 <= owned_alloc <= task.parallelism:
        raise ValueError("owned allocation outside [0, parallelism]")
    cap = task.parallelism - owned_alloc
    if spot_request is None:
        spot_request = cap - ondemand_request
    if spot_request + ondemand_request != cap or spot_request < 0 or ondemand_request < 0:
        raise ValueError("spot + ondemand requests must equal parallelism - owned")
    remaining = max(task.size - owned_alloc * (w1 - w0), 0.0)
    phase = Phase.DONE if remaining <= WORK_TOL else Phase.SPOT
    return TaskRuntimeState(
        task=task, window=window, owned_alloc=owned_alloc,
        remaining=remaining, phase=phase, spot_request=spot_request,
        ondemand_request=ondemand_request, clock=w0,
        completion=w0 if phase is Phase.DONE else None,
    )


def has_flexibility(state: TaskRuntimeState, t: float) -> bool:
    """Whether the task can still afford to gamble on spot at time t."""
    cap = state.cloud_cap
    if cap == 0:
        if state.remaining > WORK_TOL:
            raise InconsistentStateError("remaining work but no cloud parallelism")
        return False
    return state.remaining / cap < state.window[1] - t


def advance_slot(state: TaskRuntimeState, slot: tuple[float, float],
                 granted_spot: float) -> TaskRuntimeState:
    """Advance the state across one slot segment [t0, t1].

    granted_spot is the spot capacity effectively available during the
    segment, in [0, spot_request]; the market grants integers (all or
    nothing), deterministic-availability replays may pass fractions.
    Detects the turning point exactly, splitting the segment when the
    flexibility margin closes mid-slot.
    """
    t0, t1 = slot
    w0, w1 = state.window
    if abs(t0 - state.clock) > 1e-6 or t0 < w0 - TIME_TOL or t1 > w1 + 1e-6:
        raise SequencingError(
            f"slot [{t0}, {t1}] does not continue clock {state.clock} "
            f"inside window [{w0}, {w1}]")
    if state.phase is Phase.DONE:
        return state
    if not 0.0 <= granted_spot <= state.spot_request + 1e-12:
        raise ValueError("granted spot outside [0, spot_request]")
    h = t1 - t0
    cap = state.cloud_cap
    remaining = state.remaining
    spot_work = state.spot_work
    od_work = state.ondemand_work

    if state.phase is Phase.SPOT:
        margin = (w1 - t0) * cap - remaining
        if margin <= WORK_TOL:
            state = replace(state, phase=Phase.ON_DEMAND, turning_point=t0,
                            spot_request=0, ondemand_request=cap)
        else:
            rate = granted_spot + state.ondemand_request
            tau_done = remaining / rate if rate > 0 else math.inf
            tau_switch = margin / (cap - rate) if cap > rate else math.inf
            if tau_done <= min(tau_switch, h) + TIME_TOL:
                spot_work += granted_spot * tau_done
                od_work += state.ondemand_request * tau_done
                return replace(state, remaining=0.0, phase=Phase.DONE,
                               clock=t0 + tau_done, completion=t0 + tau_done,
                               spot_work=spot_work, ondemand_work=od_work)
            if tau_switch < h - TIME_TOL:
                spot_work += granted_spot * tau_switch
                od_work += state.ondemand_request * tau_switch
                remaining -= rate * tau_switch
                state = replace(state, remaining=remaining, phase=Phase.ON_DEMAND,
                                turning_point=t0 + tau_switch, spot_request=0,
                                ondemand_request=cap, spot_work=spot_work,
                                ondemand_work=od_work, clock=t0 + tau_switch)
                t0 = t0 + tau_switch
                h = t1 - t0
            else:
                spot_work += granted_spot * h
                od_work += state.ondemand_request * h
                remaining = max(remaining - rate * h, 0.0)
                done = remaining <= WORK_TOL
                return replace(
                    state, remaining=remaining, clock=t1, spot_work=spot_work,
                    ondemand_work=od_work,
                    phase=Phase.DONE if done else Phase.SPOT,
                    completion=t1 if done else None)

    # On-demand tail: cap instances run flat out until the work (or the
    # window) is exhausted; by construction both end together at w1.
    remaining = state.remaining
    used = min(h, remaining / cap) if cap > 0 else 0.0
    od_work = state.ondemand_work + cap * used
    remaining = max(remaining - cap * used, 0.0)
    done = remaining <= WORK_TOL
    return replace(state, remaining=remaining, clock=t1,
                   ondemand_work=od_work,
                   phase=Phase.DONE if done else Phase.ON_DEMAND,
                   completion=(t0 + used if done else None))


@dataclass(frozen=True)
class TaskOutcome:
    """Workloads and money per instance class for one executed task.

    cloud_completion is when the spot/on-demand share hits zero (requests
    stop); completion is when the whole workload is processed, which is
    the window end whenever self-owned instances still carry their share.
    """

    owned_work: float
    spot_work: float
    ondemand_work: float
    spot_cost: float
    ondemand_cost: float
    turning_point: float | None
    completion: float
    cloud_completion: float


def slot_segments(w0: float, w1: float, slot_width: float):
    """Split [w0, w1] at market-slot boundaries; yields (k, t0, t1)."""
    t = w0
    while t < w1 - TIME_TOL:
        k = int(math.floor(t / slot_width + 1e-9))
        t_next = min((k + 1) * slot_width, w1)
        if t_next <= t + TIME_TOL:
            k += 1
            t_next = min((k + 1) * slot_width, w1)
        yield k, t, t_next
        t = t_next


def run_task_window(task: TaskSpec, window: tuple[float, float], owned: int,
                    market: SpotMarket, bid: float | None,
                    spot_request: int | None = None, ondemand_request: int = 0,
                    trace: list | None = None,
                    avail: np.ndarray | None = None) -> TaskOutcome:
    """Reference driver: step the task through its window slot by slot.

    Spot grants come from the market's bid-vs-price rule, or from an
    explicit per-slot availability vector (fractions allowed). Appends
    (time, task id, owned, granted, ondemand, remaining) rows to `trace`.
    """
    w0, w1 = window
    state = new_task_state(task, window, owned, spot_request, ondemand_request)
    spot_cost = 0.0
    for k, t0, t1 in slot_segments(w0, w1, market.slot_width):
        if state.phase is Phase.DONE:
            break
        if state.phase is Phase.SPOT:
            if avail is not None:
                granted = float(avail[k]) * state.spot_request
            else:
                granted = grant_spot(market, k, bid if bid is not None else np.inf,
                                     state.spot_request)
        else:
            granted = 0.0
        prev_spot = state.spot_work
        state = advance_slot(state, (t0, t1), granted)
        spot_cost += market.price(k) * (state.spot_work - prev_spot)
        if trace is not None:
            trace.append((t0, task.id, owned, granted, state.ondemand_request,
                          state.remaining))
    owned_work = min(owned * (w1 - w0), task.size)
    cloud_done = state.completion if state.completion is not None else w1
    if owned > 0:
        # Self-owned instances run through the window; they finish their
        # share exactly at w1 unless they cover the whole task early.
        completion = w0 + task.size / owned if owned * (w1 - w0) >= task.size else w1
    else:
        completion = cloud_done
    return TaskOutcome(
        owned_work=owned_work, spot_work=state.spot_work,
        ondemand_work=state.ondemand_work, spot_cost=spot_cost,
        ondemand_cost=ONDEMAND_PRICE * state.ondemand_work,
        turning_point=state.turning_point, completion=completion,
        cloud_completion=cloud_done,
    )


def replay_windows(profile: AvailabilityProfile, w0, w1, cloud_load, cap):
    """Closed-form replay of many windows under full-spot requests.

    For each window the spot phase ends either when the cumulative
    unavailable time inside the window reaches (w1-w0) - load/cap (the
    turning point) or when the cumulative available time reaches load/cap
    (completion on spot alone). Returns arrays (spot_work, spot_cost,
    ondemand_work, ondemand_cost, turning_point[nan if none],
    completion).
    """
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    load = np.atleast_1d(np.asarray(cloud_load, dtype=float))
    cap = np.atleast_1d(np.asarray(cap, dtype=float))
    n = len(w0)
    spot_work = np.zeros(n)
    spot_cost = np.zeros(n)
    od_work = np.zeros(n)
    turning = np.full(n, np.nan)
    completion = w0.copy()

    active = load > WORK_TOL
    if np.any(active):
        a0, u0, c0 = profile.measures_at(w0[active])
        need = load[active] / cap[active]
        budget = (w1[active] - w0[active]) - need
        t_sw = np.maximum(profile.first_time_unavail(u0 + np.maximum(budget, 0.0)),
                          w0[active])
        t_done = profile.first_time_avail(a0 + need)
        done_first = t_done <= t_sw + TIME_TOL
        t_end = np.where(done_first, t_done, t_sw)
        if np.any(np.isinf(t_end)):
            raise ValueError("price trace does not cover the execution window")
        a1, _, c1 = profile.measures_at(t_end)
        sw = cap[active] * (a1 - a0)
        sw = np.where(done_first, load[active], np.minimum(sw, load[active]))
        spot_work[active] = sw
        spot_cost[active] = cap[active] * (c1 - c0)
        od_work[active] = np.where(done_first, 0.0, load[active] - sw)
        turning[active] = np.where(done_first, np.nan, t_sw)
        completion[active] = np.where(done_first, t_done, w1[active])
    return (spot_work, spot_cost, od_work, ONDEMAND_PRICE * od_work,
            turning, completion)


def replay_window(profile: AvailabilityProfile, w0: float, w1: float,
                  cloud_load: float, cap: float) -> TaskOutcome:
    """Single-window convenience wrapper around replay_windows()."""
    sw, sc, ow, oc, tp, comp = replay_windows(profile, [w0], [w1],
                                              [cloud_load], [cap])
    return TaskOutcome(owned_work=0.0, spot_work=float(sw[0]),
                       ondemand_work=float(ow[0]), spot_cost=float(sc[0]),
                       ondemand_cost=float(oc[0]),
                       turning_point=None if np.isnan(tp[0]) else float(tp[0]),
                       completion=float(comp[0]),
                       cloud_completion=float(comp[0]))
