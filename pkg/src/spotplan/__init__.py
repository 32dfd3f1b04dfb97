"""spotplan: cost-aware execution of deadline-constrained DAG jobs on
self-owned, spot, and on-demand cloud instances (simulation library + CLI)."""

from .chainify import (ChainJob, CycleError, DagJob, InfeasibleJobError,
                       PseudoSchedule, TaskSpec, critical_path,
                       pseudo_schedule, transform)
from .instances import (Phase, TaskOutcome, TaskRuntimeState, advance_slot,
                        allocate_self_owned, has_flexibility, new_task_state,
                        replay_window, required_self_owned, run_task_window)
from .learning import (WeightVector, counterfactual_cost, pick_policy,
                       regret_bound, uniform_weights, update_weights)
from .market import (OwnedPool, SpotMarket, availability_profile, bill,
                     grant_spot, sample_price_trace)
from .policy import BETA0_GRID, BETA_GRID, BID_GRID, PolicyTuple
from .windows import (InfeasibleWindowError, WindowPlan, dealloc,
                      plan_windows, spot_capacity)

__version__ = "0.1.0"
