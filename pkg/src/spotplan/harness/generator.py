"""Synthetic workload generator: Poisson job arrivals over random DAGs.

Jobs arrive with exponential inter-arrival times. Each job draws its task
count and per-task parallelism from two-point distributions, per-task
minimum execution times from a bounded Pareto, and wires an edge between
every ordered task pair with a fixed probability (generation order is the
topological order). Tasks left without successors or predecessors are
patched to a random later/earlier task so the DAG stays connected. The
relative deadline is the critical path stretched by x ~ U[1, x0], where
x0 depends on the job type (1..4 -> 1.5, 2, 2.5, 3).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..chainify import DagJob, TaskSpec

STRETCH_BY_TYPE = {1: 1.5, 2: 2.0, 3: 2.5, 4: 3.0}


@dataclass(frozen=True)
class GeneratorConfig:
    job_count: int = 1000
    job_type: int = 2
    seed: int = 0
    arrival_rate: float = 4.0
    task_counts: tuple[int, ...] = (7, 49)
    edge_prob: float = 0.5
    parallelism_choices: tuple[int, ...] = (8, 64)
    pareto_shape: float = 7 / 8
    pareto_scale: float = 7 / 32
    pareto_location: float = 1 / 4
    exec_time_bounds: tuple[float, float] = (2.0, 10.0)

    def __post_init__(self) -> None:
        if self.job_type not in STRETCH_BY_TYPE:
            raise ValueError(f"job_type must be 1..4, got {self.job_type}")
        if self.job_count <= 0 or self.arrival_rate <= 0:
            raise ValueError("job_count and arrival_rate must be positive")

    @property
    def deadline_stretch_max(self) -> float:
        return STRETCH_BY_TYPE[self.job_type]

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1)

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        with open(path) as fh:
            raw = json.load(fh)
        cfg = cls(**{k: tuple(v) if isinstance(v, list) else v
                     for k, v in raw.items()})
        return cfg


def bounded_pareto(rng: np.random.Generator, n: int, cfg: GeneratorConfig) -> np.ndarray:
    """Inverse-CDF Pareto (shape, scale) shifted by the location parameter,
    rejection-sampled into the execution-time bounds."""
    lo, hi = cfg.exec_time_bounds
    out = np.empty(n)
    filled = 0
    while filled < n:
        u = rng.random(2 * (n - filled) + 16)
        draws = cfg.pareto_location + cfg.pareto_scale * u ** (-1.0 / cfg.pareto_shape)
        ok = draws[(draws >= lo) & (draws <= hi)][:n - filled]
        out[filled:filled + len(ok)] = ok
        filled += len(ok)
    return out


def random_dag_job(rng: np.random.Generator, cfg: GeneratorConfig,
                   job_id: int, arrival: float) -> DagJob:
    l = int(rng.choice(cfg.task_counts))
    deltas = rng.choice(cfg.parallelism_choices, size=l)
    e = bounded_pareto(rng, l, cfg)
    sizes = e * deltas

    coin = rng.random((l, l))
    has_succ = np.zeros(l + 1, dtype=bool)
    has_pred = np.zeros(l + 1, dtype=bool)
    edges = set()
    for i in range(1, l + 1):
        for j in range(i + 1, l + 1):
            if coin[i - 1, j - 1] < cfg.edge_prob:
                edges.add((i, j))
                has_succ[i] = True
                has_pred[j] = True
    # connectivity patch-up: dangling tasks get one random successor or
    # predecessor among the later / earlier tasks
    for i in range(1, l):
        if not has_succ[i]:
            j = int(rng.integers(i + 1, l + 1))
            edges.add((i, j))
            has_pred[j] = True
    for i in range(2, l + 1):
        if not has_pred[i]:
            j = int(rng.integers(1, i))
            edges.add((j, i))

    tasks = tuple(TaskSpec(id=i + 1, size=float(sizes[i]),
                           parallelism=int(deltas[i])) for i in range(l))
    probe = DagJob(id=job_id, arrival=arrival, deadline=arrival + 1e12,
                   tasks=tasks, edges=frozenset(edges))
    stretch = rng.uniform(1.0, cfg.deadline_stretch_max)
    return replace(probe, deadline=arrival + stretch * probe.critical_path_len)


def generate_jobs(config: GeneratorConfig,
                  rng: np.random.Generator | None = None) -> list[DagJob]:
    """Deterministic job stream for a config (seed lives in the config)."""
    rng = rng or np.random.default_rng(config.seed)
    gaps = rng.exponential(1.0 / config.arrival_rate, size=config.job_count)
    arrivals = np.cumsum(gaps)
    return [random_dag_job(rng, config, job_id=j, arrival=float(arrivals[j]))
            for j in range(config.job_count)]
