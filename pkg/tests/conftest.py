import numpy as np
import pytest

from spotplan.chainify import DagJob, TaskSpec


def random_dag(rng: np.random.Generator, max_tasks: int = 10,
               deadline_stretch: tuple[float, float] = (1.0, 3.0)) -> DagJob:
    """Small random DAG: edges only forward in id order, random slack."""
    l = int(rng.integers(1, max_tasks + 1))
    tasks = tuple(
        TaskSpec(id=i + 1, size=float(rng.uniform(0.5, 8.0)),
                 parallelism=int(rng.integers(1, 6)))
        for i in range(l)
    )
    edges = {(i, j) for i in range(1, l + 1) for j in range(i + 1, l + 1)
             if rng.random() < 0.4}
    arrival = float(rng.uniform(0.0, 5.0))
    probe = DagJob(id=0, arrival=arrival, deadline=arrival + 1e9,
                   tasks=tasks, edges=frozenset(edges))
    stretch = rng.uniform(*deadline_stretch)
    return DagJob(id=int(rng.integers(0, 10 ** 6)), arrival=arrival,
                  deadline=arrival + stretch * probe.critical_path_len,
                  tasks=tasks, edges=frozenset(edges))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
