import json

import numpy as np
import pytest

from spotplan.chainify import (ChainJob, CycleError, DagJob, InfeasibleJobError,
                               TaskSpec, chain_as_dag, critical_path,
                               dag_from_dict, dag_to_dict, dump_jobs, is_chain,
                               load_jobs, pseudo_schedule, transform)
from spotplan.windows import dealloc

from conftest import random_dag


def mk_job(sizes, deltas, edges, arrival=0.0, deadline=1e9, job_id=1):
    tasks = tuple(TaskSpec(id=i + 1, size=z, parallelism=d)
                  for i, (z, d) in enumerate(zip(sizes, deltas)))
    return DagJob(id=job_id, arrival=arrival, deadline=deadline,
                  tasks=tasks, edges=frozenset(edges))


DIAMOND = mk_job([1, 2, 3, 1], [1, 1, 1, 1],
                 [(1, 2), (1, 3), (2, 4), (3, 4)])


def test_taskspec_min_exec_time_exact():
    t = TaskSpec(id=1, size=2.0, parallelism=4)
    assert t.min_exec_time == 2.0 / 4


def test_taskspec_rejects_bad_fields():
    with pytest.raises(ValueError):
        TaskSpec(id=1, size=0.0, parallelism=1)
    with pytest.raises(ValueError):
        TaskSpec(id=1, size=1.0, parallelism=0)


def test_critical_path_single_task():
    job = mk_job([2.0], [4], [])
    assert critical_path(job) == pytest.approx(0.5)


def test_critical_path_chain():
    job = mk_job([1.0, 2.0], [1, 1], [(1, 2)])
    assert critical_path(job) == pytest.approx(3.0)


def test_critical_path_diamond():
    # two paths: 1-2-4 (len 4) and 1-3-4 (len 5)
    assert critical_path(DIAMOND) == pytest.approx(5.0)


def test_cycle_rejected():
    with pytest.raises(CycleError):
        mk_job([1, 1], [1, 1], [(1, 2), (2, 1)])


def test_infeasible_deadline_rejected():
    with pytest.raises(InfeasibleJobError):
        mk_job([1.0, 2.0], [1, 1], [(1, 2)], arrival=0.0, deadline=2.9)


def test_pseudo_schedule_chain():
    job = mk_job([1.0, 2.0], [1, 1], [(1, 2)])
    s = pseudo_schedule(job)
    assert s.start_times == {1: 0.0, 2: 1.0}
    assert s.completion == pytest.approx(3.0)
    assert np.allclose(s.breakpoints, [0.0, 1.0, 3.0])


def test_pseudo_schedule_independent_tasks():
    job = mk_job([2.0, 1.0], [1, 1], [])
    s = pseudo_schedule(job)
    assert s.start_times == {1: 0.0, 2: 0.0}
    assert s.completion == pytest.approx(2.0)
    assert np.allclose(s.breakpoints, [0.0, 1.0, 2.0])


def test_pseudo_schedule_diamond():
    s = pseudo_schedule(DIAMOND)
    assert [s.start_times[i] for i in (1, 2, 3, 4)] == [0.0, 1.0, 1.0, 4.0]
    assert s.completion == pytest.approx(5.0)


def test_pseudo_schedule_offsets_by_arrival():
    job = mk_job([1.0, 2.0], [1, 1], [(1, 2)], arrival=2.5, deadline=10.0)
    s = pseudo_schedule(job)
    assert s.start_times == {1: 2.5, 2: 3.5}


def test_transform_two_task_chain_keeps_structure():
    job = mk_job([2.0, 2.0], [2, 1], [(1, 2)])  # e = (1, 2)
    chain = transform(job)
    got = [(t.parallelism, t.size) for t in chain.pseudo_tasks]
    assert got == [(2, 2.0), (1, 2.0)]


def test_transform_independent_tasks_slices_intervals():
    # A: e=2 on 1 instance, B: e=1 on 2 instances -> [0,1] both run, [1,2] A only
    job = mk_job([2.0, 2.0], [1, 2], [])
    chain = transform(job)
    got = [(t.parallelism, t.size) for t in chain.pseudo_tasks]
    assert got == [(3, pytest.approx(3.0)), (1, pytest.approx(1.0))]


def test_transform_chain_input_is_identity():
    job = mk_job([4.0, 1.5, 3.0], [2, 1, 3], [(1, 2), (2, 3)])
    chain = transform(job)
    assert [(t.size, t.parallelism) for t in chain.pseudo_tasks] == \
        [(4.0, 2), (1.5, 1), (3.0, 3)]
    assert chain.origin_map == (((1, 4.0),), ((2, 1.5),), ((3, 3.0),))


def test_is_chain():
    assert is_chain(mk_job([1, 1, 1], [1, 1, 1], [(1, 2), (2, 3)]))
    # transitive extra edge does not break chain-ness
    assert is_chain(mk_job([1, 1, 1], [1, 1, 1], [(1, 2), (2, 3), (1, 3)]))
    assert not is_chain(DIAMOND)
    assert not is_chain(mk_job([1, 1], [1, 1], []))


def test_workload_and_makespan_preserved_on_random_dags(rng):
    for _ in range(150):
        dag = random_dag(rng)
        chain = transform(dag)
        assert chain.total_size == pytest.approx(dag.total_size, abs=1e-9)
        makespan = sum(t.min_exec_time for t in chain.pseudo_tasks)
        assert makespan == pytest.approx(critical_path(dag), abs=1e-9)
        for k, task in enumerate(chain.pseudo_tasks):
            shares = sum(s for _, s in chain.origin_map[k])
            assert shares == pytest.approx(task.size, abs=1e-9)


def test_transform_idempotent_on_random_dags(rng):
    for _ in range(100):
        chain = transform(random_dag(rng))
        again = transform(chain_as_dag(chain))
        assert len(again.pseudo_tasks) == len(chain.pseudo_tasks)
        for a, b in zip(again.pseudo_tasks, chain.pseudo_tasks):
            assert a.size == pytest.approx(b.size, abs=1e-9)
            assert a.parallelism == b.parallelism


def test_feasibility_transfer_on_random_dags(rng):
    """Any valid window plan for the chain induces a DAG schedule meeting
    precedence and parallelism via the origin map."""
    for _ in range(100):
        dag = random_dag(rng)
        chain = transform(dag)
        rate = float(rng.uniform(0.2, 0.9))
        plan = dealloc(chain.pseudo_tasks, (chain.arrival, chain.deadline), rate)
        first_k: dict[int, int] = {}
        last_k: dict[int, int] = {}
        processed: dict[int, float] = {t.id: 0.0 for t in dag.tasks}
        delta = {t.id: t.parallelism for t in dag.tasks}
        for k, entries in enumerate(chain.origin_map):
            for orig, share in entries:
                first_k.setdefault(orig, k)
                last_k[orig] = k
                processed[orig] += share
                # instances used by the original task inside window k
                assert share / plan.sizes[k] <= delta[orig] + 1e-9
        for t in dag.tasks:
            assert processed[t.id] == pytest.approx(t.size, abs=1e-9)
        for a, b in dag.edges:
            # predecessor's last window ends before successor's first begins
            assert last_k[a] < first_k[b]
        assert plan.boundaries[-1] <= chain.deadline + 1e-9


def test_json_roundtrip(tmp_path, rng):
    jobs = [random_dag(rng) for _ in range(5)]
    path = tmp_path / "jobs.json"
    dump_jobs(jobs, path)
    back = load_jobs(path)
    for a, b in zip(jobs, back):
        assert dag_to_dict(a) == dag_to_dict(b)
    # wire format is plain JSON with the documented fields
    doc = json.loads(path.read_text())
    assert set(doc[0]) == {"id", "arrival", "deadline", "tasks", "edges"}


def test_dag_from_dict_rejects_cycles():
    doc = {"id": 1, "arrival": 0, "deadline": 10,
           "tasks": [{"id": 1, "size": 1, "parallelism": 1},
                     {"id": 2, "size": 1, "parallelism": 1}],
           "edges": [[1, 2], [2, 1]]}
    with pytest.raises(CycleError):
        dag_from_dict(doc)
