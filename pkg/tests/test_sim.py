"""Discrete-event G-FP simulator, critical chains and interference."""

from fractions import Fraction

import numpy as np
import pytest

from conftest import random_dag
from dagsched import sim
from dagsched.dag import Dag, DagTask, TaskSet, span
from dagsched.errors import SimulationError
from dagsched.instances import antimonotone_task, interference_scenario
from dagsched.taskgen import GenConfig, assign_priorities_dm, gen_taskset


def single_task_set(task, m):
    return TaskSet([task], m)


class TestSimulate:
    def test_unrestricted_processors_give_span(self):
        task = antimonotone_task(deadline=15, period=20)
        res = sim.simulate(single_task_set(task, 6), 6, 40)
        job = res.jobs[0]
        assert job.response == task.span

    def test_sequential_chain_on_one_processor(self):
        task = DagTask(Dag([3, 4, 2], [(0, 1), (1, 2)]), 9, 9)
        res = sim.simulate(single_task_set(task, 1), 1, 18)
        assert res.jobs[0].response == task.work

    def test_horizon_too_small_rejected(self):
        task = antimonotone_task(deadline=15, period=20)
        with pytest.raises(SimulationError):
            sim.simulate(single_task_set(task, 2), 2, 10)

    def test_sporadic_gaps_at_least_period(self, rng):
        task = antimonotone_task(deadline=15, period=20)
        res = sim.simulate(single_task_set(task, 2), 2, 200,
                           release_policy="sporadic", rng=rng)
        rel = [j.release for j in res.jobs]
        assert all(b - a >= task.period for a, b in zip(rel, rel[1:]))

    def test_random_exec_within_wcets(self, rng):
        task = antimonotone_task(deadline=15, period=20)
        res = sim.simulate(single_task_set(task, 2), 2, 100,
                           exec_policy="random", rng=rng)
        for job in res.jobs:
            assert all(0 <= x <= w for x, w in zip(job.exec_times, task.dag.wcets))

    def test_zero_exec_job_completes_at_release(self):
        task = DagTask(Dag([2, 3], [(0, 1)]), 10, 10)
        res = sim.simulate(single_task_set(task, 1), 1, 10,
                           exec_policy={(0, 0): (0, 0)})
        assert res.jobs[0].completion == res.jobs[0].release


class TestCriticalChain:
    def test_sequential_chain_is_whole_chain(self):
        task = DagTask(Dag([3, 4, 2], [(0, 1), (1, 2)]), 9, 9)
        res = sim.simulate(single_task_set(task, 1), 1, 18)
        assert sim.extract_critical_chain(res, res.jobs[0]) == [0, 1, 2]

    def test_fork_join_longer_branch(self):
        dag = Dag([1, 2, 5, 1], [(0, 1), (0, 2), (1, 3), (2, 3)])
        task = DagTask(dag, 10, 10)
        res = sim.simulate(single_task_set(task, 2), 2, 20)
        assert sim.extract_critical_chain(res, res.jobs[0]) == [0, 2, 3]

    def test_incomplete_job_rejected(self):
        job = sim.Job(0, 0, 0, 10, (1,), subtask_ready=[0],
                      subtask_completion=[None])
        task = DagTask(Dag([1], []), 10, 10)
        res = sim.SimResult(TaskSet([task], 1), 1, 10, [], [job])
        with pytest.raises(SimulationError):
            sim.extract_critical_chain(res, job)

    def test_scripted_scenario_chain_and_interference(self):
        ts, m, releases, execs, k = interference_scenario()
        res = sim.simulate(ts, m, 120, release_policy=releases, exec_policy=execs)
        job = next(j for j in res.jobs if j.task_index == k)
        chain = sim.extract_critical_chain(res, job)
        assert chain == [0, 2, 4, 5]
        assert job.response == 14
        assert sim.critical_interference(res, job, chain) == 7
        assert sim._blocked_intervals(res, job, chain) == [
            (0, 2), (4, 5), (7, 9), (11, 13)]
        per_task = sim.interference_by_task(res, job, chain)
        assert sum(per_task.values()) == m * 7
        sim.audit_trace(res)


class TestInterference:
    def test_isolated_job_no_interference(self):
        task = antimonotone_task(deadline=15, period=20)
        res = sim.simulate(single_task_set(task, 8), 8, 40)
        job = res.jobs[0]
        chain = sim.extract_critical_chain(res, job)
        assert sim.critical_interference(res, job, chain) == 0

    def test_chain_mismatch_rejected(self):
        task = DagTask(Dag([3, 4, 2], [(0, 1), (1, 2)]), 9, 9)
        res = sim.simulate(single_task_set(task, 1), 1, 18)
        with pytest.raises(SimulationError):
            sim.critical_interference(res, res.jobs[0], [0, 2])

    def _random_mixes(self, seeds):
        for seed in seeds:
            cfg = GenConfig(n_range=(3, 6), wcet_range=(1, 9), seed=seed)
            rng = np.random.default_rng(seed)
            ts = assign_priorities_dm(gen_taskset(
                float(rng.uniform(1.0, 3.0)), int(rng.integers(2, 5)), cfg, rng))
            horizon = 2 * max(t.period for t in ts.tasks)
            for release in ("periodic", "sporadic"):
                for policy in ("wcet", "random"):
                    yield sim.simulate(ts, ts.processors, horizon,
                                       release_policy=release, exec_policy=policy,
                                       rng=np.random.default_rng(seed + 1))

    def test_interference_identity_and_decomposition(self):
        # m * I_k equals the summed per-task processor time, exactly, and the
        # response decomposes into chain execution plus interference
        jobs_checked = 0
        for res in self._random_mixes(range(12)):
            m = res.processors
            for job in res.jobs:
                if job.completion is None:
                    continue
                chain = sim.extract_critical_chain(res, job)
                total = sim.critical_interference(res, job, chain)
                per_task = sim.interference_by_task(res, job, chain)
                assert sum(per_task.values()) == m * total
                assert sim.chain_execution(res, job, chain) + total == job.response
                jobs_checked += 1
        assert jobs_checked > 100

    def test_intra_task_bound_in_isolation(self):
        # chain length + I_kk/m <= span + (work - span)/m for a task alone
        rng = np.random.default_rng(5)
        for _ in range(25):
            dag = random_dag(rng, n_max=6, wcet_max=5, wcet_min=1)
            task = DagTask(dag, span(dag) + 20, span(dag) + 20)
            for m in (1, 2, 3):
                res = sim.simulate(single_task_set(task, m), m,
                                   2 * task.period, exec_policy="random",
                                   rng=np.random.default_rng(m))
                for job in res.jobs:
                    chain = sim.extract_critical_chain(res, job)
                    own = sim.critical_interference(res, job, chain, by_task=0)
                    lhs = sim.chain_execution(res, job, chain) + Fraction(own, m)
                    rhs = task.span + Fraction(task.work - task.span, m)
                    assert lhs <= rhs


class TestAudit:
    def test_random_traces_pass(self):
        rng = np.random.default_rng(31)
        for seed in range(8):
            cfg = GenConfig(n_range=(3, 6), wcet_range=(1, 9), seed=seed)
            local = np.random.default_rng(seed)
            ts = assign_priorities_dm(gen_taskset(2.0, 3, cfg, local))
            res = sim.simulate(ts, 3, 2 * max(t.period for t in ts.tasks),
                               release_policy="sporadic", exec_policy="random",
                               rng=local)
            sim.audit_trace(res)
