"""Carry-out workload optimum: model, exact solver, oracle and work curve."""

import threading

import numpy as np
import pytest

from conftest import random_dag
from dagsched import carryout
from dagsched.carryout import (
    WorkCurve, asap_window_workload, brute_force_oracle, build_model,
    carry_out_bound, export_model, solve_exact, trim_to_window, verify_assignment,
    work_curve,
)
from dagsched.dag import Dag, DagTask, normalize_source_sink, span, work
from dagsched.errors import OracleLimitError, PathExplosionError, ValidationError
from dagsched.instances import antimonotone_task


def fork_5_5():
    return Dag([0, 5, 5, 0], [(0, 1), (0, 2), (1, 3), (2, 3)])


class TestOracle:
    def test_single_vertex(self):
        assert brute_force_oracle(Dag([5], []), 3) == 3

    def test_chain_window_two(self):
        # X=(0,4) or X=(2,4) both place exactly 2 units inside the window
        assert brute_force_oracle(Dag([3, 4], [(0, 1)]), 2) == 2

    def test_all_zero_wcets(self):
        assert brute_force_oracle(Dag([0, 0], [(0, 1)]), 4) == 0

    def test_guard(self):
        with pytest.raises(OracleLimitError):
            brute_force_oracle(Dag([9] * 10, []), 1)


class TestBuildModel:
    def test_requires_normalized(self):
        with pytest.raises(ValidationError):
            build_model(Dag([1, 1], []), 1)

    def test_single_vertex_structure(self):
        model = build_model(Dag([5], []), 3)
        assert sorted(model.variables) == ["A0", "M0", "S0", "W0", "X0"]
        assert model.objective == {"W0": 1}
        assert model.bounds["X0"] == (0, 5)
        assert model.binaries == ["A0"]

    def test_chain_edge_constraint(self):
        model = build_model(Dag([3, 4], [(0, 1)]), 5)
        assert len(model.binaries) == 2
        prec = [r for r in model.rows if r.name == "prec_0_1"]
        assert prec and prec[0].coeffs == {"S1": 1, "S0": -1, "X0": -1}
        assert prec[0].sense == ">=" and prec[0].rhs == 0

    def test_path_form_explodes_on_ladder(self):
        wcets = [1]
        edges = []
        for _ in range(20):
            a, b = len(wcets), len(wcets) + 1
            lasts = [a - 2, a - 1] if len(wcets) > 1 else [0]
            wcets += [1, 1]
            for p in lasts:
                edges += [(p, a), (p, b)]
        wcets.append(1)
        snk = len(wcets) - 1
        edges += [(snk - 2, snk), (snk - 1, snk)]
        dag = Dag(wcets, edges)
        with pytest.raises(PathExplosionError):
            build_model(dag, 2, formulation="path-enumerated")


class TestSolveExact:
    def test_single_vertex(self):
        model = build_model(Dag([5], []), 3)
        res = solve_exact(model)
        assert res.objective == 3 == brute_force_oracle(Dag([5], []), 3)

    def test_chain(self):
        dag = Dag([3, 4], [(0, 1)])
        res = solve_exact(build_model(dag, 5))
        assert res.objective == 5 == brute_force_oracle(dag, 5)

    def test_delta_zero(self, rng):
        for _ in range(5):
            dag = normalize_source_sink(random_dag(rng))
            assert solve_exact(build_model(dag, 0)).objective == 0

    def test_fork(self):
        res = solve_exact(build_model(fork_5_5(), 3))
        assert res.objective == 6

    def test_reference_anti_monotone_scenario(self):
        # all-WCET ASAP workload 4 in a window of 3, but the optimum is 7
        task = antimonotone_task()
        dag = normalize_source_sink(task.dag)
        assert asap_window_workload(dag, list(dag.wcets), 3) == 4
        assert brute_force_oracle(dag, 3) == 7
        res = solve_exact(build_model(dag, 3))
        assert res.objective >= 7
        assert res.objective == 7

    def test_matches_oracle_on_random_instances(self, rng):
        for _ in range(60):
            dag = normalize_source_sink(random_dag(rng, n_max=5))
            delta = int(rng.integers(0, span(dag) + 2))
            res = solve_exact(build_model(dag, delta))
            assert res.objective == brute_force_oracle(dag, delta)
            verify_assignment(build_model(dag, delta), res.assignment)

    def test_big_m_semantics_on_assignments(self, rng):
        # A=0 forces W=0; A=1 keeps W within the window headroom
        for _ in range(30):
            dag = normalize_source_sink(random_dag(rng, n_max=5, wcet_min=1))
            delta = int(rng.integers(0, span(dag) + 1))
            res = solve_exact(build_model(dag, delta))
            for entry in res.assignment.values():
                if entry["A"] == 0:
                    assert entry["W"] == 0
                else:
                    assert entry["W"] <= delta - entry["S"]

    def test_formulation_equivalence(self, rng):
        for _ in range(25):
            dag = normalize_source_sink(random_dag(rng, n_max=5))
            delta = int(rng.integers(0, span(dag) + 1))
            edge = solve_exact(build_model(dag, delta, "edge-recursive"))
            path = solve_exact(build_model(dag, delta, "path-enumerated"))
            assert edge.objective == path.objective


class TestWorkCurve:
    def test_equals_oracle(self, rng):
        for _ in range(150):
            dag = random_dag(rng)
            curve = WorkCurve(dag)
            for delta in {0, 1, span(dag), int(rng.integers(0, span(dag) + 2))}:
                assert curve.obj(delta) == brute_force_oracle(dag, delta)

    def test_concave_increments(self, rng):
        for _ in range(40):
            dag = random_dag(rng, wcet_min=1)
            curve = WorkCurve(dag)
            vals = [curve.obj(d) for d in range(span(dag) + 2)]
            diffs = [b - a for a, b in zip(vals, vals[1:])]
            assert all(d >= 0 for d in diffs)
            assert all(a >= b for a, b in zip(diffs, diffs[1:]))

    def test_saturates_at_span(self, rng):
        for _ in range(20):
            dag = random_dag(rng)
            curve = WorkCurve(dag)
            assert curve.obj(span(dag)) == work(dag)


class TestCarryOutBound:
    def test_fork_with_processor_cap(self):
        task = DagTask(fork_5_5(), 6, 6)
        assert carry_out_bound(task, 3, m=1) == 3  # min(6, 3)

    def test_delta_zero(self):
        assert carry_out_bound(antimonotone_task(), 0, 4) == 0

    def test_window_at_least_span(self):
        task = antimonotone_task()
        for m in (1, 2, 16):
            assert carry_out_bound(task, task.span, m) == min(task.work, m * task.span)
            assert carry_out_bound(task, task.span + 7, m) == min(task.work, task.work)

    def test_monotone_and_capped(self, rng):
        task = antimonotone_task()
        for m in (1, 2, 4):
            vals = [carry_out_bound(task, d, m) for d in range(task.span + 3)]
            assert all(b >= a for a, b in zip(vals, vals[1:]))
            assert all(v <= min(task.work, m * d) for d, v in enumerate(vals))

    def test_memoized_per_task(self):
        task = antimonotone_task()
        c1 = work_curve(task)
        c2 = work_curve(task)
        assert c1 is c2

    def test_concurrent_queries(self):
        task = antimonotone_task()
        out = []

        def worker():
            out.append([carry_out_bound(task, d, 2) for d in range(10)])

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(o == out[0] for o in out)


# --------------------------------------------------------------------------
# Export formats

def _parse_mps(text):
    """Parse the subset of MPS our writer emits."""
    section = None
    rows = {}
    row_order = []
    cols = {}
    col_order = []
    rhs = {}
    bounds = {}
    maximize = False
    for raw in text.splitlines():
        if not raw.strip():
            continue
        head = raw.split()
        if raw[0] not in (" ", "\t"):  # section headers start in column 1
            section = head[0]
            continue
        if section == "OBJSENSE":
            maximize = head[0] == "MAX"
        elif section == "ROWS":
            sense, name = head
            rows[name] = sense
            if sense != "N":
                row_order.append(name)
        elif section == "COLUMNS":
            if "MARKER" in raw:
                continue
            var, row, coef = head
            cols.setdefault(var, {})[row] = int(coef)
            if var not in col_order:
                col_order.append(var)
        elif section == "RHS":
            _, row, val = head
            rhs[row] = int(val)
        elif section == "BOUNDS":
            kind = head[0]
            var = head[2]
            val = int(head[3]) if len(head) > 3 else None
            bounds.setdefault(var, []).append((kind, val))
    return maximize, rows, row_order, cols, col_order, rhs, bounds


def _solve_mps_with_milp(text):
    """Independent resolve of an exported model via scipy's MILP solver."""
    opt = pytest.importorskip("scipy.optimize")
    maximize, rows, row_order, cols, col_order, rhs, bounds = _parse_mps(text)
    assert maximize
    nvar = len(col_order)
    c = np.zeros(nvar)
    lb = np.zeros(nvar)
    ub = np.full(nvar, np.inf)
    for j, var in enumerate(col_order):
        c[j] = -cols[var].get("OBJ", 0)
        for kind, val in bounds.get(var, []):
            if kind == "BV":
                ub[j] = 1
            elif kind == "UP":
                ub[j] = val
            elif kind == "LO":
                lb[j] = val
            elif kind == "FX":
                lb[j] = ub[j] = val
    A = np.zeros((len(row_order), nvar))
    lo = np.full(len(row_order), -np.inf)
    hi = np.full(len(row_order), np.inf)
    for i, name in enumerate(row_order):
        for j, var in enumerate(col_order):
            A[i, j] = cols[var].get(name, 0)
        b = rhs.get(name, 0)
        if rows[name] == "L":
            hi[i] = b
        else:
            lo[i] = b
    res = opt.milp(
        c, constraints=opt.LinearConstraint(A, lo, hi),
        integrality=np.ones(nvar), bounds=opt.Bounds(lb, ub))
    assert res.status == 0, res.message
    return int(round(-res.fun))


class TestExport:
    def test_lp_text_structure(self):
        text = export_model(build_model(Dag([5], []), 3), fmt="lp")
        assert "Maximize" in text and "obj: W0" in text
        assert "Binaries" in text and "A0" in text

    def test_chain_lp_mentions_edge(self):
        text = export_model(build_model(Dag([3, 4], [(0, 1)]), 5), fmt="lp")
        assert "prec_0_1" in text

    def test_mps_cross_solver_equality(self, rng):
        for _ in range(12):
            dag = normalize_source_sink(random_dag(rng, n_max=4, wcet_min=1))
            delta = int(rng.integers(0, span(dag) + 1))
            model = build_model(dag, delta)
            internal = solve_exact(model).objective
            external = _solve_mps_with_milp(export_model(model, fmt="mps"))
            assert internal == external

    def test_mps_reference_instance(self):
        dag = normalize_source_sink(antimonotone_task().dag)
        model = build_model(dag, 3)
        assert _solve_mps_with_milp(export_model(model, fmt="mps")) == 7


class TestTrim:
    def test_trim_fits_window(self, rng):
        for _ in range(50):
            dag = random_dag(rng)
            delta = int(rng.integers(0, span(dag) + 2))
            x = [int(rng.integers(0, c + 1)) for c in dag.wcets]
            trimmed = trim_to_window(dag, x, delta)
            # trimmed schedule lies inside the window, value never drops
            assert sum(trimmed) == asap_window_workload(dag, trimmed, delta)
            assert sum(trimmed) >= asap_window_workload(dag, x, delta)
