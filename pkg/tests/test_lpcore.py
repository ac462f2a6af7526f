"""Tests for the LP layer: statuses, duals, warm updates, and a brute-force oracle."""

import numpy as np
import pytest

from zonosynth import lpcore
from zonosynth.lpcore import INF, LinearProgram, LpBuildError, lin_matmul, lin_sum

import oracles

BACKENDS = ["highs", "linprog"] if lpcore._HAVE_HIGHS else ["linprog"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def test_min_x_subject_to_eq(backend):
    lp = LinearProgram(backend=backend)
    x = lp.var("x")
    lp.add_eq(x, 3.0, name="fix")
    lp.minimize(x)
    sol = lp.solve()
    assert sol.status == lpcore.OPTIMAL
    assert sol.objective == pytest.approx(3.0)
    assert sol.value(x) == pytest.approx(3.0)
    # raising the rhs raises the optimum one-for-one
    assert sol.sensitivity("fix") == pytest.approx(1.0)
    assert sol.dual("fix") == pytest.approx(1.0)


def test_le_dual_is_nonnegative(backend):
    # maximize x s.t. x <= 5, posed as min -x; the <=-row dual must be >= 0
    lp = LinearProgram(backend=backend)
    x = lp.var("x")
    lp.add_le(x, 5.0, name="cap")
    lp.minimize(-x)
    sol = lp.solve()
    assert sol.objective == pytest.approx(-5.0)
    assert sol.dual("cap") == pytest.approx(1.0)
    assert sol.sensitivity("cap") == pytest.approx(-1.0)


def test_sensitivity_matches_perturbed_resolve(backend):
    def build(rhs):
        lp = LinearProgram(backend=backend)
        x = lp.var("x", lb=0.0)
        y = lp.var("y", lb=0.0)
        lp.add_ge(x + y, rhs, name="demand")
        lp.add_le(x - y, 1.0, name="skew")
        lp.minimize(2.0 * x + 3.0 * y)
        return lp

    base = build(4.0).solve()
    eps = 1e-5
    bumped = build(4.0 + eps).solve()
    fd = (bumped.objective - base.objective) / eps
    assert base.sensitivity("demand") == pytest.approx(fd, abs=1e-6)
    # >=-row dual in a minimization is the plain sensitivity (here positive:
    # tightening the demand increases cost)
    assert base.dual("demand") > 0


def test_infeasible_and_unbounded_are_statuses(backend):
    lp = LinearProgram(backend=backend)
    x = lp.var("x")
    lp.add_ge(x, 2.0)
    lp.add_le(x, 1.0)
    lp.minimize(x)
    assert lp.solve().status == lpcore.INFEASIBLE

    lp2 = LinearProgram(backend=backend)
    x2 = lp2.var("x")
    lp2.minimize(x2)
    assert lp2.solve().status == lpcore.UNBOUNDED


def test_value_on_expression_arrays(backend):
    lp = LinearProgram(backend=backend)
    T = lp.var_array("T", (2, 2))
    for i in range(2):
        for j in range(2):
            lp.add_eq(T[i, j], float(i + 2 * j))
    lp.minimize(lin_sum(T.ravel()))
    sol = lp.solve()
    got = sol.value(T)
    assert np.allclose(got, [[0.0, 2.0], [1.0, 3.0]])
    # affine combinations evaluate too
    assert sol.value(2.0 * T[1, 1] - T[0, 1] + 0.5) == pytest.approx(4.5)


def test_lin_matmul_agrees_with_numeric():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 4))
    X = rng.normal(size=(4, 2))
    got = lin_matmul(A, X)
    want = A @ X
    vals = np.array([[got[i, j].const for j in range(2)] for i in range(3)])
    assert np.allclose(vals, want)


def test_duplicate_names_rejected():
    lp = LinearProgram()
    lp.var("x")
    with pytest.raises(LpBuildError):
        lp.var("x")
    y = lp.var("y")
    lp.add_eq(y, 0.0, name="row")
    with pytest.raises(LpBuildError):
        lp.add_le(y, 1.0, name="row")


def test_kkt_and_duality_gap_small(backend):
    rng = np.random.default_rng(7)
    lp = LinearProgram(backend=backend)
    x = lp.var_array("x", 5, lb=-4.0, ub=4.0)
    for k in range(4):
        coefs = rng.normal(size=5)
        expr = lin_sum(c * v for c, v in zip(coefs, x))
        if k % 2:
            lp.add_le(expr, float(rng.uniform(0.5, 2.0)), name=f"c{k}")
        else:
            lp.add_ge(expr, float(rng.uniform(-2.0, -0.5)), name=f"c{k}")
    lp.minimize(lin_sum(float(c) * v for c, v in zip(rng.normal(size=5), x)))
    sol = lp.solve()
    assert sol.status == lpcore.OPTIMAL
    res = sol.kkt_residuals()
    assert res["primal"] <= 1e-6
    assert res["dual_sign"] <= 1e-6
    assert res["stationarity"] <= 1e-6
    assert sol.duality_gap() <= 1e-6


def test_warm_rhs_update_matches_fresh_build():
    lp = LinearProgram()
    x = lp.var("x", lb=0.0)
    y = lp.var("y", lb=0.0)
    lp.add_eq(x + 2.0 * y, 4.0, name="pin")
    lp.add_ge(x - y, -10.0)
    lp.minimize(x + y)
    first = lp.solve()
    assert first.objective == pytest.approx(2.0)

    lp.set_rhs("pin", 8.0)
    warm = lp.solve()
    assert warm.objective == pytest.approx(4.0)
    assert warm.sensitivity("pin") == pytest.approx(0.5)

    fresh = LinearProgram()
    xf = fresh.var("x", lb=0.0)
    yf = fresh.var("y", lb=0.0)
    fresh.add_eq(xf + 2.0 * yf, 8.0, name="pin")
    fresh.add_ge(xf - yf, -10.0)
    fresh.minimize(xf + yf)
    ref = fresh.solve()
    assert warm.objective == pytest.approx(ref.objective)


def test_structure_edit_after_solve_rebuilds():
    lp = LinearProgram()
    x = lp.var("x", lb=0.0, ub=10.0)
    lp.minimize(x)
    assert lp.solve().objective == pytest.approx(0.0)
    lp.add_ge(x, 3.0, name="later")
    sol = lp.solve()
    assert sol.objective == pytest.approx(3.0)
    assert sol.dual("later") == pytest.approx(1.0)


def test_lp_text_dump_is_deterministic():
    def build():
        lp = LinearProgram(name="demo")
        a = lp.var("a", lb=0.0)
        b = lp.var("b", ub=2.5)
        lp.add_eq(a + 2.0 * b, 1.0, name="mix")
        lp.add_le(a - b, 0.75, name="diff")
        lp.minimize(a + 0.1 * b)
        return lp.to_lp_text()

    text1, text2 = build(), build()
    assert text1 == text2
    assert "mix:" in text1 and "diff:" in text1 and "free" not in text1


def test_empty_program_is_trivially_optimal():
    lp = LinearProgram()
    sol = lp.solve()
    assert sol.status == lpcore.OPTIMAL
    assert sol.objective == pytest.approx(0.0)


def test_solver_time_tracker_accumulates():
    with lpcore.track_solver_time() as tracker:
        lp = LinearProgram()
        x = lp.var("x", lb=0.0)
        lp.add_ge(x, 1.0)
        lp.minimize(x)
        lp.solve()
        lp.set_rhs(lp.row_names()[0], 2.0)
        lp.solve()
    assert tracker.solves == 2
    assert tracker.seconds >= 0.0


def test_against_vertex_enumeration_oracle(backend):
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(20):
        c, A, lo, hi, xlb, xub = oracles.random_bounded_lp(rng)
        status, obj, _ = oracles.solve_lp_by_vertex_enumeration(c, A, lo, hi, xlb, xub)

        lp = LinearProgram(backend=backend)
        xs = [lp.var(f"x{i}", lb=xlb[i], ub=xub[i]) for i in range(len(c))]
        for k in range(A.shape[0]):
            expr = lin_sum(A[k, i] * xs[i] for i in range(len(c)))
            if lo[k] == hi[k]:
                lp.add_eq(expr, lo[k])
            elif lo[k] == -INF:
                lp.add_le(expr, hi[k])
            else:
                lp.add_ge(expr, lo[k])
        lp.minimize(lin_sum(ci * xi for ci, xi in zip(c, xs)))
        sol = lp.solve()

        if status == "infeasible":
            assert sol.status == lpcore.INFEASIBLE
        else:
            assert sol.status == lpcore.OPTIMAL
            assert sol.objective == pytest.approx(obj, abs=1e-6)
        checked += 1
    assert checked == 20
