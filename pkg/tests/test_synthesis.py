"""Synthesis drivers: descent loop, centralized LP, result round-trips.

The 1-D pair networks come from test_contracts, where the potential is
derived by hand: V_i = max(0, coupling * alpha_j + d - alpha_i).
"""

import json
import os

import numpy as np
import pytest
from test_contracts import finite_pair, interval_sub, pair_network

from zonosynth.contracts import (
    alpha_max,
    build_programs,
    default_template,
    potential,
    ContractTemplate,
)
from zonosynth.sysmodel import ConfigError, load_network
from zonosynth.synthesis import (
    DescentConfig,
    RETRY_HINT,
    SynthesisResult,
    centralized_dense,
    centralized_synthesize,
    compositional_synthesize,
    project_box,
)
from zonosynth.viability import RciSolution, ViableSolution


def decoupled_net(**kw):
    subs = [interval_sub(1, 2, **kw), interval_sub(2, 1, **kw)]
    for s in subs:
        s["couplings"] = []
    return load_network({"mode": "infinite", "subsystems": subs})


# ---------------------------------------------------------------------------
# config and projection


def test_descent_config_validation():
    with pytest.raises(ValueError):
        DescentConfig(delta=0.0).validate()
    with pytest.raises(ValueError):
        DescentConfig(tol_v=-1.0).validate()
    with pytest.raises(ValueError):
        DescentConfig(max_iters=0).validate()
    with pytest.raises(ValueError):
        DescentConfig(init="warmish").validate()
    DescentConfig().validate()


def test_project_box_interior_unchanged():
    net = pair_network()
    caps = alpha_max(net, default_template(net))
    interior = caps.scaled(0.37)
    out = project_box(interior)
    assert out.to_vector() == pytest.approx(interior.to_vector())


def test_project_box_clamps_both_sides():
    net = pair_network()
    caps = alpha_max(net, default_template(net))
    low = caps.from_vector(np.array([-0.3, 0.5]))
    assert project_box(low).to_vector() == pytest.approx([0.0, 0.5])
    high = caps.from_vector(caps.to_vector() + 1.0)
    assert project_box(high).to_vector() == pytest.approx(caps.to_vector())


def test_project_box_explicit_caps():
    net = pair_network()
    caps = alpha_max(net, default_template(net))
    tight = caps.scaled(0.25)
    out = project_box(caps.copy(), caps=tight)
    assert out.to_vector() == pytest.approx(tight.to_vector())


def test_mode_mismatch_is_config_error():
    net = pair_network()
    with pytest.raises(ConfigError):
        compositional_synthesize(net, mode="finite")
    with pytest.raises(ConfigError):
        centralized_synthesize(net, mode="finite")


# ---------------------------------------------------------------------------
# compositional descent on hand-sized networks


def test_zero_coupling_potential_vanishes_everywhere():
    net = decoupled_net()
    tpl = default_template(net)
    programs = build_programs(net, tpl)
    caps = alpha_max(net, tpl)
    rng = np.random.default_rng(7)
    for _ in range(10):
        # the tube only has to swallow D (radius 0.1 <= any alpha >= 0.1)
        vec = caps.to_vector() * rng.uniform(0.15, 1.0, 2)
        res = potential(programs, caps.from_vector(vec))
        assert res.value == pytest.approx(0.0, abs=1e-12)


def test_zero_coupling_synthesis_converges_in_zero_iterations():
    res = compositional_synthesize(decoupled_net())
    assert res.ok
    assert res.iterations == 0
    assert res.value <= 1e-6
    assert len(res.trace) == 1


def test_start_inside_correct_region():
    # at alpha = alpha_max the pair potential is already zero
    res = compositional_synthesize(
        pair_network(), config=DescentConfig(init="max"))
    assert res.ok and res.iterations == 0


def test_pair_descent_converges_and_certifies():
    net = pair_network(coupling=0.9)  # V(half) = 0.1 > 0, fixed point at cap
    res = compositional_synthesize(net)
    assert res.status == "correct"
    assert res.value <= 1e-6
    assert 1 <= res.iterations < 50
    assert res.correctness is not None and res.correctness.ok
    assert set(res.solutions) == {1, 2}
    assert isinstance(res.solutions[1], RciSolution)
    # trace shape: one row per iterate including the initial evaluation
    assert len(res.trace) == res.iterations + 1
    it0, v0, g0, s0 = res.trace[0]
    assert (it0, s0) == (0, 0.0) and v0 == pytest.approx(0.1)
    assert res.timings["solve_seconds"] > 0
    assert res.timings["wall_seconds"] >= res.timings["solve_seconds"]


def test_infeasible_local_problem_fails_with_hint():
    # uncontrollable contraction: x+ = 0.5x + d has no RCI equality template
    # at the default budget, so even the slacked potential is infeasible
    net = pair_network(a_self=0.5, b=0.0)
    res = compositional_synthesize(net)
    assert res.status == "failed"
    assert res.solutions is None
    assert RETRY_HINT in res.hint
    assert res.iterations == 0


def test_unreachable_potential_floor_fails_after_budget():
    # coupling > 1: V* = 0.2 > 0 at the box corner, never reaches tol
    net = pair_network(coupling=1.2)
    res = compositional_synthesize(net, config=DescentConfig(max_iters=40))
    assert res.status == "failed"
    assert res.hint == RETRY_HINT
    assert res.value > 1e-6
    assert res.iterations == 40


def test_fixed_step_fallback_converges_on_tame_pair():
    net = pair_network(coupling=0.9)
    cfg = DescentConfig(line_search=False, delta=1.0, max_iters=100)
    res = compositional_synthesize(net, config=cfg)
    assert res.ok
    # every recorded step is the constant delta
    assert all(s == 1.0 for _, _, _, s in res.trace[1:])


def test_tame_descent_is_monotone():
    res = compositional_synthesize(pair_network(coupling=0.9))
    values = [v for _, v, _, _ in res.trace]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_descent_is_deterministic():
    net = pair_network(coupling=0.9)
    a = compositional_synthesize(net)
    b = compositional_synthesize(net)
    assert a.trace == b.trace
    assert a.params.to_vector() == pytest.approx(b.params.to_vector())


def test_random_init_is_seeded():
    net = pair_network(coupling=0.9)
    cfg = DescentConfig(init="random", seed=11)
    a = compositional_synthesize(net, config=cfg)
    b = compositional_synthesize(net, config=DescentConfig(init="random", seed=11))
    assert a.trace[0] == b.trace[0]


def test_case1_compositional_end_to_end():
    net = load_network("configs/case1.json")
    res = compositional_synthesize(net)
    assert res.status == "correct"
    assert res.value <= 1e-6
    assert res.iterations <= 500
    assert res.correctness.ok and res.correctness.max_residual <= 1e-8
    assert sorted(res.solutions) == [1, 2, 3]
    # the descent is genuinely iterative on this instance
    assert res.iterations > 100
    assert res.trace[0][1] == pytest.approx(20.2818636, abs=1e-5)


# ---------------------------------------------------------------------------
# centralized single LP


def test_centralized_decoupled_alpha_at_minimum():
    # dead-beat input exists, so the minimal tube is the one-step D box and
    # the minimized promise parameter equals its radius
    res = centralized_synthesize(decoupled_net())
    assert res.ok
    assert res.objective == pytest.approx(0.2, abs=1e-9)
    for sid in (1, 2):
        assert res.params.x[sid][0] == pytest.approx([0.1], abs=1e-9)


def test_centralized_pair_tightness():
    # with coupling 0.5 the joint minimum solves alpha = 0.5 alpha + 0.1
    res = centralized_synthesize(pair_network())
    assert res.ok
    assert res.params.x[1][0] == pytest.approx([0.2], abs=1e-8)
    assert res.value == 0.0


def test_centralized_infeasible_reports_failed():
    net = pair_network(a_self=0.5, b=0.0)
    res = centralized_synthesize(net)
    assert res.status == "failed"
    assert res.solutions is None and res.params is None
    assert res.hint == RETRY_HINT


def test_centralized_case1_needs_k12():
    net = load_network("configs/case1.json")
    assert centralized_synthesize(net).status == "failed"  # default budget
    res = centralized_synthesize(net, k=12)
    assert res.ok
    assert res.objective == pytest.approx(1.7646, abs=1e-3)
    assert res.correctness.ok


def test_centralized_case2_finite():
    net = load_network("configs/case2.json")
    res = centralized_synthesize(net)
    assert res.ok
    for sid, sol in res.solutions.items():
        assert isinstance(sol, ViableSolution)
        assert sol.horizon == 15
        # the start set collapses to a point under the size objective
        assert np.abs(sol.omega(0).generators).sum() <= 1e-6


def test_centralized_custom_template_admissibility_rows():
    # template columns are twice the bounds, so admissibility caps the
    # parameter at 0.5; the minimal tube (radius 0.1) needs alpha = 0.05
    net = decoupled_net()
    tpl = ContractTemplate(
        state={sid: [(np.zeros(1), np.array([[2.0]]))] for sid in (1, 2)},
        input={},
        is_bounds=False,
    )
    caps = alpha_max(net, tpl)
    assert caps.x[1][0] == pytest.approx([0.5])
    res = centralized_synthesize(net, template=tpl)
    assert res.ok
    assert res.params.x[1][0] == pytest.approx([0.05], abs=1e-9)


# ---------------------------------------------------------------------------
# dense baseline


def test_dense_case1():
    net = load_network("configs/case1.json")
    res = centralized_dense(net)
    assert res.ok
    sol = res.solutions["aggregate"]
    assert isinstance(sol, RciSolution)
    assert sol.T.shape[0] == 6
    assert res.params is None


def test_dense_finite_pair():
    res = centralized_dense(finite_pair(horizon=3))
    assert res.ok
    assert isinstance(res.solutions["aggregate"], ViableSolution)


def test_dense_infeasible():
    net = pair_network(a_self=0.5, b=0.0)
    res = centralized_dense(net)
    assert res.status == "failed" and res.hint == RETRY_HINT


# ---------------------------------------------------------------------------
# directory round-trip


def test_save_load_roundtrip(tmp_path):
    net = pair_network(coupling=0.9)
    res = compositional_synthesize(net)
    outdir = res.save(tmp_path / "run")
    names = set(os.listdir(outdir))
    assert {"report.json", "params.json", "trace.csv", "network.json",
            "template.json", "solution_1.json", "solution_2.json"} <= names

    back = SynthesisResult.load(outdir)
    assert back.status == res.status
    assert back.value == pytest.approx(res.value)
    assert back.iterations == res.iterations
    assert back.trace == pytest.approx(res.trace)
    assert back.params.to_vector() == pytest.approx(res.params.to_vector())
    assert sorted(back.solutions) == [1, 2]
    want = res.solutions[1].omega()
    got = back.solutions[1].omega()
    assert got.center == pytest.approx(want.center)
    assert got.generators == pytest.approx(want.generators)
    assert back.network.sorted_ids() == [1, 2]
    assert back.template.is_bounds


def test_report_json_keys(tmp_path):
    res = compositional_synthesize(pair_network(coupling=0.9))
    res.save(tmp_path / "r")
    with open(tmp_path / "r" / "report.json") as fh:
        rep = json.load(fh)
    assert {"status", "method", "mode", "V", "objective", "iterations",
            "timings", "hint", "correctness"} <= set(rep)
    assert rep["status"] == "correct"
    assert rep["method"] == "compositional"
    assert {"solve_seconds", "wall_seconds", "certify_seconds"} <= set(rep["timings"])


def test_trace_csv_header(tmp_path):
    res = compositional_synthesize(decoupled_net())
    res.save(tmp_path / "r")
    with open(tmp_path / "r" / "trace.csv") as fh:
        assert fh.readline().strip() == "iteration,V,grad_norm,step"


def test_custom_template_roundtrip(tmp_path):
    net = decoupled_net()
    tpl = ContractTemplate(
        state={sid: [(np.zeros(1), np.array([[2.0]]))] for sid in (1, 2)},
        input={},
        is_bounds=False,
    )
    res = centralized_synthesize(net, template=tpl)
    res.save(tmp_path / "r")
    back = SynthesisResult.load(tmp_path / "r")
    assert not back.template.is_bounds
    c, C = back.template.state[1][0]
    assert np.asarray(C) == pytest.approx(np.array([[2.0]]))
