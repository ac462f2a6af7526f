"""Closed-loop execution of synthesized controllers, and empirical checks.

The controller of subsystem i reads nothing but its own state: membership
of x_i in the tube yields a witness zeta, and u_i = theta_center +
theta_generators @ zeta.  The coupled update then feeds every neighbor's
state and input back as part of subsystem i's augmented disturbance, which
is exactly what the synthesized tubes were sized against — so a correct
composition keeps every trajectory inside its tube forever (infinite mode)
or across the horizon (finite mode).

``verify_invariance`` stress-tests that claim on a batch of sampled
trajectories.  Witnesses are propagated in closed form where the stored
disturbance template is an axis-aligned box (the default); otherwise each
step re-witnesses membership through a small LP.  Disturbances mix uniform
interior draws with all-plus/minus-one vertex patterns (all 2^p of them when
p <= 12, random sign patterns otherwise), because worst cases live at
vertices.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .geom import Zonotope, contains_point
from .viability import RciSolution, ViableSolution, extract_control


class OutsideViableSet(Exception):
    """A state left its tube; carries which subsystem and when."""

    def __init__(self, sid, t):
        super().__init__(f"subsystem {sid!r} left its viable set at step {t}")
        self.sid = sid
        self.t = t


def _solution_map(result):
    """Accept a SynthesisResult or a plain {sid: solution} dict."""
    solutions = getattr(result, "solutions", result)
    if not isinstance(solutions, dict) or not solutions:
        raise ValueError("no per-subsystem solutions to run")
    return solutions


def _max_steps(solutions):
    horizons = [sol.horizon for sol in solutions.values()
                if isinstance(sol, ViableSolution)]
    return min(horizons) if horizons else None


# ---------------------------------------------------------------------------
# single-trajectory execution


def step(network, solutions, states, t=0, disturbances=None):
    """One synchronous update of the whole network; returns (next, inputs).

    Inputs are computed from local state only.  ``disturbances`` maps sid to
    a d_i in D_i(t) (defaults to the centers).  A state outside its tube
    raises OutsideViableSet.
    """
    solutions = _solution_map(solutions)
    inputs = {}
    for sid in network.sorted_ids():
        if not network.subsystem(sid).m:
            inside, _ = contains_point(solutions[sid].omega(t), states[sid])
            if not inside:
                raise OutsideViableSet(sid, t)
            inputs[sid] = np.zeros(0)
            continue
        try:
            inputs[sid] = extract_control(solutions[sid], states[sid], t)
        except ValueError:
            raise OutsideViableSet(sid, t) from None
    nxt = {}
    for sid in network.sorted_ids():
        sub = network.subsystem(sid)
        x = np.asarray(states[sid], dtype=float)
        new = sub.A_at(t) @ x
        if sub.m:
            new = new + sub.B_at(t) @ inputs[sid]
        for j, coupling in sub.couplings.items():
            new = new + coupling.A_at(t) @ np.asarray(states[j], dtype=float)
            if coupling.B is not None:
                new = new + coupling.B_at(t) @ inputs[j]
        d = disturbances[sid] if disturbances else sub.D_at(t).center
        nxt[sid] = new + np.asarray(d, dtype=float)
    return nxt, inputs


@dataclass
class Trajectory:
    """One rollout: per-subsystem state/input/disturbance sequences."""

    states: dict
    inputs: dict
    disturbances: dict
    violation: tuple | None = None   # (sid, t) of the first escape, if any

    @property
    def num_steps(self):
        return next(iter(self.inputs.values())).shape[0] if self.inputs else 0

    def to_csv(self, path):
        """Rows (t, i, x components..., u components...); ragged cells blank."""
        sids = sorted(self.states, key=lambda s: str(s))
        n_max = max(self.states[s].shape[1] for s in sids)
        m_max = max((self.inputs[s].shape[1] for s in sids), default=0)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "i"]
                            + [f"x{c}" for c in range(n_max)]
                            + [f"u{c}" for c in range(m_max)])
            for sid in sids:
                X, U = self.states[sid], self.inputs[sid]
                for t in range(X.shape[0]):
                    row = [t, sid] + list(X[t]) + [""] * (n_max - X.shape[1])
                    if t < U.shape[0]:
                        row += list(U[t]) + [""] * (m_max - U.shape[1])
                    else:
                        row += [""] * m_max
                    writer.writerow(row)
        return path


def simulate(network, solutions, num_steps, x0=None, seed=0):
    """Roll the closed loop forward under sampled disturbances.

    Starts from ``x0`` (default: tube centers).  Disturbances are uniform
    zeta-samples from each D_i(t).  If a state escapes its tube the
    trajectory is truncated there and the violation recorded.
    """
    solutions = _solution_map(solutions)
    cap = _max_steps(solutions)
    if cap is not None and num_steps > cap:
        raise ValueError(f"horizon is {cap}, cannot simulate {num_steps} steps")
    rng = np.random.default_rng(seed)
    ids = network.sorted_ids()
    states = {sid: np.asarray(x0[sid], dtype=float) if x0 else
              solutions[sid].omega(0).center.copy() for sid in ids}
    xs = {sid: [states[sid]] for sid in ids}
    us = {sid: [] for sid in ids}
    ds = {sid: [] for sid in ids}
    violation = None
    for t in range(num_steps):
        draws = {}
        for sid in ids:
            D = network.subsystem(sid).D_at(t)
            zeta = rng.uniform(-1.0, 1.0, D.num_generators)
            draws[sid] = D.center + D.generators @ zeta
        try:
            states, inputs = step(network, solutions, states, t, draws)
        except OutsideViableSet as exc:
            violation = (exc.sid, exc.t)
            break
        for sid in ids:
            xs[sid].append(states[sid])
            us[sid].append(inputs[sid])
            ds[sid].append(draws[sid])
    def rows(items, width):
        return np.array(items) if items else np.zeros((0, width))

    return Trajectory(
        states={sid: np.array(xs[sid]) for sid in ids},
        inputs={sid: rows(us[sid], network.subsystem(sid).m) for sid in ids},
        disturbances={sid: rows(ds[sid], network.subsystem(sid).n)
                      for sid in ids},
        violation=violation,
    )


# ---------------------------------------------------------------------------
# batched Monte-Carlo invariance verification


def _mixed_zeta(rng, num, p):
    """num draws in [-1,1]^p: vertex sign patterns first, then uniform."""
    if p == 0:
        return np.zeros((num, 0))
    if p <= 12:
        verts = np.array(list(itertools.product((-1.0, 1.0), repeat=p)))
    else:
        verts = rng.choice((-1.0, 1.0), size=(max(num // 2, 1), p))
    nv = min(len(verts), max(num // 2, 1 if num else 0))
    out = np.empty((num, p))
    out[:nv] = verts[:nv]
    out[nv:] = rng.uniform(-1.0, 1.0, (num - nv, p))
    return out


def _diag_radii(W):
    """Radii if W's generator block is a (possibly zero-padded) diagonal."""
    G = W.generators
    if G.shape[0] != G.shape[1]:
        return None
    off = G - np.diag(np.diag(G))
    if np.any(off != 0.0):
        return None
    return np.diag(G)


def _chain_exact(sol):
    """Whether witnesses propagate in closed form for this solution.

    The contracted fixed-point form (beta > 0 or an error term) rescales the
    tube, so the concatenation identity no longer holds and membership must
    be re-witnessed by LP each step.
    """
    if isinstance(sol, RciSolution):
        return sol.beta == 0.0 and sol.E is None
    return True


@dataclass
class InvarianceReport:
    num_samples: int
    num_steps: int
    checked: int = 0              # membership decisions made
    witness_losses: int = 0       # closed-form witness left the box but the
                                  # state was still inside (re-witnessed)
    violations: int = 0           # states confirmed outside their tube
    first_violation: tuple | None = None
    margins: dict = field(default_factory=dict)  # sid -> per-step min margin
    vacuous: bool = False

    @property
    def ok(self):
        return not self.vacuous and self.violations == 0


def verify_invariance(network, result, num_samples=10_000, num_steps=None,
                      seed=0):
    """Sample closed-loop trajectories and count tube escapes.

    Initial states are zeta-sampled from each Omega_i(0) (vertex patterns
    included); disturbances likewise from D_i(t), with the vertex-role
    samples holding a constant extreme pattern across all steps.  Returns an
    InvarianceReport; a sound synthesis gives violations == 0.
    """
    solutions = _solution_map(result)
    ids = network.sorted_ids()
    missing = [sid for sid in ids if sid not in solutions]
    if missing:
        raise ValueError(f"no solutions for subsystem(s) {missing}")
    cap = _max_steps(solutions)
    if num_steps is None:
        num_steps = cap if cap is not None else 100
    if cap is not None and num_steps > cap:
        raise ValueError(f"horizon is {cap}, cannot verify {num_steps} steps")
    if num_samples == 0:
        return InvarianceReport(0, num_steps, vacuous=True)

    rng = np.random.default_rng(seed)
    S = num_samples
    rci = {sid: isinstance(solutions[sid], RciSolution) for sid in ids}

    def omega(sid, t):
        return solutions[sid].omega(None if rci[sid] else t)

    def theta(sid, t):
        return solutions[sid].theta(None if rci[sid] else t)

    def w_set(sid, t):
        sol = solutions[sid]
        return sol.W if rci[sid] else sol.W[t]

    zeta = {}
    states = {}
    margins = {}
    for sid in ids:
        om = omega(sid, 0)
        zeta[sid] = _mixed_zeta(rng, S, om.num_generators)
        states[sid] = om.center + zeta[sid] @ om.generators.T
        margins[sid] = np.full(num_steps + 1, np.inf)

    # vertex-role samples replay one extreme disturbance pattern forever
    d_pattern = {}
    n_vertex = {}
    for sid in ids:
        p = network.subsystem(sid).D_at(0).num_generators
        d_pattern[sid] = _mixed_zeta(rng, S, p)
        full = 2 ** p if p <= 12 else S
        n_vertex[sid] = min(full, max(S // 2, 1))

    report = InvarianceReport(S, num_steps, margins=margins)
    alive = np.ones(S, dtype=bool)
    report.checked += len(ids) * S
    for sid in ids:
        norms = np.abs(zeta[sid]).max(axis=1) if zeta[sid].shape[1] else \
            np.zeros(S)
        margins[sid][0] = float((1.0 - norms)[alive].min())

    for t in range(num_steps):
        if not alive.any():
            break
        inputs = {}
        for sid in ids:
            sub = network.subsystem(sid)
            if sub.m:
                th = theta(sid, t)
                inputs[sid] = th.center + zeta[sid] @ th.generators.T
        nxt = {}
        for sid in ids:
            sub = network.subsystem(sid)
            new = states[sid] @ sub.A_at(t).T
            if sub.m:
                new = new + inputs[sid] @ sub.B_at(t).T
            w = np.zeros_like(new)
            for j, coupling in sub.couplings.items():
                w = w + states[j] @ coupling.A_at(t).T
                if coupling.B is not None and j in inputs:
                    w = w + inputs[j] @ coupling.B_at(t).T
            D = sub.D_at(t)
            nv = n_vertex[sid]
            zd = np.empty((S, D.num_generators))
            zd[:nv] = d_pattern[sid][:nv]
            zd[nv:] = rng.uniform(-1.0, 1.0, (S - nv, D.num_generators))
            w = w + D.center + zd @ D.generators.T
            nxt[sid] = new + w

            # Advance the membership witness.  The fresh witness coordinates
            # are recovered from the actual next state (not from w), so the
            # identity x = c + T zeta is re-established exactly every step;
            # otherwise solver-tolerance residuals in the template recursion
            # compound through the witness dynamics and eventually decouple
            # the witness from the state it is supposed to describe.
            radii = _diag_radii(w_set(sid, t)) \
                if _chain_exact(solutions[sid]) else None
            om_next = omega(sid, t + 1)
            k_next = om_next.num_generators
            if radii is not None:
                expected = radii.size + (zeta[sid].shape[1] - radii.size
                                         if rci[sid] else zeta[sid].shape[1])
                if k_next != expected:
                    radii = None
            new_zeta = np.zeros((S, k_next))
            if radii is not None:
                p = radii.size
                base = zeta[sid][:, p:] if rci[sid] else zeta[sid]
                G = om_next.generators
                pred = om_next.center + base @ G[:, :k_next - p].T
                resid = nxt[sid] - pred
                with np.errstate(divide="ignore", invalid="ignore"):
                    zw = np.where(radii > 0.0, resid / radii, 0.0)
                bad = (np.abs(zw) > 1.0 + 1e-9).any(axis=1)
                bad |= (np.abs(np.where(radii > 0.0, 0.0, resid)) > 1e-9).any(axis=1)
                new_zeta[:, :k_next - p] = base
                new_zeta[:, k_next - p:] = zw
                redo = np.flatnonzero(bad & alive)
            else:
                redo = np.flatnonzero(alive)
            for s in redo:
                inside, wit = contains_point(om_next, nxt[sid][s])
                if inside:
                    if radii is not None:
                        report.witness_losses += 1
                    new_zeta[s] = wit
                else:
                    report.violations += 1
                    alive[s] = False
                    if report.first_violation is None:
                        report.first_violation = (sid, t + 1)
            zeta[sid] = new_zeta
        states = nxt
        report.checked += len(ids) * int(alive.sum())
        for sid in ids:
            if alive.any():
                norms = np.abs(zeta[sid]).max(axis=1) if zeta[sid].shape[1] \
                    else np.zeros(S)
                margins[sid][t + 1] = float((1.0 - norms)[alive].min())
    return report
