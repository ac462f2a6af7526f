"""Zonotopes and the linear programs that compare them.

A zonotope ``Z(c, G)`` is the set ``{c + G @ zeta : |zeta|_inf <= 1}`` with
center ``c`` (length n) and generator matrix ``G`` (n x p).  The key
primitive in this module is :func:`add_scaled_containment`, which emits the
sufficient containment condition

    Z(c1, G1) subset of Z(c2, G2 @ Diag(scale))
        iff exist Gamma, gamma with
            G1 = G2 @ Lambda,  c2 - c1 = G2 @ lam,
            sum_j |Lambda[q, j]| + |lam[q]| <= scale[q]  for every row q

as LP rows.  Written this way (the per-row bound on the right-hand side
instead of a fixed 1) the rows stay linear even when both the inner body's
generators and the scales are decision variables, which is what the
viability and contract programs rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lpcore
from .lpcore import LinearProgram, LinExpr, as_expr, lin_sum


@dataclass(frozen=True)
class Zonotope:
    """Zonotope with ``center`` (n,) and ``generators`` (n, p)."""

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.ndim != 1:
            raise ValueError("center must be a vector")
        G = np.asarray(self.generators, dtype=float)
        if G.size == 0:
            G = G.reshape(len(center), 0)
        if G.ndim == 1:
            G = G.reshape(-1, 1)
        if G.shape[0] != len(center):
            raise ValueError(f"generator rows {G.shape[0]} != dim {len(center)}")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(G))):
            raise ValueError("non-finite entries in zonotope data")
        center = center.copy()
        G = G.copy()
        center.flags.writeable = False
        G.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "generators", G)

    @property
    def dim(self):
        return len(self.center)

    @property
    def num_generators(self):
        return self.generators.shape[1]

    @property
    def order(self):
        return self.num_generators / self.dim

    def support(self, direction):
        """Support function h(d) = max_{x in Z} d.x."""
        d = np.asarray(direction, dtype=float)
        return float(d @ self.center + np.abs(d @ self.generators).sum())

    def to_json(self):
        return {"center": self.center.tolist(),
                "generators": self.generators.tolist()}

    @classmethod
    def from_json(cls, data):
        return cls(np.asarray(data["center"], dtype=float),
                   np.asarray(data["generators"], dtype=float))

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, p={self.num_generators})"


def point_zonotope(center):
    center = np.atleast_1d(np.asarray(center, dtype=float))
    return Zonotope(center, np.zeros((len(center), 0)))


def affine_map(A, Z, b=None):
    """Image A @ Z + b (exact: zonotopes are closed under affine maps)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    c = A @ Z.center
    if b is not None:
        c = c + np.asarray(b, dtype=float)
    return Zonotope(c, A @ Z.generators)


def minkowski_sum(*zonotopes):
    """Minkowski sum: centers add, generator matrices concatenate."""
    if not zonotopes:
        raise ValueError("need at least one zonotope")
    dim = zonotopes[0].dim
    for Z in zonotopes:
        if Z.dim != dim:
            raise ValueError("dimension mismatch in minkowski_sum")
    center = sum(Z.center for Z in zonotopes)
    gens = np.hstack([Z.generators for Z in zonotopes])
    return Zonotope(center, gens)


def stack(zonotopes):
    """Cartesian product: block-diagonal generators, stacked centers."""
    zonotopes = list(zonotopes)
    center = np.concatenate([Z.center for Z in zonotopes])
    total_p = sum(Z.num_generators for Z in zonotopes)
    G = np.zeros((len(center), total_p))
    r = 0
    q = 0
    for Z in zonotopes:
        n, p = Z.generators.shape
        G[r:r + n, q:q + p] = Z.generators
        r += n
        q += p
    return Zonotope(center, G)


def scale_generators(Z, alpha):
    """Z(c, G Diag(alpha)) — per-generator scaling, used by contract templates."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (Z.num_generators,):
        raise ValueError(f"alpha shape {alpha.shape} != ({Z.num_generators},)")
    return Zonotope(Z.center, Z.generators * alpha)


def interval_hull(Z):
    """Componentwise bounds (lo, hi): lo = c - sum|G| rows, hi = c + sum|G|."""
    radius = np.abs(Z.generators).sum(axis=1)
    return Z.center - radius, Z.center + radius


def order_reduce_box(Z, order=1):
    """Boxing order reduction: over-approximate Z by an order-``order`` zonotope.

    ``order=1`` replaces Z by its interval hull (an axis-aligned box whose
    generator matrix is Diag of the row sums of |G|).  For ``order >= 2`` the
    n*(order-1) generators with the largest Euclidean norm are kept and the
    rest are boxed; if Z already has at most n*order generators it is
    returned unchanged.  ``order=None`` disables reduction.
    """
    if order is None:
        return Z
    n, p = Z.generators.shape
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        radius = np.abs(Z.generators).sum(axis=1)
        return Zonotope(Z.center, np.diag(radius))
    if p <= n * order:
        return Z
    keep = n * (order - 1)
    norms = np.linalg.norm(Z.generators, axis=0)
    idx = np.argsort(-norms, kind="stable")
    kept = np.sort(idx[:keep])
    boxed = np.sort(idx[keep:])
    radius = np.abs(Z.generators[:, boxed]).sum(axis=1)
    return Zonotope(Z.center, np.hstack([Z.generators[:, kept], np.diag(radius)]))


def sample(Z, num, rng):
    """num points c + G zeta with zeta uniform over [-1,1]^p."""
    zeta = rng.uniform(-1.0, 1.0, size=(num, Z.num_generators))
    return Z.center + zeta @ Z.generators.T


def zonogon_area(Z):
    """Area of a 2-D zonotope: 4 * sum_{j<k} |det [g_j g_k]|."""
    if Z.dim != 2:
        raise ValueError("zonogon_area needs a 2-D zonotope")
    G = Z.generators
    p = G.shape[1]
    total = 0.0
    for j in range(p):
        for k in range(j + 1, p):
            total += abs(G[0, j] * G[1, k] - G[1, j] * G[0, k])
    return 4.0 * total


def polygon_vertices_2d(Z, tol=1e-12):
    """Vertices of a 2-D zonotope in counter-clockwise order.

    Generators are normalized into the upper half-plane, parallel generators
    are merged, and the boundary is walked in angle order; the second half of
    the ring is the point reflection of the first through the center.  At
    most 2p vertices for p distinct directions.
    """
    if Z.dim != 2:
        raise ValueError("polygon_vertices_2d needs a 2-D zonotope")
    G = Z.generators
    cols = [G[:, k] for k in range(G.shape[1])
            if np.abs(G[:, k]).max() > tol]
    if not cols:
        return Z.center.reshape(1, 2).copy()
    # normalize into the half-plane y > 0 (or y == 0, x > 0)
    normed = []
    for g in cols:
        if g[1] < -tol or (abs(g[1]) <= tol and g[0] < 0):
            g = -g
        normed.append(g)
    # merge parallel directions
    angles = np.array([np.arctan2(g[1], g[0]) for g in normed])
    order = np.argsort(angles, kind="stable")
    merged = []
    for k in order:
        if merged and abs(angles[k] - merged[-1][0]) <= 1e-12:
            merged[-1] = (merged[-1][0], merged[-1][1] + normed[k])
        else:
            merged.append((angles[k], normed[k].copy()))
    gens = [g for _, g in merged]
    start = Z.center - sum(gens)
    ring = [start]
    for g in gens:
        ring.append(ring[-1] + 2.0 * g)
    # ring now runs from -sum(g) to +sum(g); reflect the first half back
    if len(gens) == 1:
        return np.vstack([ring[0], ring[1]])
    half = ring[:-1]
    other = [2.0 * Z.center - v for v in half]
    return np.vstack(half + other)


# ---------------------------------------------------------------------------
# containment LPs


def add_scaled_containment(lp, inner_G, inner_c, outer_cols, outer_scales,
                           outer_c, prefix):
    """Emit rows forcing Z(inner_c, inner_G) inside Z(outer_c, outer_cols*Diag(scales)).

    ``inner_G`` (n x r), ``inner_c`` (n,) may contain LinExpr entries;
    ``outer_cols`` (n x s) must be numeric; ``outer_scales`` is a length-s
    sequence of LinExpr or numbers (nonnegative).  Returns a dict of handles
    including the substituted factor ``Lambda = Diag(scale) @ Gamma`` and the
    names of the row-sum rows (whose duals carry the scale sensitivities).
    """
    outer_cols = np.asarray(outer_cols, dtype=float)
    n, s = outer_cols.shape
    inner_G = np.asarray(inner_G, dtype=object).reshape(n, -1)
    r = inner_G.shape[1]
    Lam = lp.var_array(f"{prefix}:L", (s, r)) if s and r else np.empty((s, r), dtype=object)
    lam = lp.var_array(f"{prefix}:l", s) if s else np.empty(0, dtype=object)
    W = lp.var_array(f"{prefix}:W", (s, r + 1), lb=0.0) if s else np.empty((s, r + 1), dtype=object)

    for i in range(n):
        row_cols = np.nonzero(outer_cols[i])[0]
        for j in range(r):
            expr = lin_sum(outer_cols[i, q] * Lam[q, j] for q in row_cols)
            lp.add_eq(expr - as_expr(inner_G[i, j]), 0.0, name=f"{prefix}:G[{i},{j}]")
        expr = lin_sum(outer_cols[i, q] * lam[q] for q in row_cols)
        lp.add_eq(expr + as_expr(inner_c[i]) - as_expr(outer_c[i]), 0.0,
                  name=f"{prefix}:c[{i}]")

    rowsum_names = []
    for q in range(s):
        for j in range(r):
            lp.add_le(Lam[q, j] - W[q, j], 0.0)
            lp.add_le(-Lam[q, j] - W[q, j], 0.0)
        lp.add_le(lam[q] - W[q, r], 0.0)
        lp.add_le(-lam[q] - W[q, r], 0.0)
        total = lin_sum(W[q, j] for j in range(r + 1))
        name = f"{prefix}:rowsum[{q}]"
        lp.add_le(total - as_expr(outer_scales[q]), 0.0, name=name)
        rowsum_names.append(name)
    return {"Lam": Lam, "lam": lam, "W": W, "rowsum_names": rowsum_names}


@dataclass
class ContainmentCertificate:
    feasible: bool
    Gamma: np.ndarray | None = None
    gamma: np.ndarray | None = None
    margin: float | None = None  # min over rows of (1 - |[Gamma gamma]| row sum)
    solve_seconds: float = 0.0


def containment_lp(inner, outer, backend=None):
    """Check Z_inner subset of Z_outer via the containment LP; returns a certificate."""
    if inner.dim != outer.dim:
        raise ValueError("dimension mismatch")
    lp = LinearProgram(name="containment", backend=backend)
    handles = add_scaled_containment(
        lp, inner.generators, inner.center, outer.generators,
        [1.0] * outer.num_generators, outer.center, "ct")
    sol = lp.solve()
    if sol.status != lpcore.OPTIMAL:
        return ContainmentCertificate(False, solve_seconds=sol.solve_seconds)
    s, r = outer.num_generators, inner.num_generators
    Gamma = sol.value(handles["Lam"]) if s and r else np.zeros((s, r))
    gamma = sol.value(handles["lam"]) if s else np.zeros(0)
    rows = np.abs(Gamma).sum(axis=1) + np.abs(gamma) if s else np.zeros(0)
    margin = float(1.0 - rows.max()) if s else 1.0
    return ContainmentCertificate(True, Gamma.reshape(s, r), gamma, margin,
                                  sol.solve_seconds)


def directed_hausdorff(outer, inner, backend=None):
    """min d >= 0 with Z_inner inside Z_outer + d * unit box (directed Hausdorff).

    Zero iff the containment LP certifies Z_inner inside Z_outer; the box
    inflation keeps the program linear and always feasible.
    """
    if inner.dim != outer.dim:
        raise ValueError("dimension mismatch")
    n = inner.dim
    lp = LinearProgram(name="hausdorff", backend=backend)
    d = lp.var("d", lb=0.0)
    cols = np.hstack([outer.generators, np.eye(n)])
    scales = [1.0] * outer.num_generators + [d] * n
    add_scaled_containment(lp, inner.generators, inner.center, cols, scales,
                           outer.center, "dh")
    lp.minimize(d)
    sol = lp.solve()
    if sol.status != lpcore.OPTIMAL:
        raise lpcore.LpSolverError(f"hausdorff LP ended with {sol.status}")
    return max(0.0, sol.objective)


def contains_point(Z, x, tol=1e-9):
    """Membership test with witness: returns (inside, zeta) with x = c + G zeta.

    The witness minimizes |zeta|_inf, so membership holds iff the optimum is
    <= 1 + tol.
    """
    x = np.asarray(x, dtype=float)
    p = Z.num_generators
    if p == 0:
        inside = bool(np.allclose(x, Z.center, atol=max(tol, 1e-12)))
        return inside, (np.zeros(0) if inside else None)
    lp = LinearProgram(name="member")
    zeta = lp.var_array("z", p)
    q = lp.var("q", lb=0.0)
    for i in range(Z.dim):
        expr = lin_sum(Z.generators[i, k] * zeta[k] for k in range(p))
        lp.add_eq(expr, float(x[i] - Z.center[i]))
    for k in range(p):
        lp.add_le(zeta[k] - q, 0.0)
        lp.add_le(-zeta[k] - q, 0.0)
    lp.minimize(q)
    sol = lp.solve()
    if sol.status != lpcore.OPTIMAL or sol.objective > 1.0 + tol:
        return False, None
    return True, sol.value(zeta)
