"""Sparse linear programs with named rows, duals, and cheap right-hand-side updates.

This is the single place in the package that talks to an LP solver.  Models are
built incrementally from :class:`LinExpr` objects (sparse affine expressions),
rows and variables can be named, and solutions expose both primal values and
row duals by name.  Two backends are supported:

* ``"highs"`` — the HiGHS bindings that ship inside scipy
  (``scipy.optimize._highspy``).  This is the default when importable.  It
  keeps the solver instance alive between solves so that updating only
  equality right-hand sides (``set_rhs``) re-solves warm in microseconds,
  and it reports true in-solver time.
* ``"linprog"`` — plain ``scipy.optimize.linprog(method="highs")``.  Slower
  (rebuilds the model every solve, wall-clock timing) but uses only public
  scipy API.  Selected automatically if the bindings are missing.

Sign conventions
----------------
``LpSolution.sensitivity(name)`` is always d(objective)/d(rhs) for the named
row.  ``LpSolution.dual(name)`` applies the textbook sign convention for a
minimization: duals of ``<=`` rows are >= 0 (i.e. the negated sensitivity),
duals of ``=`` and ``>=`` rows are the sensitivity itself.
"""

from __future__ import annotations

import time
import threading
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field

import numpy as np

INF = float("inf")

try:  # vendored HiGHS bindings (scipy >= 1.15)
    from scipy.optimize._highspy import _core as _hcore

    _HAVE_HIGHS = True
except Exception:  # pragma: no cover - depends on scipy build
    _hcore = None
    _HAVE_HIGHS = False

DEFAULT_BACKEND = "highs" if _HAVE_HIGHS else "linprog"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time_limit"


class LpError(Exception):
    """Base class for lpcore errors."""


class LpBuildError(LpError):
    """Raised for malformed models (duplicate names, bad shapes, ...)."""


class LpSolverError(LpError):
    """Raised when the solver fails numerically.

    Infeasible and unbounded models are *results* (see ``LpSolution.status``),
    not errors; this exception marks genuine solver breakdowns.
    """


# --------------------------------------------------------------------------
# solver-time tracking (used to meter certification phases etc.)

_tracker_stack: ContextVar[tuple] = ContextVar("zonosynth_lp_trackers", default=())


class SolverTimeTracker:
    def __init__(self):
        self.seconds = 0.0
        self.solves = 0
        self._lock = threading.Lock()

    def _add(self, seconds):
        with self._lock:
            self.seconds += seconds
            self.solves += 1


@contextmanager
def track_solver_time():
    """Accumulate in-solver seconds of every ``solve()`` in this context."""
    tracker = SolverTimeTracker()
    token = _tracker_stack.set(_tracker_stack.get() + (tracker,))
    try:
        yield tracker
    finally:
        _tracker_stack.reset(token)


def _notify_trackers(seconds):
    for tracker in _tracker_stack.get():
        tracker._add(seconds)


# --------------------------------------------------------------------------
# expressions


class LinExpr:
    """Sparse affine expression ``sum(coef * var) + const``.

    Supports ``+``, ``-`` and scalar ``*``/``/``; ``sum()`` works via
    ``__radd__``.  Instances are treated as immutable: every operation
    returns a new expression.
    """

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms = terms if terms is not None else {}
        self.const = float(const)

    def copy(self):
        return LinExpr(dict(self.terms), self.const)

    def __add__(self, other):
        if isinstance(other, LinExpr):
            terms = dict(self.terms)
            for col, coef in other.terms.items():
                terms[col] = terms.get(col, 0.0) + coef
            return LinExpr(terms, self.const + other.const)
        return LinExpr(dict(self.terms), self.const + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return LinExpr({c: -v for c, v in self.terms.items()}, -self.const)

    def __mul__(self, scalar):
        scalar = float(scalar)
        if scalar == 0.0:
            return LinExpr({}, 0.0)
        return LinExpr({c: v * scalar for c, v in self.terms.items()}, self.const * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __repr__(self):
        bits = [f"{v:+g}*x{c}" for c, v in sorted(self.terms.items())]
        if self.const or not bits:
            bits.append(f"{self.const:+g}")
        return "LinExpr(" + " ".join(bits) + ")"


def as_expr(value):
    """Coerce a float or LinExpr to a LinExpr."""
    if isinstance(value, LinExpr):
        return value
    return LinExpr({}, float(value))


def lin_sum(items):
    """Sum an iterable of LinExpr/floats without quadratic dict copying."""
    terms = {}
    const = 0.0
    for item in items:
        if isinstance(item, LinExpr):
            const += item.const
            for col, coef in item.terms.items():
                terms[col] = terms.get(col, 0.0) + coef
        else:
            const += float(item)
    return LinExpr(terms, const)


def lin_matmul(A, X):
    """Matrix product of a numeric matrix ``A`` with an expression matrix ``X``.

    ``X`` entries may be LinExpr or numbers; returns an object array of
    LinExpr.  Zero coefficients in ``A`` are skipped.
    """
    A = np.asarray(A, dtype=float)
    X = np.asarray(X, dtype=object)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
        squeeze = True
    else:
        squeeze = False
    n, s = A.shape
    if X.shape[0] != s:
        raise LpBuildError(f"lin_matmul shape mismatch: {A.shape} @ {X.shape}")
    out = np.empty((n, X.shape[1]), dtype=object)
    for i in range(n):
        row = A[i]
        nz = np.nonzero(row)[0]
        for j in range(X.shape[1]):
            out[i, j] = lin_sum(row[k] * as_expr(X[k, j]) for k in nz)
    return out[:, 0] if squeeze else out


# --------------------------------------------------------------------------
# the program


@dataclass
class _Row:
    name: str
    sense: str  # "=", "<", ">"
    lo: float
    hi: float
    bound0: float  # folded bound at creation time
    rhs0: float  # scalar rhs at creation time (set_rhs shifts relative to it)
    cols: np.ndarray
    coefs: np.ndarray


class LinearProgram:
    """Incrementally built LP, solved by HiGHS.

    Minimization only.  Infeasible/unbounded are reported as statuses on the
    returned :class:`LpSolution`; numerical failures raise
    :class:`LpSolverError`.
    """

    def __init__(self, name="lp", backend=None):
        self.name = name
        self.backend = backend or DEFAULT_BACKEND
        if self.backend not in ("highs", "linprog"):
            raise LpBuildError(f"unknown backend {self.backend!r}")
        if self.backend == "highs" and not _HAVE_HIGHS:
            raise LpBuildError("highs backend unavailable in this scipy build")
        self._col_names = []
        self._name_to_col = {}
        self._col_lb = []
        self._col_ub = []
        self._obj = {}
        self._obj_const = 0.0
        self._rows = []
        self._name_to_row = {}
        self._structure_version = 0
        self._solver = None
        self._built_version = -1
        self._pending_row_bounds = {}

    # -- variables ---------------------------------------------------------

    @property
    def num_vars(self):
        return len(self._col_names)

    @property
    def num_rows(self):
        return len(self._rows)

    def var(self, name=None, lb=-INF, ub=INF):
        """Create a variable; returns it as a single-term LinExpr."""
        col = len(self._col_names)
        if name is None:
            name = f"v{col}"
        if name in self._name_to_col:
            raise LpBuildError(f"duplicate variable name {name!r}")
        self._name_to_col[name] = col
        self._col_names.append(name)
        self._col_lb.append(float(lb))
        self._col_ub.append(float(ub))
        self._structure_version += 1
        return LinExpr({col: 1.0})

    def var_array(self, name, shape, lb=-INF, ub=INF):
        """Array of fresh variables named ``name[i]`` / ``name[i,j]``."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        out = np.empty(shape, dtype=object)
        for idx in np.ndindex(shape):
            tag = ",".join(str(k) for k in idx)
            out[idx] = self.var(f"{name}[{tag}]", lb=lb, ub=ub)
        return out

    # -- constraints ---------------------------------------------------------

    def _add_row(self, lhs, rhs, sense, name):
        rhs_expr = as_expr(rhs)
        expr = as_expr(lhs) - rhs_expr
        if name is None:
            name = f"r{len(self._rows)}"
        if name in self._name_to_row:
            raise LpBuildError(f"duplicate row name {name!r}")
        bound = -expr.const
        lo = bound if sense in ("=", ">") else -INF
        hi = bound if sense in ("=", "<") else INF
        items = [(c, v) for c, v in expr.terms.items() if v != 0.0]
        items.sort()
        cols = np.fromiter((c for c, _ in items), dtype=np.int32, count=len(items))
        coefs = np.fromiter((v for _, v in items), dtype=np.float64, count=len(items))
        row = _Row(name, sense, lo, hi, bound, rhs_expr.const, cols, coefs)
        self._name_to_row[name] = len(self._rows)
        self._rows.append(row)
        self._structure_version += 1
        return name

    def add_eq(self, lhs, rhs=0.0, name=None):
        return self._add_row(lhs, rhs, "=", name)

    def add_le(self, lhs, rhs=0.0, name=None):
        return self._add_row(lhs, rhs, "<", name)

    def add_ge(self, lhs, rhs=0.0, name=None):
        return self._add_row(lhs, rhs, ">", name)

    def minimize(self, expr):
        expr = as_expr(expr)
        self._obj = {c: v for c, v in expr.terms.items() if v != 0.0}
        self._obj_const = expr.const
        self._structure_version += 1

    def set_rhs(self, name, value):
        """Update the right-hand side of a named row in place.

        On the highs backend this re-uses the live solver model, so the next
        ``solve()`` is a warm re-solve.  ``value`` has the same meaning as the
        ``rhs`` argument the row was created with.
        """
        idx = self._name_to_row.get(name)
        if idx is None:
            raise LpBuildError(f"no row named {name!r}")
        row = self._rows[idx]
        bound = row.bound0 + (float(value) - row.rhs0)
        row.lo = bound if row.sense in ("=", ">") else -INF
        row.hi = bound if row.sense in ("=", "<") else INF
        self._pending_row_bounds[idx] = (row.lo, row.hi)

    def row_names(self):
        return [r.name for r in self._rows]

    # -- solving -------------------------------------------------------------

    def solve(self, time_limit=None):
        if self.num_vars == 0:
            return self._solve_trivial()
        if self.backend == "highs":
            return self._solve_highs(time_limit)
        return self._solve_linprog(time_limit)

    def _solve_trivial(self):
        # No variables: every row is a constant; check feasibility directly.
        for row in self._rows:
            if not (row.lo - 1e-12 <= 0.0 <= row.hi + 1e-12):
                return LpSolution(self, INFEASIBLE, None, np.zeros(0), None, None, 0.0)
        return LpSolution(self, OPTIMAL, self._obj_const, np.zeros(0),
                          np.zeros(self.num_rows), np.zeros(0), 0.0)

    def _assemble(self):
        ncol = self.num_vars
        nrow = self.num_rows
        counts = np.zeros(ncol + 1, dtype=np.int64)
        for row in self._rows:
            np.add.at(counts, row.cols + 1, 1)
        start = np.cumsum(counts)
        total = int(start[-1])
        index = np.zeros(total, dtype=np.int32)
        value = np.zeros(total, dtype=np.float64)
        cursor = start[:-1].copy()
        for r, row in enumerate(self._rows):
            pos = cursor[row.cols]
            index[pos] = r
            value[pos] = row.coefs
            cursor[row.cols] += 1
        cost = np.zeros(ncol)
        for c, v in self._obj.items():
            cost[c] = v
        lb = np.asarray(self._col_lb, dtype=float)
        ub = np.asarray(self._col_ub, dtype=float)
        rlo = np.fromiter((r.lo for r in self._rows), dtype=float, count=nrow)
        rhi = np.fromiter((r.hi for r in self._rows), dtype=float, count=nrow)
        return start, index, value, cost, lb, ub, rlo, rhi

    def _new_highs(self):
        solver = _hcore._Highs()
        solver.setOptionValue("output_flag", False)
        solver.setOptionValue("threads", 1)
        solver.setOptionValue("random_seed", 0)
        return solver

    def _build_highs(self):
        start, index, value, cost, lb, ub, rlo, rhi = self._assemble()
        inf = _hcore.kHighsInf
        model = _hcore.HighsLp()
        model.num_col_ = self.num_vars
        model.num_row_ = self.num_rows
        model.col_cost_ = cost
        model.offset_ = 0.0
        model.col_lower_ = np.where(np.isneginf(lb), -inf, lb)
        model.col_upper_ = np.where(np.isposinf(ub), inf, ub)
        model.row_lower_ = np.where(np.isneginf(rlo), -inf, rlo)
        model.row_upper_ = np.where(np.isposinf(rhi), inf, rhi)
        model.a_matrix_.format_ = _hcore.MatrixFormat.kColwise
        model.a_matrix_.start_ = start
        model.a_matrix_.index_ = index
        model.a_matrix_.value_ = value
        solver = self._new_highs()
        solver.passModel(model)
        self._solver = solver
        self._built_version = self._structure_version
        self._pending_row_bounds.clear()

    def _solve_highs(self, time_limit):
        if self._solver is None or self._built_version != self._structure_version:
            self._build_highs()
        elif self._pending_row_bounds:
            for idx, (lo, hi) in self._pending_row_bounds.items():
                inf = _hcore.kHighsInf
                self._solver.changeRowBounds(
                    idx, -inf if lo == -INF else lo, inf if hi == INF else hi)
            self._pending_row_bounds.clear()
        solver = self._solver
        solver.setOptionValue("time_limit", float(time_limit) if time_limit else INF)
        t0 = solver.getRunTime()
        solver.run()
        seconds = solver.getRunTime() - t0
        _notify_trackers(seconds)
        status = solver.getModelStatus()
        S = _hcore.HighsModelStatus
        if status == S.kUnboundedOrInfeasible:
            status = self._disambiguate_highs()
        if status == S.kOptimal:
            sol = solver.getSolution()
            x = np.asarray(sol.col_value, dtype=float)
            row_sens = np.asarray(sol.row_dual, dtype=float)
            col_sens = np.asarray(sol.col_dual, dtype=float)
            cost = np.zeros(self.num_vars)
            for c, v in self._obj.items():
                cost[c] = v
            obj = float(cost @ x) + self._obj_const
            return LpSolution(self, OPTIMAL, obj, x, row_sens, col_sens, seconds)
        if status == S.kInfeasible:
            return LpSolution(self, INFEASIBLE, None, None, None, None, seconds)
        if status == S.kUnbounded:
            return LpSolution(self, UNBOUNDED, None, None, None, None, seconds)
        if status in (S.kTimeLimit, S.kIterationLimit):
            return LpSolution(self, TIME_LIMIT, None, None, None, None, seconds)
        raise LpSolverError(f"solver failed on {self.name!r}: {status}")

    def _disambiguate_highs(self):
        # Presolve sometimes cannot tell infeasible from unbounded; retry
        # without it on a throwaway instance.
        start, index, value, cost, lb, ub, rlo, rhi = self._assemble()
        inf = _hcore.kHighsInf
        model = _hcore.HighsLp()
        model.num_col_ = self.num_vars
        model.num_row_ = self.num_rows
        model.col_cost_ = cost
        model.offset_ = 0.0
        model.col_lower_ = np.where(np.isneginf(lb), -inf, lb)
        model.col_upper_ = np.where(np.isposinf(ub), inf, ub)
        model.row_lower_ = np.where(np.isneginf(rlo), -inf, rlo)
        model.row_upper_ = np.where(np.isposinf(rhi), inf, rhi)
        model.a_matrix_.format_ = _hcore.MatrixFormat.kColwise
        model.a_matrix_.start_ = start
        model.a_matrix_.index_ = index
        model.a_matrix_.value_ = value
        solver = self._new_highs()
        solver.setOptionValue("presolve", "off")
        solver.passModel(model)
        solver.run()
        return solver.getModelStatus()

    def _solve_linprog(self, time_limit):
        from scipy.optimize import linprog
        from scipy.sparse import csr_matrix

        ncol = self.num_vars
        eq_rows, eq_rhs, eq_src = [], [], []
        ub_rows, ub_rhs, ub_src = [], [], []  # src: (row index, sign)
        for r, row in enumerate(self._rows):
            if row.sense == "=":
                eq_rows.append(r)
                eq_rhs.append(row.lo)
                eq_src.append(r)
            elif row.sense == "<":
                ub_rows.append((r, 1.0))
                ub_rhs.append(row.hi)
                ub_src.append((r, 1.0))
            else:
                ub_rows.append((r, -1.0))
                ub_rhs.append(-row.lo)
                ub_src.append((r, -1.0))

        def sparse_from(rows):
            data, ri, ci = [], [], []
            for k, item in enumerate(rows):
                if isinstance(item, tuple):
                    r, sign = item
                else:
                    r, sign = item, 1.0
                row = self._rows[r]
                ri.extend([k] * len(row.cols))
                ci.extend(row.cols.tolist())
                data.extend((sign * row.coefs).tolist())
            return csr_matrix((data, (ri, ci)), shape=(len(rows), ncol))

        cost = np.zeros(ncol)
        for c, v in self._obj.items():
            cost[c] = v
        bounds = list(zip(self._col_lb, self._col_ub))
        bounds = [(None if np.isneginf(lo) else lo, None if np.isposinf(hi) else hi)
                  for lo, hi in bounds]
        options = {"presolve": True}
        if time_limit:
            options["time_limit"] = float(time_limit)
        t0 = time.perf_counter()
        res = linprog(
            cost,
            A_ub=sparse_from(ub_rows) if ub_rows else None,
            b_ub=np.asarray(ub_rhs) if ub_rows else None,
            A_eq=sparse_from(eq_rows) if eq_rows else None,
            b_eq=np.asarray(eq_rhs) if eq_rows else None,
            bounds=bounds,
            method="highs",
            options=options,
        )
        seconds = time.perf_counter() - t0
        _notify_trackers(seconds)
        if res.status == 0:
            row_sens = np.zeros(self.num_rows)
            if eq_src:
                for k, r in enumerate(eq_src):
                    row_sens[r] = res.eqlin.marginals[k]
            if ub_src:
                for k, (r, sign) in enumerate(ub_src):
                    row_sens[r] += sign * res.ineqlin.marginals[k]
            col_sens = np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals)
            obj = float(res.fun) + self._obj_const
            return LpSolution(self, OPTIMAL, obj, np.asarray(res.x), row_sens,
                              col_sens, seconds)
        if res.status == 2:
            return LpSolution(self, INFEASIBLE, None, None, None, None, seconds)
        if res.status == 3:
            return LpSolution(self, UNBOUNDED, None, None, None, None, seconds)
        if res.status == 1:
            return LpSolution(self, TIME_LIMIT, None, None, None, None, seconds)
        raise LpSolverError(f"solver failed on {self.name!r}: {res.message}")

    # -- text dump -----------------------------------------------------------

    def to_lp_text(self):
        """Deterministic CPLEX-LP-style dump, for debugging and golden tests."""
        out = [f"\\ {self.name}", "Minimize"]
        terms = " ".join(
            f"{v:+.12g} {self._col_names[c]}" for c, v in sorted(self._obj.items()))
        out.append(f" obj: {terms if terms else '0'}")
        if self._obj_const:
            out.append(f"\\ objective constant {self._obj_const:+.12g}")
        out.append("Subject To")
        for row in self._rows:
            lhs = " ".join(
                f"{v:+.12g} {self._col_names[c]}" for c, v in zip(row.cols, row.coefs))
            lhs = lhs or "0"
            if row.sense == "=":
                out.append(f" {row.name}: {lhs} = {row.lo:.12g}")
            elif row.sense == "<":
                out.append(f" {row.name}: {lhs} <= {row.hi:.12g}")
            else:
                out.append(f" {row.name}: {lhs} >= {row.lo:.12g}")
        out.append("Bounds")
        for c, name in enumerate(self._col_names):
            lo, hi = self._col_lb[c], self._col_ub[c]
            if lo == -INF and hi == INF:
                out.append(f" {name} free")
            elif lo == -INF:
                out.append(f" -inf <= {name} <= {hi:.12g}")
            elif hi == INF:
                out.append(f" {name} >= {lo:.12g}")
            else:
                out.append(f" {lo:.12g} <= {name} <= {hi:.12g}")
        out.append("End")
        return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# solutions


@dataclass
class LpSolution:
    lp: LinearProgram
    status: str
    objective: float | None
    _x: np.ndarray | None = field(repr=False)
    _row_sens: np.ndarray | None = field(repr=False)
    _col_sens: np.ndarray | None = field(repr=False)
    solve_seconds: float = 0.0

    def __init__(self, lp, status, objective, x, row_sens, col_sens, solve_seconds):
        self.lp = lp
        self.status = status
        self.objective = objective
        self._x = x
        self._row_sens = row_sens
        self._col_sens = col_sens
        self.solve_seconds = solve_seconds

    @property
    def is_optimal(self):
        return self.status == OPTIMAL

    def _require_solution(self):
        if self._x is None:
            raise LpError(f"no solution available (status={self.status})")

    def value(self, expr):
        """Evaluate a LinExpr, a number, or an (object) array of them."""
        self._require_solution()
        if isinstance(expr, LinExpr):
            total = expr.const
            for c, v in expr.terms.items():
                total += v * self._x[c]
            return float(total)
        if isinstance(expr, np.ndarray) and expr.dtype == object:
            out = np.empty(expr.shape, dtype=float)
            for idx in np.ndindex(expr.shape):
                out[idx] = self.value(expr[idx])
            return out
        if isinstance(expr, (list, tuple)):
            return np.array([self.value(e) for e in expr])
        return float(expr)

    def sensitivity(self, name):
        """d(objective)/d(rhs) of the named row."""
        self._require_solution()
        idx = self.lp._name_to_row.get(name)
        if idx is None:
            raise LpBuildError(f"no row named {name!r}")
        return float(self._row_sens[idx])

    def dual(self, name):
        """Dual with >=0 convention for <= rows in a minimization."""
        idx = self.lp._name_to_row.get(name)
        if idx is None:
            raise LpBuildError(f"no row named {name!r}")
        sens = self.sensitivity(name)
        return -sens if self.lp._rows[idx].sense == "<" else sens

    # -- diagnostics ---------------------------------------------------------

    def kkt_residuals(self):
        """Max primal/dual-feasibility and stationarity residuals.

        Useful as a cheap independent check that the reported solution and
        duals are mutually consistent.
        """
        self._require_solution()
        lp = self.lp
        x = self._x
        primal = 0.0
        dual_sign = 0.0
        for r, row in enumerate(lp._rows):
            ax = float(row.coefs @ x[row.cols]) if len(row.cols) else 0.0
            if row.lo != -INF:
                primal = max(primal, row.lo - ax)
            if row.hi != INF:
                primal = max(primal, ax - row.hi)
            y = self._row_sens[r]
            # sensitivity signs: <= rows need y <= 0, >= rows y >= 0
            if row.sense == "<":
                dual_sign = max(dual_sign, y)
            elif row.sense == ">":
                dual_sign = max(dual_sign, -y)
        lb = np.asarray(lp._col_lb)
        ub = np.asarray(lp._col_ub)
        primal = max(primal, float(np.max(np.maximum(lb - x, 0.0), initial=0.0)))
        primal = max(primal, float(np.max(np.maximum(x - ub, 0.0), initial=0.0)))
        cost = np.zeros(lp.num_vars)
        for c, v in lp._obj.items():
            cost[c] = v
        aty = np.zeros(lp.num_vars)
        for r, row in enumerate(lp._rows):
            if len(row.cols):
                aty[row.cols] += self._row_sens[r] * row.coefs
        stationarity = float(np.max(np.abs(cost - aty - self._col_sens), initial=0.0))
        return {"primal": primal, "dual_sign": dual_sign, "stationarity": stationarity}

    def duality_gap(self):
        """|primal objective - dual objective| (strong-duality spot check)."""
        self._require_solution()
        lp = self.lp
        dual_val = 0.0
        for r, row in enumerate(lp._rows):
            y = self._row_sens[r]
            if y == 0.0:
                continue
            rhs = row.hi if row.sense == "<" else row.lo
            dual_val += y * rhs
        for c in range(lp.num_vars):
            z = self._col_sens[c]
            if z > 0 and lp._col_lb[c] != -INF:
                dual_val += z * lp._col_lb[c]
            elif z < 0 and lp._col_ub[c] != INF:
                dual_val += z * lp._col_ub[c]
        return abs((self.objective - lp._obj_const) - dual_val)
