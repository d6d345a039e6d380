"""Sparse LP container, a dense two-phase simplex (Bland's rule), and CPLEX-LP export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RELATIONS = ("<=", ">=", "=")

# Dense tableau entries allowed before the simplex refuses (about 40 MB).
DENSE_BUDGET = 5_000_000


class LpBudgetError(RuntimeError):
    """Model too large for the dense simplex."""


class LpNumericalError(RuntimeError):
    pass


@dataclass
class Row:
    coeffs: dict[int, float]
    rel: str
    rhs: float
    name: str


@dataclass
class LpModel:
    """Linear program ``min/max c.x`` over named variables and sparse rows.

    Variables are nonnegative unless declared free.
    """

    sense: str = "min"
    names: list[str] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    nonneg: list[bool] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def nnz(self) -> int:
        return sum(len(r.coeffs) for r in self.rows)

    def add_var(self, name: str, obj: float = 0.0, nonneg: bool = True) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name!r}")
        j = len(self.names)
        self.names.append(name)
        self.nonneg.append(nonneg)
        self.index[name] = j
        if obj:
            self.objective[j] = float(obj)
        return j

    def var(self, name: str) -> int:
        return self.index[name]

    def add_row(self, coeffs, rel: str, rhs: float, name: str | None = None) -> int:
        """Add ``sum coeffs[j] * x_j  rel  rhs``; keys may be indices or names."""
        if rel not in RELATIONS:
            raise ValueError(f"unknown relation {rel!r}")
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        merged: dict[int, float] = {}
        for key, val in items:
            j = self.index[key] if isinstance(key, str) else int(key)
            if not 0 <= j < len(self.names):
                raise KeyError(f"row references undeclared variable {key!r}")
            merged[j] = merged.get(j, 0.0) + float(val)
        merged = {j: v for j, v in merged.items() if v != 0.0}
        i = len(self.rows)
        self.rows.append(Row(merged, rel, float(rhs), name or f"c{i}"))
        return i

    def evaluate(self, x) -> float:
        return sum(c * x[j] for j, c in self.objective.items())

    def max_violation(self, x) -> float:
        """Largest constraint or sign violation of the point ``x``."""
        worst = 0.0
        for r in self.rows:
            lhs = sum(c * x[j] for j, c in r.coeffs.items())
            if r.rel == "<=":
                worst = max(worst, lhs - r.rhs)
            elif r.rel == ">=":
                worst = max(worst, r.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - r.rhs))
        for j, nn in enumerate(self.nonneg):
            if nn:
                worst = max(worst, -x[j])
        return worst


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded
    value: float | None = None
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    method: str = ""
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def named(self, model: LpModel) -> dict[str, float]:
        return dict(zip(model.names, self.x.tolist()))


def solve_lp(model: LpModel, method: str = "auto", tol: float = 1e-9) -> LpResult:
    """Solve ``model``.

    ``method`` is ``"simplex"`` (dense two-phase simplex with Bland's rule),
    ``"highs"`` (scipy's HiGHS), or ``"auto"``, which uses the dense simplex
    whenever its tableau fits in :data:`DENSE_BUDGET` and HiGHS otherwise.
    Row duals follow the convention that ``>=`` rows of a minimization get
    nonnegative multipliers.
    """
    if method == "auto":
        method = "simplex" if _tableau_size(model) <= DENSE_BUDGET else "highs"
    if method == "simplex":
        return _solve_dense(model, tol)
    if method == "highs":
        return _solve_highs(model)
    raise ValueError(f"unknown LP method {method!r}")


def _tableau_size(model: LpModel) -> int:
    free = sum(1 for nn in model.nonneg if not nn)
    m = model.num_rows
    cols = model.num_vars + free + 2 * m + 1
    return (m + 1) * cols


# -- dense simplex ----------------------------------------------------------

def _solve_dense(model: LpModel, tol: float) -> LpResult:
    if _tableau_size(model) > DENSE_BUDGET:
        raise LpBudgetError(
            f"dense tableau would need {_tableau_size(model)} entries (budget {DENSE_BUDGET})")
    nv, m = model.num_vars, model.num_rows
    sign = 1.0 if model.sense == "min" else -1.0

    # standard form columns: x_j (or x_j^+), then x_j^- for free vars, then slacks
    free = [j for j in range(nv) if not model.nonneg[j]]
    neg_col = {j: nv + k for k, j in enumerate(free)}
    n_struct = nv + len(free)
    slack_rows = [i for i, r in enumerate(model.rows) if r.rel != "="]
    slack_col = {i: n_struct + k for k, i in enumerate(slack_rows)}
    n_cols = n_struct + len(slack_rows)

    A = np.zeros((m, n_cols))
    b = np.zeros(m)
    for i, r in enumerate(model.rows):
        for j, c in r.coeffs.items():
            A[i, j] = c
            if j in neg_col:
                A[i, neg_col[j]] = -c
        if r.rel == "<=":
            A[i, slack_col[i]] = 1.0
        elif r.rel == ">=":
            A[i, slack_col[i]] = -1.0
        b[i] = r.rhs
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    cost = np.zeros(n_cols)
    for j, c in model.objective.items():
        cost[j] = sign * c
        if j in neg_col:
            cost[neg_col[j]] = -sign * c

    # phase 1: one artificial per row
    T = np.zeros((m + 1, n_cols + m + 1))
    T[:m, :n_cols] = A
    T[:m, n_cols:n_cols + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n_cols, n_cols + m))
    T[m, :] = -T[:m, :].sum(axis=0)
    T[m, n_cols:n_cols + m] = 0.0
    iters = _bland(T, basis, n_cols + m, tol)
    if T[m, -1] < -1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return LpResult("infeasible", method="simplex", iterations=iters)

    # drive artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n_cols:
            cand = np.nonzero(np.abs(T[r, :n_cols]) > tol)[0]
            if len(cand):
                _pivot(T, basis, r, int(cand[0]))
                keep.append(r)
        else:
            keep.append(r)
    rows = keep + [m]
    T = np.ascontiguousarray(np.delete(T[rows], np.s_[n_cols:n_cols + m], axis=1))
    basis = [basis[r] for r in keep]
    mm = len(keep)

    # phase 2
    T[mm, :] = 0.0
    T[mm, :n_cols] = cost
    for r, j in enumerate(basis):
        if T[mm, j] != 0.0:
            T[mm, :] -= T[mm, j] * T[r, :]
    more = _bland(T, basis, n_cols, tol)
    iters += more
    if more < 0:
        return LpResult("unbounded", method="simplex", iterations=iters - more)

    xs = np.zeros(n_cols)
    for r, j in enumerate(basis):
        xs[j] = T[r, -1]
    x = xs[:nv].copy()
    for j, c in neg_col.items():
        x[j] -= xs[c]
    value = model.evaluate(x)

    duals = np.zeros(m)
    if mm:
        B = A[keep][:, basis]
        try:
            y_std = np.linalg.solve(B.T, cost[basis])
        except np.linalg.LinAlgError:
            y_std = np.linalg.lstsq(B.T, cost[basis], rcond=None)[0]
        y = np.zeros(m)
        y[keep] = y_std
        y[flip] *= -1
        duals = sign * y
    return LpResult("optimal", value, x, duals, "simplex", iters)


def _pivot(T: np.ndarray, basis: list[int], r: int, c: int) -> None:
    T[r, :] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if len(nz):
        T[nz, :] -= np.outer(col[nz], T[r, :])
    basis[r] = c


def _bland(T: np.ndarray, basis: list[int], n_cols: int, tol: float,
           max_iter: int = 1_000_000) -> int:
    """Run simplex pivots with Bland's rule; returns pivots made, negated if unbounded."""
    m = T.shape[0] - 1
    it = 0
    while it < max_iter:
        rc = T[m, :n_cols]
        enter = np.nonzero(rc < -tol)[0]
        if not len(enter):
            return it
        c = int(enter[0])
        col = T[:m, c]
        pos = np.nonzero(col > tol)[0]
        if not len(pos):
            return -it - 1
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, basis, r, c)
        it += 1
    raise LpNumericalError("simplex iteration limit reached")


# -- HiGHS backend ------------------------------------------------------------

def to_scipy(model: LpModel):
    """Sparse matrices for ``scipy.optimize.linprog`` (always a minimization)."""
    from scipy.sparse import csr_matrix

    nv = model.num_vars
    sign = 1.0 if model.sense == "min" else -1.0
    c = np.zeros(nv)
    for j, v in model.objective.items():
        c[j] = sign * v
    ub_r, ub_c, ub_v, b_ub, ub_rows = [], [], [], [], []
    eq_r, eq_c, eq_v, b_eq, eq_rows = [], [], [], [], []
    for i, r in enumerate(model.rows):
        if r.rel == "=":
            k = len(b_eq)
            for j, v in r.coeffs.items():
                eq_r.append(k), eq_c.append(j), eq_v.append(v)
            b_eq.append(r.rhs)
            eq_rows.append(i)
        else:
            s = 1.0 if r.rel == "<=" else -1.0
            k = len(b_ub)
            for j, v in r.coeffs.items():
                ub_r.append(k), ub_c.append(j), ub_v.append(s * v)
            b_ub.append(s * r.rhs)
            ub_rows.append(i)
    A_ub = csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), nv)) if b_ub else None
    A_eq = csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), nv)) if b_eq else None
    bounds = [(0, None) if nn else (None, None) for nn in model.nonneg]
    return c, A_ub, np.array(b_ub), A_eq, np.array(b_eq), bounds, ub_rows, eq_rows


def _solve_highs(model: LpModel) -> LpResult:
    from scipy.optimize import linprog

    c, A_ub, b_ub, A_eq, b_eq, bounds, ub_rows, eq_rows = to_scipy(model)
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub if A_ub is not None else None,
        A_eq=A_eq, b_eq=b_eq if A_eq is not None else None,
        bounds=bounds, method="highs",
        options={"primal_feasibility_tolerance": 1e-10,
                 "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2:
        return LpResult("infeasible", method="highs")
    if res.status == 3:
        return LpResult("unbounded", method="highs")
    if res.status != 0:
        raise LpNumericalError(f"HiGHS failed: {res.message}")
    sign = 1.0 if model.sense == "min" else -1.0
    duals = np.zeros(model.num_rows)
    if ub_rows:
        for k, i in enumerate(ub_rows):
            s = 1.0 if model.rows[i].rel == "<=" else -1.0
            duals[i] = sign * s * res.ineqlin.marginals[k]
        # marginals are d(obj)/d(b_ub); ">=" rows were negated on the way in
    if eq_rows:
        for k, i in enumerate(eq_rows):
            duals[i] = sign * res.eqlin.marginals[k]
    x = np.asarray(res.x, dtype=float)
    return LpResult("optimal", model.evaluate(x), x, duals, "highs", int(res.nit))


# -- CPLEX LP format ----------------------------------------------------------

def _fmt(v: float) -> str:
    s = repr(float(v))
    return s if s[0] == "-" else "+" + s


def _terms(coeffs: dict[int, float], names: list[str], per_line: int = 8) -> list[str]:
    items = sorted(coeffs.items())
    if not items:
        return ["0 " + names[0]] if names else ["0"]
    chunks = []
    for k in range(0, len(items), per_line):
        chunks.append(" ".join(f"{_fmt(v)} {names[j]}" for j, v in items[k:k + per_line]))
    return chunks


def format_lp(model: LpModel, title: str = "aptsp model") -> str:
    """Render ``model`` in CPLEX LP format; output is deterministic."""
    out = [f"\\ {title}", "Maximize" if model.sense == "max" else "Minimize"]
    obj = _terms(model.objective, model.names)
    out.append(" obj: " + obj[0])
    out.extend("   " + chunk for chunk in obj[1:])
    out.append("Subject To")
    for r in model.rows:
        chunks = _terms(r.coeffs, model.names)
        rel = "=" if r.rel == "=" else r.rel
        if len(chunks) == 1:
            out.append(f" {r.name}: {chunks[0]} {rel} {float(r.rhs)!r}")
        else:
            out.append(f" {r.name}: {chunks[0]}")
            out.extend("   " + chunk for chunk in chunks[1:-1])
            out.append(f"   {chunks[-1]} {rel} {float(r.rhs)!r}")
    free = [model.names[j] for j, nn in enumerate(model.nonneg) if not nn]
    if free:
        out.append("Bounds")
        out.extend(f" {name} free" for name in free)
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: LpModel, path, title: str = "aptsp model") -> Path:
    path = Path(path)
    path.write_text(format_lp(model, title))
    return path


def is_finite(x: float | None) -> bool:
    return x is not None and math.isfinite(x)
