"""Dense bounded-variable linear-program solver.

Solves  maximize c.x  subject to  A x (<=|>=) b  and  l <= x <= u  with a
two-phase tableau simplex using Bland's anti-cycling rule.  Bounds are
handled by variable substitution (finite lower bounds shift to zero, free
variables split into positive parts, finite upper bounds become extra rows),
which keeps the kernel a plain standard-form simplex.  Problem sizes here
are tiny, so no sparsity or factorization tricks are attempted.

Callers compile absolute values and min-of-linear terms to auxiliary
variables themselves; the solver only sees a pure LP.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-9
_PHASE1_TOL = 1e-7
_MAX_ITER = 50_000


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpProblem:
    """maximize objective.x s.t. a_ub x (sense) b_ub, lower <= x <= upper."""

    objective: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    senses: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        self.a_ub = np.atleast_2d(np.asarray(self.a_ub, dtype=float))
        self.b_ub = np.asarray(self.b_ub, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = self.objective.size
        m = self.b_ub.size
        if self.a_ub.size == 0:
            self.a_ub = self.a_ub.reshape(0, n)
        if self.a_ub.shape != (m, n):
            raise ValueError(
                f"constraint matrix shape {self.a_ub.shape} does not match "
                f"{m} rhs values and {n} objective coefficients"
            )
        if len(self.senses) != m:
            raise ValueError("one sense per constraint row required")
        if any(s not in ("<=", ">=") for s in self.senses):
            raise ValueError("senses must be '<=' or '>='")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bounds must not exceed upper bounds")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.b_ub.size


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective_value: float | None
    duals: np.ndarray | None
    iterations: int


def box_problem(objective, a_ub, b_ub, lower, upper, senses=None) -> LpProblem:
    """Convenience constructor with all-'<=' default senses."""
    objective = np.asarray(objective, dtype=float)
    b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
    if senses is None:
        senses = ("<=",) * b_ub.size
    return LpProblem(objective, a_ub, b_ub, tuple(senses), np.asarray(lower), np.asarray(upper))


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0
    basis[row] = col


def _run_simplex(
    tableau: np.ndarray, basis: np.ndarray, allowed: np.ndarray, iterations: int
) -> tuple[str, int]:
    """Pivot to optimality.  Objective row is last; entering columns must be
    from ``allowed``.  Returns ('optimal'|'unbounded', iterations)."""
    m = tableau.shape[0] - 1
    obj = tableau[-1]
    while True:
        candidates = np.where((obj[:-1] > _PIVOT_TOL) & allowed)[0]
        if candidates.size == 0:
            return "optimal", iterations
        col = int(candidates[0])  # Bland: smallest eligible index
        column = tableau[:m, col]
        rows = np.where(column > _PIVOT_TOL)[0]
        if rows.size == 0:
            return "unbounded", iterations
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12]
        row = int(tied[np.argmin(basis[tied])])  # Bland: smallest basic index
        _pivot(tableau, basis, row, col)
        iterations += 1
        if iterations > _MAX_ITER:
            raise RuntimeError("simplex iteration limit exceeded")


def solve(problem: LpProblem) -> LpSolution:
    """Solve the LP; optimal solutions satisfy all constraints within 1e-9
    (absolute, after row scaling) and duals are reported as dObj/d(rhs)."""
    n = problem.n_vars
    m_user = problem.n_rows

    # Normalize senses to <=.
    sigma = np.array([1.0 if s == "<=" else -1.0 for s in problem.senses])
    a = problem.a_ub * sigma[:, None]
    b = problem.b_ub * sigma

    # Substitute variables so every simplex variable is >= 0.
    cols = []  # per simplex column: (original var, sign)
    shift = np.zeros(n)
    bound_rows = []  # (simplex column index, rhs) for finite ranges
    for j in range(n):
        lo, hi = problem.lower[j], problem.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    n_sub = len(cols)

    a_sub = np.zeros((m_user + len(bound_rows), n_sub))
    for k, (j, sign) in enumerate(cols):
        a_sub[:m_user, k] = sign * a[:, j]
    rhs = np.concatenate([b - a @ shift, [r for _, r in bound_rows]])
    for i, (k, _) in enumerate(bound_rows):
        a_sub[m_user + i, k] = 1.0

    # Row scaling.
    m = a_sub.shape[0]
    kappa = np.ones(m)
    for i in range(m):
        peak = np.abs(a_sub[i]).max()
        if peak > 0:
            kappa[i] = 1.0 / peak
    a_sub *= kappa[:, None]
    rhs = rhs * kappa

    # Equality form with slacks; flip rows with negative rhs and add artificials.
    flip = np.where(rhs < 0, -1.0, 1.0)
    a_eq = a_sub * flip[:, None]
    rhs_eq = rhs * flip
    art_rows = np.where(flip < 0)[0]
    n_art = art_rows.size
    full = np.zeros((m, n_sub + m + n_art))
    full[:, :n_sub] = a_eq
    full[np.arange(m), n_sub + np.arange(m)] = flip
    for k, i in enumerate(art_rows):
        full[i, n_sub + m + k] = 1.0

    tableau = np.zeros((m + 1, full.shape[1] + 1))
    tableau[:m, :-1] = full
    tableau[:m, -1] = rhs_eq
    basis = np.empty(m, dtype=int)
    basis[:] = n_sub + np.arange(m)
    for k, i in enumerate(art_rows):
        basis[i] = n_sub + m + k

    iterations = 0
    if n_art:
        # Phase 1: maximize -sum(artificials).
        tableau[-1, :] = 0.0
        tableau[-1, n_sub + m :] = -1.0
        tableau[-1, -1] = 0.0
        for i in art_rows:
            tableau[-1] += tableau[i]
        allowed = np.ones(full.shape[1], dtype=bool)
        outcome, iterations = _run_simplex(tableau, basis, allowed, iterations)
        # Objective cell stores -z; infeasible iff artificials stay positive.
        if outcome != "optimal" or tableau[-1, -1] > _PHASE1_TOL:
            return LpSolution(LpStatus.INFEASIBLE, None, None, None, iterations)
        # Drive remaining artificials out of the basis where possible.
        for i in range(m):
            if basis[i] >= n_sub + m:
                nonzero = np.where(np.abs(tableau[i, : n_sub + m]) > _PIVOT_TOL)[0]
                if nonzero.size:
                    _pivot(tableau, basis, i, int(nonzero[0]))

    # Phase 2 objective on the substituted variables.
    c_sub = np.array([problem.objective[j] * sign for j, sign in cols])
    tableau[-1, :] = 0.0
    tableau[-1, :n_sub] = c_sub
    for i in range(m):
        coef = tableau[-1, basis[i]]
        if coef != 0.0:
            tableau[-1] -= coef * tableau[i]
    allowed = np.ones(full.shape[1], dtype=bool)
    allowed[n_sub + m :] = False  # artificials may never re-enter
    outcome, iterations = _run_simplex(tableau, basis, allowed, iterations)
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, None, None, None, iterations)

    # Recompute basic values from the original equality data for accuracy.
    basis_matrix = full[:, basis]
    try:
        y_basic = np.linalg.solve(basis_matrix, rhs_eq)
    except np.linalg.LinAlgError:
        y_basic = tableau[:m, -1]
    y = np.zeros(full.shape[1])
    y[basis] = y_basic

    x = shift.copy()
    for k, (j, sign) in enumerate(cols):
        x[j] += sign * y[k]
    x = np.clip(x, problem.lower, problem.upper)

    # Feasibility certificate (scaled rows).
    residual = a_sub[:m_user] @ y[:n_sub] - rhs[:m_user] if m_user else np.zeros(0)
    if m_user and residual.size and residual.max(initial=0.0) > 1e-6:
        raise RuntimeError("simplex returned an infeasible point; numerical failure")

    # Duals for the user rows: dObj/d(b_r) in the row's original orientation.
    duals = None
    c_eq = np.zeros(full.shape[1])
    c_eq[:n_sub] = c_sub
    try:
        y_dual = np.linalg.solve(basis_matrix.T, c_eq[basis])
        duals = y_dual[:m_user] * flip[:m_user] * kappa[:m_user] * sigma
    except np.linalg.LinAlgError:
        pass

    objective_value = float(problem.objective @ x)
    return LpSolution(LpStatus.OPTIMAL, x, objective_value, duals, iterations)


def dump_problem(problem: LpProblem, path: str | Path) -> None:
    """Plain-text dump: objective, one constraint per line, then bounds."""
    lines = ["# lp dump v1", "maximize"]
    lines.append("  " + " ".join(repr(v) for v in problem.objective))
    lines.append("subject to")
    for i in range(problem.n_rows):
        row = " ".join(repr(v) for v in problem.a_ub[i])
        lines.append(f"  {row} {problem.senses[i]} {problem.b_ub[i]!r}")
    lines.append("bounds")
    for j in range(problem.n_vars):
        lines.append(f"  x{j}: {problem.lower[j]!r} {problem.upper[j]!r}")
    Path(path).write_text("\n".join(lines) + "\n")
