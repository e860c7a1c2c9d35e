"""Solver-agnostic linear program model and a deterministic solve contract.

All numerical optimization in the toolkit funnels through this module.
Problems are built as sparse rows over a flat variable vector, with named
index blocks so callers can recover matrix-shaped solutions.  Solving is
delegated to HiGHS through scipy; results are re-checked against the
feasibility tolerance before being reported as optimal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.optimize import linprog

DEFAULT_FEAS_TOL = 1e-7
DEFAULT_OPT_TOL = 1e-8


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


class LpError(RuntimeError):
    """Raised when a caller cannot proceed past a solver failure."""


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class LpProblem:
    """Minimization LP with bounds, sparse equality and <=-inequality rows.

    Variables are indexed 0..num_vars-1 and default to free.  `blocks`
    records a name -> index range layout map for matrix-shaped variable
    groups (filled in by builders such as the RCI encoder).
    """

    def __init__(self):
        self.num_vars = 0
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.eq_rows: list[dict[int, float]] = []
        self.eq_rhs: list[float] = []
        self.ineq_rows: list[dict[int, float]] = []
        self.ineq_rhs: list[float] = []
        self.objective: dict[int, float] = {}
        self.blocks: dict[str, range] = {}

    # -- construction -------------------------------------------------

    def add_var(self, lb: float = -math.inf, ub: float = math.inf) -> int:
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ValueError(f"invalid bounds [{lb}, {ub}]")
        self.lower.append(lb)
        self.upper.append(ub)
        self.num_vars += 1
        return self.num_vars - 1

    def add_block(self, name: str, count: int, lb: float = -math.inf,
                  ub: float = math.inf) -> range:
        if name in self.blocks:
            raise ValueError(f"duplicate block name {name!r}")
        start = self.num_vars
        for _ in range(count):
            self.add_var(lb, ub)
        block = range(start, self.num_vars)
        self.blocks[name] = block
        return block

    def _check_row(self, coeffs: dict[int, float]) -> dict[int, float]:
        row: dict[int, float] = {}
        for idx, coef in coeffs.items():
            if not (0 <= idx < self.num_vars):
                raise ValueError(f"variable index {idx} out of range")
            if math.isnan(coef):
                raise ValueError("NaN coefficient")
            if coef != 0.0:
                row[idx] = row.get(idx, 0.0) + coef
        return row

    def add_eq(self, coeffs: dict[int, float], rhs: float) -> None:
        if math.isnan(rhs):
            raise ValueError("NaN right-hand side")
        self.eq_rows.append(self._check_row(coeffs))
        self.eq_rhs.append(float(rhs))

    def add_ineq(self, coeffs: dict[int, float], rhs: float) -> None:
        """Adds the row  sum coeffs[i] * x_i <= rhs."""
        if math.isnan(rhs):
            raise ValueError("NaN right-hand side")
        self.ineq_rows.append(self._check_row(coeffs))
        self.ineq_rhs.append(float(rhs))

    def add_objective_term(self, idx: int, coef: float) -> None:
        if not (0 <= idx < self.num_vars):
            raise ValueError(f"variable index {idx} out of range")
        if math.isnan(coef):
            raise ValueError("NaN objective coefficient")
        new = self.objective.get(idx, 0.0) + coef
        if new == 0.0:
            self.objective.pop(idx, None)
        else:
            self.objective[idx] = new

    # -- comparison / export -------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, LpProblem):
            return NotImplemented
        return (
            self.num_vars == other.num_vars
            and self.lower == other.lower
            and self.upper == other.upper
            and self.eq_rows == other.eq_rows
            and self.eq_rhs == other.eq_rhs
            and self.ineq_rows == other.ineq_rows
            and self.ineq_rhs == other.ineq_rhs
            and self.objective == other.objective
            and self.blocks == other.blocks
        )

    def _sparse(self, rows: list[dict[int, float]]):
        data, ridx, cidx = [], [], []
        for r, row in enumerate(rows):
            for c, v in row.items():
                ridx.append(r)
                cidx.append(c)
                data.append(v)
        return scipy.sparse.csr_matrix(
            (data, (ridx, cidx)), shape=(len(rows), self.num_vars)
        )


def solve(problem: LpProblem, feas_tol: float = DEFAULT_FEAS_TOL,
          opt_tol: float = DEFAULT_OPT_TOL) -> LpSolution:
    """Solve the LP; never raises on solver trouble, reports a status instead."""
    if problem.num_vars == 0:
        # Degenerate but legal: feasibility is decided by the constant rows.
        ok = all(abs(r) <= feas_tol for r in problem.eq_rhs) and all(
            r >= -feas_tol for r in problem.ineq_rhs
        )
        if ok:
            return LpSolution(LpStatus.OPTIMAL, np.zeros(0), 0.0, "empty problem")
        return LpSolution(LpStatus.INFEASIBLE, message="empty problem, inconsistent rows")

    c = np.zeros(problem.num_vars)
    for idx, coef in problem.objective.items():
        c[idx] = coef
    bounds = list(zip(
        (lb if lb != -math.inf else None for lb in problem.lower),
        (ub if ub != math.inf else None for ub in problem.upper),
    ))
    a_eq = problem._sparse(problem.eq_rows) if problem.eq_rows else None
    a_ub = problem._sparse(problem.ineq_rows) if problem.ineq_rows else None
    try:
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=np.asarray(problem.ineq_rhs) if a_ub is not None else None,
            A_eq=a_eq,
            b_eq=np.asarray(problem.eq_rhs) if a_eq is not None else None,
            bounds=bounds,
            method="highs",
            options={
                "presolve": True,
                "primal_feasibility_tolerance": max(feas_tol, 1e-10),
                "dual_feasibility_tolerance": max(opt_tol, 1e-10),
            },
        )
    except Exception as exc:  # malformed input past validation, solver crash
        return LpSolution(LpStatus.NUMERICAL_FAILURE, message=f"solver raised: {exc}")

    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, message=res.message)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, message=res.message)
    if res.status != 0 or res.x is None:
        return LpSolution(LpStatus.NUMERICAL_FAILURE, message=res.message)

    x = np.asarray(res.x, dtype=float)
    worst = 0.0
    if a_eq is not None:
        resid = a_eq @ x - np.asarray(problem.eq_rhs)
        if resid.size:
            worst = max(worst, float(np.max(np.abs(resid))))
    if a_ub is not None:
        viol = a_ub @ x - np.asarray(problem.ineq_rhs)
        if viol.size:
            worst = max(worst, float(np.max(viol)))
    lower = np.array([lb if lb != -math.inf else -np.inf for lb in problem.lower])
    upper = np.array([ub if ub != math.inf else np.inf for ub in problem.upper])
    worst = max(worst, float(np.max(np.maximum(lower - x, 0.0), initial=0.0)))
    worst = max(worst, float(np.max(np.maximum(x - upper, 0.0), initial=0.0)))
    if worst > 10 * feas_tol:
        return LpSolution(
            LpStatus.NUMERICAL_FAILURE,
            message=f"reported optimum violates feasibility by {worst:.3e}",
        )
    return LpSolution(LpStatus.OPTIMAL, x, float(c @ x), res.message)


def add_l1_objective(problem: LpProblem, block: range) -> LpProblem:
    """Append |block| slack variables so the objective includes the 1-norm
    of the block, via  -s <= x <= s, s >= 0, min sum(s).  Returns `problem`.
    """
    if len(block) and (block.start < 0 or block.stop > problem.num_vars):
        raise ValueError("block outside the variable range")
    slacks = problem.add_block(f"l1_{block.start}_{block.stop}", len(block), lb=0.0)
    for idx, s in zip(block, slacks):
        problem.add_ineq({idx: 1.0, s: -1.0}, 0.0)
        problem.add_ineq({idx: -1.0, s: -1.0}, 0.0)
        problem.add_objective_term(s, 1.0)
    return problem


def add_lexicographic_regularizer(problem: LpProblem, block: range,
                                  weight: float = 1e-9) -> LpProblem:
    """Opt-in tie-breaker: adds geometrically decaying penalties on |x_i| so
    alternative optima resolve reproducibly.  Weights floor at ~weight*2^-60.
    """
    slacks = problem.add_block(
        f"lex_{block.start}_{block.stop}", len(block), lb=0.0
    )
    for pos, (idx, s) in enumerate(zip(block, slacks)):
        problem.add_ineq({idx: 1.0, s: -1.0}, 0.0)
        problem.add_ineq({idx: -1.0, s: -1.0}, 0.0)
        problem.add_objective_term(s, weight * 2.0 ** -min(pos, 60))
    return problem


# -- MPS debug format --------------------------------------------------
#
# Fixed-layout MPS with full-precision numerals (repr of the float) so a
# dump can be reparsed into an identical problem; the block layout map
# rides along in comment lines.

def _fmt(v: float) -> str:
    return repr(float(v))


def to_mps(problem: LpProblem, name: str = "RCINET") -> str:
    lines = [f"NAME          {name}"]
    for bname, rng in sorted(problem.blocks.items()):
        lines.append(f"* BLOCK {bname} {rng.start} {rng.stop}")
    lines.append("ROWS")
    lines.append(" N  COST")
    for i in range(len(problem.eq_rows)):
        lines.append(f" E  EQ{i + 1:07d}")
    for i in range(len(problem.ineq_rows)):
        lines.append(f" L  LE{i + 1:07d}")
    lines.append("COLUMNS")
    entries: dict[int, list[tuple[str, float]]] = {i: [] for i in range(problem.num_vars)}
    for i, row in enumerate(problem.eq_rows):
        for col, v in row.items():
            entries[col].append((f"EQ{i + 1:07d}", v))
    for i, row in enumerate(problem.ineq_rows):
        for col, v in row.items():
            entries[col].append((f"LE{i + 1:07d}", v))
    for col, v in problem.objective.items():
        entries[col].append(("COST", v))
    for col in range(problem.num_vars):
        var = f"X{col + 1:07d}"
        for rowname, v in sorted(entries[col]):
            lines.append(f"    {var}  {rowname}  {_fmt(v)}")
    lines.append("RHS")
    for i, rhs in enumerate(problem.eq_rhs):
        if rhs != 0.0:
            lines.append(f"    RHS       EQ{i + 1:07d}  {_fmt(rhs)}")
    for i, rhs in enumerate(problem.ineq_rhs):
        if rhs != 0.0:
            lines.append(f"    RHS       LE{i + 1:07d}  {_fmt(rhs)}")
    lines.append("BOUNDS")
    for col in range(problem.num_vars):
        var = f"X{col + 1:07d}"
        lb, ub = problem.lower[col], problem.upper[col]
        if lb == -math.inf and ub == math.inf:
            lines.append(f" FR BND       {var}")
            continue
        if lb == -math.inf:
            lines.append(f" MI BND       {var}")
        else:
            lines.append(f" LO BND       {var}  {_fmt(lb)}")
        if ub == math.inf:
            lines.append(f" PL BND       {var}")
        else:
            lines.append(f" UP BND       {var}  {_fmt(ub)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def from_mps(text: str) -> LpProblem:
    problem = LpProblem()
    blocks: dict[str, range] = {}
    section = None
    eq_names: list[str] = []
    le_names: list[str] = []
    col_entries: dict[str, list[tuple[str, float]]] = {}
    rhs_map: dict[str, float] = {}
    bound_lines: list[tuple[str, str, float | None]] = []
    for raw in text.splitlines():
        if raw.startswith("* BLOCK "):
            _, _, bname, start, stop = raw.split()
            blocks[bname] = range(int(start), int(stop))
            continue
        if raw.startswith("*") or not raw.strip():
            continue
        head = raw.split()[0]
        # section headers are unindented; data lines (which may also start
        # with the token RHS, the right-hand-side set name) are indented
        if raw[0] not in " \t" and head in (
            "NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"
        ):
            section = head
            continue
        fields = raw.split()
        if section == "ROWS":
            sense, rowname = fields
            if sense == "E":
                eq_names.append(rowname)
            elif sense == "L":
                le_names.append(rowname)
        elif section == "COLUMNS":
            var, rowname, value = fields
            col_entries.setdefault(var, []).append((rowname, float(value)))
        elif section == "RHS":
            _, rowname, value = fields
            rhs_map[rowname] = float(value)
        elif section == "BOUNDS":
            btype, _, var = fields[:3]
            val = float(fields[3]) if len(fields) > 3 else None
            bound_lines.append((btype, var, val))
    var_ids = sorted(
        {var for var in col_entries} | {var for _, var, _ in bound_lines}
    )
    var_index = {var: int(var[1:]) - 1 for var in var_ids}
    num_vars = max(var_index.values(), default=-1) + 1
    for _ in range(num_vars):
        problem.add_var()
    for btype, var, val in bound_lines:
        idx = var_index[var]
        if btype == "FR":
            problem.lower[idx], problem.upper[idx] = -math.inf, math.inf
        elif btype == "MI":
            problem.lower[idx] = -math.inf
        elif btype == "PL":
            problem.upper[idx] = math.inf
        elif btype == "LO":
            problem.lower[idx] = val
        elif btype == "UP":
            problem.upper[idx] = val
        else:
            raise ValueError(f"unsupported bound type {btype!r}")
    eq_rows: dict[str, dict[int, float]] = {nm: {} for nm in eq_names}
    le_rows: dict[str, dict[int, float]] = {nm: {} for nm in le_names}
    for var, pairs in col_entries.items():
        idx = var_index[var]
        for rowname, value in pairs:
            if rowname == "COST":
                problem.add_objective_term(idx, value)
            elif rowname in eq_rows:
                eq_rows[rowname][idx] = eq_rows[rowname].get(idx, 0.0) + value
            elif rowname in le_rows:
                le_rows[rowname][idx] = le_rows[rowname].get(idx, 0.0) + value
            else:
                raise ValueError(f"entry references unknown row {rowname!r}")
    for nm in eq_names:
        problem.add_eq(eq_rows[nm], rhs_map.get(nm, 0.0))
    for nm in le_names:
        problem.add_ineq(le_rows[nm], rhs_map.get(nm, 0.0))
    problem.blocks = blocks
    return problem
