"""Single-system invariant set synthesis.

Encodes the fixed-point condition on the candidate generator pair (T, M):
the matrix [A T + B M, D] must equal [0, T] column by column, with the
candidate state set contained in the state constraint and the action set in
the input constraint.  The 1-norm of T is minimized.  Generator count k is
escalated one at a time until the program is feasible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import lp
from .lp import LpProblem, LpStatus
from .zonotope import Zonotope, ZonotopeError, symbolic_containment

RESIDUAL_TOL = 1e-6


class ControllabilityWarning(UserWarning):
    pass


class AllKInfeasible(RuntimeError):
    """No generator count up to k_max admitted a feasible program."""

    def __init__(self, statuses: dict[int, LpStatus], message: str):
        super().__init__(message)
        self.statuses = statuses


@dataclass
class RciContract:
    """Invariant set Z(0,T), action set Z(0,M), and synthesis metadata."""

    T: np.ndarray
    M: np.ndarray
    k: int
    residual: float
    objective: float

    def __post_init__(self):
        self.T = np.atleast_2d(np.asarray(self.T, dtype=float))
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.T.shape[1] != self.k or self.M.shape[1] != self.k:
            raise ValueError("T and M must have exactly k columns")

    @property
    def rci_set(self) -> Zonotope:
        return Zonotope(np.zeros(self.T.shape[0]), self.T)

    @property
    def action_set(self) -> Zonotope:
        return Zonotope(np.zeros(self.M.shape[0]), self.M)

    def to_json_dict(self) -> dict:
        return {
            "T": self.T.tolist(),
            "M": self.M.tolist(),
            "k": self.k,
            "residual": self.residual,
            "objective": self.objective,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RciContract":
        return cls(
            T=np.array(doc["T"], dtype=float),
            M=np.array(doc["M"], dtype=float),
            k=int(doc["k"]),
            residual=float(doc["residual"]),
            objective=float(doc["objective"]),
        )


def fixed_point_residual(A, B, T, M, dist_generators) -> float:
    """Max-abs violation of [A T + B M, D] = [0, T], evaluated directly."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    T = np.atleast_2d(T)
    M = np.atleast_2d(M)
    D = np.atleast_2d(dist_generators)
    n, p = D.shape
    left = np.hstack([A @ T + B @ M, D])
    right = np.hstack([np.zeros((n, p)), T])
    return float(np.max(np.abs(left - right), initial=0.0))


def controllability_defect(A, B, sv_tol: float = 1e-9) -> int:
    """Rank deficiency of [B, AB, ..., A^(n-1) B]; 0 means controllable."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    sv = np.linalg.svd(np.hstack(blocks), compute_uv=False)
    return n - int(np.sum(sv > sv_tol))


def _check_inputs(A, B, state_set, input_set, dist_set):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    if B.shape[0] != n:
        raise ValueError(f"B must have {n} rows, got {B.shape}")
    m = B.shape[1]
    for name, zono, dim in (
        ("state_set", state_set, n),
        ("input_set", input_set, m),
        ("dist_set", dist_set, n),
    ):
        if zono.dim != dim:
            raise ZonotopeError(f"{name} has dimension {zono.dim}, expected {dim}")
        if not zono.is_centered:
            raise ZonotopeError(f"{name} must be zero-centered")
    return A, B, n, m


def build_rci_lp(A, B, state_set: Zonotope, input_set: Zonotope,
                 dist_set: Zonotope, k: int) -> LpProblem:
    """LP over (T, M) for a given generator count k.

    Variable blocks "T" (n*k, row-major) and "M" (m*k, row-major), plus the
    containment auxiliaries and the 1-norm slacks.  Column matching of the
    fixed-point condition is emitted in full generality: for k < p the
    leading disturbance columns are pinned to zero (infeasible unless they
    vanish); for k >= p the trailing T columns are pinned to D.
    """
    A, B, n, m = _check_inputs(A, B, state_set, input_set, dist_set)
    if k < 1:
        raise ValueError("k must be at least 1")
    D = dist_set.generators
    p = D.shape[1]

    problem = LpProblem()
    t_vars = problem.add_block("T", n * k)
    m_vars = problem.add_block("M", m * k)

    def t(row, col):
        return t_vars.start + row * k + col

    def mu(row, col):
        return m_vars.start + row * k + col

    for j in range(k + p):
        for r in range(n):
            row: dict[int, float] = {}
            if j < k:
                for l in range(n):
                    if A[r, l] != 0.0:
                        row[t(l, j)] = row.get(t(l, j), 0.0) + A[r, l]
                for l in range(m):
                    if B[r, l] != 0.0:
                        row[mu(l, j)] = row.get(mu(l, j), 0.0) + B[r, l]
            if j >= p:
                idx = t(r, j - p)
                row[idx] = row.get(idx, 0.0) - 1.0
            rhs = -D[r, j - k] if j >= k else 0.0
            problem.add_eq(row, rhs)

    symbolic_containment(n, k, state_set).emit(problem, inner_vars=t_vars,
                                               label="state")
    symbolic_containment(m, k, input_set).emit(problem, inner_vars=m_vars,
                                               label="input")
    lp.add_l1_objective(problem, t_vars)
    return problem


def default_k_max(n: int, p: int) -> int:
    # headroom around the controllability index without unbounded loops
    return max(4 * n, p + 2 * n)


def synth_single(A, B, state_set: Zonotope, input_set: Zonotope,
                 dist_set: Zonotope, k_start: int = 1, k_max: int | None = None,
                 feas_tol: float = lp.DEFAULT_FEAS_TOL, scan_all: bool = False,
                 warn_uncontrollable: bool = True) -> RciContract:
    """Escalate k until the program is feasible; return that contract.

    A numerical failure triggers one re-solve at 10x looser tolerance before
    escalating.  With scan_all the search continues to k_max and keeps the
    smallest 1-norm.  Raises AllKInfeasible with the per-k solver statuses
    when the whole range fails.
    """
    A, B, n, m = _check_inputs(A, B, state_set, input_set, dist_set)
    p = dist_set.num_generators
    if k_max is None:
        k_max = default_k_max(n, p)
    if k_start < 1 or k_max < k_start:
        raise ValueError(f"need 1 <= k_start <= k_max, got [{k_start}, {k_max}]")
    if warn_uncontrollable:
        defect = controllability_defect(A, B)
        if defect:
            warnings.warn(
                f"(A, B) fails the controllability rank check by {defect}; "
                "synthesis may be infeasible at every k",
                ControllabilityWarning,
                stacklevel=2,
            )

    statuses: dict[int, LpStatus] = {}
    best: RciContract | None = None
    for k in range(k_start, k_max + 1):
        problem = build_rci_lp(A, B, state_set, input_set, dist_set, k)
        sol = lp.solve(problem, feas_tol=feas_tol)
        if sol.status is LpStatus.NUMERICAL_FAILURE:
            sol = lp.solve(problem, feas_tol=10 * feas_tol)
        contract = None
        if sol.optimal:
            T = sol.x[problem.blocks["T"].start:problem.blocks["T"].stop]
            M = sol.x[problem.blocks["M"].start:problem.blocks["M"].stop]
            T = T.reshape(n, k)
            M = M.reshape(m, k)
            residual = fixed_point_residual(A, B, T, M, dist_set.generators)
            if residual <= RESIDUAL_TOL:
                contract = RciContract(T=T, M=M, k=k, residual=residual,
                                       objective=float(sol.objective))
            else:
                sol.status = LpStatus.NUMERICAL_FAILURE
        statuses[k] = sol.status
        if contract is not None:
            if not scan_all:
                return contract
            if best is None or contract.objective < best.objective:
                best = contract
    if best is not None:
        return best
    raise AllKInfeasible(
        statuses,
        f"no feasible generator count in [{k_start}, {k_max}]; "
        f"last status {statuses[k_max].value}",
    )
