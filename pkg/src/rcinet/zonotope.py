"""Centered-zonotope algebra: the set representation used everywhere.

A zonotope is the affine image of a unit box: a center plus a generator
matrix with one column per generator.  States, inputs, disturbances,
invariant sets and action sets are all stored this way.  Zero generator
columns are kept as-is (pruning would silently reshuffle LP variable
layouts); only the 2-D vertex walk merges degenerate generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .lp import LpProblem, LpStatus
from .rng import SeededRng

MEMBERSHIP_TOL = 1e-7
_PARALLEL_TOL = 1e-12


class ZonotopeError(ValueError):
    pass


class Zonotope:
    """Center vector (length n) plus generator matrix (n x p)."""

    __slots__ = ("center", "generators")

    def __init__(self, center, generators):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        generators = np.asarray(generators, dtype=float)
        if center.ndim != 1:
            raise ZonotopeError("center must be a vector")
        if generators.ndim != 2:
            raise ZonotopeError("generators must be a matrix")
        if generators.shape[0] != center.shape[0]:
            raise ZonotopeError(
                f"generator rows {generators.shape[0]} != center length {center.shape[0]}"
            )
        if not np.all(np.isfinite(center)) or not np.all(np.isfinite(generators)):
            raise ZonotopeError("entries must be finite")
        self.center = center
        self.generators = generators

    @classmethod
    def box(cls, radii) -> "Zonotope":
        """Axis-aligned box of the given half-widths, centered at zero."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        return cls(np.zeros(radii.shape[0]), np.diag(radii))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def num_generators(self) -> int:
        return self.generators.shape[1]

    @property
    def is_centered(self) -> bool:
        return bool(np.all(self.center == 0.0))

    def box_radii(self) -> np.ndarray:
        """Row-wise absolute generator sums: the tight bounding-box half-widths."""
        return np.abs(self.generators).sum(axis=1)

    def __repr__(self) -> str:
        return f"Zonotope(dim={self.dim}, generators={self.num_generators})"

    def __add__(self, other: "Zonotope") -> "Zonotope":
        return minkowski_sum(self, other)

    def to_json_dict(self) -> dict:
        return {"center": self.center.tolist(), "generators": self.generators.tolist()}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Zonotope":
        center = doc["center"]
        rows = doc["generators"]
        if len(rows) != len(center):
            raise ZonotopeError(
                f"generators must have {len(center)} rows, got {len(rows)}"
            )
        generators = np.array(rows, dtype=float).reshape(len(center), -1)
        return cls(center, generators)


def minkowski_sum(a: Zonotope, b: Zonotope) -> Zonotope:
    """Sum of sets: centers add, generator columns concatenate."""
    if a.dim != b.dim:
        raise ZonotopeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Zonotope(a.center + b.center, np.hstack([a.generators, b.generators]))


def linear_map(matrix, z: Zonotope) -> Zonotope:
    """Image of the zonotope under a linear map."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[1] != z.dim:
        raise ZonotopeError(
            f"map expects {matrix.shape[1]} columns, zonotope has dimension {z.dim}"
        )
    return Zonotope(matrix @ z.center, matrix @ z.generators)


def reduce_box(z: Zonotope) -> Zonotope:
    """Over-approximate by the axis-aligned box of row-absolute generator sums."""
    if z.dim < 1:
        raise ZonotopeError("dimension must be at least 1")
    return Zonotope(z.center, np.diag(z.box_radii()))


def contains_point(z: Zonotope, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership test: is there a unit-box latent b with generators*b = x - c?

    Decided by an LP at feasibility tolerance `tol`; solver breakdown is
    raised, never silently mapped to a verdict.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != z.dim:
        raise ZonotopeError(f"point has dimension {x.shape[0]}, expected {z.dim}")
    gap = x - z.center
    if z.num_generators == 0:
        return bool(np.max(np.abs(gap), initial=0.0) <= tol)
    problem = LpProblem()
    latent = problem.add_block("latent", z.num_generators, lb=-1.0, ub=1.0)
    for r in range(z.dim):
        row = {latent[j]: z.generators[r, j] for j in range(z.num_generators)}
        problem.add_eq(row, gap[r])
    sol = lp.solve(problem, feas_tol=tol)
    if sol.status is LpStatus.OPTIMAL:
        return True
    if sol.status is LpStatus.INFEASIBLE:
        return False
    raise lp.LpError(f"membership LP failed: {sol.status.value}: {sol.message}")


def membership_residuals(z: Zonotope, points: np.ndarray,
                         chunk: int = 2048) -> np.ndarray:
    """Distance-like residual per point: min over unit-box latents of the
    infinity norm of generators*b - (x - c).  0 means inside; used by the
    Monte-Carlo verifiers, which need residual magnitudes, not just verdicts.

    Points are stacked row-wise; independent per-point LPs are batched into
    block-diagonal solves for speed.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != z.dim:
        raise ZonotopeError("points must be stacked row-wise with matching dimension")
    n, p = z.dim, z.num_generators
    out = np.empty(points.shape[0])
    if p == 0:
        gaps = np.abs(points - z.center)
        return gaps.max(axis=1) if n else np.zeros(points.shape[0])
    for start in range(0, points.shape[0], chunk):
        batch = points[start:start + chunk]
        problem = LpProblem()
        lat = problem.add_block("latent", batch.shape[0] * p, lb=-1.0, ub=1.0)
        slack = problem.add_block("residual", batch.shape[0], lb=0.0)
        for s, x in enumerate(batch):
            gap = x - z.center
            base = lat.start + s * p
            for r in range(n):
                row = {base + j: z.generators[r, j] for j in range(p)}
                row[slack[s]] = -1.0
                problem.add_ineq(dict(row), gap[r])
                row = {base + j: -z.generators[r, j] for j in range(p)}
                row[slack[s]] = -1.0
                problem.add_ineq(row, -gap[r])
            problem.add_objective_term(slack[s], 1.0)
        sol = lp.solve(problem)
        if not sol.optimal:
            raise lp.LpError(
                f"membership residual LP failed: {sol.status.value}: {sol.message}"
            )
        out[start:start + batch.shape[0]] = sol.x[slack.start:slack.stop]
    return out


@dataclass(frozen=True)
class ContainmentBlock:
    """Linear constraint data certifying Z(0, inner) inside Z(0, outer).

    The encoding couples the generator matrices through a fresh coefficient
    matrix gamma (inner = outer @ gamma) whose rows are bounded in absolute
    value by a matrix lam with row sums at most one.  Feasibility is
    sufficient for containment, and exact when the outer set is a box.

    `inner` may be None, in which case the inner matrix entries are decision
    variables supplied to `emit` (the synthesis use); fixed matrices give the
    verification use.
    """

    inner: np.ndarray | None
    outer: np.ndarray
    inner_shape: tuple[int, int]

    @property
    def gamma_shape(self) -> tuple[int, int]:
        return (self.outer.shape[1], self.inner_shape[1])

    def emit(self, problem: LpProblem, inner_vars: range | None = None,
             label: str = "contain") -> dict[str, range]:
        """Append the gamma/lam variables and all rows to `problem`.

        When `inner_vars` is given it must hold the inner matrix entries in
        row-major order; otherwise the stored fixed inner matrix is used.
        """
        n, k_in = self.inner_shape
        k_out = self.outer.shape[1]
        if inner_vars is None and self.inner is None:
            raise ZonotopeError("symbolic block needs inner_vars at emit time")
        if inner_vars is not None and len(inner_vars) != n * k_in:
            raise ZonotopeError("inner_vars length does not match the inner shape")
        gamma = problem.add_block(f"{label}_gamma", k_out * k_in)
        lam = problem.add_block(f"{label}_lambda", k_out * k_in, lb=0.0)

        def g(row, col):
            return gamma.start + row * k_in + col

        def l(row, col):
            return lam.start + row * k_in + col

        for r in range(n):
            for j in range(k_in):
                row = {g(i, j): -self.outer[r, i] for i in range(k_out)}
                if inner_vars is not None:
                    idx = inner_vars.start + r * k_in + j
                    row[idx] = row.get(idx, 0.0) + 1.0
                    problem.add_eq(row, 0.0)
                else:
                    problem.add_eq(row, -self.inner[r, j])
        for i in range(k_out):
            for j in range(k_in):
                problem.add_ineq({g(i, j): 1.0, l(i, j): -1.0}, 0.0)
                problem.add_ineq({g(i, j): -1.0, l(i, j): -1.0}, 0.0)
        for i in range(k_out):
            problem.add_ineq({l(i, j): 1.0 for j in range(k_in)}, 1.0)
        return {"gamma": gamma, "lambda": lam}

    def feasible(self, feas_tol: float = lp.DEFAULT_FEAS_TOL) -> bool:
        """Solve the block standalone (fixed inner matrix only)."""
        if self.inner is None:
            raise ZonotopeError("cannot solve a symbolic block standalone")
        problem = LpProblem()
        self.emit(problem)
        sol = lp.solve(problem, feas_tol=feas_tol)
        if sol.status is LpStatus.OPTIMAL:
            return True
        if sol.status is LpStatus.INFEASIBLE:
            return False
        raise lp.LpError(f"containment LP failed: {sol.status.value}: {sol.message}")


def containment_block(inner: Zonotope, outer: Zonotope) -> ContainmentBlock:
    """Constraint data for Z(0,inner) inside Z(0,outer); zero centers required."""
    if inner.dim != outer.dim:
        raise ZonotopeError(f"dimension mismatch: {inner.dim} vs {outer.dim}")
    if not inner.is_centered or not outer.is_centered:
        raise ZonotopeError("containment encoding requires zero-centered zonotopes")
    return ContainmentBlock(
        inner=inner.generators.copy(),
        outer=outer.generators.copy(),
        inner_shape=inner.generators.shape,
    )


def symbolic_containment(n: int, k_in: int, outer: Zonotope) -> ContainmentBlock:
    """Containment block whose inner matrix will be decision variables."""
    if outer.dim != n:
        raise ZonotopeError(f"outer has dimension {outer.dim}, expected {n}")
    if not outer.is_centered:
        raise ZonotopeError("containment encoding requires zero-centered zonotopes")
    return ContainmentBlock(inner=None, outer=outer.generators.copy(),
                            inner_shape=(n, k_in))


def contains_zonotope(inner: Zonotope, outer: Zonotope,
                      feas_tol: float = lp.DEFAULT_FEAS_TOL) -> bool:
    """Sufficient containment certificate via the gamma/lam LP."""
    return containment_block(inner, outer).feasible(feas_tol)


def vertices_2d(z: Zonotope) -> np.ndarray:
    """Counterclockwise polygon vertices of a 2-D zonotope.

    Generators are flipped into the upper half-plane, merged when parallel,
    sorted by angle, and the boundary is walked; 2p vertices in general
    position, fewer when degenerate.
    """
    if z.dim != 2:
        raise ZonotopeError(f"vertex walk requires dimension 2, got {z.dim}")
    gens = []
    for j in range(z.num_generators):
        g = z.generators[:, j].copy()
        if math.hypot(g[0], g[1]) <= _PARALLEL_TOL:
            continue
        if g[1] < 0.0 or (g[1] == 0.0 and g[0] < 0.0):
            g = -g
        gens.append(g)
    if not gens:
        return z.center[np.newaxis, :].copy()
    gens.sort(key=lambda g: math.atan2(g[1], g[0]))
    merged = [gens[0]]
    for g in gens[1:]:
        prev = merged[-1]
        cross = prev[0] * g[1] - prev[1] * g[0]
        if abs(cross) <= _PARALLEL_TOL * max(1.0, np.hypot(*prev) * np.hypot(*g)):
            merged[-1] = prev + g
        else:
            merged.append(g)
    total = np.sum(merged, axis=0)
    vertex = z.center - total
    first_half = [vertex]
    for g in merged:
        vertex = vertex + 2.0 * g
        first_half.append(vertex)
    if len(merged) == 1:  # segment: the walk already hit both endpoints
        return np.array(first_half)
    second_half = [2.0 * z.center - v for v in first_half[1:-1]]
    return np.array(first_half + second_half)


def sample(z: Zonotope, rng: SeededRng) -> np.ndarray:
    """One point: center + generators @ b with b uniform on the unit box."""
    b = rng.uniform(-1.0, 1.0, size=z.num_generators)
    return z.center + z.generators @ b
