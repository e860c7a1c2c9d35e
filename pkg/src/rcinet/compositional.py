"""Compositional decentralized invariant-set synthesis.

Each subsystem is synthesized on its own, with neighbor couplings folded
into the disturbance through the neighbors' current contract sets.  Sweeps
repeat with the previous iterates as shrinking state/input constraints, so
successive sets are nested by construction and the per-subsystem boxed
disturbances can only shrink.  Convergence is declared once the box radii
stop moving (relative metric) and the final iterates still satisfy the
fixed-point condition of every contract.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkSystem
from .single import (AllKInfeasible, RciContract, default_k_max,
                     fixed_point_residual, synth_single)
from .zonotope import Zonotope, reduce_box

METRIC_EPS = 1e-12
DEFAULT_TOL = 1e-4
DEFAULT_MAX_SWEEPS = 50
# fixed-point residual the returned contracts must satisfy against the
# disturbance boxes rebuilt from the *final* iterates
RESIDUAL_GUARD = 5e-7


@dataclass
class SweepState:
    """Per-subsystem iterates after a sweep, plus the box-radius witness."""

    T: dict[str, np.ndarray]
    M: dict[str, np.ndarray]
    sweep: int
    radii: dict[str, np.ndarray]
    feasible: dict[str, bool]

    @classmethod
    def initial(cls, net: NetworkSystem, scale: float = 1.0) -> "SweepState":
        # scale shrinks only the state iterates: that is what weakens the
        # incoming couplings, while a shrunk input iterate would just starve
        # the controller of the very budget the first sweep needs
        T = {sub.id: scale * sub.Gx.generators.copy() for sub in net.subsystems}
        M = {sub.id: sub.Gu.generators.copy() for sub in net.subsystems}
        radii = {sid: np.abs(mat).sum(axis=1) for sid, mat in T.items()}
        return cls(T=T, M=M, sweep=0, radii=radii,
                   feasible={sub.id: True for sub in net.subsystems})

    def snapshot(self) -> "SweepState":
        return SweepState(
            T={k: v.copy() for k, v in self.T.items()},
            M={k: v.copy() for k, v in self.M.items()},
            sweep=self.sweep,
            radii={k: v.copy() for k, v in self.radii.items()},
            feasible=dict(self.feasible),
        )

    def update(self, sid: str, contract: RciContract) -> None:
        self.T[sid] = contract.T
        self.M[sid] = contract.M
        self.radii[sid] = np.abs(contract.T).sum(axis=1)
        self.feasible[sid] = True


@dataclass
class SweepRecord:
    id: str
    k: int
    objective: float
    residual: float
    solve_seconds: float

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "k": self.k,
            "objective": self.objective,
            "residual": self.residual,
            "solve_seconds": self.solve_seconds,
        }


@dataclass
class SynthesisReport:
    outcome: str  # "converged" | "max_sweeps" | "infeasible"
    sweeps: int
    mode: str
    metric_history: list[float] = field(default_factory=list)
    per_sweep: list[list[SweepRecord]] = field(default_factory=list)
    infeasible_at: dict | None = None
    final_residuals: dict[str, float] = field(default_factory=dict)
    final_box_radii: dict[str, list[float]] = field(default_factory=dict)
    total_seconds: float = 0.0
    history: list[SweepState] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.outcome == "converged"

    def to_json_dict(self) -> dict:
        doc = {
            "outcome": self.outcome,
            "sweeps": self.sweeps,
            "mode": self.mode,
            "metric_history": self.metric_history,
            "per_sweep": [
                [rec.to_json_dict() for rec in sweep] for sweep in self.per_sweep
            ],
            "final_residuals": self.final_residuals,
            "final_box_radii": self.final_box_radii,
            "total_seconds": self.total_seconds,
        }
        if self.infeasible_at is not None:
            doc["infeasible_at"] = self.infeasible_at
        return doc


def coupling_disturbance(net: NetworkSystem, sid: str,
                         state: SweepState) -> Zonotope:
    """Disturbance seen by one subsystem: neighbor state couplings mapped
    through the current iterates, then input couplings, then the exogenous
    set, as one concatenated zonotope."""
    sub = net.subsystem(sid)
    columns = []
    inbound = net.couplings_into(sid)
    for c in inbound:
        if c.A is not None:
            columns.append(c.A @ state.T[c.from_id])
    for c in inbound:
        if c.B is not None:
            columns.append(c.B @ state.M[c.from_id])
    columns.append(sub.Gd.generators)
    return Zonotope(np.zeros(sub.dim), np.hstack(columns))


def convergence_metric(prev: SweepState, new: SweepState) -> float:
    """Largest relative decrease of any box radius between two sweeps.

    Nonnegative as long as the nesting invariant holds; tiny negative
    slack from LP tolerances is clamped to zero.
    """
    if prev.radii.keys() != new.radii.keys():
        raise ValueError("sweep states cover different subsystem sets")
    worst = 0.0
    for sid, r_prev in prev.radii.items():
        r_new = new.radii[sid]
        drop = (r_prev - r_new) / np.maximum(r_prev, METRIC_EPS)
        if drop.size:
            worst = max(worst, float(np.max(drop)))
    return max(worst, 0.0)


def _final_residuals(net: NetworkSystem, state: SweepState,
                     contracts: dict[str, RciContract]) -> dict[str, float]:
    out = {}
    for sub in net.subsystems:
        boxed = reduce_box(coupling_disturbance(net, sub.id, state))
        c = contracts[sub.id]
        out[sub.id] = fixed_point_residual(sub.A, sub.B, c.T, c.M,
                                           boxed.generators)
    return out


def _worker_count(threads: int | None, jobs: int) -> int:
    if threads is None:
        env = os.environ.get("RCI_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(threads, jobs))


def synth_network(
    net: NetworkSystem,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    k_max: int | None = None,
    mode: str = "gauss-seidel",
    feas_tol: float = 1e-7,
    residual_guard: float = RESIDUAL_GUARD,
    init_scale: float = 1.0,
    keep_history: bool = False,
    threads: int | None = None,
) -> tuple[dict[str, RciContract], SynthesisReport]:
    """Run the sweep iteration over all subsystems.

    mode "gauss-seidel" updates in declaration order reusing fresh iterates
    within the sweep; "jacobi" solves every subsystem of a sweep from the
    previous sweep's state (concurrently, bounded by RCI_THREADS).
    init_scale starts the state iterates at a scalar multiple of the
    admissible sets, useful when the full-size couplings make the first
    sweep infeasible.
    """
    if mode not in ("gauss-seidel", "jacobi"):
        raise ValueError(f"unknown mode {mode!r}")
    if not (0.0 < init_scale <= 1.0):
        raise ValueError("init_scale must be in (0, 1]")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    t_start = time.perf_counter()
    state = SweepState.initial(net, scale=init_scale)
    report = SynthesisReport(outcome="max_sweeps", sweeps=0, mode=mode)
    if keep_history:
        report.history.append(state.snapshot())
    k_prev: dict[str, int] = {}
    contracts: dict[str, RciContract] = {}

    def solve_one(sub, ref_state, first_sweep):
        boxed = reduce_box(coupling_disturbance(net, sub.id, ref_state))
        outer_x = Zonotope(np.zeros(sub.dim), ref_state.T[sub.id])
        outer_u = Zonotope(np.zeros(sub.input_dim), ref_state.M[sub.id])
        t0 = time.perf_counter()
        contract = synth_single(
            sub.A, sub.B, outer_x, outer_u, boxed,
            k_start=k_prev.get(sub.id, 1),
            k_max=k_max if k_max is not None
            else default_k_max(sub.dim, boxed.num_generators),
            feas_tol=feas_tol,
            warn_uncontrollable=first_sweep,
        )
        return contract, time.perf_counter() - t0

    def fail_report(failed_id, sweep, records, ref_state, exc):
        boxed = reduce_box(coupling_disturbance(net, failed_id, ref_state))
        state.feasible[failed_id] = False
        report.outcome = "infeasible"
        report.sweeps = sweep
        report.per_sweep.append(records)
        report.infeasible_at = {
            "subsystem": failed_id,
            "sweep": sweep,
            "statuses": {str(k): s.value for k, s in exc.statuses.items()},
            "disturbance_box_radii": np.diag(boxed.generators).tolist(),
            "state_constraint_radii": np.abs(ref_state.T[failed_id]).sum(axis=1).tolist(),
            "input_constraint_radii": np.abs(ref_state.M[failed_id]).sum(axis=1).tolist(),
        }
        report.total_seconds = time.perf_counter() - t_start

    for sweep in range(1, max_sweeps + 1):
        prev = state.snapshot()
        first_sweep = sweep == 1
        records: list[SweepRecord] = []
        if mode == "gauss-seidel":
            for sub in net.subsystems:
                try:
                    contract, seconds = solve_one(sub, state, first_sweep)
                except AllKInfeasible as exc:
                    fail_report(sub.id, sweep, records, state, exc)
                    return contracts, report
                contracts[sub.id] = contract
                k_prev[sub.id] = contract.k
                state.update(sub.id, contract)
                records.append(SweepRecord(sub.id, contract.k,
                                           contract.objective,
                                           contract.residual, seconds))
        else:
            workers = _worker_count(threads, len(net.subsystems))

            def run(sub):
                try:
                    return sub, solve_one(sub, prev, first_sweep), None
                except AllKInfeasible as exc:
                    return sub, None, exc

            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, net.subsystems))
            failure = next((r for r in results if r[2] is not None), None)
            if failure is not None:
                fail_report(failure[0].id, sweep, records, prev, failure[2])
                return contracts, report
            for sub, (contract, seconds), _ in results:
                contracts[sub.id] = contract
                k_prev[sub.id] = contract.k
                state.update(sub.id, contract)
                records.append(SweepRecord(sub.id, contract.k,
                                           contract.objective,
                                           contract.residual, seconds))

        state.sweep = sweep
        report.sweeps = sweep
        report.per_sweep.append(records)
        if keep_history:
            report.history.append(state.snapshot())
        metric = convergence_metric(prev, state)
        report.metric_history.append(metric)
        if metric <= tol:
            finals = _final_residuals(net, state, contracts)
            if max(finals.values(), default=0.0) <= residual_guard:
                report.outcome = "converged"
                report.final_residuals = finals
                break

    if report.outcome != "converged":
        report.final_residuals = _final_residuals(net, state, contracts)
    report.final_box_radii = {sid: r.tolist() for sid, r in state.radii.items()}
    report.total_seconds = time.perf_counter() - t_start
    return contracts, report
