"""Online controller extraction, Monte-Carlo verification, and simulation.

The set-invariance controller maps a state to a unit-box latent coordinate
through the contract's generator matrix (state = T b) and plays the input
M b.  Verification samples joint latents and disturbances (uniform interior
plus corner stress draws) and checks every successor's membership; the
simulator runs the same controller in closed loop, optionally as a tube
around a supplied nominal trajectory.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .lp import LpProblem, LpStatus
from .network import NetworkSystem
from .rng import SeededRng
from .single import RciContract
from .zonotope import Zonotope, membership_residuals

CONTROL_TOL = 1e-6


class StateOutsideRci(RuntimeError):
    """The queried state has no admissible latent; no fallback is applied."""

    def __init__(self, message: str, x=None):
        super().__init__(message)
        self.x = x


class SimulationError(RuntimeError):
    """Membership failed mid-run; the partial log rides along for diagnosis."""

    def __init__(self, message: str, log: "TrajectoryLog"):
        super().__init__(message)
        self.log = log


@dataclass
class ControlStep:
    x: np.ndarray
    b: np.ndarray
    u: np.ndarray
    residual: float
    margin: float  # attained infinity norm of b


def invariance_control(contract: RciContract, x, tol: float = CONTROL_TOL,
                       regularize: bool = False) -> ControlStep:
    """Latent coordinate of minimal infinity norm with T b = x, and the
    resulting input M b.  States outside the set (beyond `tol`) raise."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    T, M, k = contract.T, contract.M, contract.k
    if x.shape[0] != T.shape[0]:
        raise ValueError(f"state has dimension {x.shape[0]}, expected {T.shape[0]}")
    problem = LpProblem()
    b_vars = problem.add_block("b", k)
    t_var = problem.add_block("t", 1, lb=0.0, ub=1.0 + tol)[0]
    for r in range(T.shape[0]):
        problem.add_eq({b_vars[j]: T[r, j] for j in range(k)}, x[r])
    for j in range(k):
        problem.add_ineq({b_vars[j]: 1.0, t_var: -1.0}, 0.0)
        problem.add_ineq({b_vars[j]: -1.0, t_var: -1.0}, 0.0)
    problem.add_objective_term(t_var, 1.0)
    if regularize:
        lp.add_lexicographic_regularizer(problem, b_vars)
    sol = lp.solve(problem, feas_tol=min(tol, 1e-7))
    if sol.status is LpStatus.INFEASIBLE:
        raise StateOutsideRci(
            f"state outside the invariant set beyond tolerance {tol}", x=x
        )
    if not sol.optimal:
        raise lp.LpError(f"control LP failed: {sol.status.value}: {sol.message}")
    b = sol.x[b_vars.start:b_vars.stop]
    return ControlStep(
        x=x,
        b=b,
        u=M @ b,
        residual=float(np.max(np.abs(T @ b - x), initial=0.0)),
        margin=float(sol.x[t_var]),
    )


def _control_batch(contract: RciContract, states: np.ndarray,
                   tol: float = CONTROL_TOL, chunk: int = 1024) -> np.ndarray:
    """Controller latents for stacked states, via block-diagonal LPs."""
    T, k = contract.T, contract.k
    n = T.shape[0]
    out = np.empty((states.shape[0], k))
    for start in range(0, states.shape[0], chunk):
        batch = states[start:start + chunk]
        problem = LpProblem()
        b_vars = problem.add_block("b", batch.shape[0] * k)
        t_vars = problem.add_block("t", batch.shape[0], lb=0.0, ub=1.0 + tol)
        for s, x in enumerate(batch):
            base = b_vars.start + s * k
            for r in range(n):
                problem.add_eq({base + j: T[r, j] for j in range(k)}, x[r])
            for j in range(k):
                problem.add_ineq({base + j: 1.0, t_vars[s]: -1.0}, 0.0)
                problem.add_ineq({base + j: -1.0, t_vars[s]: -1.0}, 0.0)
            problem.add_objective_term(t_vars[s], 1.0)
        sol = lp.solve(problem, feas_tol=min(tol, 1e-7))
        if not sol.optimal:
            # identify the offending state for a useful error
            for x in batch:
                invariance_control(contract, x, tol=tol)
            raise lp.LpError(f"batched control LP failed: {sol.message}")
        out[start:start + batch.shape[0]] = (
            sol.x[b_vars.start:b_vars.stop].reshape(batch.shape[0], k)
        )
    return out


@dataclass
class OneStepReport:
    samples: int
    corner_draws: int
    violations: int
    worst_residual: float
    per_subsystem: dict[str, dict]
    counterexamples: list[dict] = field(default_factory=list)
    independent: dict | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json_dict(self) -> dict:
        doc = {
            "samples": self.samples,
            "corner_draws": self.corner_draws,
            "violations": self.violations,
            "worst_residual": self.worst_residual,
            "per_subsystem": self.per_subsystem,
            "passed": self.passed,
        }
        if self.counterexamples:
            doc["counterexamples"] = self.counterexamples
        if self.independent is not None:
            doc["independent_inputs"] = self.independent
        return doc


def _draw_latents(rng: SeededRng, count: int, width: int) -> np.ndarray:
    return np.array(
        [rng.uniform(-1.0, 1.0, width) for _ in range(count)]
    ).reshape(count, width)


def _draw_corners(rng: SeededRng, count: int, width: int) -> np.ndarray:
    return np.array([rng.signs(width) for _ in range(count)]).reshape(count, width)


def _stack_draws(rng, samples, corners, width):
    if width == 0:
        return np.zeros((samples + corners, 0))
    return np.vstack([
        _draw_latents(rng, samples, width),
        _draw_corners(rng, corners, width),
    ])


def verify_contract(A, B, dist_set: Zonotope, contract: RciContract,
                    samples: int = 10_000, seed: int = 0,
                    tol: float = CONTROL_TOL,
                    corner_draws: int | None = None) -> OneStepReport:
    """Single-system one-step check: states sampled from the contract set,
    disturbances uniform plus corner draws, inputs from the controller LP;
    every successor must stay in the set."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    rng = SeededRng(seed)
    if corner_draws is None:
        corner_draws = 2 * contract.k
    lat = _stack_draws(rng, samples, corner_draws, contract.k)
    dlat = _stack_draws(rng, samples, corner_draws, dist_set.num_generators)
    states = lat @ contract.T.T
    b_ctrl = _control_batch(contract, states, tol=tol)
    inputs = b_ctrl @ contract.M.T
    dist = dlat @ dist_set.generators.T
    succ = states @ A.T + inputs @ B.T + dist
    resid = membership_residuals(contract.rci_set, succ)
    bad = np.nonzero(resid > tol)[0]
    worst = float(np.max(resid, initial=0.0))
    counterexamples = [
        {
            "draw": int(s),
            "x": states[s].tolist(),
            "u": inputs[s].tolist(),
            "d": dist[s].tolist(),
            "successor": succ[s].tolist(),
            "residual": float(resid[s]),
        }
        for s in bad[:10]
    ]
    return OneStepReport(
        samples=samples,
        corner_draws=corner_draws,
        violations=int(bad.size),
        worst_residual=worst,
        per_subsystem={"system": {"violations": int(bad.size), "worst_residual": worst}},
        counterexamples=counterexamples,
    )


def verify_one_step(net: NetworkSystem, contracts: dict[str, RciContract],
                    samples: int = 10_000, seed: int = 0,
                    tol: float = CONTROL_TOL, corner_draws: int | None = None,
                    independent_inputs: bool = False) -> OneStepReport:
    """Networked one-step check of the decentralized invariance condition.

    Per draw: every subsystem gets a joint latent (its state is T b and its
    outgoing input coupling uses the same latent), exogenous disturbances are
    sampled uniformly plus corner draws, each subsystem applies the
    controller LP to its own state, and all successors are checked for
    membership.  With independent_inputs a second, stricter pass decouples
    neighbor inputs from the state latents; its verdict is reported
    alongside, not merged.
    """
    ids = net.ids
    missing = [sid for sid in ids if sid not in contracts]
    if missing:
        raise ValueError(f"missing contracts for {missing}")
    rng = SeededRng(seed)
    if corner_draws is None:
        corner_draws = 2 * max(contracts[sid].k for sid in ids)
    total = samples + corner_draws

    lat = {sid: _stack_draws(rng, samples, corner_draws, contracts[sid].k)
           for sid in ids}
    dist = {}
    for sid in ids:
        sub = net.subsystem(sid)
        dlat = _stack_draws(rng, samples, corner_draws, sub.Gd.num_generators)
        dist[sid] = dlat @ sub.Gd.generators.T
    states = {sid: lat[sid] @ contracts[sid].T.T for sid in ids}
    ctrl_inputs = {}
    for sid in ids:
        b_ctrl = _control_batch(contracts[sid], states[sid], tol=tol)
        ctrl_inputs[sid] = b_ctrl @ contracts[sid].M.T
    shared_inputs = {sid: lat[sid] @ contracts[sid].M.T for sid in ids}

    def successors(neighbor_inputs):
        succ = {}
        for sid in ids:
            sub = net.subsystem(sid)
            nxt = states[sid] @ sub.A.T + ctrl_inputs[sid] @ sub.B.T + dist[sid]
            for c in net.couplings_into(sid):
                if c.A is not None:
                    nxt = nxt + states[c.from_id] @ c.A.T
                if c.B is not None:
                    nxt = nxt + neighbor_inputs[c.from_id] @ c.B.T
            succ[sid] = nxt
        return succ

    def check(succ):
        per = {}
        counterexamples = []
        violations = 0
        worst = 0.0
        for sid in ids:
            resid = membership_residuals(contracts[sid].rci_set, succ[sid])
            bad = np.nonzero(resid > tol)[0]
            w = float(np.max(resid, initial=0.0))
            per[sid] = {"violations": int(bad.size), "worst_residual": w}
            violations += int(bad.size)
            worst = max(worst, w)
            for s in bad[:10]:
                if len(counterexamples) >= 10:
                    break
                counterexamples.append({
                    "subsystem": sid,
                    "draw": int(s),
                    "x": states[sid][s].tolist(),
                    "u": ctrl_inputs[sid][s].tolist(),
                    "d": dist[sid][s].tolist(),
                    "successor": succ[sid][s].tolist(),
                    "residual": float(resid[s]),
                })
        return violations, worst, per, counterexamples

    violations, worst, per, counterexamples = check(successors(shared_inputs))
    report = OneStepReport(
        samples=samples,
        corner_draws=corner_draws,
        violations=violations,
        worst_residual=worst,
        per_subsystem=per,
        counterexamples=counterexamples,
    )
    if independent_inputs:
        fresh = {sid: _stack_draws(rng, samples, corner_draws, contracts[sid].k)
                 @ contracts[sid].M.T for sid in ids}
        ind_violations, ind_worst, _, _ = check(successors(fresh))
        report.independent = {
            "violations": ind_violations,
            "worst_residual": ind_worst,
            "passed": ind_violations == 0,
        }
    return report


@dataclass
class NominalTrajectory:
    """Disturbance-free reference (states, inputs) for tube tracking."""

    states: list[dict[str, np.ndarray]]
    inputs: list[dict[str, np.ndarray]]

    @property
    def steps(self) -> int:
        return len(self.inputs)

    def to_json_dict(self) -> dict:
        return {
            "states": [{sid: v.tolist() for sid, v in st.items()}
                       for st in self.states],
            "inputs": [{sid: v.tolist() for sid, v in st.items()}
                       for st in self.inputs],
        }


def load_nominal_trajectory(doc: dict | list, net: NetworkSystem,
                            tol: float = 1e-8) -> NominalTrajectory:
    """Validate a nominal trajectory document against the disturbance-free
    dynamics; every step must reproduce within `tol`.

    Accepts either parallel "states"/"inputs" lists or a list of step
    objects [{"x": {id: vec}, "u": {id: vec}}, ...] where the final step
    carries only the state.
    """
    if isinstance(doc, list):
        states_doc = [entry.get("x") for entry in doc]
        inputs_doc = [entry["u"] for entry in doc if "u" in entry]
    else:
        states_doc = doc.get("states")
        inputs_doc = doc.get("inputs")
    if not isinstance(states_doc, list) or not isinstance(inputs_doc, list):
        raise ValueError("nominal trajectory needs 'states' and 'inputs' lists")
    if len(states_doc) != len(inputs_doc) + 1:
        raise ValueError(
            f"need one more state than inputs, got {len(states_doc)} states "
            f"and {len(inputs_doc)} inputs"
        )
    ids = net.ids
    def convert(entries, dims, what):
        out = []
        for t, entry in enumerate(entries):
            row = {}
            for sid in ids:
                if sid not in entry:
                    raise ValueError(f"{what}[{t}] missing subsystem {sid!r}")
                vec = np.asarray(entry[sid], dtype=float).reshape(-1)
                if vec.shape[0] != dims[sid]:
                    raise ValueError(
                        f"{what}[{t}][{sid}]: expected length {dims[sid]}"
                    )
                row[sid] = vec
            out.append(row)
        return out
    xdims = {sub.id: sub.dim for sub in net.subsystems}
    udims = {sub.id: sub.input_dim for sub in net.subsystems}
    states = convert(states_doc, xdims, "states")
    inputs = convert(inputs_doc, udims, "inputs")
    for t in range(len(inputs)):
        for sid in ids:
            sub = net.subsystem(sid)
            pred = sub.A @ states[t][sid] + sub.B @ inputs[t][sid]
            for c in net.couplings_into(sid):
                if c.A is not None:
                    pred = pred + c.A @ states[t][c.from_id]
                if c.B is not None:
                    pred = pred + c.B @ inputs[t][c.from_id]
            err = np.max(np.abs(pred - states[t + 1][sid]), initial=0.0)
            if err > tol:
                raise ValueError(
                    f"nominal trajectory violates the dynamics at step {t}, "
                    f"subsystem {sid!r} (residual {err:.3e})"
                )
    return NominalTrajectory(states=states, inputs=inputs)


@dataclass
class TrajectoryLog:
    ids: list[str]
    states: list[dict[str, np.ndarray]]
    inputs: list[dict[str, np.ndarray]]
    disturbances: list[dict[str, np.ndarray]]
    member: list[dict[str, bool]]
    residuals: list[dict[str, float]]
    nominal: NominalTrajectory | None = None

    @property
    def steps(self) -> int:
        return len(self.inputs)

    def to_csv(self) -> str:
        xw = max(v.shape[0] for row in self.states for v in row.values())
        uw = max((v.shape[0] for row in self.inputs for v in row.values()),
                 default=0)
        dw = max((v.shape[0] for row in self.disturbances for v in row.values()),
                 default=0)
        buf = io.StringIO()
        header = (
            ["t", "subsystem"]
            + [f"x{i}" for i in range(xw)]
            + [f"u{i}" for i in range(uw)]
            + [f"d{i}" for i in range(dw)]
            + ["member"]
        )
        buf.write(",".join(header) + "\n")
        def cells(vec, width):
            vals = ["" for _ in range(width)]
            if vec is not None:
                for i, v in enumerate(vec):
                    vals[i] = repr(float(v))
            return vals
        for t, row in enumerate(self.states):
            for sid in self.ids:
                u = self.inputs[t][sid] if t < len(self.inputs) else None
                d = self.disturbances[t][sid] if t < len(self.disturbances) else None
                line = (
                    [str(t), sid]
                    + cells(row[sid], xw)
                    + cells(u, uw)
                    + cells(d, dw)
                    + ["1" if self.member[t][sid] else "0"]
                )
                buf.write(",".join(line) + "\n")
        return buf.getvalue()


def _disturbance_draw(sub, rng: SeededRng, mode: str, direction: np.ndarray):
    gens = sub.Gd.generators
    p = gens.shape[1]
    if mode == "uniform":
        b = rng.uniform(-1.0, 1.0, p)
    elif mode == "corner":
        b = rng.signs(p)
    elif mode == "worst_axis":
        # corner aligned with the current state direction: pushes outward
        proj = gens.T @ direction
        b = np.where(proj >= 0.0, 1.0, -1.0)
    else:
        raise ValueError(f"unknown disturbance mode {mode!r}")
    return gens @ b


def simulate_closed_loop(net: NetworkSystem, contracts: dict[str, RciContract],
                         steps: int, seed: int,
                         disturbance_mode: str = "uniform",
                         nominal: NominalTrajectory | dict | None = None,
                         x0: dict[str, np.ndarray] | None = None,
                         tol: float = CONTROL_TOL) -> TrajectoryLog:
    """Closed-loop run under the invariance controller.

    Plain mode holds every state inside its contract set; tube mode tracks
    the supplied nominal trajectory and holds the tracking error inside the
    set instead, playing nominal plus tube input.  Membership is asserted
    at every step and a failure aborts with the partial log attached.
    """
    ids = net.ids
    missing = [sid for sid in ids if sid not in contracts]
    if missing:
        raise ValueError(f"missing contracts for {missing}")
    if isinstance(nominal, dict):
        nominal = load_nominal_trajectory(nominal, net)
    if nominal is not None and nominal.steps < steps:
        raise ValueError(
            f"nominal trajectory covers {nominal.steps} steps, need {steps}"
        )
    rng = SeededRng(seed)
    if x0 is None:
        if nominal is not None:
            x = {sid: nominal.states[0][sid].copy() for sid in ids}
        else:
            x = {sid: np.zeros(net.subsystem(sid).dim) for sid in ids}
    else:
        x = {sid: np.asarray(x0[sid], dtype=float).reshape(-1) for sid in ids}

    log = TrajectoryLog(ids=list(ids), states=[], inputs=[], disturbances=[],
                        member=[], residuals=[], nominal=nominal)

    def error_of(sid, xi, t):
        if nominal is None:
            return xi
        return xi - nominal.states[t][sid]

    def record_membership(t):
        flags, resids = {}, {}
        for sid in ids:
            err = error_of(sid, x[sid], t)
            r = float(membership_residuals(contracts[sid].rci_set,
                                           err[np.newaxis, :])[0])
            flags[sid] = r <= tol
            resids[sid] = r
        log.member.append(flags)
        log.residuals.append(resids)
        return flags, resids

    log.states.append({sid: x[sid].copy() for sid in ids})
    flags, resids = record_membership(0)
    bad = [sid for sid, ok in flags.items() if not ok]
    if bad:
        raise StateOutsideRci(
            f"initial state outside the invariant set for {bad} "
            f"(worst residual {max(resids[s] for s in bad):.3e})"
        )

    for t in range(steps):
        inputs, dists = {}, {}
        for sid in ids:
            err = error_of(sid, x[sid], t)
            step = invariance_control(contracts[sid], err, tol=tol)
            u = step.u
            if nominal is not None:
                u = u + nominal.inputs[t][sid]
            inputs[sid] = u
        for sid in ids:
            direction = error_of(sid, x[sid], t)
            dists[sid] = _disturbance_draw(net.subsystem(sid), rng,
                                           disturbance_mode, direction)
        new_x = {}
        for sid in ids:
            sub = net.subsystem(sid)
            nxt = sub.A @ x[sid] + sub.B @ inputs[sid] + dists[sid]
            for c in net.couplings_into(sid):
                if c.A is not None:
                    nxt = nxt + c.A @ x[c.from_id]
                if c.B is not None:
                    nxt = nxt + c.B @ inputs[c.from_id]
            new_x[sid] = nxt
        x = new_x
        log.inputs.append(inputs)
        log.disturbances.append(dists)
        log.states.append({sid: x[sid].copy() for sid in ids})
        flags, resids = record_membership(t + 1)
        bad = [sid for sid, ok in flags.items() if not ok]
        if bad:
            raise SimulationError(
                f"membership failed at step {t + 1} for {bad} "
                f"(worst residual {max(resids[s] for s in bad):.3e})",
                log,
            )
    return log
