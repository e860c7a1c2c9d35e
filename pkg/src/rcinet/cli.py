"""Command-line surface: scenario generation, synthesis, verification,
simulation, plot-data export, and benchmarking.

Exit codes: 0 success, 1 infeasibility or verification/simulation failure,
2 usage errors.  With --json exactly one JSON document goes to stdout and
all logging goes to stderr; randomized subcommands require --seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import plots
from .compositional import synth_network
from .network import NetworkError, aggregate, parse_network, serialize_network
from .runtime import (SimulationError, StateOutsideRci,
                      load_nominal_trajectory, simulate_closed_loop,
                      verify_one_step)
from .scenarios import (gen_hvac, gen_random_field, gen_rotation,
                        make_hvac_setback_nominal)
from .single import AllKInfeasible, RciContract, synth_single
from .zonotope import vertices_2d

log = logging.getLogger("rci")


class CliUsageError(Exception):
    pass


class CliFailure(Exception):
    """Infeasibility or a failed verification/simulation (exit code 1)."""

    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload or {}


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    try:
        with open(path, "r") as fh:
            return fh.read()
    except OSError as exc:
        raise CliUsageError(f"cannot read {path}: {exc}") from exc


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def _emit_json(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")


def _load_network(path: str | None):
    try:
        return parse_network(_read_text(path))
    except NetworkError as exc:
        raise CliUsageError(f"invalid network document: {exc}") from exc


def _load_contracts(path: str | None) -> dict[str, RciContract]:
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CliUsageError(f"invalid contracts JSON: {exc}") from exc
    table = doc.get("contracts", doc)
    if not isinstance(table, dict) or not table:
        raise CliUsageError("contracts document holds no contracts")
    try:
        return {sid: RciContract.from_json_dict(c) for sid, c in table.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise CliUsageError(f"malformed contract entry: {exc}") from exc


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliUsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _csv_ints(text: str) -> list[int]:
    return [int(v) for v in _csv_floats(text)]


# -- subcommand implementations -----------------------------------------


def _cmd_gen(args) -> int:
    if args.variant == "rotation":
        net = gen_rotation(
            theta=args.theta,
            n_subsystems=args.n,
            alpha=args.alpha,
            beta=args.beta,
            u_bound=args.u_bound,
            d_bound=args.d_bound,
            x_bound=args.x_bound,
        )
    elif args.variant == "random-field":
        net = gen_random_field(
            n_subsystems=args.n,
            radius=args.radius,
            lam=args.lam,
            seed=args.seed,
            field_size=args.field_size,
        )
    else:
        adjacency = None
        if args.adjacency:
            try:
                adjacency = [
                    tuple(int(v) for v in pair.split("-"))
                    for pair in args.adjacency.split(",")
                ]
            except ValueError as exc:
                raise CliUsageError(
                    f"adjacency must look like '6-1,6-2', got {args.adjacency!r}"
                ) from exc
        net = gen_hvac(
            adjacency=adjacency,
            delta_tau=args.delta_tau,
            heat_capacity=args.heat_capacity,
            r_wall=args.r_wall,
            r_out=args.r_out,
            u_box=args.u_box,
            d_box=args.d_box,
            x_box=args.x_box,
        )
        if args.nominal_out:
            doc = make_hvac_setback_nominal(
                net,
                steps=args.nominal_steps,
                low_input=args.night,
                high_input=args.day,
                day_start=args.day_start,
                day_end=args.day_end,
            )
            _write_text(args.nominal_out, json.dumps(doc, sort_keys=True) + "\n")
            log.info("wrote nominal trajectory to %s", args.nominal_out)
    _write_text(args.output, serialize_network(net) + "\n")
    return 0


def _report_summary(report) -> str:
    lines = [f"{report.outcome} after {report.sweeps} sweeps "
             f"({report.total_seconds:.3f} s, mode {report.mode})"]
    if report.metric_history:
        lines.append("metric history: "
                     + ", ".join(f"{m:.3e}" for m in report.metric_history))
    if report.per_sweep:
        for rec in report.per_sweep[-1]:
            lines.append(
                f"  {rec.id}: k={rec.k} objective={rec.objective:.6g} "
                f"residual={rec.residual:.2e}"
            )
    if report.infeasible_at is not None:
        info = report.infeasible_at
        lines.append(
            f"  infeasible at {info['subsystem']} in sweep {info['sweep']}: "
            f"disturbance box {info['disturbance_box_radii']} vs state radii "
            f"{info['state_constraint_radii']}, input radii "
            f"{info['input_constraint_radii']}"
        )
    return "\n".join(lines)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise CliUsageError(message)


def _cmd_synth(args) -> int:
    _require(args.tol > 0.0, "--tol must be positive")
    _require(args.max_sweeps >= 1, "--max-sweeps must be at least 1")
    _require(args.k_max is None or args.k_max >= 1, "--k-max must be at least 1")
    net = _load_network(args.input)
    contracts, report = synth_network(
        net,
        tol=args.tol,
        max_sweeps=args.max_sweeps,
        k_max=args.k_max,
        mode=args.mode,
        init_scale=args.init_scale,
    )
    result = {
        "contracts": {sid: c.to_json_dict() for sid, c in contracts.items()},
        "report": report.to_json_dict(),
    }
    if args.output:
        _write_text(args.output, json.dumps(result, sort_keys=True) + "\n")
    if not report.converged:
        raise CliFailure(_report_summary(report), payload=result["report"])
    if args.bench:
        doc = {"report": result["report"]}
        _emit_json(doc)
    elif args.json:
        _emit_json(result)
    elif not args.output:
        _write_text(None, json.dumps(result, sort_keys=True) + "\n")
    else:
        print(_report_summary(report))
    return 0


def _box_volume_proxy(generators: np.ndarray) -> float:
    radii = np.abs(generators).sum(axis=1)
    return float(np.prod(radii))


def _cmd_synth_single(args) -> int:
    net = _load_network(args.input)
    A, B, Gx, Gu, Gd = aggregate(net)
    try:
        contract = synth_single(A, B, Gx, Gu, Gd, k_start=args.k_start,
                                k_max=args.k_max)
    except AllKInfeasible as exc:
        raise CliFailure(
            f"monolithic synthesis infeasible: {exc}",
            payload={"statuses": {str(k): s.value for k, s in exc.statuses.items()}},
        ) from exc
    result: dict = {"contract": contract.to_json_dict()}
    if args.cross_check:
        comp_contracts, report = synth_network(net, init_scale=args.init_scale)
        result["cross_check"] = {
            "compositional_outcome": report.outcome,
            "compositional_sweeps": report.sweeps,
            "monolithic_box_volume": _box_volume_proxy(contract.T),
            "compositional_box_volume": float(np.prod([
                np.prod(np.abs(c.T).sum(axis=1))
                for c in comp_contracts.values()
            ])) if report.converged else None,
            "compositional_contracts": {
                sid: c.to_json_dict() for sid, c in comp_contracts.items()
            },
        }
    if args.output:
        _write_text(args.output, json.dumps(result, sort_keys=True) + "\n")
    if args.json or not args.output:
        _emit_json(result)
    else:
        print(f"feasible at k={contract.k}, objective {contract.objective:.6g}, "
              f"residual {contract.residual:.2e}")
    return 0


def _cmd_verify(args) -> int:
    _require(args.samples >= 1, "--samples must be at least 1")
    _require(args.tol > 0.0, "--tol must be positive")
    net = _load_network(args.network)
    contracts = _load_contracts(args.contracts)
    report = verify_one_step(
        net,
        contracts,
        samples=args.samples,
        seed=args.seed,
        tol=args.tol,
        independent_inputs=args.independent_inputs,
    )
    doc = report.to_json_dict()
    if not report.passed:
        raise CliFailure(
            f"{report.violations} invariance violations "
            f"(worst residual {report.worst_residual:.3e})",
            payload=doc,
        )
    if args.json:
        _emit_json(doc)
    else:
        print(
            f"ok: {report.samples} uniform + {report.corner_draws} corner draws, "
            f"0 violations, worst residual {report.worst_residual:.3e}"
        )
        if report.independent is not None:
            verdict = "pass" if report.independent["passed"] else "FAIL"
            print(
                f"independent-input check: {verdict} "
                f"({report.independent['violations']} violations, worst "
                f"{report.independent['worst_residual']:.3e})"
            )
    return 0


def _cmd_simulate(args) -> int:
    _require(args.steps >= 1, "--steps must be at least 1")
    _require(args.tol > 0.0, "--tol must be positive")
    net = _load_network(args.network)
    contracts = _load_contracts(args.contracts)
    nominal = None
    if args.nominal:
        try:
            nominal = load_nominal_trajectory(
                json.loads(_read_text(args.nominal)), net
            )
        except (json.JSONDecodeError, ValueError) as exc:
            raise CliUsageError(f"invalid nominal trajectory: {exc}") from exc
    try:
        tlog = simulate_closed_loop(
            net,
            contracts,
            steps=args.steps,
            seed=args.seed,
            disturbance_mode=args.disturbance_mode,
            nominal=nominal,
            tol=args.tol,
        )
    except (SimulationError, StateOutsideRci) as exc:
        raise CliFailure(str(exc)) from exc
    if args.output:
        _write_text(args.output, tlog.to_csv())
    if args.figure_dir:
        os.makedirs(args.figure_dir, exist_ok=True)
        for sid in tlog.ids:
            radii = contracts[sid].rci_set.box_radii()
            plots.save_trajectory_figure(
                os.path.join(args.figure_dir, f"{sid}_trajectory.png"),
                tlog, sid, tube_radii=radii if nominal is not None else None,
            )
    u_min = min(float(np.min(u)) for row in tlog.inputs for u in row.values())
    u_max = max(float(np.max(u)) for row in tlog.inputs for u in row.values())
    worst = max(max(r.values()) for r in tlog.residuals)
    summary = {
        "steps": tlog.steps,
        "subsystems": tlog.ids,
        "disturbance_mode": args.disturbance_mode,
        "tube": nominal is not None,
        "all_members": True,
        "worst_membership_residual": worst,
        "input_range": [u_min, u_max],
    }
    if args.json:
        _emit_json(summary)
    elif not args.output:
        _write_text(None, tlog.to_csv())
    else:
        print(
            f"ok: {tlog.steps} steps, membership held everywhere "
            f"(worst residual {worst:.3e}), inputs in "
            f"[{u_min:.3f}, {u_max:.3f}]"
        )
    return 0


def _cmd_plot_data(args) -> int:
    net = _load_network(args.network)
    contracts = _load_contracts(args.contracts)
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for sub in net.subsystems:
        if sub.id not in contracts:
            raise CliUsageError(f"no contract for subsystem {sub.id!r}")
        if sub.dim != 2:
            log.info("skipping %s: vertex export needs 2-D states", sub.id)
            continue
        verts = vertices_2d(contracts[sub.id].rci_set)
        csv_path = os.path.join(args.out_dir, f"{sub.id}_vertices.csv")
        with open(csv_path, "w") as fh:
            fh.write("x,y\n")
            for vx, vy in verts:
                fh.write(f"{vx!r},{vy!r}\n")
        entry = {"subsystem": sub.id, "vertices_csv": csv_path,
                 "vertex_count": int(verts.shape[0])}
        if not args.no_figures:
            fig_path = os.path.join(args.out_dir, f"{sub.id}_set.png")
            plots.save_set_figure(fig_path, sub.id, verts,
                                  constraint_vertices=vertices_2d(sub.Gx))
            entry["figure"] = fig_path
        written.append(entry)
    if not written:
        raise CliUsageError("no 2-D subsystems to export")
    doc = {"out_dir": args.out_dir, "exports": written}
    if args.json:
        _emit_json(doc)
    else:
        for entry in written:
            print(f"{entry['subsystem']}: {entry['vertices_csv']}"
                  + (f", {entry['figure']}" if "figure" in entry else ""))
    return 0


def _cmd_bench(args) -> int:
    rows = []
    for states in args.sizes:
        if states % 2:
            raise CliUsageError("aggregate sizes must be even (planar subsystems)")
        for lam in args.lambdas:
            for radius in args.radii:
                net = gen_random_field(
                    n_subsystems=states // 2,
                    radius=radius,
                    lam=lam,
                    seed=args.seed,
                )
                t0 = time.perf_counter()
                _, report = synth_network(
                    net, tol=args.tol, max_sweeps=args.max_sweeps
                )
                elapsed = time.perf_counter() - t0
                rows.append({
                    "states": states,
                    "lambda": lam,
                    "radius": radius,
                    "sweeps": report.sweeps,
                    "outcome": report.outcome,
                    "total_seconds": elapsed,
                })
                log.info(
                    "bench states=%d lambda=%g R=%g -> %s in %d sweeps, %.2f s",
                    states, lam, radius, report.outcome, report.sweeps, elapsed,
                )
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "bench.csv")
    with open(csv_path, "w") as fh:
        fh.write("states,lambda,radius,sweeps,outcome,total_seconds\n")
        for row in rows:
            fh.write(
                f"{row['states']},{row['lambda']!r},{row['radius']!r},"
                f"{row['sweeps']},{row['outcome']},{row['total_seconds']!r}\n"
            )
    fig_path = None
    if not args.no_figures:
        fig_path = os.path.join(args.out_dir, "bench.png")
        plots.save_bench_figure(fig_path, rows)
    doc = {"rows": rows, "csv": csv_path, **({"figure": fig_path} if fig_path else {})}
    if args.json:
        _emit_json(doc)
    else:
        for row in rows:
            print(
                f"states={row['states']} lambda={row['lambda']} "
                f"R={row['radius']}: {row['outcome']} in {row['sweeps']} "
                f"sweeps, {row['total_seconds']:.2f} s"
            )
    return 0


# -- argument parsing ----------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rci",
        description="Decentralized robust control invariant set toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true",
                       help="emit one JSON document on stdout")
        p.add_argument("-v", "--verbose", action="count", default=0)

    gen = sub.add_parser("gen", help="generate a scenario network document")
    gen_sub = gen.add_subparsers(dest="variant", required=True)

    rot = gen_sub.add_parser("rotation", help="coupled planar rotations chain")
    rot.add_argument("--theta", type=float, required=True,
                     help="rotation angle in radians (no canonical default)")
    rot.add_argument("--n", type=int, default=3)
    rot.add_argument("--alpha", type=float, default=0.8)
    rot.add_argument("--beta", type=float, default=0.1)
    rot.add_argument("--u-bound", type=float, default=0.65)
    rot.add_argument("--d-bound", type=float, default=0.4)
    rot.add_argument("--x-bound", type=float, default=10.0)
    rot.add_argument("--output", "-o")
    common(rot)

    fld = gen_sub.add_parser("random-field", help="random geometric network")
    fld.add_argument("--n", type=int, required=True,
                     help="number of subsystems (even)")
    fld.add_argument("--R", dest="radius", type=float, required=True)
    fld.add_argument("--lambda", dest="lam", type=float, required=True)
    fld.add_argument("--seed", type=int, required=True)
    fld.add_argument("--field-size", type=float, default=100.0)
    fld.add_argument("--output", "-o")
    common(fld)

    hv = gen_sub.add_parser("hvac", help="six-room thermal network")
    hv.add_argument("--adjacency",
                    help="undirected pairs like '6-1,6-2,6-3,6-5,5-4'")
    hv.add_argument("--delta-tau", type=float, default=900.0)
    hv.add_argument("--heat-capacity", type=float, default=1375.0)
    hv.add_argument("--r-wall", type=float, default=14.0)
    hv.add_argument("--r-out", type=float, default=50.0)
    hv.add_argument("--u-box", type=float, default=2.0)
    hv.add_argument("--d-box", type=float, default=1.6)
    hv.add_argument("--x-box", type=float, default=3.0)
    hv.add_argument("--nominal-out", help="also write a setback nominal")
    hv.add_argument("--nominal-steps", type=int, default=96)
    hv.add_argument("--night", type=float, default=2.5)
    hv.add_argument("--day", type=float, default=6.5)
    hv.add_argument("--day-start", type=int, default=28)
    hv.add_argument("--day-end", type=int, default=76)
    hv.add_argument("--output", "-o")
    common(hv)

    sy = sub.add_parser("synth", help="compositional decentralized synthesis")
    sy.add_argument("--input", "-i", help="network JSON (default stdin)")
    sy.add_argument("--output", "-o", help="write contracts+report JSON here")
    sy.add_argument("--tol", type=float, default=1e-4)
    sy.add_argument("--max-sweeps", type=int, default=50)
    sy.add_argument("--k-max", type=int, default=None)
    sy.add_argument("--mode", choices=["gauss-seidel", "jacobi"],
                    default="gauss-seidel")
    sy.add_argument("--init-scale", type=float, default=1.0,
                    help="scale the initial iterate sets (0, 1]")
    sy.add_argument("--bench", action="store_true",
                    help="emit the timing-focused report only")
    common(sy)

    ss = sub.add_parser("synth-single",
                        help="monolithic synthesis on the aggregated system")
    ss.add_argument("--input", "-i")
    ss.add_argument("--output", "-o")
    ss.add_argument("--k-start", type=int, default=1)
    ss.add_argument("--k-max", type=int, default=None)
    ss.add_argument("--init-scale", type=float, default=1.0)
    ss.add_argument("--cross-check", action="store_true",
                    help="also run the compositional path and compare box volumes")
    common(ss)

    ve = sub.add_parser("verify", help="Monte-Carlo one-step invariance check")
    ve.add_argument("--network", required=True)
    ve.add_argument("--contracts", required=True)
    ve.add_argument("--samples", type=int, default=10_000)
    ve.add_argument("--seed", type=int, required=True)
    ve.add_argument("--tol", type=float, default=1e-6)
    ve.add_argument("--independent-inputs", action="store_true")
    common(ve)

    si = sub.add_parser("simulate", help="closed-loop run under the controller")
    si.add_argument("--network", required=True)
    si.add_argument("--contracts", required=True)
    si.add_argument("--steps", type=int, default=100)
    si.add_argument("--seed", type=int, required=True)
    si.add_argument("--disturbance-mode",
                    choices=["uniform", "corner", "worst_axis"],
                    default="uniform")
    si.add_argument("--nominal", help="nominal trajectory JSON for tube mode")
    si.add_argument("--output", "-o", help="trajectory CSV path")
    si.add_argument("--figure-dir", help="also render per-subsystem figures")
    si.add_argument("--tol", type=float, default=1e-6)
    common(si)

    pd = sub.add_parser("plot-data",
                        help="per-subsystem polygon vertices (CSV + figures)")
    pd.add_argument("--network", required=True)
    pd.add_argument("--contracts", required=True)
    pd.add_argument("--out-dir", required=True)
    pd.add_argument("--no-figures", action="store_true")
    common(pd)

    be = sub.add_parser("bench", help="timing sweep over random-field sizes")
    be.add_argument("--sizes", type=_csv_ints, default=[100],
                    help="aggregate state dimensions, comma separated")
    be.add_argument("--lambdas", type=_csv_floats, default=[0.001])
    be.add_argument("--radii", type=_csv_floats, default=[10.0])
    be.add_argument("--seed", type=int, required=True)
    be.add_argument("--tol", type=float, default=1e-4)
    be.add_argument("--max-sweeps", type=int, default=50)
    be.add_argument("--out-dir", default="bench_out")
    be.add_argument("--no-figures", action="store_true")
    common(be)

    return parser


_HANDLERS = {
    "gen": _cmd_gen,
    "synth": _cmd_synth,
    "synth-single": _cmd_synth_single,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "plot-data": _cmd_plot_data,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _HANDLERS[args.command](args)
    except ValueError as exc:
        if getattr(args, "json", False):
            _emit_json({"error": {"type": "usage", "message": str(exc)}})
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 2
    except CliUsageError as exc:
        if getattr(args, "json", False):
            _emit_json({"error": {"type": "usage", "message": str(exc)}})
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 2
    except CliFailure as exc:
        if getattr(args, "json", False):
            _emit_json({"error": {"type": "failure", "message": str(exc),
                                  **exc.payload}})
        else:
            print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
