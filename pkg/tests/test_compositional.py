import json
import math

import numpy as np
import pytest

from rcinet import (SweepState, Zonotope, contains_zonotope,
                    convergence_metric, coupling_disturbance, gen_rotation,
                    parse_network, reduce_box, synth_network, synth_single,
                    verify_one_step)
from conftest import CASE1_THETA, CASE1_X_BOUND, decoupled_scalar_doc


def strip_timings(doc):
    if isinstance(doc, dict):
        return {k: strip_timings(v) for k, v in doc.items()
                if not k.endswith("_seconds")}
    if isinstance(doc, list):
        return [strip_timings(v) for v in doc]
    return doc


# -- coupling disturbance -------------------------------------------------


def test_coupling_disturbance_no_neighbors_is_exogenous_set():
    net = parse_network(decoupled_scalar_doc())
    state = SweepState.initial(net)
    z = coupling_disturbance(net, "a", state)
    assert np.array_equal(z.generators, net.subsystem("a").Gd.generators)


def test_coupling_disturbance_single_identity_neighbor():
    doc = {
        "subsystems": [
            {"id": "a", "A": [[0.5, 0.0], [0.0, 0.5]], "B": [[1.0], [0.0]],
             "Gx": {"center": [0.0, 0.0], "generators": [[1.0, 0.0], [0.0, 1.0]]},
             "Gu": {"center": [0.0], "generators": [[1.0]]},
             "Gd": {"center": [0.0, 0.0], "generators": [[0.1, 0.0], [0.0, 0.1]]}},
            {"id": "b", "A": [[0.5, 0.0], [0.0, 0.5]], "B": [[1.0], [0.0]],
             "Gx": {"center": [0.0, 0.0], "generators": [[1.0, 0.0], [0.0, 1.0]]},
             "Gu": {"center": [0.0], "generators": [[1.0]]},
             "Gd": {"center": [0.0, 0.0], "generators": [[0.1, 0.0], [0.0, 0.1]]}},
        ],
        "couplings": [{"from": "b", "to": "a",
                       "A": [[1.0, 0.0], [0.0, 1.0]]}],
    }
    net = parse_network(doc)
    state = SweepState.initial(net)
    state.T["b"] = 0.5 * np.eye(2)
    z = coupling_disturbance(net, "a", state)
    assert np.allclose(z.generators,
                       np.hstack([0.5 * np.eye(2), 0.1 * np.eye(2)]))


def test_coupling_disturbance_case_study_chain_at_init():
    net = gen_rotation(theta=CASE1_THETA, x_bound=CASE1_X_BOUND)
    state = SweepState.initial(net)
    z = coupling_disturbance(net, "s2", state)
    # both neighbors contribute their full state boxes scaled by the chain
    # gain, then the exogenous set follows
    expected = np.hstack([
        0.1 * CASE1_X_BOUND * np.eye(2),
        0.1 * CASE1_X_BOUND * np.eye(2),
        0.4 * np.eye(2),
    ])
    assert np.allclose(z.generators, expected)
    boxed = reduce_box(z)
    assert np.allclose(np.diag(boxed.generators),
                       [0.2 * CASE1_X_BOUND + 0.4] * 2)


# -- convergence metric -----------------------------------------------------


def _state_with_radii(radii_by_id):
    T = {sid: np.diag(r) for sid, r in radii_by_id.items()}
    return SweepState(T=T, M={sid: np.zeros((1, 1)) for sid in radii_by_id},
                      sweep=0, radii={sid: np.asarray(r, dtype=float)
                                      for sid, r in radii_by_id.items()},
                      feasible={sid: True for sid in radii_by_id})


def test_metric_identical_states_is_zero():
    a = _state_with_radii({"a": [1.0, 2.0]})
    b = _state_with_radii({"a": [1.0, 2.0]})
    assert convergence_metric(a, b) == 0.0


def test_metric_halved_radius():
    a = _state_with_radii({"a": [2.0, 1.0], "b": [3.0]})
    b = _state_with_radii({"a": [1.0, 1.0], "b": [3.0]})
    assert convergence_metric(a, b) == pytest.approx(0.5)


def test_metric_mismatched_ids_rejected():
    with pytest.raises(ValueError):
        convergence_metric(_state_with_radii({"a": [1.0]}),
                           _state_with_radii({"b": [1.0]}))


# -- the sweep iteration ------------------------------------------------------


def test_decoupled_network_two_sweeps_and_matches_single(decoupled_bundle):
    report = decoupled_bundle.report
    assert report.converged
    assert report.sweeps == 2  # one content sweep plus one confirming sweep
    assert report.metric_history[1] == 0.0
    single = synth_single(0.5, 1.0, Zonotope.box([10.0]), Zonotope.box([10.0]),
                          Zonotope.box([1.0]))
    assert np.allclose(decoupled_bundle.contracts["a"].T, single.T)
    assert np.allclose(decoupled_bundle.contracts["a"].M, single.M)


def test_case_study_1_converges_inside_constraints(rotation_bundle):
    report = rotation_bundle.report
    assert report.converged
    assert report.sweeps <= 50
    for sub in rotation_bundle.net.subsystems:
        c = rotation_bundle.contracts[sub.id]
        assert contains_zonotope(c.rci_set, sub.Gx)
        assert contains_zonotope(c.action_set, sub.Gu)
        # strictly inside: the box radii leave a margin to the constraint
        assert np.all(c.rci_set.box_radii() < sub.Gx.box_radii() - 1e-3)


def test_case_study_1_soundness_oracle(rotation_bundle):
    report = verify_one_step(rotation_bundle.net, rotation_bundle.contracts,
                             samples=2000, seed=11)
    assert report.violations == 0
    assert report.worst_residual <= 1e-6


def test_nesting_across_sweeps(rotation_bundle):
    history = rotation_bundle.report.history
    assert len(history) >= 2
    for prev, nxt in zip(history, history[1:]):
        for sid in rotation_bundle.net.ids:
            inner_t = Zonotope(np.zeros(2), nxt.T[sid])
            outer_t = Zonotope(np.zeros(2), prev.T[sid])
            assert contains_zonotope(inner_t, outer_t)
            inner_m = Zonotope(np.zeros(2), nxt.M[sid])
            outer_m = Zonotope(np.zeros(2), prev.M[sid])
            assert contains_zonotope(inner_m, outer_m)


def test_metric_monotone_after_second_sweep(rotation_bundle):
    metrics = rotation_bundle.report.metric_history
    for earlier, later in zip(metrics[1:], metrics[2:]):
        assert later <= earlier + 1e-12


def test_boxed_disturbance_dominates_exact_coupling(rotation_bundle):
    contracts = rotation_bundle.contracts
    final = SweepState(
        T={sid: c.T for sid, c in contracts.items()},
        M={sid: c.M for sid, c in contracts.items()},
        sweep=rotation_bundle.report.sweeps,
        radii={sid: np.abs(c.T).sum(axis=1) for sid, c in contracts.items()},
        feasible={sid: True for sid in contracts},
    )
    for sid in rotation_bundle.net.ids:
        exact = coupling_disturbance(rotation_bundle.net, sid, final)
        assert contains_zonotope(exact, reduce_box(exact))


def test_final_residuals_reported_and_small(rotation_bundle):
    finals = rotation_bundle.report.final_residuals
    assert set(finals) == set(rotation_bundle.net.ids)
    assert max(finals.values()) <= 5e-7


def test_infeasible_reports_offender_and_margins():
    # crank the chain gain until the coupling overwhelms the input budget
    net = gen_rotation(theta=CASE1_THETA, beta=0.9, x_bound=2.0)
    contracts, report = synth_network(net)
    assert report.outcome == "infeasible"
    info = report.infeasible_at
    assert info["subsystem"] in net.ids
    assert info["sweep"] >= 1
    assert len(info["disturbance_box_radii"]) == 2
    assert len(info["state_constraint_radii"]) == 2
    assert "statuses" in info


def test_jacobi_mode_converges_and_is_sound():
    net = gen_rotation(theta=CASE1_THETA, x_bound=CASE1_X_BOUND)
    contracts, report = synth_network(net, mode="jacobi")
    assert report.converged
    check = verify_one_step(net, contracts, samples=1500, seed=5)
    assert check.violations == 0


def test_gauss_seidel_report_is_deterministic():
    net = gen_rotation(theta=CASE1_THETA, x_bound=CASE1_X_BOUND)
    docs = []
    for _ in range(2):
        contracts, report = synth_network(net)
        docs.append(json.dumps({
            "contracts": {sid: c.to_json_dict() for sid, c in contracts.items()},
            "report": strip_timings(report.to_json_dict()),
        }, sort_keys=True))
    assert docs[0] == docs[1]


def test_jacobi_report_deterministic_across_thread_counts():
    net = gen_rotation(theta=CASE1_THETA, x_bound=CASE1_X_BOUND)
    docs = []
    for threads in (1, 3):
        contracts, report = synth_network(net, mode="jacobi", threads=threads)
        docs.append(json.dumps({
            "contracts": {sid: c.to_json_dict() for sid, c in contracts.items()},
            "report": strip_timings(report.to_json_dict()),
        }, sort_keys=True))
    assert docs[0] == docs[1]


def test_init_scale_recovers_wide_constraint_cases():
    # with the full 10-box the first sweep is infeasible; scaled initial
    # iterates act like the scalar-multiple initialization and succeed
    net = gen_rotation(theta=CASE1_THETA, x_bound=10.0)
    _, report = synth_network(net)
    assert report.outcome == "infeasible"
    contracts, report = synth_network(net, init_scale=0.15)
    assert report.converged
    check = verify_one_step(net, contracts, samples=1000, seed=2)
    assert check.violations == 0


def test_thread_env_var_bounds_jacobi_workers(monkeypatch):
    monkeypatch.setenv("RCI_THREADS", "2")
    net = gen_rotation(theta=CASE1_THETA, x_bound=CASE1_X_BOUND)
    contracts, report = synth_network(net, mode="jacobi")
    assert report.converged
    check = verify_one_step(net, contracts, samples=500, seed=3)
    assert check.violations == 0


def test_invalid_options_rejected(decoupled_bundle):
    with pytest.raises(ValueError):
        synth_network(decoupled_bundle.net, mode="chaotic")
    with pytest.raises(ValueError):
        synth_network(decoupled_bundle.net, init_scale=0.0)
