import io
import json
import math
import os

import pytest

from rcinet.cli import main
from conftest import CASE1_THETA, CASE1_X_BOUND

THETA = repr(CASE1_THETA)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def strip_timings(doc):
    if isinstance(doc, dict):
        return {k: strip_timings(v) for k, v in doc.items()
                if not k.endswith("_seconds")}
    if isinstance(doc, list):
        return [strip_timings(v) for v in doc]
    return doc


@pytest.fixture()
def rotation_files(tmp_path, capsys):
    net = tmp_path / "net.json"
    out = tmp_path / "out.json"
    code, _, _ = run(capsys, "gen", "rotation", "--theta", THETA,
                     "--x-bound", repr(CASE1_X_BOUND), "-o", str(net))
    assert code == 0
    code, _, _ = run(capsys, "synth", "--input", str(net),
                     "--output", str(out))
    assert code == 0
    return net, out


def test_gen_rotation_writes_parseable_network(tmp_path, capsys):
    path = tmp_path / "net.json"
    code, _, _ = run(capsys, "gen", "rotation", "--theta", "0.5",
                     "-o", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert len(doc["subsystems"]) == 3


def test_gen_rotation_requires_theta(capsys):
    code, _, _ = run(capsys, "gen", "rotation")
    assert code == 2


def test_gen_random_field_requires_seed(capsys):
    code, _, _ = run(capsys, "gen", "random-field", "--n", "4", "--R", "5",
                     "--lambda", "0.01")
    assert code == 2


def test_synth_pipeline_and_verify(rotation_files, capsys):
    net, out = rotation_files
    doc = json.loads(out.read_text())
    assert doc["report"]["outcome"] == "converged"
    assert set(doc["contracts"]) == {"s1", "s2", "s3"}
    code, stdout, _ = run(capsys, "verify", "--network", str(net),
                          "--contracts", str(out), "--samples", "500",
                          "--seed", "7", "--json")
    assert code == 0
    verdict = json.loads(stdout)
    assert verdict["passed"] is True and verdict["violations"] == 0


def test_verify_requires_seed(rotation_files, capsys):
    net, out = rotation_files
    code, _, _ = run(capsys, "verify", "--network", str(net),
                     "--contracts", str(out))
    assert code == 2


def test_json_mode_emits_single_document(rotation_files, capsys, tmp_path):
    net, _ = rotation_files
    code, stdout, _ = run(capsys, "synth", "--input", str(net), "--json")
    assert code == 0
    doc = json.loads(stdout)  # raises if more than one document
    assert "contracts" in doc and "report" in doc


def test_synth_infeasible_exits_one_with_json_error(tmp_path, capsys):
    net = tmp_path / "net.json"
    run(capsys, "gen", "rotation", "--theta", THETA, "--beta", "0.9",
        "--x-bound", "2.0", "-o", str(net))
    code, stdout, _ = run(capsys, "synth", "--input", str(net), "--json")
    assert code == 1
    err = json.loads(stdout)
    assert err["error"]["type"] == "failure"
    assert "infeasible_at" in err["error"]


def test_usage_error_on_malformed_network(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"subsystems\": []}")
    code, _, stderr = run(capsys, "synth", "--input", str(bad))
    assert code == 2
    assert "subsystems" in stderr


def test_simulate_writes_csv_and_summary(rotation_files, tmp_path, capsys):
    net, out = rotation_files
    csv_path = tmp_path / "traj.csv"
    code, stdout, _ = run(capsys, "simulate", "--network", str(net),
                          "--contracts", str(out), "--steps", "20",
                          "--seed", "3", "-o", str(csv_path), "--json")
    assert code == 0
    summary = json.loads(stdout)
    assert summary["all_members"] is True
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].startswith("t,subsystem,x0,x1,u0,u1,d0,d1,member")
    assert len(lines) == 1 + 21 * 3


def test_plot_data_writes_csv_and_figures(rotation_files, tmp_path, capsys):
    net, out = rotation_files
    plot_dir = tmp_path / "plots"
    code, stdout, _ = run(capsys, "plot-data", "--network", str(net),
                          "--contracts", str(out), "--out-dir",
                          str(plot_dir), "--json")
    assert code == 0
    doc = json.loads(stdout)
    assert len(doc["exports"]) == 3
    for entry in doc["exports"]:
        assert os.path.exists(entry["vertices_csv"])
        assert os.path.exists(entry["figure"])
        header, *rows = open(entry["vertices_csv"]).read().strip().splitlines()
        assert header == "x,y"
        assert len(rows) == entry["vertex_count"] >= 4


def test_plot_data_no_figures_flag(rotation_files, tmp_path, capsys):
    net, out = rotation_files
    plot_dir = tmp_path / "plots2"
    code, stdout, _ = run(capsys, "plot-data", "--network", str(net),
                          "--contracts", str(out), "--out-dir",
                          str(plot_dir), "--no-figures", "--json")
    assert code == 0
    doc = json.loads(stdout)
    assert all("figure" not in e for e in doc["exports"])


def test_hvac_nominal_tube_pipeline(tmp_path, capsys):
    net = tmp_path / "hvac.json"
    nominal = tmp_path / "nominal.json"
    out = tmp_path / "contracts.json"
    csv_path = tmp_path / "tube.csv"
    figures = tmp_path / "figs"
    assert run(capsys, "gen", "hvac", "-o", str(net), "--nominal-out",
               str(nominal))[0] == 0
    assert run(capsys, "synth", "--input", str(net), "--output",
               str(out))[0] == 0
    code, stdout, _ = run(capsys, "simulate", "--network", str(net),
                          "--contracts", str(out), "--steps", "96",
                          "--seed", "5", "--disturbance-mode", "corner",
                          "--nominal", str(nominal), "-o", str(csv_path),
                          "--figure-dir", str(figures), "--json")
    assert code == 0
    summary = json.loads(stdout)
    assert summary["tube"] is True
    lo, hi = summary["input_range"]
    assert 0.0 <= lo <= hi <= 9.0
    assert sorted(os.listdir(figures)) == [
        f"room{i}_trajectory.png" for i in range(1, 7)
    ]


def test_synth_single_cross_check(tmp_path, capsys):
    net = tmp_path / "net.json"
    run(capsys, "gen", "rotation", "--theta", THETA, "--n", "2",
        "--x-bound", repr(CASE1_X_BOUND), "-o", str(net))
    code, stdout, _ = run(capsys, "synth-single", "--input", str(net),
                          "--cross-check", "--json")
    assert code == 0
    doc = json.loads(stdout)
    assert doc["contract"]["k"] >= 1
    cc = doc["cross_check"]
    assert cc["compositional_outcome"] == "converged"
    assert cc["monolithic_box_volume"] > 0
    assert cc["compositional_box_volume"] > 0


def test_bench_writes_csv_and_figure(tmp_path, capsys):
    out_dir = tmp_path / "bench"
    code, stdout, _ = run(capsys, "bench", "--sizes", "8", "--lambdas",
                          "0.001", "--radii", "5", "--seed", "1",
                          "--out-dir", str(out_dir), "--json")
    assert code == 0
    doc = json.loads(stdout)
    assert doc["rows"][0]["outcome"] == "converged"
    lines = (out_dir / "bench.csv").read_text().strip().splitlines()
    assert lines[0] == "states,lambda,radius,sweeps,outcome,total_seconds"
    assert len(lines) == 2
    assert (out_dir / "bench.png").exists()


def test_stdin_pipeline(monkeypatch, capsys, tmp_path):
    net = tmp_path / "net.json"
    run(capsys, "gen", "random-field", "--n", "4", "--R", "30",
        "--lambda", "0.001", "--seed", "5", "-o", str(net))
    monkeypatch.setattr("sys.stdin", io.StringIO(net.read_text()))
    code, stdout, _ = run(capsys, "synth", "--bench")
    assert code == 0
    doc = json.loads(stdout)
    assert doc["report"]["outcome"] == "converged"
    assert "contracts" not in doc  # bench mode reports timings only


def test_synth_decoupled_scalar_example(tmp_path, capsys):
    net = tmp_path / "net.json"
    out = tmp_path / "out.json"
    net.write_text(json.dumps({
        "subsystems": [{
            "id": "a", "A": [[0.5]], "B": [[1.0]],
            "Gx": {"center": [0.0], "generators": [[10.0]]},
            "Gu": {"center": [0.0], "generators": [[10.0]]},
            "Gd": {"center": [0.0], "generators": [[1.0]]},
        }],
        "couplings": [],
    }))
    code, _, _ = run(capsys, "synth", "--input", str(net), "--output",
                     str(out), "--tol", "1e-4")
    assert code == 0
    contract = json.loads(out.read_text())["contracts"]["a"]
    assert contract["T"] == [[1.0]]
    assert contract["M"] == [[-0.5]]


def test_pipeline_all_three_scenarios(tmp_path, capsys):
    # the generate -> synthesize -> verify -> simulate chain must hold up
    # for every bundled scenario
    recipes = {
        "rotation": ["gen", "rotation", "--theta", THETA, "--x-bound",
                     repr(CASE1_X_BOUND)],
        "field": ["gen", "random-field", "--n", "6", "--R", "35",
                  "--lambda", "0.002", "--seed", "2"],
        "hvac": ["gen", "hvac"],
    }
    for name, recipe in recipes.items():
        net = tmp_path / f"{name}.json"
        out = tmp_path / f"{name}_contracts.json"
        csv_path = tmp_path / f"{name}_traj.csv"
        assert run(capsys, *recipe, "-o", str(net))[0] == 0
        assert run(capsys, "synth", "--input", str(net), "--output",
                   str(out))[0] == 0
        assert run(capsys, "verify", "--network", str(net), "--contracts",
                   str(out), "--samples", "300", "--seed", "9")[0] == 0
        assert run(capsys, "simulate", "--network", str(net), "--contracts",
                   str(out), "--steps", "15", "--seed", "4", "-o",
                   str(csv_path))[0] == 0
        assert csv_path.read_text().startswith("t,subsystem,")


def test_bad_numeric_options_are_usage_errors(rotation_files, capsys):
    net, out = rotation_files
    assert run(capsys, "synth", "--input", str(net), "--tol", "-1")[0] == 2
    assert run(capsys, "verify", "--network", str(net), "--contracts",
               str(out), "--samples", "0", "--seed", "1")[0] == 2
    assert run(capsys, "simulate", "--network", str(net), "--contracts",
               str(out), "--steps", "0", "--seed", "1")[0] == 2


def test_seeded_pipeline_repeats_byte_identical(tmp_path, capsys):
    docs = []
    for attempt in ("one", "two"):
        net = tmp_path / f"net_{attempt}.json"
        out = tmp_path / f"out_{attempt}.json"
        run(capsys, "gen", "random-field", "--n", "6", "--R", "40",
            "--lambda", "0.005", "--seed", "11", "-o", str(net))
        run(capsys, "synth", "--input", str(net), "--output", str(out))
        code, stdout, _ = run(capsys, "verify", "--network", str(net),
                              "--contracts", str(out), "--samples", "200",
                              "--seed", "4", "--json")
        assert code == 0
        docs.append({
            "net": json.loads(net.read_text()),
            "result": strip_timings(json.loads(out.read_text())),
            "verify": json.loads(stdout),
        })
    assert json.dumps(docs[0], sort_keys=True) == \
        json.dumps(docs[1], sort_keys=True)
