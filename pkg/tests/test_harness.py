import csv
import json
import os

import numpy as np
import pytest
import yaml

from aggne import ComparisonError, ConfigError, harness
from aggne.cli import main

SMALL = """
name: small
game:
  kind: cournot
  n_agents: 5
  capacity: 5.0
  box: [0.0, 10.0]
  constants: exact
graph:
  topology: path
params:
  c: 2.0
  kappa: auto
  tau_inv: auto
  upsilon: auto
  alpha: auto
run:
  max_iter: 20000
  tol: 1.0e-6
  record_every: 50
baseline:
  nu: 5
  tau: 0.01
  mixing_eps: 0.4
  max_updates: 200
  record_every: 10
"""


def write(tmp_path, text, name="scn.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def mutate(text=SMALL, **sections):
    doc = yaml.safe_load(text)
    for key, val in sections.items():
        if val is None:
            doc.pop(key, None)
        elif isinstance(val, dict) and isinstance(doc.get(key), dict):
            doc[key].update(val)
        else:
            doc[key] = val
    return doc


def test_bundled_scenarios_load():
    for name in ("star20", "ring20", "ring20_x10", "star20_baseline", "ring20_baseline"):
        scn = harness.load_scenario(f"{name}.cfg")
        assert scn.name == name
        assert scn.config["game"]["n_agents"] == 20
        assert not scn.has_auto()


def test_bundled_star_contents():
    scn = harness.load_scenario("star20")
    p = scn.config["params"]
    assert p["c"] == 0.5 and p["tau_inv"] == 2000.0 and p["delta"] == 300.0


@pytest.mark.parametrize("missing", ["game", "graph", "params"])
def test_missing_section(missing):
    with pytest.raises(ConfigError) as info:
        harness.validate_config(mutate(**{missing: None}))
    assert info.value.key == missing


@pytest.mark.parametrize("doc, key", [
    (mutate(extra=1), "extra"),
    (mutate(game={"color": "red"}), "game.color"),
    (mutate(game={"kind": "bertrand"}), "game.kind"),
    (mutate(game={"n_agents": 1}), "game.n_agents"),
    (mutate(graph={"topology": "torus"}), "graph.topology"),
    (mutate(params={"c": -1.0}), "params.c"),
    (mutate(params={"tau": 0.001}), "params.tau"),
    (mutate(run={"max_iter": 0}), "run.max_iter"),
    (mutate(baseline={"nu": 0}), "baseline.nu"),
])
def test_invalid_keys_are_named(doc, key):
    with pytest.raises(ConfigError) as info:
        harness.validate_config(doc)
    assert info.value.key.startswith(key)


def test_edge_list_is_one_based():
    doc = mutate(graph={"topology": "edge_list", "edges": [[1, 2], [2, 3], [3, 4], [4, 5]]})
    g = harness.build_comm_graph(harness.Scenario(harness.validate_config(doc)))
    assert g.edges == ((0, 1), (1, 2), (2, 3), (3, 4))
    with pytest.raises(ConfigError):
        harness.validate_config(mutate(graph={"topology": "edge_list", "edges": [[0, 1]]}))


def test_bad_yaml(tmp_path):
    with pytest.raises(ConfigError):
        harness.load_scenario(write(tmp_path, "game: [unclosed\n"))


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        harness.load_scenario("/nonexistent/nothing.cfg")


def test_auto_resolution():
    scn = harness.Scenario(harness.validate_config(yaml.safe_load(SMALL)))
    assert scn.has_auto()
    report, params = harness.certify_scenario(scn)
    assert report.passed
    np.testing.assert_allclose(params.tau, report.tau_max)


@pytest.fixture(scope="module")
def small_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    scn = harness.Scenario(harness.validate_config(yaml.safe_load(SMALL)))
    return harness.run_scenario(scn, out_dir=str(out)), out


def test_bundle_files(small_bundle):
    bundle, out = small_bundle
    assert bundle.ok and bundle.exit_code() == 0
    names = set(os.listdir(out))
    assert {"resolved.cfg", "summary.json", "errors.json", "certificate.json", "reference.json",
            "verify.json", "trace_algorithm.csv", "actions_algorithm.csv",
            "trace_baseline.csv", "actions_baseline.csv"} <= names
    assert all(c["passed"] for c in bundle.verification)


def test_resolved_config_reproduces_run(small_bundle, tmp_path):
    bundle, out = small_bundle
    scn = harness.load_scenario(str(out / "resolved.cfg"))
    assert not scn.has_auto()
    harness.run_scenario(scn, out_dir=str(tmp_path))
    for f in ("trace_algorithm.csv", "actions_algorithm.csv", "trace_baseline.csv",
              "summary.json"):
        assert (tmp_path / f).read_text() == (out / f).read_text()


def test_summary_recomputable_from_csv(small_bundle):
    bundle, out = small_bundle
    summary = json.loads((out / "summary.json").read_text())
    with open(out / "trace_algorithm.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    last = rows[-1]
    alg = summary["algorithm"]
    assert alg["iterations"] == int(last["iter"])
    assert alg["comm_rounds"] == 2 * int(last["iter"])
    assert alg["final_kkt_residual"] == float(last["kkt_residual"])
    hit = [int(r["iter"]) for r in rows if float(r["normalized_error_pct"]) < 1.0]
    assert alg["iterations_to_1pct"] == hit[0]
    with open(out / "trace_baseline.csv", newline="") as fh:
        base = [float(r["normalized_error_pct"]) for r in csv.DictReader(fh)]
    tail = base[-int(np.ceil(0.1 * len(base))):]
    assert summary["baseline"]["plateau_pct"] == pytest.approx(np.mean(tail), rel=1e-12)


def test_actions_csv_matches_trace(small_bundle):
    bundle, out = small_bundle
    with open(out / "actions_algorithm.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) - 1 == len(bundle.traces["algorithm"].rows)
    assert rows[0][:3] == ["iter", "comm_round", "x1"]
    assert int(rows[-1][1]) == 2 * int(rows[-1][0])
    np.testing.assert_array_equal([float(v) for v in rows[-1][2:]],
                                  bundle.traces["algorithm"].actions[-1])


def test_reference_json(small_bundle):
    _, out = small_bundle
    ref = json.loads((out / "reference.json").read_text())
    assert sum(ref["x"]) == pytest.approx(5.0, abs=1e-8)
    assert ref["active_set_max_abs_diff"] <= 1e-8


def test_compare_self_zero_delta(small_bundle, tmp_path):
    _, out = small_bundle
    comp = harness.compare([str(out), str(out)])
    assert len(comp.labels) == 4 and len(set(comp.labels)) == 4
    np.testing.assert_array_equal(comp.errors[:, 0], comp.errors[:, 2])
    assert all(s["delta_final_error_pct"] == 0.0 for s in comp.summary[::2])
    text = comp.to_csv(str(tmp_path / "cmp.csv"))
    assert text.splitlines()[0].startswith("comm_round,")


def test_compare_step_hold_alignment(small_bundle):
    _, out = small_bundle
    b = harness.load_bundle(str(out))
    comp = harness.compare([b, b])
    rounds, err = b.series["baseline"]
    j = comp.labels.index(f"{b.label}:baseline")
    for r, v in zip(comp.rounds[::37], comp.errors[::37, j]):
        idx = np.searchsorted(rounds, r, side="right") - 1
        assert v == err[idx]


def test_compare_errors(small_bundle, tmp_path):
    _, out = small_bundle
    with pytest.raises(ComparisonError):
        harness.compare([str(out)])
    other = harness.Scenario(harness.validate_config(mutate(game={"capacity": 4.0})))
    harness.run_scenario(other, out_dir=str(tmp_path / "other"))
    with pytest.raises(ComparisonError):
        harness.compare([str(out), str(tmp_path / "other")])


def test_stage_errors_are_recorded(tmp_path):
    doc = mutate(params={"c": 0.01})
    bundle = harness.run_scenario(harness.Scenario(harness.validate_config(doc)))
    assert bundle.errors[0]["stage"] == "certify"
    assert bundle.exit_code() == 2


# ---------------------------------------------------------------- CLI

def test_cli_certify_exit_codes(capsys):
    assert main(["certify", "star20"]) == 0
    out = capsys.readouterr().out
    assert "passed: true" in out
    assert main(["certify", "ring20_x10"]) == 2


def test_cli_config_error(tmp_path, capsys):
    assert main(["certify", write(tmp_path, "game: {kind: cournot}\n")]) == 1
    assert "configuration error" in capsys.readouterr().err
    assert main(["certify", str(tmp_path / "missing.cfg")]) == 1


def test_cli_numerical_failure(tmp_path, capsys):
    doc = mutate(params={"kappa": None, "upsilon": None, "alpha": None, "tau_inv": None})
    doc["params"] = {"c": 2.0, "delta": 1.0, "kappa": 1.0, "tau": 100.0, "upsilon": 100.0,
                     "alpha": 100.0}
    doc["run"]["x0"] = [0.0, 2.5, 5.0, 7.5, 10.0]
    doc["run"]["tol"] = None
    doc.pop("baseline")
    path = write(tmp_path, yaml.safe_dump(doc))
    assert main(["run", path, "-o", str(tmp_path / "out")]) == 3
    errors = json.loads((tmp_path / "out" / "errors.json").read_text())
    assert errors[0]["type"] == "NumericalError"


def test_cli_run_and_compare(tmp_path, capsys):
    path = write(tmp_path, SMALL)
    assert main(["run", path, "-o", str(tmp_path / "a")]) == 0
    assert main(["run", path, "-o", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b"),
                 "-o", str(tmp_path / "cmp.csv")]) == 0
    assert "rounds_to_1pct" in capsys.readouterr().out
    assert (tmp_path / "cmp.csv").exists()


def test_cli_verify_table(capsys):
    assert main(["verify", "star20"]) == 0
    out = capsys.readouterr().out
    assert "fb_inclusion_fixed_point" in out and "FAIL" not in out


def test_cli_reference_and_spectrum(capsys):
    assert main(["reference", "star20"]) == 0
    ref = yaml.safe_load(capsys.readouterr().out)
    assert ref["lambda"][0] == pytest.approx(49.8, abs=1e-4)
    assert main(["spectrum", "ring20"]) == 0
    spectral = yaml.safe_load(capsys.readouterr().out)
    assert spectral["lambda_max"] == pytest.approx(4.0, abs=1e-9)
    assert spectral["max_degree"] == 2.0
