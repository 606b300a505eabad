import json
from pathlib import Path

import jsonschema
import pytest

from incompat import cli
from incompat.scenario import (
    SCENARIO_SCHEMA,
    ConfigError,
    bundled_scenarios,
    load_scenario,
    parse_scenario,
    read_scenario_text,
)

GOLDEN = Path(__file__).parent / "golden"


def shape(obj):
    """Type skeleton of a JSON document; lists collapse to their first item."""
    if isinstance(obj, dict):
        return {k: shape(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [shape(obj[0])] if obj else []
    if isinstance(obj, bool):
        return "bool"
    if isinstance(obj, (int, float)):
        return "number"
    return type(obj).__name__


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def check_golden(name, doc):
    path = GOLDEN / f"{name}.json"
    assert shape(doc) == json.loads(path.read_text()), f"report layout changed for {name}"


@pytest.mark.parametrize("name", bundled_scenarios())
def test_bundled_scenarios_valid(name):
    doc = json.loads(read_scenario_text(name))
    jsonschema.validate(doc, SCENARIO_SCHEMA)
    load_scenario(name)


def test_witness_genuine_mub(capsys):
    code, out, _ = run(capsys, "witness", "mub_qutrit.json", "--genuine", "1", "2", "3", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["R"] == pytest.approx(0.8415, abs=1e-4)
    check_golden("witness", doc)


def test_witness_pauli_pair(capsys):
    code, out, _ = run(capsys, "witness", "pauli.json", "--pair", "1", "2")
    assert code == 0
    assert json.loads(out)["R"] == pytest.approx(0.7071, abs=1e-4)


def test_witness_structure_and_certificate(capsys):
    code, out, _ = run(capsys, "witness", "pauli.json", "--structure", "--certificate")
    doc = json.loads(out)
    assert code == 0
    assert doc["mode"] == "structure"
    assert doc["R"] == pytest.approx(0.80474, abs=1e-4)
    assert len(doc["certificate"]["patterns"]) == 3
    code, out, _ = run(capsys, "witness", "pauli.json", "--structure", "full(1,2,3)")
    assert json.loads(out)["R"] == pytest.approx(0.57735, abs=1e-4)


def test_bound(capsys):
    for d, n, value in ((3, 3, 0.788675), (3, 4, 0.841506), (2, 2, 0.707107)):
        code, out, _ = run(capsys, "bound", "--d", str(d), "--n", str(n))
        assert code == 0
        assert json.loads(out)["bound"] == pytest.approx(value, abs=1e-6)
    code, out, err = run(capsys, "bound", "--d", "0", "--n", "3")
    assert code == 1 and out == "" and "error" in err


def test_qsd(capsys):
    code, out, _ = run(capsys, "qsd", "pauli.json", "--pair", "1", "3")
    doc = json.loads(out)
    assert code == 0
    assert doc["W2"] == pytest.approx(0.1464, abs=1e-4)
    check_golden("qsd", doc)
    _, out, _ = run(capsys, "qsd", "identical_pair.json", "--pair", "1", "2")
    assert json.loads(out)["W2"] == pytest.approx(0.0, abs=1e-7)
    _, out, _ = run(capsys, "qsd", "noisy_pair.json", "--pair", "1", "2")
    assert json.loads(out)["W2"] <= 1e-6


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, out, err = run(capsys, "witness", str(bad), "--pair", "1", "2")
    assert code == 1
    assert out == ""
    assert "malformed" in err


def test_schema_violation(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"assembly": {"constructor": "mub", "d": 3}}))
    code, out, err = run(capsys, "witness", str(bad), "--genuine")
    assert (code, out) == (1, "")
    assert "schema" in err


def test_index_out_of_range(capsys):
    code, out, _ = run(capsys, "witness", "pauli.json", "--pair", "1", "4")
    assert (code, out) == (1, "")


def test_solver_failure_exit_code(tmp_path, capsys):
    doc = json.loads(read_scenario_text("pauli.json"))
    doc["solver"] = {"max_iter": 1}
    path = tmp_path / "short.json"
    path.write_text(json.dumps(doc))
    code, out, err = run(capsys, "witness", str(path), "--pair", "1", "2")
    assert code == 2
    assert out == ""
    assert "NumericalLimit" in err


def test_simulate_table1(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "table1.json", "--shots", "100000", "--seed", "7", "--csv", str(tmp_path))
    assert code == 0
    doc = json.loads(out)
    check_golden("simulate", doc)
    assert [r["name"] for r in doc["hyperplanes"]] == [f"S{i}" for i in range(1, 8)]
    assert all(r["within_3_sigma"] for r in doc["hyperplanes"])
    assert (tmp_path / "S1.csv").read_text().startswith("x,a_true,a_obs,count")


def test_simulate_deterministic_and_low_shots(capsys):
    _, a, _ = run(capsys, "simulate", "table1.json", "--shots", "100", "--seed", "1")
    _, b, _ = run(capsys, "simulate", "table1.json", "--shots", "100", "--seed", "1")
    strip = lambda d: [{k: v for k, v in r.items()} for r in json.loads(d)["hyperplanes"]]  # noqa: E731
    assert strip(a) == strip(b)
    doc = json.loads(a)
    check_golden("simulate", doc)
    assert all(r["stderr"] > 0.01 for r in doc["hyperplanes"])


def test_simulate_requires_hyperplanes(capsys):
    code, out, _ = run(capsys, "simulate", "pauli.json")
    assert (code, out) == (1, "")


def test_surface_csv(capsys):
    code, out, _ = run(capsys, "surface", "pauli.json", "--points", "3", "--axes", "1", "3", "--fix", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "eta_1,eta_2,eta_3,R,member"
    assert len(lines) == 10
    last = lines[-1].split(",")
    assert last[:3] == ["1.000000", "1.000000", "1.000000"]
    assert float(last[3]) == pytest.approx(0.80474, abs=1e-4)
    assert last[4] == "0"
    first = lines[1].split(",")
    # X and Z fully depolarized: nothing left to violate
    assert float(first[3]) == pytest.approx(1.0, abs=1e-6)
    assert first[4] == "1"


def test_logs_go_to_stderr(capsys, monkeypatch):
    monkeypatch.setenv("INCOMPAT_LOG", "DEBUG")
    code, out, _ = run(capsys, "witness", "pauli.json", "--pair", "1", "2")
    assert code == 0
    json.loads(out)


def test_schema_and_listing(capsys):
    _, out, _ = run(capsys, "schema")
    assert json.loads(out)["title"] == "incompat scenario"
    _, out, _ = run(capsys, "scenarios")
    assert "table1.json" in json.loads(out)


def test_parse_scenario_features():
    text = json.dumps({
        "assembly": {"constructor": "mub", "d": 3, "k": 3},
        "weights": ["1/6", "1/3", "1/2"],
        "sharpness": [1, 0.9, 0.8],
        "structure": {"patterns": ["pairs(1,2,3)"], "pin": {"[1,2]": 0}},
    })
    sc = parse_scenario(text, "inline")
    assert sc.name == "inline"
    assert sc.assembly.weights == pytest.approx((1 / 6, 1 / 3, 1 / 2))
    assert len(sc.structure.active_patterns) == 2
    with pytest.raises(ConfigError):
        parse_scenario(json.dumps({"assembly": {"constructor": "pauli"}, "dimension": 3}))
    with pytest.raises(ConfigError):
        parse_scenario(json.dumps({"assembly": {"constructor": "pauli"}, "weights": [1, 1, 1]}))
    with pytest.raises(ConfigError):
        load_scenario("/nonexistent/scenario.json")
