import csv
import json

import numpy as np
import pytest

from sobolev_traces.cli import main
from sobolev_traces.pipeline import ConfigError, ExperimentConfig, pipeline_exponents, run_jet_pipeline, run_l1p_pipeline
from sobolev_traces.suite import run_verification_suite


def two_point(**kw):
    return ExperimentConfig(**{"n": 1, "p": 2.0, "grid": 128, "E": [[0.0], [1.0]], "f": [0.0, 1.0], **kw})


def test_exponents():
    assert pipeline_exponents(1, 2.0) == (1.5, 1.75)
    assert pipeline_exponents(2, 4.0) == (3.0, 3.5)


@pytest.mark.parametrize("data", [
    {"n": 1, "p": 1.0, "E": [[0.0]], "f": [1.0]},
    {"n": 1, "E": [[0.0]], "f": [1.0], "colour": "red"},
    {"n": 1, "E": [[0.0], [9.0]], "f": [1.0, 2.0]},
    {"n": 2, "E": [[0.0]], "f": [1.0]},
    {"n": 1, "E": "missing.json", "f": [1.0]},
])
def test_config_errors(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_config_file_references(tmp_path):
    (tmp_path / "E.json").write_text(json.dumps({"points": [[0.0], [0.5]]}))
    (tmp_path / "cfg.json").write_text(json.dumps({"n": 1, "E": "E.json", "f": {"expr": "x0**2"}}))
    cfg = ExperimentConfig.load(tmp_path / "cfg.json")
    assert np.allclose(cfg.function_values(cfg.point_set()), [0.0, 0.25])
    with pytest.raises(ConfigError):
        ExperimentConfig(n=1, E=[[0.0]], f=[1.0, 2.0]).function_values(ExperimentConfig(n=1, E=[[0.0]]).point_set())


def test_two_point_pipeline_exact_on_E_and_lipschitz():
    res = run_l1p_pipeline(two_point())
    F = res.extension
    assert F.at([0.0]) == 0.0 and F.at([1.0]) == 1.0
    mc = res.reports["mcshane"]
    assert mc["max_error_on_E"] == 0.0
    assert mc["lipschitz_seminorm"] <= mc["L"] * (1 + 1e-12)
    assert np.isfinite(res.reports["ratio_F_over_Ip"]) and res.reports["ratio_F_over_Ip"] > 0
    assert res.reports["a1"]["finite"]


def test_constant_data_gives_constant_extension():
    res = run_l1p_pipeline(ExperimentConfig(n=1, grid=64, E=[[0.0], [0.5]], f=[3.0, 3.0]))
    assert np.all(res.extension.values == 3.0)
    assert res.reports["trace"]["I_p"] == 0.0 and res.reports["seminorm"] == 0.0


def test_pipeline_is_deterministic(tmp_path):
    a = run_l1p_pipeline(two_point(seed=1))
    b = run_l1p_pipeline(two_point(seed=2))
    assert np.array_equal(a.extension.values, b.extension.values)
    a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    assert (tmp_path / "a" / "extension.csv").read_bytes() == (tmp_path / "b" / "extension.csv").read_bytes()


def test_jet_pipeline_reproduces_global_polynomial():
    cfg = ExperimentConfig(n=2, m=2, p=3.0, grid=16, box=2.0, E=[[0.0, 0.0], [1.0, 0.5], [-0.5, 1.0]],
                           jet={"expr": "1 + 2*x0 - x1"})
    res = run_jet_pipeline(cfg)
    ext = res.extras["extension"]
    X = res.extension.grid.nodes()
    mask = ext.covered | ext.on_E
    assert np.max(np.abs(ext.values[mask] - (1 + 2 * X[mask, 0] - X[mask, 1]))) < 1e-12
    assert res.reports["jet_trace"]["sharp_norm"] == pytest.approx(0.0, abs=1e-12)
    assert res.reports["whitney"]["uncovered_nodes"] == 0


def test_jet_pipeline_rejects_mismatched_jet(tmp_path):
    from sobolev_traces.extension import JetField
    from sobolev_traces.geometry import PointSet
    from sobolev_traces.polynomials import AnalyticFunction
    J = JetField.from_function(AnalyticFunction("x0", 1), PointSet([[0.0], [1.0]]), 3)
    (tmp_path / "jet.json").write_text(json.dumps(J.to_json()))
    cfg = ExperimentConfig(n=1, m=2, grid=32, E=[[0.0], [1.0]], jet="jet.json", base_dir=str(tmp_path))
    with pytest.raises(ConfigError):
        run_jet_pipeline(cfg)


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_cli_subcommands(tmp_path):
    two = _write(tmp_path, "two.json", {"n": 1, "p": 2.0, "grid": 64, "E": [[0.0], [1.0]], "f": [0.0, 1.0]})
    jet = _write(tmp_path, "jet.json", {"n": 1, "m": 2, "grid": 64, "box": 2.0, "E": [[0.0], [1.0]],
                                        "jet": {"expr": "exp(-x0**2)"}})
    met = _write(tmp_path, "met.json", {"n": 1, "q": 2.0, "box": 1.0, "grid": 32, "weight": {"corpus": "sine"}})
    dd = _write(tmp_path, "dd.json", {"n": 1, "m": 2, "box": 3.0, "grid": 120,
                                      "E": [[-1.0], [0.0], [0.5], [1.0]], "f": {"expr": "x0**2"}})
    for cmd, cfg in [("extend", two), ("extend-jet", jet), ("trace-norm", two), ("verify-metric", met),
                     ("whitney", two), ("dd1d", dd)]:
        out = tmp_path / cmd
        assert main([cmd, "--config", cfg, "--out", str(out)]) == 0, cmd
        assert any(out.iterdir())
    summary = json.loads((tmp_path / "dd1d" / "dd1d.json").read_text())
    assert summary["trace_linf"] == pytest.approx(1.0)
    rows = list(csv.DictReader(open(tmp_path / "verify-metric" / "distances.csv")))
    assert len(rows) == 33 * 32 // 2


def test_cli_flags_override_config(tmp_path):
    two = _write(tmp_path, "two.json", {"n": 1, "grid": 64, "E": [[0.0], [1.0]], "f": [0.0, 1.0]})
    assert main(["extend", "--config", two, "--out", str(tmp_path / "o"), "--grid", "32", "--hop-radius", "1"]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["reports"]["geodesic"]["hop_radius"] == 1
    assert len((tmp_path / "o" / "extension.csv").read_text().splitlines()) == 34


def test_cli_config_errors(tmp_path, capsys):
    assert main(["extend"]) == 2
    assert main(["extend", "--config", str(tmp_path / "none.json")]) == 2
    bad = _write(tmp_path, "bad.json", {"n": 1, "p": 0.5, "E": [[0.0]], "f": [1.0]})
    assert main(["trace-norm", "--config", bad]) == 2
    assert "config error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_suite_corrupted_weight_fails(tmp_path):
    assert main(["suite", "--out", str(tmp_path), "--inject-negative-weight"]) == 1
    rows = list(csv.DictReader(open(tmp_path / "suite.csv")))
    failed = [r for r in rows if r["status"] == "FAIL"]
    assert len(failed) == 1 and "negative" in failed[0]["detail"]


def test_suite_records_expected_divergence():
    code, rows = run_verification_suite(only=["geodesic"])
    assert code == 0
    assert [r["status"] for r in rows if "wall" in r["check"]] == ["EXPECTED-DIVERGENT"]
