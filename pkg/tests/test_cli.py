import json
import os

import numpy as np
import pytest

from nlbellman import import_field
from nlbellman.cli import main
from nlbellman.config import DEFAULT_CONFIG, ScenarioConfig
from nlbellman.errors import ConfigurationError


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def solve_config(tmp_path, outdir):
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["command"] = "solve"
    doc["output_dir"] = str(outdir)
    doc["plots"] = False
    return write_config(tmp_path, doc)


def test_solve_command_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    code = main(["solve", "--config", solve_config(tmp_path, out), "--no-plots"])
    assert code == 0
    for name in ("solution.field", "solve_report.json", "residual_history.csv", "policy.csv"):
        assert (out / name).exists()
    u = import_field(out / "solution.field")
    assert u.dimension == 1
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["residual_sup"] <= 1e-8
    assert "config_hash" in rep
    first = (out / "residual_history.csv").read_text().splitlines()[0]
    assert first.startswith("# config_hash=")


def test_diagnose_on_exported_field(tmp_path):
    out1 = tmp_path / "solved"
    main(["solve", "--config", solve_config(tmp_path, out1), "--no-plots"])
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["command"] = "diagnose"
    doc["output_dir"] = str(tmp_path / "diag")
    doc["plots"] = False
    doc["diagnose"]["input_field"] = str(out1 / "solution.field")
    code = main(["diagnose", "--config", write_config(tmp_path, doc, "diag.json")])
    assert code == 0
    rep = json.loads((tmp_path / "diag" / "diagnose_report.json").read_text())
    assert rep["source"].endswith("solution.field")
    assert rep["holder"]["alpha"] is not None and rep["holder"]["alpha"] > 0
    assert rep["identity_max_gap"] <= 1e-10


def test_check_command_passes_and_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["check", "--out", str(out1), "--no-plots"]) == 0
    assert main(["check", "--out", str(out2), "--no-plots"]) == 0
    for name in sorted(os.listdir(out1)):
        b1 = (out1 / name).read_bytes()
        b2 = (out2 / name).read_bytes()
        assert b1 == b2, f"artifact {name} differs between identical runs"


def test_empty_kernel_list_is_named_in_error(tmp_path, capsys):
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["command"] = "solve"
    doc["problem"]["kernels"] = []
    code = main(["solve", "--config", write_config(tmp_path, doc)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["type"] == "invalid-config"
    assert "kernels" in err["error"]["message"]


def test_bad_json_config(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    assert main(["solve", "--config", str(path)]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"]["type"] == "invalid-config"


def test_sweep_command_with_threads(tmp_path):
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["command"] = "sweep"
    doc["output_dir"] = str(tmp_path / "sweep")
    doc["plots"] = False
    doc["sweep"]["sigma_list"] = [1.4, 1.6]
    cfg = write_config(tmp_path, doc)
    assert main(["sweep", "--config", cfg, "--threads", "2"]) == 0
    lines = (tmp_path / "sweep" / "sweep.csv").read_text().splitlines()
    assert lines[1].split(",")[0] == "sigma"
    assert len(lines) == 4  # hash + header + 2 rows


def test_symbol_command_csv_schema(tmp_path):
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["command"] = "symbol"
    doc["output_dir"] = str(tmp_path / "sym")
    doc["plots"] = False
    doc["symbol"]["count"] = 8
    doc["symbol"]["xi_min"] = 0.25
    doc["symbol"]["xi_max"] = 32.0
    cfg = write_config(tmp_path, doc)
    assert main(["symbol", "--config", cfg]) == 0
    lines = (tmp_path / "sym" / "symbol.csv").read_text().splitlines()
    header = lines[1].split(",")
    assert header == ["kernel_index", "direction_index", "dir_x", "xi_mag", "s", "s_over_xi_sigma"]
    # 2 kernels x 8 magnitudes
    assert len(lines) == 2 + 2 * 8


def test_scenario_config_validation():
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_dict({"command": "fly", "problem": {}})
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_dict({"command": "solve"})
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["tolerances"]["solve_tol"] = -1.0
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_dict(doc)


def test_config_hash_stable_under_key_order():
    doc1 = json.loads(json.dumps(DEFAULT_CONFIG))
    doc2 = json.loads(json.dumps(DEFAULT_CONFIG, sort_keys=True))
    c1 = ScenarioConfig.from_dict(doc1)
    c2 = ScenarioConfig.from_dict(doc2)
    assert c1.config_hash == c2.config_hash


def test_plots_render(tmp_path):
    # one plotted run to exercise the figure path end to end
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["command"] = "solve"
    doc["output_dir"] = str(tmp_path / "plotted")
    cfg = write_config(tmp_path, doc)
    assert main(["solve", "--config", cfg]) == 0
    png = tmp_path / "plotted" / "solution.png"
    assert png.exists() and png.stat().st_size > 1000
