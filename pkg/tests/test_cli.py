import csv
import json
import shutil
from pathlib import Path

import pytest

from poolsim.cli import main
from poolsim.config import ConfigError, load_scenario, load_sweep

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
OUTPUTS = ("events.csv", "outcomes.csv", "drivers.csv", "kpi.json")


def _files(d):
    return {name: (d / name).read_bytes() for name in OUTPUTS}


def _write_json(path, data):
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


def test_minimal_config_runs(tmp_path):
    assert main(["--config", str(CONFIGS / "minimal.json"), "--out", str(tmp_path / "o")]) == 0
    assert all((tmp_path / "o" / f).exists() for f in OUTPUTS)
    rep = json.loads((tmp_path / "o" / "kpi.json").read_text())
    assert 0 <= rep["service_rate"] <= 1


def test_rerun_identical_bytes(tmp_path):
    for name in ("a", "b"):
        assert main(["--config", str(CONFIGS / "minimal.json"), "--out", str(tmp_path / name),
                     "--seed", "5"]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_seed_and_policy_overrides(tmp_path):
    main(["--config", str(CONFIGS / "minimal.json"), "--out", str(tmp_path / "a"), "--seed", "5"])
    main(["--config", str(CONFIGS / "minimal.json"), "--out", str(tmp_path / "b"), "--seed", "6"])
    assert _files(tmp_path / "a") != _files(tmp_path / "b")
    main(["--config", str(CONFIGS / "minimal.json"), "--out", str(tmp_path / "c"),
          "--policy", "solo_only"])
    with open(tmp_path / "c" / "drivers.csv") as fh:
        assert all(r["n_pooled"] == "0" for r in csv.DictReader(fh))


def test_missing_policy(tmp_path, capsys):
    cfg = _write_json(tmp_path / "c.json", {"horizon": 600, "pricing": {"commission": 0.25}})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "pricing.policy" in err
    assert "c.json:" in err


def test_unknown_key_has_line(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "pricing": {"policy": "profit_max"},\n  "drivers": {"cnt": 3}\n}\n')
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "c.json:3:" in capsys.readouterr().err


def test_bad_value_is_config_error(tmp_path):
    cfg = _write_json(tmp_path / "c.json", {"pricing": {"policy": "profit_max", "discount": 1.5}})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg = _write_json(tmp_path / "d.json", {"pricing": {"policy": "profit_max"}, "seed": "one"})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_invalid_json(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{\n  \"seed\": 1,\n  oops\n}\n")
    with pytest.raises(ConfigError) as err:
        load_scenario(cfg)
    assert err.value.line == 3


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 3


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--config", str(CONFIGS / "minimal.json"), "--out", str(blocker / "sub")]) == 3


def test_imported_network_and_demand(tmp_path):
    (tmp_path / "nodes.csv").write_text("node_id,x_m,y_m\n0,0,0\n1,500,0\n2,1000,0\n")
    (tmp_path / "edges.csv").write_text(
        "from_id,to_id,length_m\n0,1,500\n1,0,500\n1,2,500\n2,1,500\n")
    (tmp_path / "demand.csv").write_text(
        "request_id,origin_id,destination_id,request_time_s,patience_s\n0,0,2,5,300\n1,2,0,9,300\n")
    cfg = _write_json(tmp_path / "c.json", {
        "horizon": 600, "pricing": {"policy": "solo_only"},
        "network": {"nodes_file": "nodes.csv", "edges_file": "edges.csv"},
        "demand": {"file": "demand.csv"}, "drivers": {"count": 2, "positions": [0, 2]}})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "kpi.json").read_text())
    assert rep["n_requests"] == 2 and rep["service_rate"] == 1.0


def test_broken_network_file_is_config_error(tmp_path):
    (tmp_path / "nodes.csv").write_text("node_id,x_m,y_m\n0,0,0\n1,500,0\n")
    (tmp_path / "edges.csv").write_text("from_id,to_id,length_m\n0,1,500\n1,5,500\n")
    cfg = _write_json(tmp_path / "c.json", {
        "pricing": {"policy": "solo_only"},
        "network": {"nodes_file": "nodes.csv", "edges_file": "edges.csv"}})
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def _summary(d):
    with open(d / "summary.csv", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def sweep_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    codes = [main(["--sweep", str(CONFIGS / "sweep_small.json"), "--out", str(out / f"p{n}"),
                   "--parallelism", str(n)]) for n in (1, 8)]
    return out, codes


def test_sweep_row_count(sweep_runs):
    out, codes = sweep_runs
    assert codes == [0, 0]
    rows = _summary(out / "p1")
    assert len(rows) == 2 * 2 * 3 * 2
    assert all(r["status"] == "ok" for r in rows)
    assert {(r["policy"], r["n_drivers"], r["req_rate"], r["seed"]) for r in rows} == {
        (p, n, r, s) for p in ("solo_only", "forced_pooling", "profit_max") for n in ("5", "10")
        for r in ("100", "200") for s in ("0", "1")}


def test_sweep_parallelism_identical(sweep_runs):
    out, _ = sweep_runs
    assert (out / "p1" / "summary.csv").read_bytes() == (out / "p8" / "summary.csv").read_bytes()


def test_sweep_matches_single_runs(sweep_runs, tmp_path):
    out, _ = sweep_runs
    row = next(r for r in _summary(out / "p1")
               if (r["policy"], r["n_drivers"], r["req_rate"], r["seed"]) == ("profit_max", "10", "200", "1"))
    base = json.loads((CONFIGS / "sweep_small.json").read_text())["base"]
    base["drivers"] = {"count": 10}
    base["demand"]["rate"] = 200
    base["pricing"] = {"policy": "profit_max"}
    base["seed"] = 1
    cfg = _write_json(tmp_path / "c.json", base)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "kpi.json").read_text())
    assert float(row["service_rate"]) == pytest.approx(rep["service_rate"], abs=1e-6)
    assert float(row["commission_eur"]) == pytest.approx(rep["platform_commission_total"], abs=0.005)


def test_full_grid_cell_count():
    spec = load_sweep(CONFIGS / "sweep_full_grid.json")
    assert len(spec.drivers) * len(spec.rates) * len(spec.policies) * spec.seeds == 150
    assert len(spec.cells()) == 150


def test_failing_cell_recorded(tmp_path):
    sweep = json.loads((CONFIGS / "sweep_small.json").read_text())
    sweep["drivers"] = [1]
    sweep["rates"] = [100]
    sweep["seeds"] = 1
    sweep["base"]["drivers"] = {"count": 1, "positions": [999]}  # unknown node
    sweep["base"]["horizon"] = 600
    path = _write_json(tmp_path / "s.json", sweep)
    assert main(["--sweep", str(path), "--out", str(tmp_path / "o")]) == 1
    rows = _summary(tmp_path / "o")
    assert len(rows) == 3
    assert all(r["status"].startswith("error") for r in rows)


def test_sweep_bad_axis(tmp_path):
    path = _write_json(tmp_path / "s.json", {"drivers": [], "rates": [100], "policies": ["solo_only"]})
    assert main(["--sweep", str(path), "--out", str(tmp_path / "o")]) == 2


def test_sweep_rejects_seed_flag(tmp_path):
    assert main(["--sweep", str(CONFIGS / "sweep_small.json"), "--out", str(tmp_path), "--seed", "1"]) == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    exe = shutil.which("poolsim")
    cmd = [exe] if exe else [sys.executable, "-m", "poolsim"]
    res = subprocess.run(cmd + ["--config", str(CONFIGS / "minimal.json"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
