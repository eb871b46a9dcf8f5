import json
import subprocess
import sys

import numpy as np
import pytest

from fuzzypi.cli import main
from fuzzypi.config import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from fuzzypi.oracle import evaluate_surface
from fuzzypi.report import SCHEMAS, read_csv, write_csv

SHORT_ROBOT = {
    "schedule": {"durations": [0.05, 0.05], "setpoints_deg": [[10, 5, 5], [0, 10, -5]]},
    "robot": {"n_bits": [12], "log_every": 50},
}


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def run(tmp_path, *args, out="out"):
    return main(["--out", str(tmp_path / out), *args])


# -- configuration ----------------------------------------------------------

def test_default_config_round_trips():
    cfg = ExperimentConfig()
    again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
    assert config_to_dict(again) == config_to_dict(cfg)
    assert again.rules == cfg.rules and again.bank == cfg.bank


def test_config_sections(tmp_path):
    data = {"version": 1,
            "controller": {"n_bits": 10, "kp": 100.0},
            "rules": {"additive": {"centers": ["-1/2", 0, "1/2"], "limit": "1/2"}},
            "bank": {"inputs": [[{"label": "N", "kind": "right_trapezoid", "c": "-0.5", "d": 0},
                                 {"label": "Z", "kind": "triangle", "e": "-0.5", "m": 0, "d": "0.5"},
                                 {"label": "P", "kind": "left_trapezoid", "e": 0, "f": "0.5"}]] * 2},
            "plant": {"b": [0.1, 0.2, 0.3]}}
    cfg = load_config(write_config(tmp_path, data))
    assert cfg.controller.n_bits == 10 and cfg.controller.kp == 100.0
    assert cfg.bank.sizes == (3, 3) and cfg.rules.sizes == (3, 3)
    assert cfg.plant.b == (0.1, 0.2, 0.3)


@pytest.mark.parametrize("data", [
    {"version": 2},
    {"controler": {}},
    {"controller": {"n_bits": 2}},
    {"controller": {"gain": 1}},
    {"rules": {"sizes": [2, 2], "rows": [[0, 0, 0, 0, 0]]}},
    {"robot": {"log_every": 0}},
    {"sweep": {"n_bits": []}},
    {"schedule": {"durations": [1], "setpoints_deg": [[0, 0]]}},
    [],
])
def test_bad_configs_raise(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_bad_config_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


# -- exit codes -------------------------------------------------------------

def test_config_error_exit_code(tmp_path):
    p = write_config(tmp_path, {"controller": {"n_bits": 99}})
    assert main(["--config", str(p), "--out", str(tmp_path), "surface"]) == 2
    assert run(tmp_path, "step", "--n-bits", "2") == 2
    assert run(tmp_path, "costmodel", "power", "--n-ref", "0", "--f-ref", "1", "--n-work", "1",
               "--f-work", "1") == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["surface", "--rounding", "up"])
    assert exc.value.code == 2


def test_divergence_exit_code(tmp_path):
    data = dict(SHORT_ROBOT, plant={"m2": 1e-6, "m3": 1e-6, "J": [1e-6, 1e-6, 1e-6]})
    p = write_config(tmp_path, data)
    rc = main(["--config", str(p), "--out", str(tmp_path / "o"), "robot", "--ts", "1e-3",
               "--no-reference"])
    assert rc == 3


# -- subcommands ------------------------------------------------------------

def test_surface_matches_library(tmp_path):
    assert run(tmp_path, "surface") == 0
    tag, header, rows = read_csv(tmp_path / "out" / "surface_fixed_N8_T4.csv")
    assert tag == "surface-fixed/1" and header == SCHEMAS["surface_fixed"][2]
    assert len(rows) == 10000
    lib = evaluate_surface(8, 4)
    got = np.array([[float(v) for v in r] for r in rows])
    assert np.array_equal(got[:, 2], lib.fixed)
    assert np.array_equal(got[:, 3].astype(np.int64), lib.fixed_raw)
    _, _, ref_rows = read_csv(tmp_path / "out" / "surface_reference.csv")
    ref = np.array([float(r[2]) for r in ref_rows]).reshape(100, 100)
    assert np.max(np.abs(ref + ref[::-1, ::-1])) <= 1e-12


def test_surface_rerun_is_byte_identical(tmp_path):
    assert run(tmp_path, "surface", "--grid-size", "30", out="a") == 0
    assert run(tmp_path, "surface", "--grid-size", "30", out="b") == 0
    for name in ("surface_fixed_N8_T4.csv", "surface_reference.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_mse_sweep_csv(tmp_path):
    assert run(tmp_path, "mse-sweep", "--n-bits", "8", "10", "--t-bits", "4", "6",
               "--grid-size", "40") == 0
    tag, header, rows = read_csv(tmp_path / "out" / "mse_sweep.csv")
    assert tag == "mse-sweep/1" and header == ["N", "T", "mse", "max_abs_err"]
    assert [(r[0], r[1]) for r in rows] == [("8", "4"), ("8", "6"), ("10", "4"), ("10", "6")]


def test_step_log(tmp_path):
    assert run(tmp_path, "step", "--n-bits", "10", "--samples", "12", "--setpoint", "0.2") == 0
    tag, header, rows = read_csv(tmp_path / "out" / "step_log.csv")
    assert tag == "step-log/1" and len(rows) == 12
    assert header == ["n", "y", "y_sp", "e", "e_d", "x0", "x1", "v_d", "r"]


def test_step_with_input_file(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("y,y_sp\n0,0.5\n0.1,0.5\n0.2,0.5\n")
    assert run(tmp_path, "step", "--input", str(src)) == 0
    assert len(read_csv(tmp_path / "out" / "step_log.csv")[2]) == 3
    src.write_text("a,b\n1,2\n")
    assert run(tmp_path, "step", "--input", str(src)) == 2


def test_robot_short_run(tmp_path):
    p = write_config(tmp_path, SHORT_ROBOT)
    out = tmp_path / "o"
    assert main(["--config", str(p), "--out", str(out), "robot"]) == 0
    for name, tag in (("robot_N12.csv", "robot-run/1"), ("robot_reference.csv", "robot-run/1"),
                      ("robot_summary.csv", "robot-summary/1"), ("robot_compare.csv", "robot-compare/1")):
        assert read_csv(out / name)[0] == tag
    assert len(read_csv(out / "robot_N12.csv")[2]) == 200
    again = tmp_path / "o2"
    assert main(["--config", str(p), "--out", str(again), "robot"]) == 0
    assert (out / "robot_N12.csv").read_bytes() == (again / "robot_N12.csv").read_bytes()


def test_costmodel_estimate(tmp_path, capsys):
    assert run(tmp_path, "costmodel", "estimate", "--variant", "os", "--n", "8", "--t", "4") == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"nlut", "rs_msps", "mflips"}
    assert out["nlut"] == pytest.approx(5939.6, abs=0.05)
    assert run(tmp_path, "costmodel", "estimate", "--variant", "p", "--n", "20", "--t", "4") == 0
    assert capsys.readouterr().err.count("warning") == 1


def test_costmodel_power_and_residuals(tmp_path, capsys):
    assert run(tmp_path, "costmodel", "power", "--n-ref", "451", "--f-ref", "66.251",
               "--n-work", "11779", "--f-work", "6.63") == 0
    assert json.loads(capsys.readouterr().out)["saving"] == pytest.approx(38.2036, abs=1e-4)
    assert run(tmp_path, "costmodel", "residuals") == 0
    tag, _, rows = read_csv(tmp_path / "out" / "costmodel_residuals.csv")
    assert tag == "costmodel-residuals/1" and len(rows) == 80


def test_write_csv_checks_width(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "x.csv", "mse_sweep", [(1, 2, 3)])


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "fuzzypi", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "surface" in r.stdout
