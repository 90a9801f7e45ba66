import json
import os

import numpy as np
import pytest

from towersprayer import cli
from towersprayer import config as cfgmod


def _write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


SMALL_ENSEMBLE = {
    "road": {"T_s": 2.0, "N_KL": 27},
    "integ": {"tf": 2.0, "dt_out": 0.05},
    "ensemble": {"n_s": 4, "master_seed": 11},
    "analysis": {"pdf_instants_s": [1.0, 2.0]},
}


def test_default_config_values():
    cfg = cfgmod.default_config()
    assert cfg.physical.m1 == 6500.0
    assert cfg.physical.kT == 100e3
    assert cfg.road.N_KL == 403 and cfg.road.tau is None
    assert cfg.road.v_kmh == 12.0 and cfg.road.a_corr_m == 1.0
    assert cfg.integ.tf == 30.0 and cfg.integ.dt_out == 1e-3
    assert cfg.ensemble.n_s == 256 and cfg.ensemble.master_seed == 2026
    assert cfg.analysis.confidence == 0.95
    assert cfg.analysis.threshold_fraction == 0.3
    assert cfg.analysis.psd_horizon_s == 600.0
    assert cfg.analysis.pdf_instants_s == (7.5, 15.0, 22.5, 30.0)
    assert cfg.output_dir == "out"


def test_unknown_keys_rejected():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config({"physical": {"mass": 1.0}})
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config({"physics": {}})
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config({"road": {"N_KL": 10, "tau": 0.9}})


def test_bad_values_become_config_errors():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config({"physical": {"m1": -1.0}})
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config({"integ": {"tf": 1.05, "dt_out": 0.1}})
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config({"ensemble": {"n_s": 0}})
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config({"ensemble": {"n_s": True}})


def test_tau_only_replaces_mode_count():
    cfg = cfgmod.parse_config({"road": {"tau": 0.95}})
    assert cfg.road.N_KL is None and cfg.road.tau == 0.95
    cfg2 = cfgmod.parse_config({"road": {"N_KL": 50}})
    assert cfg2.road.N_KL == 50 and cfg2.road.tau is None


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "road": {,}\n}\n')
    with pytest.raises(cfgmod.ConfigError) as exc:
        cfgmod.load_config(str(p))
    assert "line 2" in str(exc.value)


def test_config_hash_stability():
    a = cfgmod.default_config()
    b = cfgmod.parse_config({"ensemble": {"n_s": 256}})
    assert cfgmod.config_hash(a) == cfgmod.config_hash(b)
    c = cfgmod.parse_config({"ensemble": {"n_s": 128}})
    assert cfgmod.config_hash(a) != cfgmod.config_hash(c)


def test_equilibrium_command(tmp_path, capsys):
    rc = cli.main(["equilibrium", "--out", str(tmp_path / "eq")])
    out = capsys.readouterr().out
    assert rc == 0
    y1 = float(out.split("y1")[1].split("=")[1].split("m")[0])
    assert y1 == pytest.approx(-0.0770032, abs=1e-6)
    assert "residual" in out
    echo = json.loads((tmp_path / "eq" / "config_echo.json").read_text())
    assert echo["ensemble"]["master_seed"] == 2026
    assert "config_sha256" in echo and "code_version" in echo


def test_equilibrium_responds_to_stiffness(tmp_path, capsys):
    p = _write(tmp_path, "stiff.json", {"physical": {"k1": 930e3, "k2": 930e3}})
    rc = cli.main(["equilibrium", "--config", p, "--out", str(tmp_path / "eq")])
    assert rc == 0
    y1 = float(capsys.readouterr().out.split("y1")[1].split("=")[1].split("m")[0])
    assert y1 == pytest.approx(-0.0770032 / 2.0, abs=1e-6)


def test_bad_config_exits_two(tmp_path, capsys):
    p = _write(tmp_path, "bad.json", {"road": {"speed": 12}})
    rc = cli.main(["equilibrium", "--config", p, "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file_exits_two(tmp_path, capsys):
    rc = cli.main(["equilibrium", "--config", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path / "x")])
    assert rc == 2


def test_seed_override_lands_in_echo(tmp_path):
    p = _write(tmp_path, "s.json", SMALL_ENSEMBLE)
    out = tmp_path / "eq"
    assert cli.main(["equilibrium", "--config", p, "--seed", "999",
                     "--out", str(out)]) == 0
    echo = json.loads((out / "config_echo.json").read_text())
    assert echo["ensemble"]["master_seed"] == 999


def test_echo_round_trips_to_same_hash(tmp_path):
    p = _write(tmp_path, "s.json", SMALL_ENSEMBLE)
    out = tmp_path / "eq"
    assert cli.main(["equilibrium", "--config", p, "--out", str(out)]) == 0
    echo = json.loads((out / "config_echo.json").read_text())
    sha = echo.pop("config_sha256")
    echo.pop("code_version")
    reparsed = cfgmod.parse_config(echo)
    assert cfgmod.config_hash(reparsed) == sha


def test_simulate_writes_expected_files(tmp_path, capsys):
    p = _write(tmp_path, "s.json", SMALL_ENSEMBLE)
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", p, "--out", str(out)]) == 0
    traj = (out / "trajectory.csv").read_text().splitlines()
    assert len(traj) == 42  # header + 41 grid points
    assert traj[0].split(",")[:3] == ["t", "y1", "phi1"]
    first = np.array(traj[1].split(","), dtype=float)
    assert first[0] == 0.0
    assert first[1] == pytest.approx(-0.0770032, abs=1e-6)
    exc = (out / "excitation.csv").read_text().splitlines()
    assert len(exc) == 42
    assert (out / "phase_space.csv").exists()
    with open(out / "animation.ndjson") as fh:
        frames = [json.loads(line) for line in fh]
    assert frames[0]["t"] == 0.0
    assert len(frames[0]["trailer"]) == 2 and len(frames[0]["tower"]) == 2
    meta = json.loads((out / "trajectory.csv.meta.json").read_text())
    assert meta["master_seed"] == 11


def test_simulate_sweep_creates_subdirs(tmp_path):
    p = _write(tmp_path, "s.json", SMALL_ENSEMBLE)
    out = tmp_path / "sweep"
    assert cli.main(["simulate", "--config", p, "--out", str(out),
                     "--a-corr", "0.5,2"]) == 0
    d1, d2 = out / "a_corr_0.5", out / "a_corr_2"
    assert d1.is_dir() and d2.is_dir()
    t1 = (d1 / "trajectory.csv").read_bytes()
    t2 = (d2 / "trajectory.csv").read_bytes()
    assert t1 != t2
    e1 = json.loads((d1 / "config_echo.json").read_text())
    assert e1["road"]["a_corr_m"] == 0.5


def test_simulate_integration_failure_exits_three(tmp_path, capsys):
    payload = dict(SMALL_ENSEMBLE)
    payload["integ"] = {"tf": 2.0, "dt_out": 0.05, "dt_min": 0.5}
    p = _write(tmp_path, "s.json", payload)
    rc = cli.main(["simulate", "--config", p, "--out", str(tmp_path / "f")])
    assert rc == 3
    assert "error" in capsys.readouterr().err


def test_ensemble_outputs(tmp_path, capsys):
    p = _write(tmp_path, "s.json", SMALL_ENSEMBLE)
    out = tmp_path / "ens"
    assert cli.main(["ensemble", "--config", p, "--out", str(out)]) == 0
    summary = np.genfromtxt(out / "ensemble_summary.csv", delimiter=",",
                            names=True)
    assert summary.shape == (41,)
    assert set(summary.dtype.names) >= {"t", "mean_x2", "std_x2", "mean_y1"}
    band = np.genfromtxt(out / "band_x2.csv", delimiter=",", names=True)
    assert np.all(band["lo"] <= band["mean"] + 1e-12)
    assert np.all(band["hi"] >= band["mean"] - 1e-12)
    prob = np.genfromtxt(out / "probability_x2.csv", delimiter=",", names=True)
    assert prob["P"].min() >= 0.0 and prob["P"].max() <= 1.0
    conv = np.genfromtxt(out / "conv_curve.csv", delimiter=",", names=True)
    assert len(conv) == 4 and conv["n"][-1] == 4
    report = json.loads((out / "ensemble_report.json").read_text())
    assert report["n_requested"] == 4 and report["n_completed"] == 4
    assert 0.0 <= report["probability"]["time_average"] <= 1.0
    with open(out / "realizations.ndjson") as fh:
        rows = [json.loads(line) for line in fh]
    assert [r["index"] for r in rows] == [0, 1, 2, 3]
    assert rows[2]["spawn_key"] == [2]
    # 4 realizations is below the sample floor for density estimates
    assert not (out / "pdf_x2.csv").exists()


def test_ensemble_single_realization_degenerate_band(tmp_path):
    payload = dict(SMALL_ENSEMBLE)
    payload["ensemble"] = {"n_s": 1, "master_seed": 11}
    p = _write(tmp_path, "s.json", payload)
    out = tmp_path / "one"
    assert cli.main(["ensemble", "--config", p, "--out", str(out)]) == 0
    summary = np.genfromtxt(out / "ensemble_summary.csv", delimiter=",",
                            names=True)
    assert np.all(summary["std_x2"] == 0.0)
    band = np.genfromtxt(out / "band_x2.csv", delimiter=",", names=True)
    assert np.array_equal(band["lo"], band["mean"])
    assert np.array_equal(band["hi"], band["mean"])


def test_psd_rejects_segment_longer_than_horizon(tmp_path, capsys):
    payload = dict(SMALL_ENSEMBLE)
    payload["analysis"] = {"psd_horizon_s": 50.0, "psd_segment_s": 100.0}
    p = _write(tmp_path, "s.json", payload)
    rc = cli.main(["psd", "--config", p, "--out", str(tmp_path / "p")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_psd_small_run_writes_spectrum(tmp_path, capsys):
    payload = {
        "road": {"T_s": 2.0, "N_KL": 27},
        "integ": {"tf": 2.0, "dt_out": 0.01},
        "analysis": {"psd_horizon_s": 16.0, "psd_segment_s": 4.0,
                     "slope_band_hz": [0.3, 4.0]},
    }
    p = _write(tmp_path, "s.json", payload)
    out = tmp_path / "p"
    assert cli.main(["psd", "--config", p, "--out", str(out)]) == 0
    spec = np.genfromtxt(out / "psd_x2.csv", delimiter=",", names=True)
    assert spec["f"][0] == 0.0
    assert np.all(spec["power"] >= 0.0)
    report = json.loads((out / "slope_report.json").read_text())
    assert report["n_segments"] == 4
    assert report["horizon_s"] == 16.0
    assert report["slope"] < 0.0  # response rolls off with frequency
    # mode density grows with the horizon so the series stays broadband
    assert report["n_modes"] == 27 * 8
