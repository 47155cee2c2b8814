import json

import numpy as np
import pytest

from vibratrak import cli
from vibratrak.cli import ConfigError, main, parse_config, run
from vibratrak.model import Iwan, nondimensionalize

DUFFING = {"mode": "frc",
           "system": {"m": 1, "c": 0.01, "k": 1,
                      "force": {"kind": "stiffening_duffing", "alpha": 1}, "H": 3},
           "n": 3,
           "sweep": {"forces": [0.1, 0.2], "omega_range": [0.25, 1.25]},
           "continuation": {"ds_max": 0.1}}


def dump(doc):
    return json.dumps(doc)


def test_minimal_config_gets_defaults():
    doc = {"mode": "frc", "system": {"m": 1, "c": 0.01, "k": 1, "force": None},
           "sweep": {"forces": [0.1], "omega_range": [0.5, 1.5]}}
    cfg = parse_config(dump(doc))
    assert cfg.system.Nt == 1024
    assert cfg.continuation.tol == 1e-9
    assert cfg.forces.tolist() == [0.1]
    iwan = parse_config(dump({**doc, "system": {"preset": "iwan"}}))
    assert iwan.system.force.n_sliders == 100


def test_unknown_key_named_with_path():
    bad = json.loads(dump(DUFFING))
    bad["system"]["force"] = {"kind": "stiffening_duffing", "alpa": 1}
    with pytest.raises(ConfigError, match=r"system\.force\.alpa"):
        parse_config(dump(bad))
    with pytest.raises(ConfigError, match="colour"):
        parse_config(dump({**DUFFING, "colour": 1}))


def test_missing_keys_enumerated():
    with pytest.raises(ConfigError) as exc:
        parse_config(dump({"mode": "compare", "system": {"preset": "jenkins"}}))
    msg = str(exc.value)
    for key in ("n", "sweep.forces", "sweep.omega_range"):
        assert key in msg
    with pytest.raises(ConfigError, match=r"system\.c, system\.force"):
        parse_config(dump({"mode": "validate", "system": {"m": 1, "k": 1}}))


def test_empty_force_list_rejected():
    doc = json.loads(dump(DUFFING))
    doc["sweep"]["forces"] = []
    with pytest.raises(ConfigError, match="sweep.forces"):
        parse_config(dump(doc))


@pytest.mark.parametrize("patch,match", [
    ({"mode": "plot"}, "mode"),
    ({"n": 9}, "n:"),
    ({"units": "imperial"}, "units"),
    ({"continuation": {"ds_max": -1}}, r"continuation\.ds_max"),
    ({"continuation": {"ds0": 1.0, "ds_max": 0.1}}, "continuation"),
    ({"analysis": {"window_factor": 0.9}}, "window_factor"),
    ({"checks": ["nope"]}, "checks"),
])
def test_invalid_values(patch, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(dump({**DUFFING, **patch}))


def test_malformed_json():
    with pytest.raises(ConfigError, match="JSON"):
        parse_config("{mode: frc")


def test_iwan_block_round_trips_to_normalized_slip_force():
    doc = {"mode": "vprnm", "n": 3,
           "system": {"m": 1, "c": 0.01, "k": 0.75, "x_ref": 2.4,
                      "force": {"kind": "iwan", "k_t": 0.25, "F_s": 0.2, "chi": -0.5}},
           "sweep": {"force_range": [0.3, 40]}}
    cfg = parse_config(dump(doc))
    assert cfg.system.force == Iwan(0.25, 0.2, -0.5, 0.0, 100)
    sc = nondimensionalize(cfg.system)
    assert sc.params["F_s"] == pytest.approx(0.083333, abs=5e-7)
    # nondimensional sweep values are scaled by k_lin x_ref
    assert cfg.force_range == pytest.approx((0.3 * 2.4, 40 * 2.4))


def test_dimensional_units_pass_through():
    doc = {**DUFFING, "system": {"m": 4, "c": 0.01, "k": 1,
                                 "force": {"kind": "stiffening_duffing", "alpha": 1}},
           "units": "dimensional"}
    cfg = parse_config(dump(doc))
    assert cfg.omega_range == (0.25, 1.25)
    cfg = parse_config(dump({**doc, "units": "nondimensional"}))
    assert cfg.omega_range == pytest.approx((0.125, 0.625))


def test_force_grid_spec():
    doc = json.loads(dump(DUFFING))
    doc["sweep"]["forces"] = {"start": 0.1, "stop": 10, "count": 3}
    np.testing.assert_allclose(parse_config(dump(doc)).forces, [0.1, 1, 10])
    doc["sweep"]["forces"]["spacing"] = "linear"
    np.testing.assert_allclose(parse_config(dump(doc)).forces, [0.1, 5.05, 10])


def test_frc_run_writes_deterministic_csv(tmp_path):
    cfg = parse_config(dump(DUFFING))
    a, b = tmp_path / "a", tmp_path / "b"
    res = run(cfg, a)
    run(parse_config(dump(DUFFING)), b, threads=2)
    assert res.files == ["frc_000.csv", "frc_001.csv"]
    for name in res.files + ["summary.json"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    text = (a / "frc_000.csv").read_bytes()
    assert b"\r" not in text
    header, first = text.decode().splitlines()[:2]
    assert header.startswith("force [N],frequency [rad/s],X0 [m],X1c [m],X1s [m]")
    assert header.endswith("total_amplitude [m],phase_n [rad],residual_norm [-]")
    assert all("[" in col for col in header.split(","))
    assert first.split(",")[0] == "0.10000000000000001"  # 17 significant digits
    meta = json.loads((a / "metadata.json").read_text())
    assert meta["version"] and meta["config"]["mode"] == "frc" and "wall_time_s" in meta
    assert "wall_time_s" not in (a / "summary.json").read_text()


def test_csv_rows_are_converged_points(tmp_path):
    run(parse_config(dump(DUFFING)), tmp_path)
    data = np.genfromtxt(tmp_path / "frc_001.csv", delimiter=",", skip_header=1)
    assert data.shape[1] == 2 + 7 + 3
    assert np.all(data[:, -1] <= 1e-9)
    assert np.all(data[:, 0] == 0.2)


def test_main_exit_codes(tmp_path, capsys, monkeypatch):
    good = tmp_path / "good.json"
    good.write_text(dump({"mode": "apriori", "system": {"preset": "jenkins"}, "n": 3,
                          "sweep": {"amplitudes": [0.5, 1.0, 2.0]}}))
    assert main(["apriori", "--config", str(good), "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "apriori.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("X1 [m]")

    assert main(["frc", "--config", str(good)]) == cli.EXIT_CONFIG
    assert main(["apriori", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    assert main(["apriori", "--config", str(good), "--threads", "0"]) == cli.EXIT_CONFIG
    monkeypatch.setenv("VIBRATRAK_THREADS", "x")
    assert main(["apriori", "--config", str(good)]) == cli.EXIT_CONFIG

    # a frequency window with no 3:1 crossing is a solver failure
    monkeypatch.delenv("VIBRATRAK_THREADS")
    bad = tmp_path / "bad.json"
    bad.write_text(dump({"mode": "vprnm", "system": {"preset": "stiffening_duffing"}, "n": 3,
                         "sweep": {"force_range": [0.1, 1.0], "omega_window": [3.0, 3.5]}}))
    assert main(["vprnm", "--config", str(bad), "--out", str(tmp_path / "b")]) == \
        cli.EXIT_SOLVER


def test_validate_mode_and_failure_code(tmp_path, monkeypatch):
    doc = tmp_path / "v.json"
    doc.write_text(dump({"mode": "validate", "checks": ["transform_round_trip", "linear_frf"]}))
    assert main(["validate", "--config", str(doc), "--out", str(tmp_path / "v")]) == 0
    summary = json.loads((tmp_path / "v" / "summary.json").read_text())
    assert summary["passed"] == summary["total"] == 2
    monkeypatch.setitem(cli.CHECKS, "linear_frf", lambda: (False, "forced failure"))
    monkeypatch.setattr("vibratrak.validation.CHECKS", cli.CHECKS)
    assert main(["validate", "--config", str(doc), "--out", str(tmp_path / "w")]) == \
        cli.EXIT_VALIDATION


def test_step_scale_and_thread_env(tmp_path, monkeypatch):
    path = tmp_path / "c.json"
    path.write_text(dump(DUFFING))
    monkeypatch.setenv("VIBRATRAK_THREADS", "2")
    assert main(["frc", "--config", str(path), "--out", str(tmp_path / "s"),
                 "--step-scale", "2"]) == 0
    meta = json.loads((tmp_path / "s" / "metadata.json").read_text())
    assert meta["threads"] == 2
    assert main(["frc", "--config", str(path), "--step-scale", "0"]) == cli.EXIT_CONFIG


def test_bench_reports_counts_and_times(tmp_path):
    doc = {"mode": "bench", "system": {"preset": "jenkins"}, "n": 3,
           "sweep": {"forces": {"start": 0.9, "stop": 10, "count": 4},
                     "omega_range": [0.2, 0.4]},
           "continuation": {"ds_max": 0.1}}
    res = run(parse_config(dump(doc)), tmp_path)
    assert res.summary["hbm_newton_iterations"] > res.summary["vprnm_newton_iterations"] > 0
    assert res.summary["solve_ratio"] > 1
    assert "hbm_wall_time_s" in res.metadata
    assert (tmp_path / "bench.csv").read_text().startswith("method [-],")
