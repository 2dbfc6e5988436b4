import json

import numpy as np
import pytest

from bicmllr.cli import main
from conftest import BASELINE_8AM_7_88


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_exits_zero():
    with pytest.raises(SystemExit) as e:
        main(["ber", "--help"])
    assert e.value.code == 0


def test_unknown_subcommand_is_config_error(capsys):
    code, _, err = run_cli(capsys, "frobnicate")
    assert code == 1 and "config error" in err


def test_unknown_flag_is_config_error(capsys):
    code, _, err = run_cli(capsys, "capacity", "--snr-db", "5", "--bogus", "1")
    assert code == 1 and "config error" in err


def test_missing_required_flag(capsys):
    code, _, err = run_cli(capsys, "capacity")
    assert code == 1 and "snr-db" in err


def test_bit_range_validated(capsys):
    code, _, err = run_cli(capsys, "llr-curve", "--constellation", "8am",
                           "--snr-db", "7.88", "--bit", "4", "--grid", "-1:1:1")
    assert code == 1


def test_llr_curve_csv(capsys, tmp_path):
    params = dict(BASELINE_8AM_7_88)
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps(params))
    code, out, _ = run_cli(capsys, "llr-curve", "--constellation", "8am",
                           "--k", "0", "--snr-db", "7.88", "--bit", "2",
                           "--llr", f"true,piecewise:{pfile}",
                           "--grid", "-3:3:0.5")
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "y,llr_true,llr_piecewise"
    assert len(lines) == 1 + 13
    y, t, p = (np.array(c) for c in
               zip(*(map(float, l.split(",")) for l in lines[1:])))
    assert y[0] == -3.0 and y[-1] == 3.0
    assert np.allclose(p, -params["a1_2"] * np.abs(y) + params["b1_2"])
    assert np.max(np.abs(t - p)) < 0.4  # optimized fit tracks the true curve


def test_capacity_json_and_reproducibility(capsys, tmp_path):
    argv = ["capacity", "--constellation", "8am", "--snr-db", "5.0",
            "--n", "60000", "--seed", "3"]
    code, out1, _ = run_cli(capsys, *argv)
    assert code == 0
    code, out2, _ = run_cli(capsys, *argv)
    assert out1 == out2  # byte-identical rerun
    doc = json.loads(out1)
    assert doc["total"] == pytest.approx(0.855, abs=0.03)
    assert len(doc["per_bit"]) == 3
    assert doc["config"]["snr_db"] == 5.0 and doc["seed"] == 3
    assert "version" in doc


def test_workers_do_not_change_results(capsys):
    base = ["capacity", "--constellation", "8am", "--snr-db", "5.0",
            "--n", "60000", "--seed", "3"]
    _, out1, _ = run_cli(capsys, *base)
    _, out4, _ = run_cli(capsys, *base, "--workers", "3")
    d1, d4 = json.loads(out1), json.loads(out4)
    assert d1["total"] == d4["total"] and d1["per_bit"] == d4["per_bit"]


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("snr_db = 5.0\nn = 40000\nseed = 9  # comment\n")
    code, out, _ = run_cli(capsys, "capacity", "--constellation", "8am",
                           "--config", str(cfg))
    assert code == 0
    assert json.loads(out)["seed"] == 9
    # explicit flag wins over the file entry
    code, out, _ = run_cli(capsys, "capacity", "--constellation", "8am",
                           "--config", str(cfg), "--seed", "2")
    assert json.loads(out)["seed"] == 2


def test_unknown_config_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("snr_db = 5.0\nwombat = 3\n")
    code, _, err = run_cli(capsys, "capacity", "--constellation", "8am",
                           "--config", str(cfg))
    assert code == 1 and "wombat" in err


def test_ber_csv_columns(capsys):
    code, out, _ = run_cli(capsys, "ber", "--constellation", "8am",
                           "--snr-db", "10.0", "--llr", "logsum",
                           "--code-n", "120", "--code-seed", "4",
                           "--max-frames", "40", "--min-errors", "20")
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "snr_db,frames,bit_errors,frame_errors,ber,fer"
    vals = lines[1].split(",")
    assert float(vals[0]) == 10.0 and int(vals[1]) >= 1


def test_optimize_llr_json(capsys, tmp_path):
    pout = tmp_path / "fit.json"
    code, out, _ = run_cli(capsys, "optimize-llr", "--constellation", "8am",
                           "--snr-db", "7.88", "--bit", "1",
                           "--n-samples", "40000", "--seed", "1",
                           "--params-out", str(pout))
    assert code == 0
    doc = json.loads(out)
    assert doc["converged"]
    assert doc["params"]["a1_1"] == pytest.approx(1.33, abs=0.08)
    saved = json.loads(pout.read_text())
    assert saved["a1_1"] == doc["params"]["a1_1"]


def test_threshold_json(capsys, tmp_path):
    traj = tmp_path / "traj.csv"
    code, out, _ = run_cli(capsys, "threshold", "--constellation", "8am",
                           "--llr", "true", "--window", "6.5:9.0",
                           "--tol", "0.7", "--population", "20000",
                           "--max-iter", "600", "--seed", "1",
                           "--trajectory-csv", str(traj))
    assert code == 0
    doc = json.loads(out)
    assert 7.0 < doc["threshold_db"] < 8.5
    assert doc["trajectory_csv_path"] == str(traj)
    header = traj.read_text().splitlines()
    assert any(l.startswith("iteration,error_rate") for l in header)
