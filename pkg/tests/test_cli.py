import json
import subprocess
import sys

import numpy as np
from lipd import cli
from lipd import experiments as ex
from lipd.forward import bump
from lipd.inversion import InversionError
from lipd.io import read_delta_map_csv, read_field_csv, read_json
from lipd.model import Grid


def run(capsys, *argv):
    rc = cli.main([str(a) for a in argv])
    cap = capsys.readouterr()
    text = cap.out if cap.out.strip() else cap.err
    return rc, (json.loads(text) if text.strip().startswith("{") else text)


def test_params_example(capsys):
    rc, out = run(capsys, "params", "--sigma0", 1, "--mu0", 0.5, "--r", 0)
    assert rc == 0 and out["status"] == "ok"
    assert (out["a0"], out["b0"], out["a"]) == (0.0, 0.0, -1.0)


def test_usage_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "params", "--bogus")[0] == 2
    assert run(capsys, "params", "--sigma0", -1)[0] == 2
    assert run(capsys, "invert", "--v", tmp_path / "missing.csv", "--lambda", 1e-6)[0] == 2
    bad = tmp_path / "m.csv"
    bad.write_text("A,u\n1,0.1\n2,-0.5\n3,1\n4,2\n")
    rc, out = run(capsys, "invert", "--market", bad, "--lambda", 1e-6)
    assert rc == 2 and "row 3" in out["error"]
    rc, out = run(capsys, "invert", "--market", bad, "--lambda", "auto")
    assert rc == 2


def test_failed_check_exits_1(capsys, monkeypatch):
    bad = ex.LemmaReport("x", "weight-estimates", {}, {"m": 2.0}, "", {"t": 1.0}, [("m", "<=", "t")])
    monkeypatch.setattr(ex, "run_lemma_suite", lambda *a, **k: [bad])
    rc, out = run(capsys, "verify-lemmas")
    assert rc == 1 and out["status"] == "failed" and out["results"] == {"x": False}


def test_numerical_failure_exits_1(capsys, monkeypatch, tmp_path):
    run(capsys, "forward", "--grid-n", 128, "--out", tmp_path)

    def boom(*a, **k):
        raise InversionError("synthetic")
    monkeypatch.setattr(cli, "tikhonov_solve", boom)
    rc, out = run(capsys, "invert", "--grid-n", 128, "--v", tmp_path / "v.csv", "--lambda", 1e-6)
    assert rc == 1 and out["status"] == "numerical-failure" and out["error_type"] == "InversionError"


def test_forward_invert_closed_loop(capsys, tmp_path):
    rc, _ = run(capsys, "forward", "--out", tmp_path / "fw")
    assert rc == 0
    rc, out = run(capsys, "invert", "--v", tmp_path / "fw" / "v.csv", "--lambda", 1e-12, "--out", tmp_path / "inv")
    assert rc == 0 and out["lambda"] == 1e-12
    f_hat = read_field_csv(tmp_path / "inv" / "f_hat.csv")
    f = bump(f_hat.grid, 0.5, 1.0, 0.05).values
    assert np.linalg.norm(f_hat.values - f) <= 1e-3 * np.linalg.norm(f)
    sv = read_json(tmp_path / "inv" / "inversion.json")["singular_values"]
    assert all(a >= b >= 0 for a, b in zip(sv, sv[1:]))


def test_market_closed_loop(capsys, tmp_path):
    rc, syn = run(capsys, "synth", "--grid-n", 1601, "--mask=-1,3", "--noise", 0.01, "--out", tmp_path / "s")
    assert rc == 0 and syn["rows"] > 4
    rc, out = run(capsys, "invert", "--grid-n", 513, "--market", tmp_path / "s" / "market.csv", "--noise", 0.01,
                  "--lambda", "auto", "--out", tmp_path / "i")
    assert rc == 0 and out["method"] == "discrepancy"
    f_true = read_field_csv(tmp_path / "s" / "f_true.csv")
    f_hat = read_field_csv(tmp_path / "i" / "f_hat.csv")
    t = np.interp(f_hat.y, f_true.y, f_true.values)
    assert np.linalg.norm(f_hat.values - t) <= 0.15 * np.linalg.norm(t)


def test_synth_is_deterministic_under_seed(capsys, tmp_path):
    args = ["synth", "--grid-n", 401, "--mask=-1,3", "--noise", 0.01, "--nt", 100]
    for name, seed in (("a", 7), ("b", 7), ("c", 8)):
        assert run(capsys, *args, "--seed", seed, "--out", tmp_path / name)[0] == 0
    text = {k: (tmp_path / k / "market.csv").read_text() for k in "abc"}
    assert text["a"] == text["b"] != text["c"]


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# model\nsigma0 = 1.0\nmu0 = 0.5\nr = 0.25\n")
    rc, out = run(capsys, "params", "--config", cfg)
    assert rc == 0 and out["a"] == -1.0 and out["b0"] == 0.25
    rc, out = run(capsys, "params", "--config", cfg, "--r", 0)
    assert out["b0"] == 0.0
    cfg.write_text("colour = blue\n")
    assert run(capsys, "params", "--config", cfg)[0] == 2


def test_w_command(capsys, tmp_path):
    rc, out = run(capsys, "w", "--tau", 0.5, "--out", tmp_path)
    w = read_field_csv(tmp_path / "w.csv")
    assert rc == 0 and w.grid == Grid(-8, 8, 512)
    assert np.all(w.values > 0) and out["max"] == np.max(w.values)


def test_fbi_scan_and_transforms(capsys, tmp_path):
    run(capsys, "forward", "--grid-n", 1024, "--out", tmp_path)
    rc, out = run(capsys, "fbi", "--input", tmp_path / "v.csv", "--scan", "--out", tmp_path / "scan")
    assert rc == 0 and out["tiles"] == read_delta_map_csv(tmp_path / "scan" / "delta_map.csv").shape[0]
    rc, out = run(capsys, "fbi", "--input", tmp_path / "v.csv", "--h-list", "0.1,0.05", "--out", tmp_path / "t")
    assert rc == 0 and [t["h"] for t in out["transforms"]] == [0.1, 0.05]
    assert (tmp_path / "t" / "fbi_h0.05.csv").exists()


def test_verify_lemmas_subprocess(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lipd.cli", "verify-lemmas", "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert json.loads(proc.stdout)["passed"]
    ledger = read_json(tmp_path / "lemmas.json")["ledger"]
    assert {"lemma_id", "inputs", "measured", "predicted", "tolerance", "pass"} <= set(ledger[0])
