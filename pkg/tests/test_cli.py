"""Command-line interface: flags, files, exit codes, reproducibility."""

import hashlib
import json
import subprocess
import sys

import pytest

from nsdi.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_json(capsys, argv):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, json.loads(out.out) if out.out.lstrip().startswith("{") \
        else out.out, out.err


def test_version_text(capsys):
    rc = main(["--version"])
    assert rc == EXIT_OK
    assert capsys.readouterr().out.strip() == "nsdi 0.1.0 config-schema 1"


def test_convert_round_trip(capsys):
    rc, payload, _ = run_json(capsys, ["convert", "--intensity", "6.6e14"])
    assert rc == EXIT_OK
    assert payload["field_au"] == pytest.approx(0.13713635053510626,
                                                rel=1e-15)
    rc, back, _ = run_json(capsys, ["convert", "--field",
                                    str(payload["field_au"])])
    assert back["intensity_wcm2"] == pytest.approx(6.6e14, rel=1e-12)


def test_convert_rejects_zero_or_two_inputs(capsys):
    assert main(["convert"]) == EXIT_USAGE
    rc = main(["convert", "--intensity", "1e14", "--field", "0.1"])
    assert rc == EXIT_USAGE
    err = capsys.readouterr().err
    assert json.loads(err.splitlines()[-1])["error"]["type"] == "usage"


def test_saddle_payload(capsys):
    rc, payload, _ = run_json(capsys, ["saddle"])
    assert rc == EXIT_OK
    assert payload["V_s"] == pytest.approx(-1.6874511926699494, rel=1e-12)
    assert payload["r_s_squared"] == pytest.approx(12.642706624590343,
                                                   rel=1e-12)
    assert payload["gradient_norm"] < 1e-8
    assert payload["config"]["schema_version"] == 1


def test_saddle_frozen_phase_flips_the_geometry(capsys):
    rc, payload, _ = run_json(
        capsys, ["saddle", "--phase-frozen", str(__import__("math").pi)])
    assert rc == EXIT_OK
    assert payload["eps"] == pytest.approx(-0.137, rel=1e-15)
    assert payload["position"]["x"] > 0.0


def test_stability_spectrum_counts(capsys):
    rc, analytic, _ = run_json(capsys, ["stability"])
    assert rc == EXIT_OK
    assert analytic["n_unstable"] == 2
    assert analytic["n_stable"] == 3
    assert analytic["n_zero"] == 1
    assert len(analytic["eigenvalues"]) == 6
    # the fd matrix carries O(h^2) noise, far above the zero band, so its
    # counts are not meaningful; its eigenvalues must still track closely
    rc, fd, _ = run_json(capsys, ["stability", "--method", "fd"])
    assert rc == EXIT_OK
    for a, b in zip(analytic["eigenvalues"], fd["eigenvalues"]):
        assert abs(a - b) < 1e-4


def test_trajectory_smoke_and_regression(tmp_path, capsys):
    out = tmp_path / "t1"
    rc = main(["trajectory", "--out-dir", str(out)])
    assert rc == EXIT_OK
    assert "633 samples, termination completed" in capsys.readouterr().out
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x_or_rho,y_or_z,px,py,H,r,r_saddle"
    assert len(lines) == 1 + 633
    t, x, y, px, py, h, r, rs = (float(v) for v in lines[-1].split(","))
    assert t == pytest.approx(1183.3336261413683, rel=1e-12)
    assert px == pytest.approx(-0.40686199185176314, rel=1e-12)
    assert h == pytest.approx(0.29302589533519102, rel=1e-12)
    assert r == pytest.approx(500.31146775096659, rel=1e-12)

    events = (out / "events.csv").read_text().splitlines()
    assert events[0] == "kind,t"
    kind, t_ev = events[1].split(",")
    assert kind == "saddle_in"
    assert float(t_ev) == pytest.approx(357.52750617845362, rel=1e-12)

    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["launch"]["mode"] == "saddle_relative"
    assert resolved["launch"]["t0"] == pytest.approx(330.6939635357677,
                                                     rel=1e-14)

    out2 = tmp_path / "t2"
    main(["trajectory", "--out-dir", str(out2)])
    assert sha(out / "trajectory.csv") == sha(out2 / "trajectory.csv")


def test_trajectory_explicit_state_and_bad_state(tmp_path, capsys):
    out = tmp_path / "expl"
    rc = main(["trajectory", "--state", "3.0,2.0,0.1,0.0", "--t0", "0.0",
               "--out-dir", str(out), "--record-every", "4"])
    assert rc == EXIT_OK
    capsys.readouterr()
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["launch"] == {"mode": "explicit",
                                  "state": [3.0, 2.0, 0.1, 0.0], "t0": 0.0}
    assert main(["trajectory", "--state", "1,2,3", "--out-dir",
                 str(tmp_path / "bad")]) == EXIT_USAGE
    capsys.readouterr()


def test_ensemble_cli_reproducibility(tmp_path, capsys):
    args = ["ensemble", "--n", "80", "--seed", "11"]
    out1 = tmp_path / "e1"
    rc = main(args + ["--out-dir", str(out1), "--threads", "2"])
    assert rc == EXIT_OK
    assert "57 double-ionized, 8 rejected" in capsys.readouterr().out
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["n_double"] == 57
    assert summary["n_rejected"] == 8

    out2 = tmp_path / "e2"
    main(args + ["--out-dir", str(out2), "--threads", "1"])
    capsys.readouterr()
    assert sha(out1 / "rows.csv") == sha(out2 / "rows.csv")
    assert sha(out1 / "parallel_hist.csv") == sha(out2 / "parallel_hist.csv")


def test_ensemble_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(
        {"ensemble": {"n_samples": 80, "master_seed": 999},
         "field": {"F_peak": 0.137}}))
    out1 = tmp_path / "from-flag"
    main(["ensemble", "--config", str(cfg), "--seed", "11",
          "--out-dir", str(out1), "--threads", "1"])
    capsys.readouterr()
    resolved = json.loads((out1 / "resolved_config.json").read_text())
    assert resolved["ensemble"]["master_seed"] == 11  # flag beats file
    assert resolved["ensemble"]["n_samples"] == 80    # file fills the gap
    out2 = tmp_path / "plain"
    main(["ensemble", "--n", "80", "--seed", "11", "--out-dir", str(out2),
          "--threads", "1"])
    capsys.readouterr()
    assert sha(out1 / "rows.csv") == sha(out2 / "rows.csv")


def test_ensemble_usage_and_numerical_exits(tmp_path, capsys):
    assert main(["ensemble", "--out-dir", str(tmp_path / "u")]) == EXIT_USAGE
    capsys.readouterr()
    # a vanishing drive frees nobody, so the recoil histogram is empty
    rc = main(["ensemble", "--n", "10", "--seed", "3", "--field-strength",
               "1e-6", "--out-dir", str(tmp_path / "n"), "--threads", "1"])
    assert rc == EXIT_NUMERICAL
    err = capsys.readouterr().err
    assert json.loads(err.splitlines()[-1])["error"]["type"] == "numerical"


def test_ngon_scan_table_output(tmp_path, capsys):
    rc = main(["ngon-scan"])
    assert rc == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "N,eps,exists,rho_s,z_s,V_s,criterion"
    assert len(lines) == 1 + 19  # N = 2..20
    for line in lines[1:]:
        n, eps, exists, rho_s, z_s, v_s, crit = line.split(",")
        assert (exists == "true") == (int(n) <= 13)
        assert exists == crit
    out = tmp_path / "scan"
    rc = main(["ngon-scan", "--n-min", "2", "--n-max", "3",
               "--out-dir", str(out)])
    assert rc == EXIT_OK
    capsys.readouterr()
    saved = (out / "ngon_scan.csv").read_text().strip().splitlines()
    assert len(saved) == 3
    assert main(["ngon-scan", "--n-min", "5", "--n-max", "2"]) == EXIT_USAGE
    capsys.readouterr()


def test_perturb_scan_classes(tmp_path, capsys):
    out = tmp_path / "scan"
    rc, payload, _ = run_json(capsys, ["perturb-scan", "--out-dir", str(out)])
    assert rc == EXIT_OK
    tags = {row["displacement"]: row["tag"] for row in payload["rows"]}
    assert tags[0.0] == "symmetric_double"
    assert tags[0.2] == tags[-0.2] == "sequential_double"
    assert tags[0.4] == tags[-0.4] == "single_recapture"
    csv_lines = (out / "perturb_scan.csv").read_text().splitlines()
    assert csv_lines[0] == "displacement,tag,e1,e2,termination"
    assert len(csv_lines) == 1 + 5


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nsdi.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "nsdi 0.1.0 config-schema 1"
