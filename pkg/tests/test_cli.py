import csv
import subprocess
import sys

import numpy as np
import pytest

from ris_ser import cli
from ris_ser.exceptions import ConfigError, ConvergenceError

PAPER_CFG = """\
# near-field scenario
scenario = paper
zeta_min = 0.8
c_over_pi = 0.43
k = 1.6
f_c_ghz = 3.8
wavelength = 0.0789   # quoted rounded wavelength
d_tx = 30
d_ty = 40
d_rx = 30
d_ry = 40
g_t = 1
g_r = 1
"""


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "paper.cfg"
    path.write_text(PAPER_CFG)
    return path


def test_pathloss_reports_fraunhofer_distance(cfg_file, tmp_path):
    out = tmp_path / "pl.csv"
    assert cli.main(["pathloss", str(cfg_file), "--out", str(out)]) == 0
    header, rows = read_csv(out)
    row = dict(zip(header, rows[0]))
    assert float(row["fraunhofer_distance_m"]) == pytest.approx(413.66, abs=0.01)
    assert float(row["wavelength_m"]) == pytest.approx(0.0789)
    assert float(row["path_loss"]) == pytest.approx(3.942e-9, rel=1e-3)


def test_ser_exact_and_spa_agree(cfg_file, tmp_path):
    out = tmp_path / "ser.csv"
    args = ["ser", str(cfg_file), "--out", str(out), "--set", "n_ris = 6",
            "--set", "phase_mode = uniform", "--set", "method = exact,spa",
            "--set", "snr_start_db = -5", "--set", "snr_stop_db = 20", "--set", "snr_step_db = 5"]
    assert cli.main(args) == 0
    header, rows = read_csv(out)
    assert header == ["snr_db", "gamma_bar", "method", "ser"]
    snr = [float(r[0]) for r in rows]
    assert snr == sorted(snr)
    by = {}
    for r in rows:
        by.setdefault(r[2], []).append(float(r[3]))
    exact, spa = np.array(by["exact-hypoexp"]), np.array(by["spa"])
    assert np.all(np.abs(spa / exact - 1.0) < 0.03)


def test_empty_sweep_is_a_config_error(cfg_file, capsys):
    code = cli.main(["ser", str(cfg_file), "--set", "snr_start_db = 10", "--set",
                     "snr_stop_db = 0"])
    assert code == 1
    err = capsys.readouterr().err
    assert "snr_start_db" in err and "range" in err


@pytest.mark.parametrize("line,field", [
    ("colour = red", "colour"),
    ("scheme = G7", "scheme"),
    ("mod_order = 6", "mod_order"),
    ("n_ris = 2.5", "n_ris"),
    ("zeta_min = 1.5", "zeta_min"),
    ("method = magic", "method"),
    ("phase_mode = file", "phase_value"),
])
def test_field_level_config_errors(cfg_file, line, field, capsys):
    assert cli.main(["ser", str(cfg_file), "--set", line]) == 1
    assert f"{field}:" in capsys.readouterr().err


def test_exact_method_refuses_clustered_profile(cfg_file, tmp_path, capsys):
    args = ["ser", str(cfg_file), "--out", str(tmp_path / "x.csv"), "--set", "n_ris = 20",
            "--set", "phase_mode = codebook", "--set", "method = exact"]
    assert cli.main(args) == 1
    assert "clustered" in capsys.readouterr().err


def test_numerical_failure_exit_code(cfg_file, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise ConvergenceError("no convergence")

    monkeypatch.setattr(cli, "ser_curve", boom)
    assert cli.main(["ser", str(cfg_file), "--out", str(tmp_path / "f.csv")]) == 2


def test_manifest_reproduces_csv(cfg_file, tmp_path):
    out = tmp_path / "mc.csv"
    args = ["mc", str(cfg_file), "--out", str(out), "--set", "trials = 20000",
            "--set", "phase_mode = uniform", "--set", "seed = 17", "--set", "snr_stop_db = 6"]
    assert cli.main(args) == 0
    manifest = tmp_path / "mc.csv.manifest"
    text = manifest.read_text()
    assert "seed = 17" in text and "toolkit_version" in text
    first = out.read_bytes()
    out.unlink()
    assert cli.main(["mc", str(manifest)]) == 0
    assert out.read_bytes() == first
    header, rows = read_csv(out)
    assert header == ["snr_db", "gamma_bar", "ser", "std_error", "trials"]


def test_pdf_asym_optimize_outputs(cfg_file, tmp_path):
    pdf = tmp_path / "pdf.csv"
    assert cli.main(["pdf", str(cfg_file), "--out", str(pdf), "--set", "n_ris = 10",
                     "--set", "phase_mode = codebook", "--set", "method = lclt,spa,empirical",
                     "--set", "trials = 50000", "--set", "bins = 40"]) == 0
    header, rows = read_csv(pdf)
    assert header == ["y", "exact", "lclt", "spa", "spa_normalized", "empirical"]
    assert len(rows) == 40 and all(r[1] == "" for r in rows)

    asym = tmp_path / "asym.csv"
    assert cli.main(["asym", str(cfg_file), "--out", str(asym), "--set", "scheme = G3",
                     "--set", "snr_start_db = 5"]) == 0
    header, rows = read_csv(asym)
    assert header[:4] == ["snr_db", "gamma_bar", "ser_asymptotic", "ser_reference"]
    assert float(rows[0][header.index("diversity_gain")]) == 3
    assert float(rows[0][header.index("coding_gain_ratio")]) == pytest.approx(1.0, abs=1e-6)

    opt = tmp_path / "opt.csv"
    assert cli.main(["optimize", str(cfg_file), "--out", str(opt), "--set", "n_ris = 40",
                     "--set", "groups = 8", "--set", "candidates = 100"]) == 0
    header, rows = read_csv(opt)
    assert header == ["step", "accepted", "objective", "ratio"]
    obj = [float(r[2]) for r in rows]
    assert len(obj) == 9 and np.all(np.diff(obj) <= 0.0)


def test_phase_sources(tmp_path):
    phase_file = tmp_path / "phases.txt"
    np.savetxt(phase_file, np.full(8, np.pi))
    raw = {"n_ris": "8", "phase_mode": "file", "phase_value": str(phase_file)}
    prof = cli.build_profile(cli.resolve("ser", raw))
    assert prof.classification == "identical"
    raw = {"n_ris": "8", "phase_mode": "fixed", "phase_value": "0.5pi"}
    cfg = cli.build_config(cli.resolve("ser", raw))
    np.testing.assert_allclose(cfg.phases, np.pi / 2)
    raw = {"n_ris": "12", "phase_mode": "optimized", "groups": "12", "candidates": "16"}
    assert cli.build_config(cli.resolve("ser", raw)).n_ris == 12
    with pytest.raises(ConfigError):
        cli.build_profile(cli.resolve("ser", {"n_ris": "3", "phase_mode": "file",
                                              "phase_value": str(phase_file)}))


def test_module_entry_point(cfg_file, tmp_path):
    out = tmp_path / "p.csv"
    proc = subprocess.run([sys.executable, "-m", "ris_ser", "pathloss", str(cfg_file), "--out",
                           str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == ""
    assert "wrote" in proc.stderr
