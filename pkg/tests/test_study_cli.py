import csv
import math
import subprocess
import sys

import pytest

from nonlocal_interface.cli import main
from nonlocal_interface.study import (CSV_HEADER, ConfigError, StudyConfig, checks_pass,
                                      emit_sparsity, run_study)

H_STUDY = """
study = "h"
case = "sin1d"
[kernel1]
family = "constant"
delta = 0.2
[kernel2]
family = "fractional"
s = 0.4
delta = 0.4
[mesh]
h = [0.0625, 0.03125]
[output]
record_time = false
"""

SINGLE = """
study = "single"
case = "sin1d"
[kernel1]
family = "fractional"
s = 0.2
delta = 0.2
[kernel2]
family = "fractional"
s = 0.4
delta = 0.4
[mesh]
h = 0.05
[output]
solutions = true
"""


def _write(tmp_path, text, name="study.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_mapping_round_trip():
    cfg = StudyConfig(study="delta", case="local1d", deltas=(0.05, 0.1), h_factor=0.25, ratio=1.0,
                      quad=(("cut_depth", 5),), record_time=False)
    again = StudyConfig.from_mapping(cfg.to_mapping())
    assert again == cfg
    assert again.deltas == (0.1, 0.05)
    assert [p[0] for p in again.points()] == [0.1, 0.05]
    assert again.points()[1] == (0.05, 0.0125, 0.05, 0.05)


def test_toml_parsing(tmp_path):
    cfg = StudyConfig.from_toml(_write(tmp_path, H_STUDY))
    assert cfg.study == "h" and cfg.kernel2.family == "fractional" and cfg.kernel2.s == 0.4
    assert cfg.h == (0.0625, 0.03125) and not cfg.record_time


@pytest.mark.parametrize("raw", [
    {"study": "h", "case": "sin1d", "mesh": {"h": [0.1]}, "colour": "red"},
    {"study": "h", "case": "sin1d", "mesh": {"h": [0.1], "n": 3}},
    {"study": "delta", "case": "sin1d", "delta": {"values": [0.1]}, "mesh": {"h": [0.01]}},
    {"study": "patch", "case": "sin1d", "mesh": {"h": [0.1]}},
    {"study": "delta", "case": "local1d", "mesh": {"h": [0.01]}},
    {"study": "h", "case": "sin1d", "mesh": {"h": [0.1, 0.1]}},
    {"study": "h", "case": "sin1d", "mesh": {"h": [0.1]}, "quad": {"order": 3}},
    {"study": "h", "case": "sin2d", "mesh": {"h": [0.1]}, "output": {"sparsity": True}},
    {"study": "h", "case": "sin1d", "mesh": {"h": [0.1]}, "kernel1": {"family": "gauss"}},
])
def test_config_errors(raw):
    with pytest.raises(ConfigError):
        StudyConfig.from_mapping(raw)


def test_h_study_outputs_and_reproducibility(tmp_path):
    cfg = StudyConfig.from_toml(_write(tmp_path, H_STUDY))
    a = run_study(cfg, tmp_path / "a")
    b = run_study(cfg, tmp_path / "b")
    assert a.ok and b.ok
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    rows = _read_csv(tmp_path / "a" / "results.csv")
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) - 1 == len(cfg.points())
    assert rows[1][CSV_HEADER.index("slope_L2_1")] == ""
    assert float(rows[2][CSV_HEADER.index("slope_L2_1")]) > 1.5
    assert float(rows[2][CSV_HEADER.index("seconds")]) == 0.0
    assert all(checks_pass(c) for c in a.checks)
    meta = (tmp_path / "a" / "meta.txt").read_text()
    assert "status" in meta and "numpy" in meta
    dat = (tmp_path / "a" / "results.dat").read_text().splitlines()
    assert sum(1 for ln in dat if not ln.startswith("#")) == 2


def test_error_row_on_failure(tmp_path):
    cfg = StudyConfig(study="h", case="sin1d", h=(0.6,))
    res = run_study(cfg, tmp_path)
    assert not res.ok and "point 0" in res.error
    rows = _read_csv(tmp_path / "results.csv")
    assert len(rows) == 2 and math.isnan(float(rows[1][CSV_HEADER.index("L2_1")]))
    assert "error" in (tmp_path / "meta.txt").read_text()


def test_emit_sparsity(tmp_path):
    cfg = StudyConfig(study="single", case="sin1d", h=(0.05,))
    path = emit_sparsity(cfg, tmp_path / "s.txt")
    cats = {line.split()[2] for line in path.read_text().splitlines()}
    assert cats == {"Kernel1Only", "Kernel2Only", "Both"}
    with pytest.raises(ConfigError):
        emit_sparsity(StudyConfig(study="h", case="sin1d", h=(0.05,)))


def test_cli_single_run(tmp_path):
    cfg = _write(tmp_path, SINGLE)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "-q"]) == 0
    for name in ("results.csv", "results.dat", "meta.txt", "sparsity.txt", "solution_00.dat"):
        assert (out / name).exists(), name


def test_cli_flags_override(tmp_path):
    cfg = _write(tmp_path, H_STUDY)
    out = tmp_path / "patch"
    code = main(["run", "--config", str(cfg), "--study", "patch", "--case", "patch1d",
                 "--out", str(out), "-q"])
    assert code == 0
    meta = (out / "meta.txt").read_text()
    assert "study = 'patch'" in meta and "case = 'patch1d'" in meta


def test_cli_exit_codes(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.toml"), "-q"]) == 2
    bad = _write(tmp_path, 'study = "h"\ncase = "moon"\n', "bad.toml")
    assert main(["run", "--config", str(bad), "-q"]) == 2
    failing = _write(tmp_path, 'study = "h"\ncase = "sin1d"\nout = "%s"\n[mesh]\nh = [0.6]\n'
                     % (tmp_path / "f").as_posix(), "failing.toml")
    assert main(["run", "--config", str(failing), "-q"]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "nonlocal_interface", "--version"],
                         capture_output=True, text=True, check=True)
    assert "nonlocal-interface" in out.stdout


def test_best_approximation_check_roundoff_floor():
    base = {"symmetry": 0.0, "row_sum": 0.0, "energy_identity": 0.0}
    # exact solution in the FE space: both energy errors at roundoff
    exact_in_space = dict(base, energy_error=1.3e-13, interpolant_energy_error=5e-15,
                          best_approximation_gap=1.25e-13, solution_energy_norm=1.4)
    assert checks_pass(exact_in_space)
    worse = dict(base, energy_error=2e-3, interpolant_energy_error=1e-3,
                 best_approximation_gap=1e-3, solution_energy_norm=1.4)
    assert not checks_pass(worse)
