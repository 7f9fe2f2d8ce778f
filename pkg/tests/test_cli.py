import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from quasiwork import cli
from quasiwork.errors import ConvergenceError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


CHI = """\
name: t
spec:
  L: 6
  beta: 1.0
  lambda0: {l0}
  lambda_tau: {lt}
  q: 0.25
  phases: 0.3
  state: coherent
grid:
  u_max: {u_max}
  n_u: 41
"""


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path / "out")])


def read_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1)


def test_chi_writes_curve_and_metadata(tmp_path):
    cfg = write(tmp_path, CHI.format(l0=0.5, lt=1.5, u_max=4.0))
    assert run(tmp_path, "chi", "--config", str(cfg)) == cli.EXIT_OK
    out = tmp_path / "out"
    assert (out / "t_chi.csv").read_text().splitlines()[0] == "u,re,im"
    data = read_csv(out / "t_chi.csv")
    assert data.shape == (41, 3)
    assert data[20, 1] == pytest.approx(1, abs=1e-12)
    meta = json.loads((out / "t_chi.json").read_text())
    assert meta["config"]["spec"]["L"] == 6 and meta["gaussian_law"]["L"] == 6


def test_identity_quench_gives_constant_curve(tmp_path):
    cfg = write(tmp_path, CHI.format(l0=0.7, lt=0.7, u_max=10.0))
    assert run(tmp_path, "chi", "--config", str(cfg)) == cli.EXIT_OK
    data = read_csv(tmp_path / "out" / "t_chi.csv")
    np.testing.assert_allclose(data[:, 1], 1, atol=1e-12)
    np.testing.assert_allclose(data[:, 2], 0, atol=1e-12)


def test_zero_u_max_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, CHI.format(l0=0.5, lt=1.5, u_max=0.0))
    assert run(tmp_path, "chi", "--config", str(cfg)) == cli.EXIT_CONFIG
    assert f"{cfg}:11" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text, line",
    [
        (CHI.format(l0=0.5, lt=1.5, u_max=4.0).replace("L: 6", "L: -3"), 3),
        (CHI.format(l0=0.5, lt=1.5, u_max=4.0).replace("state: coherent", "state: hot"), 9),
        (CHI.format(l0=0.5, lt=1.5, u_max=4.0).replace("  q: 0.25\n", "  q: 0.25\n  colour: red\n"), 8),
        (CHI.format(l0=0.5, lt=1.5, u_max=4.0).replace("n_u: 41", "n_u: many"), 12),
        ("spec:\n  L: [1,\n", 3),
    ],
)
def test_config_errors_name_the_line(tmp_path, capsys, text, line):
    cfg = write(tmp_path, text)
    assert run(tmp_path, "chi", "--config", str(cfg)) == cli.EXIT_CONFIG
    assert f"{cfg}:{line}" in capsys.readouterr().err


def test_critical_field_is_config_error(tmp_path):
    cfg = write(tmp_path, CHI.format(l0=1.0, lt=1.5, u_max=4.0))
    assert run(tmp_path, "chi", "--config", str(cfg)) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert run(tmp_path, "chi", "--config", str(tmp_path / "absent.yaml")) == cli.EXIT_CONFIG


@pytest.mark.parametrize("threads", ["0", "x"])
def test_bad_thread_count(tmp_path, threads):
    cfg = write(tmp_path, CHI.format(l0=0.5, lt=1.5, u_max=4.0))
    assert run(tmp_path, "chi", "--config", str(cfg), "--threads", threads) == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg, out, threads):
        raise ConvergenceError("quadrature did not converge")

    monkeypatch.setitem(cli.HANDLERS, "chi", boom)
    cfg = write(tmp_path, CHI.format(l0=0.5, lt=1.5, u_max=4.0))
    assert run(tmp_path, "chi", "--config", str(cfg)) == cli.EXIT_NUMERICAL


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv("QUASIWORK_THREADS", "3")
    assert cli._threads(None) == 3
    assert cli._threads("2") == 2


@pytest.mark.parametrize("command, cfg_name", [("chi", "negativity.yaml"), ("coherence", "coherence.yaml")])
def test_single_thread_output_is_bit_identical(tmp_path, command, cfg_name):
    cfg = str(CONFIGS / cfg_name)
    for d in ("a", "b"):
        assert cli.main([command, "--config", cfg, "--out", str(tmp_path / d), "--threads", "1"]) == 0
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_threaded_output_matches_single_thread(tmp_path):
    cfg = str(CONFIGS / "negativity.yaml")
    assert cli.main(["chi", "--config", cfg, "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert cli.main(["chi", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    files = sorted((tmp_path / "a").glob("*.csv"))
    assert files
    for f in files:
        np.testing.assert_allclose(read_csv(tmp_path / "b" / f.name), read_csv(f), rtol=0, atol=1e-12)


def test_hist_writes_both_chain_lengths(tmp_path):
    assert run(tmp_path, "hist", "--config", str(CONFIGS / "histograms.yaml")) == cli.EXIT_OK
    files = sorted(p.name for p in (tmp_path / "out").glob("*.csv"))
    assert len(files) == 2
    header = (tmp_path / "out" / files[0]).read_text().splitlines()[0].split(",")
    assert header[:3] == ["w", "p", "dw"] and len(header) == 4


def test_coherence_residuals_are_small(tmp_path):
    assert run(tmp_path, "coherence", "--config", str(CONFIGS / "coherence.yaml")) == cli.EXIT_OK
    (csv,) = (tmp_path / "out").glob("*.csv")
    data = read_csv(csv)
    assert data.shape[0] == 50
    assert data[:, 5].max() <= 1e-10 and data[:, 6].max() <= 1e-10


def test_coherence_rejects_large_chains(tmp_path):
    cfg = write(tmp_path, "coherence:\n  L: 8\n")
    assert run(tmp_path, "coherence", "--config", str(cfg)) == cli.EXIT_CONFIG


def test_verify_quick_passes(tmp_path, capsys):
    assert run(tmp_path, "verify", "--level", "quick") == cli.EXIT_OK
    report = json.loads((tmp_path / "out" / "verify_report.json").read_text())
    assert report["passed"] and report["level"] == "quick"
    assert "FAIL" not in capsys.readouterr().out


def test_injected_fault_fails_verification(tmp_path, capsys):
    assert run(tmp_path, "verify", "--level", "quick", "--inject-fault", "coherent-sign") == cli.EXIT_VERIFY
    report = json.loads((tmp_path / "out" / "verify_report.json").read_text())
    failed = [c for c in report["checks"] if not c["passed"]]
    assert failed and any("lambda0" in f or "L=" in f for c in failed for f in c["failures"])


def test_unknown_fault_is_config_error(tmp_path):
    assert run(tmp_path, "verify", "--inject-fault", "nonsense") == cli.EXIT_CONFIG


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "quasiwork.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
