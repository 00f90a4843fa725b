from __future__ import annotations

import subprocess
import sys

import pytest

from dissipative import cli
from dissipative.diagnostics import read_csv
from dissipative.errors import ConfigError


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# --- parsing --------------------------------------------------------------------------

def test_parse_basic_config():
    cfg = cli.parse_config("problem = heat\nnx = 16\ntau = 0.01\nn_steps = 20\ndg_order = 0\nout = run.csv")
    assert (cfg.problem, cfg.nx, cfg.tau, cfg.n_steps, cfg.dg_order, cfg.out) == ("heat", 16, 0.01, 20, 0, "run.csv")
    assert cfg.L == 1.0 and cfg.seed == 42 and cfg.ic is None


def test_parse_comments_and_whitespace():
    cfg = cli.parse_config("# header\n  problem=pme   # inline\n\nm =  3\n")
    assert cfg.problem == "pme" and cfg.m == 3.0


def test_parse_requires_pme_exponent():
    with pytest.raises(ConfigError, match="m required"):
        cli.parse_config("problem = pme")


def test_parse_requires_gas_exponent():
    with pytest.raises(ConfigError, match="gamma required"):
        cli.parse_config("problem = gas")


def test_parse_rejects_degree_two():
    with pytest.raises(ConfigError, match="line 2") as info:
        cli.parse_config("problem = heat\ndg_order = 2")
    assert "dg_order" in str(info.value)
    assert info.value.lineno == 2


@pytest.mark.parametrize("text, lineno", [
    ("problem = heat\nbogus = 1", 2),
    ("problem = heat\nnx = 4\nnx = 8", 3),
    ("problem = heat\nm = 2", 2),
    ("problem = heat\nnx = 2.5", 2),
    ("problem = heat\ntau = -1", 2),
    ("problem = heat\nic = nope", 2),
    ("problem = heat\njust words", 2),
    ("problem = gradient\nj_matrix = 0,1;1,0", 2),
    ("problem = fokker_planck\npotential = cubic", 2),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ConfigError) as info:
        cli.parse_config(text)
    assert info.value.lineno == lineno


def test_parse_missing_problem():
    with pytest.raises(ConfigError, match="problem required"):
        cli.parse_config("nx = 4")


# --- run ---------------------------------------------------------------------------------

def test_run_gradient_preset(tmp_path, capsys):
    out = tmp_path / "g.csv"
    cfg = cli.parse_config(f"problem = gradient\ntau = 0.1\nn_steps = 10\nout = {out}")
    assert cli.run(cfg) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("PASS gradient")
    ledger = read_csv(out)
    assert ledger.rows[-1].energy == pytest.approx(0.5 * 1.1 ** -20, abs=1e-12)
    assert "final energy = 0.07432181" in line


def test_run_fokker_planck_steady(tmp_path, capsys):
    out = tmp_path / "fp.csv"
    cfg = cli.parse_config(f"problem = fokker_planck\nic = steady\nn_steps = 5\nout = {out}")
    assert cli.run(cfg) == 0
    assert capsys.readouterr().out.startswith("PASS")
    energies = read_csv(out).energy
    assert energies.max() == energies.min()


def test_run_heat_huge_step_fails(tmp_path, capsys):
    path = _write(tmp_path, f"problem = heat\ntau = 1e6\nn_steps = 3\nout = {tmp_path / 'h.csv'}\n")
    status = cli.main(["run", path])
    assert status != 0
    assert "NewtonDivergence" in capsys.readouterr().out


def test_run_reports_structure_failures(tmp_path, capsys):
    cfg = cli.parse_config(f"problem = maxwell1d\nn_steps = 2\nstructure_samples = 3\nout = {tmp_path / 'm.csv'}")
    assert cli.run(cfg) == 0
    assert "structure_failures" not in capsys.readouterr().out


# --- sweep ----------------------------------------------------------------------------------

def test_sweep_two_values(tmp_path, capsys):
    path = _write(tmp_path, f"problem = gradient\nn_steps = 5\nout = {tmp_path / 'g.csv'}\n")
    assert cli.main(["sweep", path, "--param", "tau", "--values", "0.1,0.05"]) == 0
    assert (tmp_path / "g_0.1.csv").exists() and (tmp_path / "g_0.05.csv").exists()
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and all("PASS" in ln for ln in lines)


def test_sweep_empty_list_is_noop(tmp_path, capsys):
    path = _write(tmp_path, f"problem = gradient\nout = {tmp_path / 'g.csv'}\n")
    assert cli.main(["sweep", path, "--param", "tau", "--values", ""]) == 0
    assert list(tmp_path.glob("*.csv")) == []


def test_sweep_continues_past_failures(tmp_path, capsys):
    path = _write(tmp_path, f"problem = heat\nn_steps = 2\nout = {tmp_path / 'h.csv'}\n")
    assert cli.main(["sweep", path, "--param", "tau", "--values", "1e6,0.01"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "PASS" in out
    assert (tmp_path / "h_0.01.csv").exists()


def test_sweep_rejects_non_numeric_key(tmp_path, capsys):
    path = _write(tmp_path, "problem = heat\n")
    assert cli.main(["sweep", path, "--param", "ic", "--values", "constant"]) == 2


# --- check ------------------------------------------------------------------------------------

def test_check_command(tmp_path, capsys):
    good = tmp_path / "good.csv"
    good.write_text("step,t,energy,dissipation_integral,slack,newton_iters,residual_norm\n"
                    "0,0,1,0,0,0,0\n1,0.1,0.9,0.05,0.05,2,1e-12\n")
    bad = tmp_path / "bad.csv"
    bad.write_text("step,t,energy,dissipation_integral,slack,newton_iters,residual_norm\n"
                   "0,0,1,0,0,0,0\n1,0.1,0.99,0.05,-0.04,2,1e-12\n")
    assert cli.main(["check", str(good)]) == 0
    assert cli.main(["check", str(bad)]) == 1
    assert "offending steps = [1]" in capsys.readouterr().out


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "absent.cfg")]) == 2
    assert "error" in capsys.readouterr().err


# --- determinism and entry point ----------------------------------------------------------------

def test_identical_configs_give_identical_bytes(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"c{i}.csv"
        cfg = cli.parse_config(f"problem = cross_diffusion\nnx = 8\nn_steps = 5\ndg_order = 1\nout = {out}")
        assert cli.run(cfg) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    path = _write(tmp_path, f"problem = gradient\nn_steps = 2\nout = {tmp_path / 'g.csv'}\n")
    proc = subprocess.run([sys.executable, "-m", "dissipative", "run", path], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("PASS")
