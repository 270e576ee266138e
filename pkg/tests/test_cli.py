import subprocess
import sys

from pseudohyp import __version__
from pseudohyp.cli import main

BAD = "[problem]\nb = 1\n"


def test_scenario_emit_and_solve(tmp_path, capsys):
    cfg = tmp_path / "zero.ini"
    assert main(["scenario", "zero", "--emit", str(cfg)]) == 0
    assert main(["solve-linear", str(cfg), "-o", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "trajectory.csv").exists()
    assert main(["scenario", "oldroyd"]) == 0
    assert "[problem]" in capsys.readouterr().out


def test_malformed_config_exit_two(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(BAD)
    out = tmp_path / "out"
    for cmd in ("solve-linear", "solve-nonlinear", "audit", "constants", "converge"):
        assert main([cmd, str(cfg), "-o", str(out)]) == 2
    assert not out.exists()
    assert "line" in capsys.readouterr().err


def test_mode_mismatch_exit_two(tmp_path):
    cfg = tmp_path / "z.ini"
    main(["scenario", "zero", "--emit", str(cfg)])
    assert main(["solve-nonlinear", str(cfg), "-o", str(tmp_path / "o")]) == 2
    assert main(["converge", str(cfg), "-o", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_nonlinear_constants_converge(tmp_path, capsys):
    sd = tmp_path / "sd.ini"
    main(["scenario", "small_delta", "--emit", str(sd)])
    sd.write_text(sd.read_text().replace("nx = 64", "nx = 16").replace("nt = 256", "nt = 32"))
    assert main(["solve-nonlinear", str(sd), "-o", str(tmp_path / "nl")]) == 0
    assert main(["constants", str(sd), "-o", str(tmp_path / "c")]) == 0
    assert "K_star" in capsys.readouterr().out
    man = tmp_path / "m.ini"
    main(["scenario", "manufactured", "--emit", str(man)])
    man.write_text(man.read_text().replace("nx = 32", "nx = 8").replace("nt = 128", "nt = 16"))
    assert main(["converge", str(man), "--levels", "2", "-o", str(tmp_path / "cv")]) == 0
    assert (tmp_path / "cv" / "convergence.csv").exists()


def test_audit_command(tmp_path):
    z = tmp_path / "z.ini"
    main(["scenario", "zero", "--emit", str(z)])
    assert main(["audit", str(z), "--draws", "100", "-o", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "inequalities.csv").exists()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "pseudohyp.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
