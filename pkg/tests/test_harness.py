import csv
from dataclasses import replace

import numpy as np
import pytest

from pseudohyp import ConfigError
from pseudohyp import harness as hn
from pseudohyp.catalog import Manufactured, Profile
from pseudohyp.config import ScenarioConfig
from pseudohyp.picard import NonlinearSource
from pseudohyp.stepper import solve_linear


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_zero_scenario_all_zero(tmp_path):
    res = hn.run_scenario(hn.zero_scenario(), tmp_path)
    assert res.code == hn.EXIT_OK
    assert {p.name for p in res.written} == {"trajectory.csv", "norms.csv", "constants.csv", "energy.csv", "energy.txt"}
    for r in _rows(tmp_path / "trajectory.csv"):
        assert float(r["u"]) == 0.0 and float(r["v"]) == 0.0
    for r in _rows(tmp_path / "norms.csv"):
        assert all(float(r[k]) == 0.0 for k in ("norm_u_h1rho", "norm_v_h1rho", "caputo_u", "caputo_v"))
    assert res.energy.passed


def test_csv_precision(tmp_path):
    hn.run_scenario(hn.oldroyd_scenario(nx=8, nt=8), tmp_path)
    traj = solve_linear(hn.oldroyd_scenario(nx=8, nt=8).spec)
    rows = _rows(tmp_path / "trajectory.csv")
    u = np.array([float(r["u"]) for r in rows]).reshape(9, 8)
    assert np.array_equal(u, traj.u)


def test_oldroyd_decoupled_and_passes(tmp_path):
    cfg = hn.oldroyd_scenario()
    assert cfg.spec.z1 == cfg.spec.z2 == 0.0
    res = hn.run_scenario(cfg, tmp_path)
    assert res.code == 0 and res.energy.passed
    other = replace(cfg.spec, psi1=Profile("admissible_mode", {"amplitude": -3.0, "k": 3}))
    t2 = solve_linear(other)
    assert np.array_equal(res.trajectory.u, t2.u)
    assert not np.array_equal(res.trajectory.v, t2.v)


def test_small_delta_end_to_end(tmp_path):
    res = hn.run_scenario(hn.small_delta_scenario(nx=16, nt=32), tmp_path)
    assert res.code == 0 and res.picard.converged
    assert (tmp_path / "picard.csv").exists() and "converged" in (tmp_path / "picard.txt").read_text()
    assert res.energy.passed


def test_nonconvergence_exit_one(tmp_path):
    cfg = hn.small_delta_scenario(nx=16, nt=32)
    cfg = replace(cfg, spec=replace(cfg.spec, tol=0.0, max_iter=1), nonlinear=NonlinearSource("lin_mix", 0.5, 0.5))
    res = hn.run_scenario(cfg, tmp_path)
    assert res.code == hn.EXIT_NUMERICAL and "did not converge" in res.message


def test_divergence_exit_one(tmp_path):
    cfg = hn.small_delta_scenario(nx=16, nt=32)
    cfg = replace(cfg, spec=replace(cfg.spec, tol=0.0), nonlinear=NonlinearSource("lin_mix", 1e3, 1e3))
    res = hn.run_scenario(cfg, tmp_path)
    assert res.code == hn.EXIT_NUMERICAL and (tmp_path / "picard.csv").exists()


def test_blowup_exit_one(tmp_path, monkeypatch):
    from pseudohyp import stepper

    monkeypatch.setattr(stepper, "BLOWUP_FACTOR", 1e-9)
    res = hn.run_scenario(hn.oldroyd_scenario(nx=8, nt=8), tmp_path / "o")
    assert res.code == hn.EXIT_NUMERICAL and not (tmp_path / "o").exists()


def test_run_audit(tmp_path):
    res = hn.run_audit(hn.zero_scenario(), tmp_path, draws=100)
    assert res.code == 0 and (tmp_path / "inequalities.csv").exists()
    names = [r["inequality"] for r in _rows(tmp_path / "inequalities.csv")]
    assert names == ["J1", "J2", "poincare", "lemma_caputo_product", "fractional_integral"]


def test_convergence_exactness_case():
    mf = Manufactured(u_time=(1.0, 0.5, 0.0), discrete_time=True, discrete_space=True)
    base = ScenarioConfig(spec=replace(hn.manufactured_scenario(nx=8, nt=8).spec, manufactured=mf), mode="manufactured")
    table = hn.convergence_study(base, 2)
    assert table.decreasing
    assert max(table.column("err_l2")) < 1e-11


def test_convergence_spatial_order():
    table = hn.convergence_study(hn.manufactured_scenario(nx=8, nt=16, discrete_time=True), 3)
    assert table.decreasing
    assert table.rows[-1]["order"] >= 1.7


def test_convergence_determinism_and_workers(tmp_path):
    base = hn.manufactured_scenario(nx=8, nt=16)
    t2 = hn.convergence_study(base, 2)
    t3 = hn.convergence_study(base, 3, workers=2)
    for a, b in zip(t2.rows, t3.rows):
        assert a["err_l2"] == b["err_l2"] and a["nx"] == b["nx"]
    hn.write_convergence_csv(t3, tmp_path / "c.csv")
    rows = _rows(tmp_path / "c.csv")
    assert list(rows[0]) == ["level", "nx", "nt", "h", "dt", "err_l2", "err_max", "order"]
    assert rows[0]["order"] == "" and len(rows) == 4


def test_convergence_needs_manufactured():
    with pytest.raises(ConfigError):
        hn.convergence_study(hn.zero_scenario(), 2)
    with pytest.raises(ValueError):
        hn.convergence_study(hn.manufactured_scenario(), 0)
