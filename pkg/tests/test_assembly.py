import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import bordered_dense_solve
from pseudohyp import OrderError
from pseudohyp import assembly as asm
from pseudohyp.catalog import admissible_mode, admissible_mode_operator
from pseudohyp.weighted import Grid, inner_rho


def test_constants_in_kernel():
    for nx in (3, 10, 101):
        g = Grid(1.3, nx)
        op = asm.bessel_operator(g)
        assert np.all(op.apply(np.full(nx, 4.2)) == 0.0)
        dense = op.to_dense()
        assert np.max(np.abs(dense.sum(axis=1))) <= 1e-10 * np.max(np.abs(dense))


def test_operator_rejects_tiny_grid():
    with pytest.raises(ValueError):
        asm.bessel_operator(Grid(1.0, 2))


def test_apply_matches_dense():
    g = Grid(1.0, 20)
    op = asm.bessel_operator(g)
    u = np.random.default_rng(1).normal(size=20)
    np.testing.assert_allclose(op.apply(u), op.to_dense() @ u, rtol=1e-12, atol=1e-9)


def test_square_in_interior():
    g = Grid(1.0, 200)
    bu = asm.bessel_operator(g).apply(g.x**2)
    interior = bu[1:-1]
    assert np.max(np.abs(interior - 4.0)) < 1e-8 + 10 * g.h**2


def test_admissible_mode_order():
    errs = []
    for nx in (16, 32, 64, 128, 256):
        g = Grid(1.0, nx)
        p = admissible_mode(g.x, 1.0)
        e = asm.bessel_operator(g).apply(p) - admissible_mode_operator(g.x, 1.0)
        errs.append(math.sqrt(inner_rho(e, e, g)) / math.sqrt(inner_rho(p, p, g)))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.9, orders


@given(seed=st.integers(0, 2**31), b=st.sampled_from([0.5, 1.0, 2.0]))
def test_weighted_symmetry(seed, b):
    rng = np.random.default_rng(seed)
    g = Grid(b, 30)
    op = asm.bessel_operator(g)
    u, w = rng.normal(size=(2, g.nx))
    lhs, rhs = inner_rho(op.apply(u), w, g), inner_rho(op.apply(w), u, g)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1.0)


def test_head_weight():
    assert asm.l1_head_weight(1.5, 0.01) == pytest.approx(0.01**-1.5 / math.gamma(1.5))


def test_rejects_bad_orders_and_dt():
    g = Grid(1.0, 8)
    with pytest.raises(OrderError):
        asm.assemble_step_system(g, 0.1, 2.5, 1.5)
    with pytest.raises(ValueError):
        asm.assemble_step_system(g, 0.0, 1.5, 1.5)


@pytest.mark.parametrize("z1,z2", [(0.0, 0.0), (0.7, 0.0), (0.3, 1.2)])
def test_bordered_solve_matches_dense(z1, z2):
    rng = np.random.default_rng(5)
    g = Grid(1.0, 24)
    sys = asm.assemble_step_system(g, 0.02, 1.3, 1.8, z1, z2)
    assert sys.coupled == (z1 != 0 or z2 != 0)
    rhs = rng.normal(size=2 * g.nx + 2)
    u, v, lu, lv = asm.solve_bordered(sys, rhs)
    ref = bordered_dense_solve(asm.dense_step_matrix(sys), rhs)
    got = np.concatenate([u, v, [lu, lv]])
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-10 * np.max(np.abs(ref)))
    np.testing.assert_allclose(asm.step_matvec(sys, u, v, lu, lv), rhs, atol=1e-9 * np.max(np.abs(rhs)))


@given(seed=st.integers(0, 2**31), z=st.floats(0, 3))
def test_constraint_satisfied(seed, z):
    rng = np.random.default_rng(seed)
    g = Grid(1.0, 32)
    sys = asm.assemble_step_system(g, 0.01, 1.5, 1.4, z, 0.5 * z)
    rhs = rng.normal(size=2 * g.nx + 2)
    rhs[-2:] = 0.0
    u, v, _, _ = asm.solve_bordered(sys, rhs)
    assert abs(g.q @ u) <= 1e-12 * np.linalg.norm(u)
    assert abs(g.q @ v) <= 1e-12 * np.linalg.norm(v)


def test_zero_rhs_zero_solution():
    sys = asm.assemble_step_system(Grid(1.0, 16), 0.1, 1.5, 1.5, 0.2, 0.1)
    u, v, lu, lv = asm.solve_bordered(sys, np.zeros(34))
    assert np.all(u == 0) and np.all(v == 0) and lu == 0 and lv == 0
    with pytest.raises(ValueError):
        asm.solve_bordered(sys, np.zeros(33))


def test_symmetric_tables_identical():
    sys = asm.assemble_step_system(Grid(1.0, 16), 0.05, 1.6, 1.6, 0.4, 0.4)
    assert np.array_equal(sys.table_u, sys.table_v)


def test_decoupled_blocks_independent():
    g = Grid(1.0, 16)
    sys = asm.assemble_step_system(g, 0.05, 1.6, 1.4)
    rng = np.random.default_rng(0)
    rhs = rng.normal(size=34)
    u1, _, _, _ = asm.solve_bordered(sys, rhs)
    rhs2 = rhs.copy()
    rhs2[16:32] += rng.normal(size=16)
    rhs2[-1] = 3.0
    u2, _, _, _ = asm.solve_bordered(sys, rhs2)
    assert np.array_equal(u1, u2)


def test_constant_rhs_is_absorbed_by_multiplier():
    g = Grid(1.0, 10)
    sys = asm.assemble_step_system(g, 1e12, 1.5, 1.5, caputo_head_weight=(2.0, 3.0))
    assert sys.head_u == 2.0 and sys.head_v == 3.0
    rhs = np.zeros(22)
    rhs[:10] = 1.0  # constant: lies along the multiplier, so u = 0 and lam = 1
    u, v, lu, lv = asm.solve_bordered(sys, rhs)
    np.testing.assert_allclose(u, 0.0, atol=1e-12)
    assert lu == pytest.approx(1.0)
