import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import caputo_quad, ml_mpmath, rl_quad
from pseudohyp import OrderError, SeriesError
from pseudohyp import fracops as fo
from pseudohyp.fracops import TimeGrid

# frozen oracle values (mpmath series / QUADPACK, see oracles.py)
TWO_OVER_SQRT_PI = 1.1283791670955126
FOUR_OVER_SQRT_PI = 2.256758334191025
ML_FROZEN = [
    ((0.5, 1.0, 1.0), 5.008980080762283),
    ((0.5, 0.5, 2.0), 218.4459983635037),
    ((1.5, 1.0, 3.0), 5.404610715901030),
    ((0.7, 0.7, 5.0), 60633.97993353258),
]


def test_time_grid_last_node_is_T():
    tg = TimeGrid(0.3, 7)
    assert tg.nodes[0] == 0.0
    assert tg.nodes[-1] == 0.3
    assert tg.dt == pytest.approx(0.3 / 7)
    assert tg.refined().nt == 14


@pytest.mark.parametrize("T,nt", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5), (math.inf, 3)])
def test_time_grid_rejects_bad(T, nt):
    with pytest.raises(ValueError):
        TimeGrid(T, nt)


@pytest.mark.parametrize("alpha,band", [(0.3, "low"), (0.999, "low"), (1.5, "high"), (1.01, "high")])
def test_classify_order(alpha, band):
    assert fo.classify_order(alpha) == band


@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0, -0.5, 2.5, math.nan])
def test_classify_order_rejects(alpha):
    with pytest.raises(OrderError):
        fo.classify_order(alpha)


def test_band_checks():
    tg = TimeGrid(1.0, 8)
    v = np.zeros(9)
    with pytest.raises(OrderError):
        fo.caputo_low(v, 1.5, tg, 3)
    with pytest.raises(OrderError):
        fo.caputo_high(v, 0.5, tg, 3)
    with pytest.raises(ValueError, match="left endpoint"):
        fo.caputo_low(v, 0.5, tg, 0)
    with pytest.raises(IndexError):
        fo.caputo_low(v, 0.5, tg, 9)
    with pytest.raises(ValueError):
        fo.caputo_low(np.zeros(5), 0.5, tg, 1)


def test_quadrature_oracles_agree_with_closed_forms():
    assert caputo_quad(lambda s: 1.0, 0.5, 1.0, 1) == pytest.approx(TWO_OVER_SQRT_PI, rel=1e-12)
    assert caputo_quad(lambda s: 2.0, 1.5, 1.0, 2) == pytest.approx(FOUR_OVER_SQRT_PI, rel=1e-12)


def test_constant_has_zero_caputo():
    tg = TimeGrid(1.0, 64)
    v = np.full(65, 5.0)
    for n in (1, 17, 64):
        assert fo.caputo_low(v, 0.4, tg, n) == 0.0
        assert fo.caputo_high(v, 1.7, tg, n) == 0.0


def test_power_rule_low():
    tg = TimeGrid(1.0, 1024)
    val = fo.caputo_low(tg.nodes, 0.5, tg, 1024)
    assert abs(val - TWO_OVER_SQRT_PI) < 1e-3


def test_alpha_near_one_is_classical_derivative():
    nt = 4096
    tg = TimeGrid(1.0, nt)
    val = fo.caputo_low(tg.nodes**2, 0.999, tg, nt)
    fd = (1.0 - (1.0 - 1e-6) ** 2) / 1e-6
    assert val == pytest.approx(fd, rel=0.02)


def test_square_power_rule_error_decreases():
    exact = 2.0 / math.gamma(2.5)  # D^0.5 t^2 at t=1
    errs = []
    for nt in (32, 64, 128, 256, 512):
        tg = TimeGrid(1.0, nt)
        errs.append(abs(fo.caputo_low(tg.nodes**2, 0.5, tg, nt) - exact))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_caputo_high_square_and_affine():
    tg = TimeGrid(1.0, 1024)
    t = tg.nodes
    assert abs(fo.caputo_high(t**2, 1.5, tg, 1024, initial_rate=0.0) - FOUR_OVER_SQRT_PI) < 5e-3
    assert abs(fo.caputo_high(3.0 - 2.0 * t, 1.5, tg, 1024)) < 1e-10
    assert abs(fo.caputo_high(3.0 - 2.0 * t, 1.5, tg, 1024, initial_rate=-2.0)) < 1e-10


def test_series_matches_pointwise():
    tg = TimeGrid(2.0, 40)
    rng = np.random.default_rng(3)
    v = rng.normal(size=(41, 5))
    ser = fo.caputo_low_series(v, 0.3, tg)
    for n in (1, 7, 40):
        np.testing.assert_allclose(ser[n - 1], fo.caputo_low(v, 0.3, tg, n), rtol=1e-13, atol=1e-13)
    hser = fo.caputo_high_series(v, 1.3, tg, initial_rate=np.ones(5))
    np.testing.assert_allclose(hser[9], fo.caputo_high(v, 1.3, tg, 10, initial_rate=np.ones(5)), rtol=1e-13)
    rser = fo.rl_integral_series(v, 0.6, tg)
    assert np.all(rser[0] == 0.0)
    np.testing.assert_allclose(rser[23], fo.rl_integral(v, 0.6, tg, 23), rtol=1e-13)


@given(
    a=st.floats(-10, 10),
    c=st.floats(-10, 10),
    alpha=st.floats(0.05, 0.95),
    seed=st.integers(0, 2**31),
)
def test_caputo_low_linearity(a, c, alpha, seed):
    rng = np.random.default_rng(seed)
    tg = TimeGrid(1.0, 32)
    u, w = rng.normal(size=(2, 33))
    lhs = fo.caputo_low_series(a * u + c * w, alpha, tg)
    rhs = a * fo.caputo_low_series(u, alpha, tg) + c * fo.caputo_low_series(w, alpha, tg)
    scale = 1.0 + np.max(np.abs(lhs)) + np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale


def test_rl_integral_closed_forms():
    tg = TimeGrid(1.0, 256)
    one = np.ones(257)
    assert fo.rl_integral(one, 0.5, tg, 256) == pytest.approx(rl_quad(lambda s: 1.0, 0.5, 1.0), rel=1e-12)
    t = tg.nodes
    f = np.sin(t)
    assert fo.rl_integral(f, 1.0, tg, 256) == pytest.approx(1.0 - math.cos(1.0), rel=1e-5)
    assert fo.rl_integral(f, 0.0 + 1.3, tg, 256) == pytest.approx(rl_quad(math.sin, 1.3, 1.0), rel=1e-4)
    assert fo.rl_integral(f, 0.7, tg, 0) == 0.0
    with pytest.raises(OrderError):
        fo.rl_integral(f, 0.0, tg, 3)


def test_rl_semigroup():
    tg = TimeGrid(1.0, 512)
    v = np.exp(tg.nodes)
    inner = fo.rl_integral_series(v, 0.7, tg)
    composed = fo.rl_integral_series(inner, 0.3, tg)
    direct = fo.rl_integral_series(v, 1.0, tg)
    assert np.max(np.abs(composed - direct)) < 10 * tg.dt


def test_lemma_product_inequality_smooth_functions():
    tg = TimeGrid(1.0, 512)
    t = tg.nodes
    for v in (t**2, np.sin(t), np.exp(t)):
        for a in (0.2, 0.5, 0.8):
            gap = v[1:] * fo.caputo_low_series(v, a, tg) - 0.5 * fo.caputo_low_series(v**2, a, tg)
            assert gap.min() >= -10 * tg.dt


def test_mittag_leffler_identities():
    assert fo.mittag_leffler(1.0, 1.0, 1.0) == pytest.approx(math.e, abs=1e-12)
    assert fo.mittag_leffler(2.0, 1.0, 1.0) == pytest.approx(math.cosh(1.0), abs=1e-12)
    assert fo.mittag_leffler(1.0, 2.0, 1.0) == pytest.approx(math.e - 1.0, abs=1e-12)
    assert fo.mittag_leffler(0.8, 1.0, 0.0) == 1.0
    assert fo.mittag_leffler(0.8, 0.8, 0.0) == pytest.approx(1.0 / math.gamma(0.8))


@pytest.mark.parametrize("args,expected", ML_FROZEN)
def test_mittag_leffler_frozen(args, expected):
    assert fo.mittag_leffler(*args) == pytest.approx(expected, rel=1e-12)


@given(beta=st.floats(0.5, 1.9), alpha=st.floats(0.3, 2.0), x=st.floats(0.0, 20.0))
def test_mittag_leffler_matches_mpmath(beta, alpha, x):
    assert fo.mittag_leffler(beta, alpha, x) == pytest.approx(ml_mpmath(beta, alpha, x), rel=1e-11)


@given(beta=st.floats(0.3, 1.9), alpha=st.floats(0.3, 2.0), x=st.floats(0.0, 50.0))
def test_mittag_leffler_partial_sums_monotone(beta, alpha, x):
    total, prev = 0.0, -1.0
    for n in range(60):
        total += fo._ml_term(n, beta, alpha, x)
        assert total >= prev
        prev = total


def test_mittag_leffler_guard_and_asymptotic_log():
    beta = 0.5
    guard = fo.ml_series_guard(beta)
    assert guard == pytest.approx(700**0.5)
    with pytest.raises(SeriesError):
        fo.mittag_leffler(beta, beta, guard * 1.01)
    with pytest.raises(ValueError):
        fo.mittag_leffler(0.0, 1.0, 1.0)
    # inside the range, the log equals log of the series
    assert float(fo.log_mittag_leffler(0.5, 0.5, 2.0)) == pytest.approx(math.log(218.4459983635037), rel=1e-12)
    # beyond the guard the leading term is used; the relative gap at the guard is negligible
    x = guard
    series = float(fo.log_mittag_leffler(beta, beta, x))
    asym = -math.log(beta) + (1 - beta) / beta * math.log(x) + x ** (1 / beta)
    assert series == pytest.approx(asym, rel=1e-12)
    assert float(fo.log_mittag_leffler(beta, beta, 1e6)) > 1e11
    with pytest.raises(ValueError):
        fo.log_mittag_leffler(beta, beta, -1.0)
