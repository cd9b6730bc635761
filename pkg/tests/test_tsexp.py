import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from tsdde.errors import NotRegressive
from tsdde.expr import parse
from tsdde.timescale import GridFunction, build_grid, h_integers, integers, q_scale, reals, sample_function, z_mod3
from tsdde.tsexp import (
    LogExp,
    check_regressive,
    circle_minus,
    circle_plus,
    divergence_profile,
    exp_fn,
    exp_ominus,
    ominus_of,
)

from conftest import scales


def on_grid(ts, fn, h=0.05):
    g = build_grid(ts, h)
    return GridFunction(g, fn(g.points))


class TestAlgebra:
    def test_circle_plus(self):
        assert circle_plus(0.5, 0.5, 0) == 1.0
        assert circle_plus(1, 1, 1) == 3

    @given(hst.floats(-10, 10), hst.floats(0, 5))
    def test_circle_plus_identity(self, f, m):
        assert circle_plus(f, 0, m) == f

    def test_circle_minus(self):
        assert circle_minus(0.5, 0) == -0.5
        assert circle_minus(-0.5, 1) == 1.0
        with pytest.raises(NotRegressive):
            circle_minus(1, -1)

    @given(hst.floats(-0.9, 10), hst.floats(0, 1))
    def test_circle_minus_involution(self, f, m):
        assert circle_minus(circle_minus(f, m), m) == pytest.approx(f, rel=1e-12, abs=1e-12)


class TestRegressivity:
    def test_positively_regressive_coefficients(self):
        ts = z_mod3(-2, 30)
        g = build_grid(ts, 1)
        f = sample_function(parse("if frac(t/3) < 0.5 then -0.7 else -0.1"), g)
        rep = check_regressive(ts, f, "positive")
        assert rep.is_regressive and rep.is_positively_regressive and rep.witness is None

    def test_minus_one_on_integers(self):
        ts = integers(0, 5)
        f = on_grid(ts, lambda t: -np.ones_like(t))
        rep = check_regressive(ts, f)
        assert not rep.is_regressive and not rep.is_positively_regressive
        assert rep.witness == (0.0, 0.0)

    def test_negative_factor_witness(self):
        ts = integers(0, 5)
        f = on_grid(ts, lambda t: np.where(t == 2, -3.0, 0.0))
        rep = check_regressive(ts, f, "positive")
        assert rep.is_regressive and not rep.is_positively_regressive
        assert rep.witness == (2.0, -2.0)

    def test_reals_always(self):
        ts = reals(0, 3)
        rep = check_regressive(ts, on_grid(ts, lambda t: -100 * np.ones_like(t)), "positive")
        assert rep.is_regressive and rep.is_positively_regressive


class TestExponential:
    def test_zero(self):
        ts = integers(0, 10)
        f = on_grid(ts, np.zeros_like)
        assert exp_fn(ts, f, 2, 7) == 1.0

    @pytest.mark.parametrize("h", [0.5, 1.0, 2.0])
    def test_h_integers_closed_product(self, h):
        ts = h_integers(h, 0, 40)
        fn = lambda t: 0.4 * np.cos(t)
        f = on_grid(ts, fn)
        for n in (1, 5, 17, 40):
            t = n * h
            if t > 40:
                continue
            want = math.prod(1 + h * fn(h * k) for k in range(n))
            assert exp_fn(ts, f, 0, t) == pytest.approx(want, rel=1e-12)

    def test_h_integers_constant(self):
        ts = h_integers(0.5, 0, 10)
        f = on_grid(ts, lambda t: 0.3 * np.ones_like(t))
        assert exp_fn(ts, f, 0, 5) == pytest.approx(1.15**10, rel=1e-13)

    def test_q_scale_closed_product(self):
        q = 2.0
        ts = q_scale(q, 1, 2**12)
        fn = lambda t: np.cos(t) / (2 * t)
        f = on_grid(ts, fn)
        want = math.prod(1 + (q - 1) * q**k * fn(q**k) for k in range(12))
        assert exp_fn(ts, f, 1, 2**12) == pytest.approx(want, rel=1e-12)

    def test_sign_alternation(self):
        ts = integers(0, 10)
        f = on_grid(ts, lambda t: -3 * np.ones_like(t))
        assert exp_fn(ts, f, 0, 3) == pytest.approx((-2.0) ** 3, rel=1e-14)

    def test_reals(self):
        ts = reals(0, 10)
        f = on_grid(ts, lambda t: -np.ones_like(t), 0.01)
        assert exp_fn(ts, f, 0, 6) == pytest.approx(math.exp(-6), rel=1e-12)

    def test_reciprocal_order(self):
        ts = integers(0, 10)
        f = on_grid(ts, lambda t: 0.5 * np.ones_like(t))
        assert exp_fn(ts, f, 6, 2) == pytest.approx(1.5**-4, rel=1e-14)

    def test_not_regressive(self):
        ts = integers(0, 10)
        f = on_grid(ts, lambda t: -np.ones_like(t))
        with pytest.raises(NotRegressive):
            exp_fn(ts, f, 0, 3)

    def test_ominus_constant(self):
        assert exp_ominus(reals(0, 10), 1.0, 2, 5) == pytest.approx(math.exp(-3), rel=1e-14)
        assert exp_ominus(integers(0, 10), 1.0, 2, 5) == pytest.approx(0.125, rel=1e-14)
        assert exp_ominus(integers(0, 10), 1.0, 4, 4) == 1.0

    def test_derivative_on_dense_part(self):
        ts = reals(0, 4)
        h = 0.01
        g = build_grid(ts, h)
        f = GridFunction(g, np.sin(g.points))
        e = LogExp(f).e(g.points, 0.0)
        d = (e[2:] - e[:-2]) / (2 * h)
        rel = np.abs(d - f.values[1:-1] * e[1:-1]) / np.abs(e[1:-1])
        assert np.max(rel) <= 10 * h**2

    def test_large_coefficients_do_not_overflow_in_log(self):
        ts = integers(0, 400)
        f = on_grid(ts, lambda t: 1e6 * np.ones_like(t))
        le = LogExp(f)
        assert le.log_e(400.0, 0.0)[0] == pytest.approx(400 * math.log1p(1e6), rel=1e-12)


@hst.composite
def semigroup_cases(draw):
    ts = draw(scales(4))
    g = build_grid(ts, 0.2)
    c = draw(hst.floats(-0.4, 0.8))
    d = draw(hst.floats(-0.4, 0.8))
    idx = sorted(draw(hst.lists(hst.integers(0, len(g.points) - 1), min_size=3, max_size=3)))
    return ts, g, c, d, [g.points[i] for i in idx]


@settings(max_examples=1000, deadline=None)
@given(semigroup_cases())
def test_semigroup_and_product(case):
    ts, g, c, d, (r, s, t) = case
    mu = g.mu
    fv = c + 0.3 * np.sin(g.points)
    gv = d * np.cos(g.points)
    # keep both regressive: 1 + mu f > 0
    fv = np.where(1 + mu * fv <= 0.05, (0.05 - 1) / np.where(mu > 0, mu, 1), fv)
    gv = np.where(1 + mu * gv <= 0.05, (0.05 - 1) / np.where(mu > 0, mu, 1), gv)
    f, gg = GridFunction(g, fv), GridFunction(g, gv)
    fg = GridFunction(g, circle_plus(fv, gv, mu), left_values=fv + gv)
    ets, esr, etr = exp_fn(ts, f, s, t), exp_fn(ts, f, r, s), exp_fn(ts, f, r, t)
    assert ets * esr == pytest.approx(etr, rel=1e-10)
    assert exp_fn(ts, f, r, t) * exp_fn(ts, gg, r, t) == pytest.approx(exp_fn(ts, fg, r, t), rel=1e-10)
    om = ominus_of(f)
    assert exp_fn(ts, f, r, t) * exp_fn(ts, om, r, t) == pytest.approx(1.0, rel=1e-12)


def test_divergence_profile():
    ts = integers(0, 2000)
    f = on_grid(ts, lambda t: 0.5 * np.ones_like(t))
    prof = divergence_profile(f, 0.0)
    assert prof["integral_diverges"]
    assert prof["e_f_diverges"] and prof["e_ominus_neg_f_diverges"]
    assert prof["e_ominus_f_decays"] and prof["e_neg_f_decays"]
    g = on_grid(ts, lambda t: 0.5 / (1 + t) ** 2)
    prof = divergence_profile(g, 0.0)
    assert not prof["integral_diverges"] and not prof["e_neg_f_decays"]
