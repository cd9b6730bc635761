import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from tsdde.errors import EvalError, ExprSyntaxError, UnknownIdentifier
from tsdde.expr import Bin, Call, Compare, Const, If, Neg, Num, Var, evaluate, parse, to_source
from tsdde.timescale import build_grid, mu, p11

from conftest import scales


def test_delay_of_unbounded_coefficient_example():
    e = parse("t - (frac(t)*(1-frac(t)))^floor(t)")
    assert e.evaluate(2.5) == 2.4375


def test_constant_and_variable():
    assert parse("0").evaluate(3.0) == 0
    assert parse("t").evaluate(7.0) == 7


def test_conditional_uses_scale():
    e = parse("if scattered(t) then -1 else t")
    ts = p11(-2, 10)
    assert isinstance(e.root, If)
    assert e.evaluate(1.0, ts) == -1
    assert e.evaluate(0.5, ts) == 0.5
    assert e.uses_scale


def test_sinhcosh_delay_at_midpoint():
    n = "floor(ln(t + sqrt(t^2 + 1)) + 1e-9)"
    e = parse(f"t - (cosh({n}) - t)*(t - sinh({n}))/(cosh({n}) - sinh({n}))")
    t = (math.sinh(1) + math.cosh(1)) / 2
    assert e.evaluate(t) == pytest.approx(t - 1 / (4 * math.e), abs=1e-14)


def test_precedence():
    assert parse("2+3*4").evaluate(0.0) == 14
    assert parse("2^3^2").evaluate(0.0) == 512
    assert parse("-2^2").evaluate(0.0) == -4
    assert parse("2*-3").evaluate(0.0) == -6
    assert parse("if 1 + 2 < 4 and 1 > 0 or 0 > 1 then 1 else 0").evaluate(0.0) == 1
    assert parse("if not 2 < 1 then 5 else 0").evaluate(0.0) == 5


def test_floor_frac_on_negatives():
    assert parse("floor(t)").evaluate(-0.5) == -1
    assert parse("frac(t)").evaluate(-0.25) == 0.75


def test_constants():
    assert parse("e").evaluate(0.0) == math.e
    assert parse("pi").evaluate(0.0) == math.pi
    assert parse("1.5e-3").evaluate(0.0) == 1.5e-3


def test_min_max_abs():
    assert parse("max(t, 2, -1)").evaluate(1.0) == 2
    assert parse("min(abs(t), 3)").evaluate(-2.0) == 2


def test_syntax_error_has_position():
    with pytest.raises(ExprSyntaxError) as err:
        parse("0.5*(t")
    assert err.value.column == 7
    with pytest.raises(ExprSyntaxError) as err:
        parse("1 +\n  * 2")
    assert err.value.line == 2


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        parse("a*t")
    with pytest.raises(UnknownIdentifier):
        parse("foo(t)")


def test_condition_is_not_a_value():
    with pytest.raises(ExprSyntaxError):
        parse("t < 1")
    with pytest.raises(ExprSyntaxError):
        parse("if t then 1 else 2")


def test_eval_errors():
    with pytest.raises(EvalError):
        parse("1/(t-1)").evaluate(1.0)
    with pytest.raises(EvalError):
        parse("ln(t)").evaluate(0.0)
    with pytest.raises(EvalError):
        parse("sqrt(t)").evaluate(-1.0)
    with pytest.raises(EvalError):
        parse("mu(t)").evaluate(1.0)


def test_vectorised_matches_scalar():
    e = parse("if t < 1 then exp(-t) else 1/t")
    t = np.linspace(0, 3, 31)
    v = e.evaluate(t)
    assert v.tolist() == [e.evaluate(float(x)) for x in t]


def test_module_level_evaluate():
    assert evaluate(parse("t*t"), 3.0) == 9


@settings(max_examples=50)
@given(scales())
def test_mu_primitive_matches_scale(ts):
    g = build_grid(ts, 0.25)
    e = parse("mu(t)")
    for t in g.points[:-1]:
        assert e.evaluate(float(t), ts) == mu(ts, float(t))


# random expression trees for the printer round trip

_leaf = hst.one_of(
    hst.floats(-50, 50, allow_nan=False).map(Num),
    hst.just(Var()),
    hst.sampled_from(["e", "pi"]).map(Const),
)


def _extend(children):
    return hst.one_of(
        hst.tuples(hst.sampled_from(["+", "-", "*", "/", "^"]), children, children).map(lambda x: Bin(*x)),
        children.map(Neg),
        hst.tuples(hst.sampled_from(["exp", "abs", "floor", "frac", "sinh"]), children).map(lambda x: Call(x[0], (x[1],))),
        hst.tuples(children, children, children).map(lambda x: If(Compare("<", x[0], x[1]), x[1], x[2])),
    )


trees = hst.recursive(_leaf, _extend, max_leaves=12)


def _raw(node, t):
    from tsdde.expr import _Ctx, _ev

    with np.errstate(all="ignore"):
        return np.asarray(_ev(node, t, _Ctx(None, False)), dtype=float)


@settings(max_examples=200)
@given(trees)
def test_print_parse_round_trip(node):
    src = to_source(node)
    again = parse(src)
    assert to_source(parse(to_source(again))) == to_source(again)
    t = np.linspace(-3, 3, 100)
    try:
        want = _raw(node, t)
    except EvalError:
        return
    np.testing.assert_array_equal(_raw(again.root, t), want)
