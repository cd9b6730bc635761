import math

import pytest

from tsdde.errors import UnknownExample
from tsdde.presets import PRESETS, closed_form_2_1, get_preset, max_lag_on_segment, verify_example


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_passes_its_checks(name):
    checks = verify_example(name)
    assert checks
    failed = [f"{c.name}: {c.detail}" for c in checks if not c.passed]
    assert not failed


def test_unknown_preset_and_parameter():
    with pytest.raises(UnknownExample):
        get_preset("bogus")
    with pytest.raises(UnknownExample):
        get_preset("example_5_1").params({"zeta": 1.0})


def test_closed_form_limit():
    assert closed_form_2_1(0) == 0.0
    assert closed_form_2_1(60) == pytest.approx(math.e / (math.e - 1), rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_segment_lag_formula(n):
    assert max_lag_on_segment(n) == pytest.approx(1 / (4 * math.e**n), abs=1e-8)


def test_overrides_reach_the_equation():
    st = get_preset("r_const").setup({"a": 0.2, "tau": 2.0}, horizon=10.0, h_max=0.5)
    assert st.eq.A_pt[st.eq.i0] == 0.2
    assert st.eq.ts.t_min == -2.0
