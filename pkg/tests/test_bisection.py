import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from isac_lab.conic import BracketError, bisect_feasibility


def test_threshold_example():
    res = bisect_feasibility(lambda t: t >= 0.3, 0.0, 1.0, 1e-6)
    assert res.lower < 0.3 <= res.upper
    assert res.upper - res.lower <= 1e-6
    assert abs(res.value - 0.3) <= 1e-6


def test_iteration_count():
    res = bisect_feasibility(lambda t: t >= 0.5, 0.0, 1.0, 1.0 / 1024)
    assert res.iterations == 10


def test_infeasible_upper_raises():
    with pytest.raises(BracketError):
        bisect_feasibility(lambda t: False, 0.0, 1.0, 1e-3)


def test_bad_arguments():
    with pytest.raises(ValueError):
        bisect_feasibility(lambda t: True, 0.0, 1.0, 0.0)
    with pytest.raises(BracketError):
        bisect_feasibility(lambda t: True, 1.0, 0.0, 1e-3)


def test_upper_end_was_accepted():
    res = bisect_feasibility(lambda t: t > 0.25, 0.0, 1.0, 1e-4)
    accepted = {t for t, ok in res.trace if ok}
    assert res.upper in accepted


@given(st.floats(0.001, 0.999), st.floats(1e-8, 1e-2))
def test_bracket_contains_threshold(thr, tol):
    res = bisect_feasibility(lambda t: t >= thr, 0.0, 1.0, tol)
    assert res.lower <= thr <= res.upper
    assert res.upper - res.lower <= tol
    assert res.iterations == math.ceil(math.log2(1.0 / tol))
