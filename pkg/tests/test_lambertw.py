import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpemba_lab.lambertw import BRANCH_POINT, WBranch, lambert_w


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.mark.parametrize(
    "x", [-0.36787944117144, -0.3, -0.1, -1e-5, 1e-300, 1e-12, 0.5, 1.0, math.e, 10.0, 1e5, 1e100, 1e300]
)
def test_w0_matches_mpmath(x):
    assert _rel(lambert_w(WBranch.W0, x), float(mpmath.lambertw(x, 0).real)) <= 4e-16


@pytest.mark.parametrize("x", [-0.36787944117144, -0.3, -0.1, -1e-3, -1e-10, -1e-100, -1e-300])
def test_wm1_matches_mpmath(x):
    assert _rel(lambert_w(WBranch.Wm1, x), float(mpmath.lambertw(x, -1).real)) <= 4e-16


def test_exact_values():
    assert lambert_w("W0", 0.0) == 0.0
    assert lambert_w("W0", math.e) == pytest.approx(1.0, rel=1e-15)
    assert lambert_w("Wm1", -2 * math.exp(-2)) == pytest.approx(-2.0, rel=1e-15)
    assert lambert_w("W0", math.inf) == math.inf


def test_branch_point():
    for b in WBranch:
        assert abs(lambert_w(b, BRANCH_POINT) + 1) <= 1e-7


def test_branches_split_near_branch_point():
    x = BRANCH_POINT + 1e-10
    assert lambert_w("W0", x) > -1 > lambert_w("Wm1", x)


@pytest.mark.parametrize(
    "branch,x", [("W0", -0.4), ("Wm1", -0.4), ("Wm1", 0.0), ("Wm1", 1.0), ("W0", math.nan)]
)
def test_domain_errors(branch, x):
    with pytest.raises(ValueError):
        lambert_w(branch, x)


def test_unknown_branch():
    with pytest.raises(ValueError):
        lambert_w("W1", 1.0)


@given(st.floats(-300, 34))
def test_w0_round_trip_property(log10x):
    x = 10.0 ** log10x
    w = lambert_w(WBranch.W0, x)
    assert _rel(w * math.exp(w), x) <= 1e-14


@given(st.floats(34, 300))
def test_w0_large_arguments(log10x):
    # w e^w amplifies the rounding of w by (1 + w); compare w itself instead
    x = 10.0 ** log10x
    assert _rel(lambert_w(WBranch.W0, x), float(mpmath.lambertw(x).real)) <= 4e-16


@given(st.floats(BRANCH_POINT, -1e-300))
def test_wm1_round_trip_property(x):
    w = lambert_w(WBranch.Wm1, x)
    assert w <= -1
    if x < -1e-305:
        assert _rel(w * math.exp(w), x) <= 1e-13


@given(st.floats(BRANCH_POINT, 1e6))
def test_w0_monotone(x):
    y = x + max(abs(x) * 1e-6, 1e-9)
    assert lambert_w("W0", y) >= lambert_w("W0", x)


def test_vector_of_points_deterministic():
    xs = np.linspace(-0.36, 5, 50)
    a = [lambert_w("W0", x) for x in xs]
    b = [lambert_w("W0", x) for x in xs]
    assert a == b
