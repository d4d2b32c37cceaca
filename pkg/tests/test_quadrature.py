import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchimm.quadrature import (
    QuadratureError,
    adaptive_integrate,
    gauss_kronrod,
    integrate_to_one,
)


@settings(max_examples=40)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=23))
def test_kronrod_exact_for_degree_22(coefs):
    poly = np.polynomial.Polynomial(coefs)
    exact = poly.integ()(1.0) - poly.integ()(-0.5)
    val, _ = gauss_kronrod(poly, -0.5, 1.0)
    assert val == pytest.approx(exact, abs=1e-10 * (1 + sum(abs(c) for c in coefs)))


def test_adaptive_smooth_and_reversed():
    val, err = adaptive_integrate(np.exp, 0.0, 1.0)
    assert val == pytest.approx(math.e - 1, rel=1e-14)
    assert err < 1e-12
    back, _ = adaptive_integrate(np.exp, 1.0, 0.0)
    assert back == -val


def test_adaptive_peaked():
    val, _ = adaptive_integrate(lambda x: 1.0 / (1e-4 + x * x), -1.0, 1.0)
    assert val == pytest.approx(2 * math.atan(100.0) / 1e-2, rel=1e-10)


def test_non_finite_reports_abscissa():
    with pytest.raises(QuadratureError) as info:
        adaptive_integrate(lambda x: np.where(x > 0.5, np.nan, 1.0), 0.0, 1.0)
    assert info.value.abscissa > 0.5


@pytest.mark.parametrize("p,expected", [(-0.5, 2.0), (0.0, 1.0), (1.0, 0.5), (-0.9, 10.0), (-0.95, 20.0)])
def test_power_family_converges(p, expected):
    v = integrate_to_one(lambda y: (1.0 - y) ** p)
    assert v.converged
    assert v.value == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("p", [-2.0, -1.5, -1.0])
def test_power_family_diverges(p):
    v = integrate_to_one(lambda y: (1.0 - y) ** p)
    assert v.diverges and v.sign == 1
    assert math.isinf(v.value)


def test_negative_divergence_and_lower_limit():
    v = integrate_to_one(lambda t: -1.0 / t, lo=0.5, gap_form=True)
    assert v.diverges and v.sign == -1


def test_log_divergence_is_detected():
    # increments are constant for 1/((1-y) log^0) and shrink slowly for log weights
    v = integrate_to_one(lambda t: -np.log(t) / t, gap_form=True)
    assert v.diverges


def test_steady_ratio_above_threshold_is_geometric():
    # increment ratio 2**-0.1 ~ 0.93 stays constant, so the tail is summed rather than flagged
    for k in (4, 5):
        v = integrate_to_one(lambda y: (1.0 - y) ** -0.9, k_start=k)
        assert v.converged and v.value == pytest.approx(10.0, abs=1e-8)


def test_inverse_log_weight_diverges():
    # increments ln(k/(k-1)) decay, but their ratio creeps towards one
    v = integrate_to_one(lambda t: 1.0 / (t * np.log(1.0 / t)), lo=0.5, gap_form=True)
    assert v.diverges and v.sign == 1


def test_gap_form_matches_plain():
    f = lambda y: np.sqrt(1.0 - y) * np.cos(y)
    a = integrate_to_one(f)
    b = integrate_to_one(lambda t: np.sqrt(t) * np.cos(1.0 - t), gap_form=True)
    assert a.value == pytest.approx(b.value, abs=1e-12)


def test_splits_and_evidence():
    v = integrate_to_one(lambda y: np.abs(y - 0.3), splits=[0.3])
    assert v.value == pytest.approx(0.045 + 0.245, abs=1e-9)
    eps, partial = zip(*v.evidence)
    assert all(a > b for a, b in zip(eps, eps[1:]))
    assert v.to_dict()["status"] == "converged"


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate_to_one(lambda y: y, lo=1.0)
    with pytest.raises(ValueError):
        integrate_to_one(lambda y: y, k_start=10, k_stop=5)
