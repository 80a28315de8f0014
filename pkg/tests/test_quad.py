import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from taylorlab.kernel import bridge_coefficients, build_bump, explicit_phi_n, explicit_psi
from taylorlab.quad import (GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, QuadResult,
                            QuadratureError, integrate, integrate_compact,
                            integrate_decaying)


def test_rule_constants():
    assert NODES.size == KRONROD_WEIGHTS.size == GAUSS_WEIGHTS.size == 15
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    # 7-point Gauss is exact through degree 13, Kronrod through 22
    for d in range(23):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert np.dot(KRONROD_WEIGHTS, NODES ** d) == pytest.approx(exact, abs=1e-14)
        if d <= 13:
            assert np.dot(GAUSS_WEIGHTS, NODES ** d) == pytest.approx(exact, abs=1e-14)


def test_polynomial_exact():
    r = integrate(lambda x: x ** 2, 0.0, 1.0)
    assert isinstance(r, QuadResult)
    assert abs(r.value - 1 / 3) <= 1e-12
    assert r.evaluations == 15


def test_odd_function_vanishes():
    r = integrate(lambda x: x ** 3 * np.cos(x), -1.0, 1.0, abs_tol=1e-12)
    assert abs(r.value) <= 1e-12


def test_phi1_integral_vanishes():
    phi1 = explicit_phi_n(build_bump(2.0, 0.25), 1)
    R = phi1.support_radius
    r = integrate_compact(phi1, R, abs_tol=1e-12, points=np.concatenate([-phi1.bounds, phi1.bounds]))
    assert abs(r.value) <= 1e-10
    # trapezoid oracle on a fine grid
    x = np.linspace(-R, R, 400_001)
    assert abs(np.trapezoid(phi1(x), x)) <= 1e-8


def test_bump_integral():
    phi0 = build_bump(2.0, 0.25)
    r = integrate_compact(phi0, 0.5, points=[-0.25, 0.25])
    assert r.value == pytest.approx(0.75, abs=1e-12)
    eta = bridge_coefficients(2.0, 0.25)
    anti = P.polyint(eta)
    bridge = P.polyval(0.5, anti) - P.polyval(0.25, anti)
    assert bridge == pytest.approx(1 / 8, abs=1e-13)
    assert r.value == pytest.approx(0.5 + 2 * bridge, abs=1e-12)


def test_zero_function():
    assert integrate_compact(lambda x: np.zeros_like(x), 3.0).value == 0.0
    assert integrate_decaying(lambda x: np.zeros_like(x), 0.0, 1.0).value == 0.0


def test_truncated_psi_same_path():
    psi = explicit_psi(build_bump(2.0, 0.25), 1e-10)
    R = psi.support_radius
    a = integrate_compact(psi, R, points=psi.bounds)
    b = integrate(psi, -R, R, points=psi.bounds)
    assert a == b


def test_gaussian():
    r = integrate_decaying(lambda x: np.exp(-x * x), 0.0, 1.0)
    assert abs(r.value - math.sqrt(math.pi)) <= 1e-10


def test_odd_gaussian():
    r = integrate_decaying(lambda x: x * np.exp(-x * x), 0.0, 1.0, abs_tol=1e-12)
    assert abs(r.value) <= 1e-12


def test_scaled_window():
    r = integrate_decaying(lambda x: np.exp(-((x - 3) / 0.01) ** 2), 3.0, 0.01)
    assert r.value == pytest.approx(0.01 * math.sqrt(math.pi), rel=1e-10)


BATTERY = [
    (lambda x: x ** 5 - 2 * x, -1.0, 2.0, 64 / 6 - 1 / 6 - 3.0),
    (lambda x: np.exp(-x * x), -9.0, 9.0, math.sqrt(math.pi)),
    (lambda x: np.exp(-4 * (x - 1) ** 2), -5.0, 7.0, math.sqrt(math.pi) / 2),
    (lambda x: np.sqrt(np.abs(x)), 0.0, 1.0, 2 / 3),
    (lambda x: 1 / (1 + 25 * x * x), -1.0, 1.0, 2 * math.atan(5) / 5),
    (lambda x: np.sin(30 * x), 0.0, math.pi / 3, (1 - math.cos(10 * math.pi)) / 30),
]


@pytest.mark.parametrize("case", range(len(BATTERY)))
def test_error_estimate_is_honest(case):
    f, a, b, exact = BATTERY[case]
    for tol in (1e-4, 1e-8):
        r = integrate(f, a, b, abs_tol=tol, rel_tol=tol)
        assert r.error_estimate >= 0
        assert r.error_estimate <= max(tol, tol * abs(r.value))
        assert abs(r.value - exact) <= 10 * r.error_estimate + 1e-15


def test_bridge_in_battery():
    eta = bridge_coefficients(2.0, 0.25)
    r = integrate(lambda x: P.polyval(x, eta), 0.25, 0.5)
    assert abs(r.value - 1 / 8) <= 10 * r.error_estimate + 1e-16


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(0.01, 3))
def test_additivity(a, d1, d2):
    f = lambda x: np.cos(3 * x) * np.exp(-x * x / 4)
    b, c = a + d1, a + d1 + d2
    whole = integrate(f, a, c)
    parts = integrate(f, a, b).value + integrate(f, b, c).value
    assert abs(whole.value - parts) <= 3e-10 + 1e-10 * abs(whole.value) * 3


def test_breakpoints_reduce_work():
    f = lambda x: np.where(x < 0.3, 0.0, 1.0)
    r = integrate(f, 0.0, 1.0, points=[0.3])
    assert r.value == pytest.approx(0.7, abs=1e-14)
    assert r.evaluations == 30


def test_budget_exhaustion_reports_estimate():
    f = lambda x: np.sin(1 / np.maximum(np.abs(x), 1e-300))
    with pytest.raises(QuadratureError) as info:
        integrate(f, -1.0, 1.0, abs_tol=1e-14, rel_tol=1e-14, max_intervals=50)
    assert isinstance(info.value.result, QuadResult)
    assert info.value.result.error_estimate > 0


@pytest.mark.parametrize("args", [(1.0, 1.0), (2.0, 1.0), (0.0, math.inf)])
def test_bad_limits(args):
    with pytest.raises(ValueError):
        integrate(np.sin, *args)


def test_bad_tolerances():
    with pytest.raises(ValueError):
        integrate(np.sin, 0.0, 1.0, abs_tol=0.0)
    with pytest.raises(ValueError):
        integrate_decaying(np.sin, 0.0, 0.0)
    with pytest.raises(ValueError):
        integrate_compact(np.sin, -1.0)
