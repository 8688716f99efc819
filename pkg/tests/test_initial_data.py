import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dhymflow import (DegenerateDenominator, GeometryParams, IllPosed, build_psi0, find_xi,
                      phase_monotonicity_check, psi_family, resultant_certificate, xi_branch)
from dhymflow.initial_data import (certify, cot_phase, dpsi_from_coefficients, family_coefficients,
                                   phase_angle, phase_derivative, phase_derivative_fd,
                                   psi_from_coefficients, resultant_coefficients,
                                   sylvester_resultant, third_root_closed_form, third_root_deflation)

FLAGSHIP = GeometryParams(3, 3, 18, 3)
GRID = np.linspace(1, 3, 401)

# deflation oracle: with roots 1 and b^3 known, Vieta gives r = -a0 / (a3 b^3); frozen from it
THIRD_ROOT = 0.7098445243


@pytest.fixture(scope="module")
def cp():
    return find_xi(FLAGSHIP)


@pytest.fixture(scope="module")
def ip():
    return build_psi0(FLAGSHIP, GRID)


def test_psi0_coefficients_exact(ip):
    assert ip.mu == Fraction(2889, 26)
    assert ip.lam == Fraction(-2187, 26)
    assert ip.mu > 1
    assert ip.mu + ip.lam == 27
    assert ip.mu * 27 + ip.lam == 3 * 18 ** 2 * 3


def test_psi0_boundary_values(ip):
    assert ip.values[0] == 3 and ip.values[-1] == 18
    # radicands are exact rationals: 27/3 and (9 mu + lam/3)/3 = 324
    assert (ip.mu + ip.lam) / 3 == 9
    assert (ip.mu * 9 + ip.lam / 3) / 3 == 324
    assert ip(np.array([1.0, 3.0])) == pytest.approx([3.0, 18.0], abs=1e-13)


def test_psi0_well_defined(ip):
    x = GRID
    assert np.all(float(ip.mu) * x ** 3 + float(ip.lam) >= 27 - 1e-9)


def test_lambda_negative_below_p_over_b(ip):
    assert ip.lam < 0 and 3 < 18 / 3
    lam_band = family_coefficients(GeometryParams(3, 3, 18, 7), Fraction(7))[1]
    assert lam_band > 0


def test_psi0_ill_posed():
    with pytest.raises(IllPosed):
        build_psi0(GeometryParams(3, 3, 18, 32), GRID)


def test_phase_derivative_positive(ip):
    assert phase_monotonicity_check(ip) > 0


def test_phase_derivative_matches_finite_difference(ip):
    x = np.linspace(1.05, 2.95, 200)
    closed = phase_derivative(ip, x)
    fd = phase_derivative_fd(ip, x, h=1e-5)
    assert np.max(np.abs(closed / fd - 1)) < 1e-4
    assert phase_derivative(ip, 2.0) > 0


def test_phase_derivative_vanishes_when_lambda_zero():
    g = GeometryParams(3, 3, 18, 6)
    ip0 = build_psi0(g, GRID)
    assert ip0.lam == 0
    assert np.all(phase_derivative(ip0, GRID) == 0)
    x = np.linspace(1.1, 2.9, 20)
    cot = cot_phase(ip0(x), ip0.derivative(x), x)
    assert np.ptp(cot) < 1e-12


def test_phase_derivative_sign_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        b = rng.uniform(1.2, 4)
        p = rng.uniform(2, 20)
        q = rng.uniform(0.3, 0.95) * min(p / b, math.sqrt((3 * p * p * b - b ** 3 + 1) / 3))
        ip = build_psi0(GeometryParams(3, b, p, q), np.linspace(1, b, 50))
        assert phase_monotonicity_check(ip) > 0
        x = np.linspace(1 + 0.05 * (b - 1), b - 0.05 * (b - 1), 20)
        assert np.max(np.abs(phase_derivative(ip, x) / phase_derivative_fd(ip, x) - 1)) < 1e-4


def test_initial_phase_below_pi(ip):
    th = phase_angle(ip.values, ip.derivative(GRID), GRID)
    assert np.all(th < math.pi) and np.all(th > 0)
    # Im(psi0 + ix)^3 / x = 3 psi0^2 - x^2 = (mu - 1) x^2 + lam / x increases
    im = 3 * ip.values ** 2 * GRID - GRID ** 3
    assert np.all(np.diff(im) > 0)


def test_psi_family_at_q_is_psi0(ip):
    assert np.allclose(psi_family(FLAGSHIP, Fraction(3), GRID), ip(GRID), rtol=0, atol=1e-13)


def test_psi_family_increasing_in_s(cp):
    x = GRID[1:-1]
    prev = psi_family(FLAGSHIP, 3.0, x)
    for s in np.linspace(3.0, 5.9, 30)[1:]:
        cur = psi_family(FLAGSHIP, s, x)
        assert np.all(cur > prev)
        prev = cur


def test_psi_family_right_endpoint():
    for s in np.linspace(3.0, 5.9, 10):
        assert psi_family(FLAGSHIP, s, 3.0) == pytest.approx(18.0, abs=1e-12)


def test_psi_family_rejects_out_of_range():
    with pytest.raises(IllPosed):
        psi_family(FLAGSHIP, 6.5, 2.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(3.0, 5.9), st.floats(1.0, 3.0))
def test_family_two_expansions_agree(s, x):
    mu, lam = family_coefficients(FLAGSHIP.as_floats(), s)
    lhs = mu * x * x + lam / x
    rhs = 3 * 324 * 3 * (x ** 3 - 1) / (26 * x) + 3 * s * s * (27 - x ** 3) / (x * 26)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_family_derivative_at_one(cp):
    mu, lam = family_coefficients(FLAGSHIP.as_floats(), cp.xi)
    closed = (2 * cp.xi ** 2 - lam) / (2 * cp.xi)
    h = 1e-6
    fd = (psi_from_coefficients(mu, lam, 1 + h) - psi_from_coefficients(mu, lam, 1 - h)) / (2 * h)
    assert closed > 0
    assert closed == pytest.approx(float(fd), rel=1e-8)
    assert closed == pytest.approx(float(dpsi_from_coefficients(mu, lam, 1.0)), rel=1e-14)


def test_resultant_roots(cp):
    cubic, _ = resultant_certificate(FLAGSHIP, cp)
    assert max(cubic.root_residuals) < 1e-8
    assert cubic.roots[:2] == (1.0, 27.0)


def test_resultant_matches_sylvester_determinant(cp):
    mu, lam = family_coefficients(FLAGSHIP.as_floats(), cp.xi)
    coeffs = resultant_coefficients(mu, lam, cp.c_xi, cp.A_xi)
    for x in np.linspace(0.8, 3.2, 13):
        det = sylvester_resultant(mu, lam, cp.c_xi, cp.A_xi, x)
        poly = np.polyval(coeffs, x ** 3)
        size = np.polyval(np.abs(coeffs), x ** 3)
        assert abs(det - poly) <= 1e-12 * size


def test_third_root_closed_form_matches_deflation(cp):
    cert = certify(FLAGSHIP, cp)
    assert abs(cert.third_root_closed - cert.third_root_deflated) < 1e-8
    a3, _, _, a0 = cert.cubic.coeffs
    assert cert.third_root_deflated == pytest.approx(-a0 / (a3 * 27), rel=1e-10)
    assert cert.third_root_closed == pytest.approx(THIRD_ROOT, abs=1e-9)


def test_third_root_outside_the_interval(cp):
    # no crossing of tau in (1, b^3) regardless of the sign of the third root
    cert = certify(FLAGSHIP, cp)
    assert not 1 < cert.cubic.roots[2] < 27


def test_dense_grid_no_crossing(cp):
    cert = certify(FLAGSHIP, cp, dense_points=10_000)
    assert cert.dense_gap < 1e-9
    x = np.linspace(1, 3, 10_000)
    mu, lam = family_coefficients(FLAGSHIP.as_floats(), cp.xi)
    assert np.max(psi_from_coefficients(mu, lam, x) - xi_branch(FLAGSHIP, cp, x)) < 1e-9


def test_chain_psi0_below_family_below_branch(cp, ip):
    x = np.linspace(1, 3, 2001)
    fam = psi_family(FLAGSHIP, cp.xi, x)
    lim = xi_branch(FLAGSHIP, cp, x)
    assert np.all(ip(x) <= fam + 1e-12)
    assert np.all(fam <= lim + 1e-9)


def test_degenerate_denominator():
    with pytest.raises(DegenerateDenominator):
        third_root_closed_form(3.0, 9.0, -1.0, 0.0, -1.0)


def test_deflation_on_known_cubic():
    coeffs = np.poly([1.0, 27.0, -4.0])
    assert third_root_deflation(tuple(coeffs), 3.0) == pytest.approx(-4.0, abs=1e-12)
