import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvol.asymptotics import (BreakpointError, DomainError,
                              NonAnalyticWarning, midpoint_approx, sigma0,
                              sigma0_series_atm, sigma1, sigma1_jump,
                              sigma1_series_atm, sigma2, sigma2_atm, smile)
from nvol.models import (MarketSetup, make_piecewise_linear,
                         make_quadratic_sabr, make_shifted_lognormal)

F0 = 10.0


def poly_model(a0, a1, a2, a3, a4, domain=(F0 - 0.55, F0 + 2.0)):
    """Local vol with prescribed derivatives a_k = sigma_D^(k)(F0)."""
    c = [a0, a1, a2 / 2.0, a3 / 6.0, a4 / 24.0]
    from nvol.models import LocalVolModel

    def vol(s):
        y = s - F0
        return c[0] + y * (c[1] + y * (c[2] + y * (c[3] + y * c[4])))

    def deriv(s, k):
        y = s - F0
        if k == 1:
            return c[1] + y * (2 * c[2] + y * (3 * c[3] + y * 4 * c[4]))
        if k == 2:
            return 2 * c[2] + y * (6 * c[3] + y * 12 * c[4])
        if k == 3:
            return 6 * c[3] + y * 24 * c[4]
        if k == 4:
            return 24.0 * c[4]
        raise ValueError(k)

    return LocalVolModel(vol=vol, deriv=deriv, positivity_domain=domain,
                         label="poly")


# Reference values computed by an exact-rational (Fraction) order-by-order
# solve of the fixed-strike recursion for the polynomial model with
# derivatives (2, 3, 5, 7, 11) at F0; the y-series is truncated at y^6, so
# point values at |y| = 0.2 carry ~1e-5 relative truncation.
SOLVER_CASES = {
    # (mu0, mu1): (sigma1 series c0..c3, sigma2_atm,
    #              sigma1(+-0.2), sigma2(+-0.2))
    (0.0, 0.0): ((11 / 12, 89 / 48, 10547 / 5760, 6293 / 7680), 2411 / 960,
                 (1.36739140109, 0.612671635212), (4.99576219491, 1.22316234828)),
    (2.0, 0.0): ((11 / 12, 125 / 48, 14507 / 5760, 20591 / 23040), 3131 / 960,
                 (1.54542978324, 0.489546932054), (6.20445070001, 1.72505683443)),
    (1.0, 1.0): ((11 / 12, 107 / 48, 12527 / 5760, 3947 / 4608), 2351 / 960,
                 (1.45641059216, 0.551109283633), (5.12550245817, 1.07724746772)),
}


def test_sigma0_shifted_ln_closed_form():
    # harmonic average of sigma0bar + 2b(S - S0): y * 2b / log(1 + 2by/sigma0bar)
    sb, b, S0 = 0.014, 0.1, 0.03
    m = make_shifted_lognormal(sb - 2 * b * S0, b, S0)
    for y in (-0.02, -0.005, 0.01, 0.05):
        expected = 2.0 * b * y / math.log1p(2.0 * b * y / sb)
        assert sigma0(m, S0, S0 + y) == pytest.approx(expected, rel=1e-9)


def test_sigma0_quadrature_matches_closed_form_25_strikes():
    sb, b, S0 = 0.014, 0.1, 0.03
    m = make_shifted_lognormal(sb - 2 * b * S0, b, S0)
    for i in range(25):
        y = -0.02 + 0.004 * i
        if abs(y) < 1e-9:
            continue
        expected = 2.0 * b * y / math.log1p(2.0 * b * y / sb)
        assert sigma0(m, S0, S0 + y) == pytest.approx(expected, rel=1e-9)


def test_sigma0_atm_series_vs_quadrature():
    # the closed-form derivatives must agree with the quadrature evaluation:
    # the Taylor prediction at small y matches sigma0 to O(y^4)
    m = poly_model(2, 3, 5, 7, 11)
    s0, s1, s2, s3 = sigma0_series_atm(m, F0)
    assert s0 == pytest.approx(2.0, rel=1e-14)
    assert s1 == pytest.approx(3.0 / 2.0, rel=1e-14)
    for y in (0.01, -0.01, 0.02, -0.02):
        taylor = s0 + y * (s1 + y * (s2 / 2.0 + y * s3 / 6.0))
        assert sigma0(m, F0, F0 + y) == pytest.approx(taylor, abs=3.0 * y ** 4)


def test_sigma0_atm_continuity():
    m = poly_model(2, 3, 5, 7, 11)
    inside = sigma0(m, F0, F0 + 1e-5)  # Taylor branch
    outside = sigma0(m, F0, F0 + 3e-4)  # quadrature branch
    slope = (outside - inside) / (3e-4 - 1e-5)
    assert slope == pytest.approx(1.5, rel=1e-2)


def test_sigma1_series_vs_solver():
    for (mu0, mu1), (s1c, _, _, _) in SOLVER_CASES.items():
        if mu1 != 0.0:
            continue  # sigma1 has no mu1 dependence
        m = poly_model(2, 3, 5, 7, 11)
        v0, v1, v2 = sigma1_series_atm(m, F0, mu0)
        assert v0 == pytest.approx(s1c[0], rel=1e-13)
        assert v1 == pytest.approx(s1c[1], rel=1e-13)
        assert v2 == pytest.approx(2 * s1c[2], rel=1e-13)


def test_sigma1_point_values_vs_solver():
    m = poly_model(2, 3, 5, 7, 11)
    for (mu0, mu1), (_, _, s1pts, _) in SOLVER_CASES.items():
        if mu1 != 0.0:
            continue
        assert sigma1(m, F0, mu0, F0 + 0.2) == pytest.approx(s1pts[0], rel=1e-5)
        assert sigma1(m, F0, mu0, F0 - 0.2) == pytest.approx(s1pts[1], rel=1e-5)


def test_sigma1_shifted_ln_series():
    # sigma1(y) = -b^2 sb/6 - b^3 y/6 + 11 b^4/(180 sb) y^2
    #             + mu0 (b^2/(3 sb) y - 2 b^3/(3 sb^2) y^2 / 2 ...)
    sb, b, S0, mu0 = 0.014, 0.1, 0.03, 0.002
    m = make_shifted_lognormal(sb - 2 * b * S0, b, S0)
    v0, v1, v2 = sigma1_series_atm(m, S0, mu0)
    assert v0 == pytest.approx(-b * b * sb / 6.0, rel=1e-13)
    assert v1 == pytest.approx(-b ** 3 / 6.0 + mu0 * b * b / (3.0 * sb), rel=1e-13)
    assert v2 == pytest.approx(11.0 * b ** 4 / (90.0 * sb)
                               - 2.0 * mu0 * b ** 3 / (3.0 * sb * sb), rel=1e-13)


def test_sigma2_atm_vs_solver():
    m = poly_model(2, 3, 5, 7, 11)
    for (mu0, mu1), (_, s2_atm, _, _) in SOLVER_CASES.items():
        assert sigma2_atm(m, F0, mu0, mu1) == pytest.approx(s2_atm, rel=1e-13)


def test_sigma2_point_values_vs_solver():
    m = poly_model(2, 3, 5, 7, 11)
    for (mu0, mu1), (_, _, _, s2pts) in SOLVER_CASES.items():
        assert sigma2(m, F0, mu0, mu1, F0 + 0.2) == pytest.approx(s2pts[0], rel=2e-4)
        assert sigma2(m, F0, mu0, mu1, F0 - 0.2) == pytest.approx(s2pts[1], rel=2e-4)


def test_sigma2_atm_shifted_ln():
    # driftless: sb b^4 / 40; drift adds -mu1 b/6 + mu0^2 b^2/(6 sb)
    sb, b, S0 = 0.014, 0.1, 0.03
    m = make_shifted_lognormal(sb - 2 * b * S0, b, S0)
    assert sigma2_atm(m, S0) == pytest.approx(sb * b ** 4 / 40.0, rel=1e-12)
    mu0, mu1 = 0.003, 0.001
    expected = (sb * b ** 4 / 40.0 - mu1 * 2 * b / 12.0
                + mu0 * mu0 * 4 * b * b / (24.0 * sb))
    assert sigma2_atm(m, S0, mu0, mu1) == pytest.approx(expected, rel=1e-12)


def test_sigma2_continuous_at_atm_switch():
    m = make_quadratic_sabr(0.02, 0.2, -0.3, 0.05)
    atm = sigma2_atm(m, 0.05)
    near = sigma2(m, 0.05, 0.0, 0.0, 0.05 + 5e-5)
    assert near == pytest.approx(atm, rel=5e-3)


def test_sigma1_jump_piecewise():
    sb, bL, bR, S0 = 0.008, 0.1, 0.2, 0.03
    m = make_piecewise_linear(sb, bL, bR, S0)
    expected = -(bR * bR - bL * bL) * sb / 6.0
    assert sigma1_jump(m, S0) == pytest.approx(expected, abs=1e-12)
    # one-sided limits of the full coefficient agree with the branch series
    eps = 1e-7
    jump = sigma1(m, S0, 0.0, S0 + eps) - sigma1(m, S0, 0.0, S0 - eps)
    assert jump == pytest.approx(expected, rel=1e-4)
    # analytic models have no jump
    assert sigma1_jump(make_shifted_lognormal(0.01, 0.1, 0.03), 0.03) == 0.0


def test_breakpoint_errors():
    m = make_piecewise_linear(0.008, 0.1, 0.2, 0.03)
    with pytest.raises(BreakpointError):
        sigma0_series_atm(m, 0.03)
    with pytest.raises(BreakpointError):
        sigma1_series_atm(m, 0.03)
    # the one-sided branches are fine
    sigma0_series_atm(m.branch_for(1.0), 0.03)


def test_domain_errors():
    m = make_shifted_lognormal(0.01, 0.2, 0.03)  # vol vanishes at S = -0.025
    with pytest.raises(DomainError):
        sigma0(m, 0.03, -0.05)
    with pytest.raises(DomainError):
        sigma1(m, 0.03, 0.0, -0.05)
    with pytest.raises(DomainError):
        sigma2(m, 0.03, 0.0, 0.0, -0.05)


def test_smile_orders_and_warning():
    m = make_shifted_lognormal(0.002, 0.1, 0.03)
    setup = MarketSetup(S0=0.03)
    v0 = smile(m, setup, 0.035, 1.0, 0)
    v1 = smile(m, setup, 0.035, 1.0, 1)
    v2 = smile(m, setup, 0.035, 1.0, 2)
    assert v0 == pytest.approx(sigma0(m, 0.03, 0.035), rel=1e-14)
    assert abs(v1 - v0) > 0.0 and abs(v2 - v1) < abs(v1 - v0)
    with pytest.raises(ValueError):
        smile(m, setup, 0.035, 1.0, 3)
    kink = make_piecewise_linear(0.008, -0.1, 0.1, 0.03)
    with pytest.warns(NonAnalyticWarning):
        smile(kink, setup, 0.035, 1.0, 0)


def test_midpoint_shortcut():
    m = make_shifted_lognormal(0.002, 0.1, 0.03)
    approx = midpoint_approx(m, 0.03, 0.05)
    assert approx.value == pytest.approx(m.vol(0.04), rel=1e-14)
    # the shortcut sits within its own error bound of the true sigma0
    assert abs(approx.value - sigma0(m, 0.03, 0.05)) <= 10 * abs(approx.error_bound) + 1e-12


@settings(max_examples=40, deadline=None)
@given(y=st.floats(-0.3, 0.3), b=st.floats(-0.3, 0.3))
def test_sigma0_between_vol_bounds(y, b):
    sb, S0 = 0.02, 0.05
    if sb + 2 * b * y <= 1e-4 or abs(y) < 1e-6:
        return
    m = make_shifted_lognormal(sb - 2 * b * S0, b, S0)
    val = sigma0(m, S0, S0 + y)
    lo = min(m.vol(S0), m.vol(S0 + y))
    hi = max(m.vol(S0), m.vol(S0 + y))
    assert lo - 1e-12 <= val <= hi + 1e-12


@settings(max_examples=20, deadline=None)
@given(y=st.floats(1e-4, 0.1))
def test_sigma0_symmetry_for_symmetric_model(y):
    # quadratic model with rho = 0 is even around S0, so sigma0 is even in y
    m = make_quadratic_sabr(0.02, 0.3, 0.0, 0.05)
    up = sigma0(m, 0.05, 0.05 + y)
    dn = sigma0(m, 0.05, 0.05 - y)
    assert up == pytest.approx(dn, rel=1e-9)
