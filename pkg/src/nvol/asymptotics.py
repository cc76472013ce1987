"""Small-maturity expansion of the normal implied volatility at fixed strike.

sigma_N(K, T) = sigma_0(K) + sigma_1(K) T + sigma_2(K) T^2 + ...

sigma_0 is the harmonic-type average of the local vol between forward and
strike; sigma_1 and sigma_2 follow from a recursion whose closed-form
integrals are evaluated by adaptive quadrature.  Every coefficient has a
removable 0/0 at the money, so inside a small switch radius the coefficients
are replaced by their Taylor polynomials in y = K - F0 built from local-vol
derivatives at the forward.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .models import LocalVolModel, MarketSetup
from .quadrature import gauss_legendre, integrate


class DomainError(ValueError):
    """Local vol not positive somewhere on the integration range."""


class BreakpointError(ValueError):
    """Analytic ATM series requested at a non-analytic point."""


class NonAnalyticWarning(UserWarning):
    """Power-series-in-T output for a model with a derivative jump."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 2 ** 16
    atm_switch_radius: float = 1e-4  # fraction of sigma_D(F0)*max(sqrt(t_ref), 1)
    t_ref: float = 1.0

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")

    def switch_radius(self, vol_atm: float) -> float:
        return self.atm_switch_radius * vol_atm * max(math.sqrt(self.t_ref), 1.0)


DEFAULT_SPEC = QuadratureSpec()

# second derivatives of sigma0/sigma1 switch to their Taylor forms on a wider
# window than plain values: the closed forms cancel like 1/y^2 .. 1/y^4
_DERIV_RADIUS_FACTOR = 100.0


@dataclass(frozen=True)
class ExpansionCoeffs:
    """One expansion order evaluated at the forward: value and y-derivatives."""

    order: int
    atm_value: float
    atm_derivatives: tuple[float, ...]


def _require_domain(model: LocalVolModel, F0: float, K: float) -> None:
    lo, hi = model.positivity_domain
    a, b = (F0, K) if F0 <= K else (K, F0)
    if not (lo < a and b < hi):
        raise DomainError(
            f"[{a}, {b}] leaves the positivity domain ({lo}, {hi}) of {model.label or 'model'}"
        )


def _inv_vol_integral(model: LocalVolModel, F0: float, K: float, spec: QuadratureSpec) -> float:
    return integrate(lambda s: 1.0 / model.vol(s), F0, K, breakpoints=model.breakpoints,
                     rel_tol=spec.rel_tol, abs_tol=spec.abs_tol,
                     max_subdivisions=spec.max_subdivisions)


def _series_branch(model: LocalVolModel, F0: float, y: float) -> LocalVolModel:
    """Analytic branch to expand around F0 when F0 sits on a breakpoint."""
    if any(abs(F0 - bp) < 1e-14 * max(1.0, abs(F0)) for bp in model.breakpoints):
        return model.branch_for(1.0 if y >= 0.0 else -1.0)
    return model


def sigma0_series_atm(model: LocalVolModel, F0: float) -> tuple[float, float, float, float]:
    """(sigma0, sigma0', sigma0'', sigma0''') at K = F0 from sigma_D derivatives."""
    if any(abs(F0 - bp) < 1e-14 * max(1.0, abs(F0)) for bp in model.breakpoints):
        raise BreakpointError(
            "sigma_D is non-analytic at the forward; expand the one-sided branches instead"
        )
    a0 = model.vol(F0)
    a1 = model.deriv(F0, 1)
    a2 = model.deriv(F0, 2)
    a3 = model.deriv(F0, 3)
    s0 = a0
    s1 = 0.5 * a1
    s2 = a2 / 3.0 - a1 * a1 / (6.0 * a0)
    s3 = a3 / 4.0 - a1 * a2 / (2.0 * a0) + a1 ** 3 / (4.0 * a0 * a0)
    return (s0, s1, s2, s3)


def sigma1_series_atm(model: LocalVolModel, F0: float, mu0: float = 0.0
                      ) -> tuple[float, float, float]:
    """(sigma1, sigma1', sigma1'') at K = F0, including the drift terms.

    The value and slope reduce to rational combinations of sigma_D
    derivatives; the curvature is taken from an independent re-derivation of
    the fixed-strike recursion (the shifted-log-normal check gives the
    11 b^4 / (90 sigma) coefficient).
    """
    if any(abs(F0 - bp) < 1e-14 * max(1.0, abs(F0)) for bp in model.breakpoints):
        raise BreakpointError(
            "sigma_D is non-analytic at the forward; expand the one-sided branches instead"
        )
    a0 = model.vol(F0)
    a1 = model.deriv(F0, 1)
    a2 = model.deriv(F0, 2)
    a3 = model.deriv(F0, 3)
    a4 = model.deriv(F0, 4)
    v0 = a0 * (2.0 * a0 * a2 - a1 * a1) / 24.0
    v1 = (a0 * a0 * a3 + a0 * a1 * a2 - 0.5 * a1 ** 3) / 24.0 + mu0 * a1 * a1 / (12.0 * a0)
    v2 = (36.0 * a0 ** 4 * a4 + 72.0 * a0 ** 3 * a1 * a3 + 44.0 * a0 ** 3 * a2 * a2
          - 44.0 * a0 * a0 * a1 * a1 * a2 + 11.0 * a0 * a1 ** 4
          + 240.0 * a0 * a1 * a2 * mu0 - 120.0 * a1 ** 3 * mu0) / (1440.0 * a0 * a0)
    return (v0, v1, v2)


def sigma0(model: LocalVolModel, F0: float, K: float,
           spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Leading-order normal vol: (K - F0) / int_{F0}^{K} dL / sigma_D(L)."""
    _require_domain(model, F0, K)
    y = K - F0
    branch = _series_branch(model, F0, y)
    if abs(y) < spec.switch_radius(branch.vol(F0)):
        s0, s1, s2, s3 = sigma0_series_atm(branch, F0)
        return s0 + y * (s1 + y * (0.5 * s2 + y * s3 / 6.0))
    return y / _inv_vol_integral(model, F0, K, spec)


def _sigma0_derivs(model: LocalVolModel, F0: float, K: float, spec: QuadratureSpec,
                   radius_factor: float = 1.0) -> tuple[float, float, float]:
    """(sigma0, sigma0', sigma0'') at strike K via the antiderivative J.

    J = int dL/sigma_D has J' = 1/sigma_D and J'' = -sigma_D'/sigma_D^2, so
    the derivatives of sigma0 = y/J need no numerical differentiation.
    Callers that consume the second derivative pass radius_factor > 1: the
    closed form loses two to four digits per decade as y -> 0, while the
    Taylor branch stays clean out to a much larger radius.
    """
    y = K - F0
    branch = _series_branch(model, F0, y)
    if abs(y) < radius_factor * spec.switch_radius(branch.vol(F0)):
        s0, s1, s2, s3 = sigma0_series_atm(branch, F0)
        val = s0 + y * (s1 + y * (0.5 * s2 + y * s3 / 6.0))
        dval = s1 + y * (s2 + 0.5 * y * s3)
        ddval = s2 + y * s3
        return (val, dval, ddval)
    J = _inv_vol_integral(model, F0, K, spec)
    Jp = 1.0 / model.vol(K)
    Jpp = -model.deriv(K, 1) / model.vol(K) ** 2
    val = y / J
    dval = 1.0 / J - y * Jp / (J * J)
    ddval = -2.0 * Jp / (J * J) + 2.0 * y * Jp * Jp / J ** 3 - y * Jpp / (J * J)
    return (val, dval, ddval)


@dataclass(frozen=True)
class MidpointApprox:
    value: float
    error_bound: float


def midpoint_approx(model: LocalVolModel, F0: float, K: float) -> MidpointApprox:
    """Rectangular-rule shortcut sigma_N(K) ~ sigma_D((K + F0)/2).

    The reported bound is the degree-2 Newton-Cotes error term with the
    undetermined interior point taken at the midpoint itself; a heuristic,
    not a guarantee.
    """
    m = 0.5 * (K + F0)
    if not model.in_domain(m):
        raise DomainError("midpoint outside positivity domain")
    v = model.vol(m)
    vp = model.deriv(m, 1)
    vpp = model.deriv(m, 2)
    # (1/sigma_D)'' = (2 sigma_D'^2 - sigma_D sigma_D'') / sigma_D^3
    curv = (2.0 * vp * vp - v * vpp) / v ** 3
    bound = (K - F0) ** 2 / 24.0 * v * v * curv
    return MidpointApprox(value=v, error_bound=bound)


def sigma1(model: LocalVolModel, F0: float, mu0: float, K: float,
           spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """O(T) coefficient at fixed strike.

    sigma1 = sigma0^3/y^2 * ( -1/2 log(sigma0(K)^2 / (sigma_D(K) sigma0(F0)))
                              + mu0 * int_{F0}^{K} (1/sigma0 - 1/sigma_D)^2 )
    """
    _require_domain(model, F0, K)
    return _sigma1_with_derivs(model, F0, mu0, K, spec)[0]


def _sigma1_with_derivs(model: LocalVolModel, F0: float, mu0: float, K: float,
                        spec: QuadratureSpec, radius_factor: float = 1.0
                        ) -> tuple[float, float, float]:
    """(sigma1, sigma1', sigma1'') at strike K, all analytic.

    Writing sigma1 = P * G with P = sigma0^3/y^2 and G the bracket
    (-1/2 log + mu0 integral), both factors differentiate in closed form:
    the log term needs only sigma0', sigma0'', sigma_D', sigma_D'', and the
    drift integral's derivative is its integrand.  See _sigma0_derivs for
    the role of radius_factor.
    """
    y = K - F0
    branch = _series_branch(model, F0, y)
    if abs(y) < radius_factor * spec.switch_radius(branch.vol(F0)):
        v0, v1, v2 = sigma1_series_atm(branch, F0, mu0)
        return (v0 + y * (v1 + 0.5 * y * v2), v1 + y * v2, v2)
    s0, s0p, s0pp = _sigma0_derivs(model, F0, K, spec, radius_factor)
    sD = model.vol(K)
    sDp = model.deriv(K, 1)
    sDpp = model.deriv(K, 2)
    s00 = model.vol(F0)
    G = -0.5 * math.log(s0 * s0 / (sD * s00))
    Gp = -s0p / s0 + 0.5 * sDp / sD
    Gpp = (-s0pp / s0 + (s0p / s0) ** 2 + 0.5 * sDpp / sD
           - 0.5 * (sDp / sD) ** 2)
    if mu0 != 0.0:
        def integrand(L: float) -> float:
            d = 1.0 / sigma0(model, F0, L, spec) - 1.0 / model.vol(L)
            return d * d

        I2 = integrate(integrand, F0, K, breakpoints=model.breakpoints,
                       rel_tol=max(spec.rel_tol, 1e-9), abs_tol=spec.abs_tol,
                       max_subdivisions=spec.max_subdivisions)
        d = 1.0 / s0 - 1.0 / sD
        G += mu0 * I2
        Gp += mu0 * d * d
        Gpp += mu0 * 2.0 * d * (-s0p / (s0 * s0) + sDp / (sD * sD))
    P = s0 ** 3 / (y * y)
    Pp = 3.0 * s0 * s0 * s0p / (y * y) - 2.0 * s0 ** 3 / y ** 3
    Ppp = ((6.0 * s0 * s0p * s0p + 3.0 * s0 * s0 * s0pp) / (y * y)
           - 12.0 * s0 * s0 * s0p / y ** 3 + 6.0 * s0 ** 3 / y ** 4)
    return (P * G, Pp * G + P * Gp, Ppp * G + 2.0 * Pp * Gp + P * Gpp)


def _h2_mu(model: LocalVolModel, F0: float, mu0: float, mu1: float, L: float,
           spec: QuadratureSpec) -> float:
    """Drift part of the O(T^2) inhomogeneity.

    Obtained by matching the T^2 coefficient of the fixed-strike equation to
    the quadrature template for the second-order coefficient (re-derived and
    checked against exact-rational solves of the recursion).  The mu-free
    product term vanishes identically on the driftless first-order solution
    and restores exactness when the drift shifts sigma1.
    """
    if mu0 == 0.0 and mu1 == 0.0:
        return 0.0
    s0, s0p, s0pp = _sigma0_derivs(model, F0, L, spec, _DERIV_RADIUS_FACTOR)
    N = s0 / model.vol(L)
    yv = L - F0
    s1, s1p, _ = _sigma1_with_derivs(model, F0, mu0, L, spec, _DERIV_RADIUS_FACTOR)
    g = s0p / s0
    A = 2.0 * N * s1 * (N - 1.0) + 2.0 * N * yv * s1p + s0 * s0 * s0pp
    B = 2.0 * N * s1 * (3.0 * N - 1.0) + 2.0 * N * yv * s1p - s0 * s0 * s0pp
    return (mu1 * g * (2.0 - 1.0 / N)
            - mu0 * mu0 * g * g / (N * N)
            + 2.0 * mu0 * g / (s0 * N * N)
            * (s1 * (N * N + 2.0 * N - 1.0) + yv * s1p * (1.0 - N))
            - A * B / (4.0 * N ** 4 * s0 * s0))


def sigma2(model: LocalVolModel, F0: float, mu0: float, mu1: float, K: float,
           spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """O(T^2) coefficient at fixed strike.

    sigma2 = -sigma0^4/y^3 * int_0^y z^2 dz { 3 sigma1^2/(2 sigma_D sigma0^4)
             - sigma_D^3 sigma0''^2/(8 sigma0^4) - sigma_D sigma1''/(2 sigma0^3)
             + H2_mu/(2 sigma_D sigma0^2) }
    """
    _require_domain(model, F0, K)
    y = K - F0
    branch = _series_branch(model, F0, y)
    if abs(y) < spec.switch_radius(branch.vol(F0)):
        return sigma2_atm(branch, F0, mu0, mu1)

    inner_spec = QuadratureSpec(rel_tol=max(spec.rel_tol, 1e-10), abs_tol=spec.abs_tol,
                                max_subdivisions=spec.max_subdivisions,
                                atm_switch_radius=spec.atm_switch_radius, t_ref=spec.t_ref)

    def integrand(L: float) -> float:
        z = L - F0
        sD = model.vol(L)
        s0, _, s0pp = _sigma0_derivs(model, F0, L, inner_spec, _DERIV_RADIUS_FACTOR)
        s1, _, s1pp = _sigma1_with_derivs(model, F0, mu0, L, inner_spec,
                                          _DERIV_RADIUS_FACTOR)
        core = (1.5 * s1 * s1 / (sD * s0 ** 4)
                - sD ** 3 * s0pp * s0pp / (8.0 * s0 ** 4)
                - sD * s1pp / (2.0 * s0 ** 3))
        if mu0 != 0.0 or mu1 != 0.0:
            core += _h2_mu(model, F0, mu0, mu1, L, inner_spec) / (2.0 * sD * s0 * s0)
        return z * z * core

    # the Taylor/closed-form handover is a (tiny) jump: pin it to a panel edge
    r_taylor = _DERIV_RADIUS_FACTOR * spec.switch_radius(branch.vol(F0))
    bps = set(model.breakpoints)
    for bp in (F0 + r_taylor, F0 - r_taylor):
        if min(F0, K) < bp < max(F0, K):
            bps.add(bp)
    s0K = sigma0(model, F0, K, spec)
    # fixed-order rule: the integrand inherits a tiny noise floor from the
    # nested quadratures, which error-driven refinement would chase forever
    val = gauss_legendre(integrand, F0, K, breakpoints=tuple(sorted(bps)),
                         n_nodes=16, n_panels=8)
    return -s0K ** 4 / y ** 3 * val


def sigma2_atm(model: LocalVolModel, F0: float, mu0: float = 0.0, mu1: float = 0.0) -> float:
    """ATM value of the O(T^2) coefficient (no integration needed).

    Drift-free part: -sigma1(0)^2/(2 sigma0) + sigma0^3 sigma0''(0)^2/24
    + sigma0^2 sigma1''(0)/6.  The drift adds -mu1 sigma_D'(F0)/12
    + mu0^2 sigma_D'(F0)^2/(24 sigma_D(F0)); the terms linear in mu0 cancel
    at the money.
    """
    s0, _, s0pp, _ = sigma0_series_atm(model, F0)
    v0, _, v2 = sigma1_series_atm(model, F0, mu0=0.0)
    base = (-v0 * v0 / (2.0 * s0) + s0 ** 3 * s0pp * s0pp / 24.0
            + s0 * s0 * v2 / 6.0)
    if mu0 != 0.0 or mu1 != 0.0:
        a0 = model.vol(F0)
        a1 = model.deriv(F0, 1)
        base += -mu1 * a1 / 12.0 + mu0 * mu0 * a1 * a1 / (24.0 * a0)
    return base


def sigma1_jump(model: LocalVolModel, F0: float) -> float:
    """One-sided difference sigma1(0+) - sigma1(0-) across a breakpoint at F0.

    For linear pieces this equals -(bR^2 - bL^2) sigma0 / 6.  Returns 0 for
    models analytic at F0.
    """
    if not any(abs(F0 - bp) < 1e-14 * max(1.0, abs(F0)) for bp in model.breakpoints):
        return 0.0
    right = model.branch_for(1.0)
    left = model.branch_for(-1.0)
    vr, _, _ = sigma1_series_atm(right, F0, mu0=0.0)
    vl, _, _ = sigma1_series_atm(left, F0, mu0=0.0)
    return vr - vl


def smile(model: LocalVolModel, setup: MarketSetup, K: float, T: float, order: int,
          spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Truncated fixed-strike expansion sigma0 + sigma1 T + sigma2 T^2.

    y = K - F0 throughout; the drift enters through the mu-dependent terms of
    the coefficients, not through a moving moneyness.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if model.breakpoints:
        warnings.warn(
            "power-series-in-T smile for a non-analytic local vol: the expansion "
            "misses sqrt(T) terms (use the sqrt-T detector)", NonAnalyticWarning,
            stacklevel=2)
    F0 = setup.S0
    out = sigma0(model, F0, K, spec)
    if order >= 1:
        out += sigma1(model, F0, setup.mu0, K, spec) * T
    if order >= 2:
        out += sigma2(model, F0, setup.mu0, setup.mu1, K, spec) * T * T
    return out
