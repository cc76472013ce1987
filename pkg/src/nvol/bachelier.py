"""Normal (Bachelier) pricing, implied-vol inversion and normal/log-normal maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


@dataclass(frozen=True)
class NormalQuote:
    """An option quote in normal-vol terms (undiscounted, forward measure)."""

    F: float
    K: float
    T: float
    sigmaN: float

    def __post_init__(self):
        if not (self.T > 0.0):
            raise ValueError(f"maturity must be positive, got {self.T}")
        if self.sigmaN < 0.0:
            raise ValueError(f"normal vol must be >= 0, got {self.sigmaN}")


@dataclass(frozen=True)
class LognormalQuote:
    F: float
    K: float
    T: float
    sigmaBS: float

    def __post_init__(self):
        if self.F <= 0.0 or self.K <= 0.0:
            raise ValueError("forward and strike must be positive for a log-normal quote")

    @property
    def x(self) -> float:
        """Log-moneyness log(K/F)."""
        return math.log(self.K / self.F)


def bachelier_call(q: NormalQuote) -> float:
    """Undiscounted call price under a normal terminal distribution."""
    F, K, T, s = q.F, q.K, q.T, q.sigmaN
    for v in (F, K, T, s):
        if not math.isfinite(v):
            raise ValueError("non-finite input to bachelier_call")
    stdev = s * math.sqrt(T)
    if stdev == 0.0:
        return max(F - K, 0.0)
    h = (F - K) / stdev
    return (F - K) * norm_cdf(h) + stdev * norm_pdf(h)


def bachelier_vega(q: NormalQuote) -> float:
    stdev = q.sigmaN * math.sqrt(q.T)
    if stdev == 0.0:
        return 0.0
    h = (q.F - q.K) / stdev
    return math.sqrt(q.T) * norm_pdf(h)


def implied_normal_vol(price: float, F: float, K: float, T: float) -> float:
    """Invert the Bachelier formula for sigmaN.

    Bracketed Brent root-find on sigmaN.  The time value is strictly
    increasing in sigmaN and bounded by stdev/sqrt(2*pi), so doubling the ATM
    inverse of the time value always closes a bracket; Newton variants are
    fragile here because the vega underflows for deep in/out quotes.
    """
    if not (T > 0.0):
        raise ValueError("maturity must be positive")
    intrinsic = max(F - K, 0.0)
    if price < intrinsic - 1e-16 * max(abs(F), 1.0):
        raise ValueError(f"price {price} below intrinsic {intrinsic}")
    if price <= intrinsic:
        return 0.0
    if F == K:
        return price * math.sqrt(2.0 * math.pi / T)

    tve = price - intrinsic  # time value, > 0

    def obj(s: float) -> float:
        return bachelier_call(NormalQuote(F=F, K=K, T=T, sigmaN=s)) - price

    # lower edge of the bracket: sigma = ATM inverse of the time value prices
    # below `price` whenever K != F
    hi = tve * math.sqrt(2.0 * math.pi / T)
    for _ in range(200):
        if obj(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("implied_normal_vol failed to bracket")
    from scipy.optimize import brentq

    return float(brentq(obj, 0.0, hi, xtol=1e-300, rtol=8.9e-16, maxiter=200))


def black_scholes_call(F: float, K: float, sigmaBS: float, T: float) -> float:
    """Undiscounted Black-Scholes call on the forward."""
    if F <= 0.0 or K <= 0.0:
        raise ValueError("forward and strike must be positive")
    stdev = sigmaBS * math.sqrt(T)
    if stdev <= 0.0:
        return max(F - K, 0.0)
    d1 = math.log(F / K) / stdev + 0.5 * stdev
    d2 = d1 - stdev
    return F * norm_cdf(d1) - K * norm_cdf(d2)


def atm_normal_from_lognormal(F: float, sigmaBS: float, T: float) -> float:
    """Exact ATM conversion log-normal -> normal vol.

    Equates the ATM Black-Scholes price F*Erf(sigmaBS*sqrt(T)/(2*sqrt(2)))
    with the ATM Bachelier price sigmaN*sqrt(T/(2*pi)); exact for all T.
    """
    if F <= 0.0 or T <= 0.0:
        raise ValueError("forward and maturity must be positive")
    return F * math.sqrt(2.0 * math.pi / T) * math.erf(sigmaBS * math.sqrt(T) / (2.0 * math.sqrt(2.0)))


def atm_lognormal_from_normal(F: float, sigmaN: float, T: float) -> float:
    """Inverse of atm_normal_from_lognormal (closed form via inverse erf)."""
    if F <= 0.0 or T <= 0.0:
        raise ValueError("forward and maturity must be positive")
    r = sigmaN / (F * math.sqrt(2.0 * math.pi / T))
    if r >= 1.0:
        raise ValueError("normal vol at or above the Erf saturation bound F*sqrt(2*pi/T)")
    if r < 0.0:
        raise ValueError("normal vol must be >= 0")
    from scipy.special import erfinv

    return float(erfinv(r)) * 2.0 * math.sqrt(2.0) / math.sqrt(T)


def short_time_normal_from_lognormal_smile(K: float, F: float, sigmaBS: float) -> float:
    """Leading-order (T -> 0) smile map: sigmaN(K) = sigmaBS(K) * (K-F)/log(K/F).

    Valid only for the short-maturity limit of the smile; at K = F the
    removable limit sigmaN = F * sigmaBS is used.
    """
    if K <= 0.0 or F <= 0.0:
        raise ValueError("strike and forward must be positive")
    x = math.log(K / F)
    if abs(x) < 1e-8:
        # (K-F)/log(K/F) = F*(1 + x/2 + x^2/12 + O(x^3))
        return sigmaBS * F * (1.0 + 0.5 * x + x * x / 12.0)
    return sigmaBS * (K - F) / x
