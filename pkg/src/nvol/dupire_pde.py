"""Forward Dupire solver for normal dynamics, used as the numerical oracle.

The call-price surface evolves in maturity under

    dC/dT = 1/2 sigma_D(K)^2 d2C/dK2 - mu(T) dC/dK

from the payoff C(K, 0) = (S0 - K)+.  Crank-Nicolson with a Rannacher
(implicit) start damps the kink oscillation; breakpoints of sigma_D and the
initial level S0 are snapped onto grid nodes so the derivative jump driving
the sqrt(T) anomaly is not smeared.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .bachelier import implied_normal_vol
from .models import LocalVolModel, MarketSetup


@dataclass(frozen=True)
class PdeGrid:
    K_min: float
    K_max: float
    n_space: int = 801
    n_time_per_year: int = 400
    min_time_steps: int = 64

    def __post_init__(self):
        if self.n_space < 51:
            raise ValueError("need at least 51 space nodes")
        if self.K_min >= self.K_max:
            raise ValueError("K_min must be below K_max")


def default_grid(model: LocalVolModel, setup: MarketSetup, T_max: float,
                 n_space: int = 801, n_time_per_year: int = 400,
                 width_stdevs: float = 10.0, min_time_steps: int = 64) -> PdeGrid:
    """Grid spanning width_stdevs local standard deviations either side of S0,
    clipped to the positivity domain of the model."""
    s0 = setup.S0
    stdev = model.vol(s0) * math.sqrt(T_max)
    lo, hi = model.positivity_domain
    eps = 1e-12 * max(1.0, abs(s0))
    k_min = max(s0 - width_stdevs * stdev, lo + eps if math.isfinite(lo) else -math.inf)
    k_max = min(s0 + width_stdevs * stdev, hi - eps if math.isfinite(hi) else math.inf)
    if math.isfinite(lo):
        k_min = max(k_min, lo + 1e-9 * (k_max - lo))
    usable = min(s0 - k_min, k_max - s0) / max(stdev, 1e-300)
    if usable < 8.0 and usable < width_stdevs - 1e-9:
        # clipped by the positivity domain; the caller sees the narrower span
        pass
    return PdeGrid(K_min=k_min, K_max=k_max, n_space=n_space,
                   n_time_per_year=n_time_per_year, min_time_steps=min_time_steps)


@dataclass(frozen=True)
class PdeSolution:
    strikes: np.ndarray
    times: tuple[float, ...]
    prices: np.ndarray  # shape (n_times, n_space)
    setup: MarketSetup
    meta: dict = field(default_factory=dict)

    def price_at(self, T: float) -> np.ndarray:
        for i, t in enumerate(self.times):
            if abs(t - T) <= 1e-12 * max(T, 1.0):
                return self.prices[i]
        raise KeyError(f"maturity {T} not among solved levels {self.times}")

    def export_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["K", "T", "price", "sigmaN"])
            for i, t in enumerate(self.times):
                F = self.setup.forward(t)
                for k, p in zip(self.strikes, self.prices[i]):
                    intrinsic = max(F - k, 0.0)
                    try:
                        vol = implied_normal_vol(max(p, intrinsic), F, k, t)
                    except (ValueError, RuntimeError):
                        vol = float("nan")
                    w.writerow([f"{k:.12g}", f"{t:.12g}", f"{p:.12g}", f"{vol:.12g}"])


def _build_strike_grid(model: LocalVolModel, setup: MarketSetup, grid: PdeGrid) -> np.ndarray:
    """Uniform grid with S0 (and thus any breakpoint placed at S0) on a node."""
    s0 = setup.S0
    n = grid.n_space
    dx = (grid.K_max - grid.K_min) / (n - 1)
    # shift so that s0 lands exactly on a node
    offset = (s0 - grid.K_min) / dx
    shift = (offset - round(offset)) * dx
    ks = grid.K_min + shift + dx * np.arange(n)
    # snap remaining breakpoints onto the nearest node
    for bp in model.breakpoints:
        if ks[0] < bp < ks[-1] and abs(bp - s0) > 1e-14:
            j = int(round((bp - ks[0]) / dx))
            ks[j] = bp
    return ks


def solve_forward(model: LocalVolModel, setup: MarketSetup, grid: PdeGrid,
                  T_max: float, T_out: Sequence[float] | None = None) -> PdeSolution:
    """Evolve call prices to T_max, storing the levels in T_out (default: T_max)."""
    if T_out is None:
        T_out = [T_max]
    T_out = sorted(set(float(t) for t in T_out))
    if T_out[-1] > T_max + 1e-12:
        raise ValueError("requested output level beyond T_max")

    ks = _build_strike_grid(model, setup, grid)
    n = len(ks)
    dx = ks[1] - ks[0]
    sig2 = np.array([model.vol(k) ** 2 for k in ks])
    if np.any(sig2 <= 0.0):
        raise ValueError("sigma_D not positive on the whole grid")

    c = np.maximum(setup.S0 - ks, 0.0)

    n_steps = max(int(math.ceil(grid.n_time_per_year * T_max)), grid.min_time_steps)
    # build the step schedule so that every output level is hit exactly
    times = np.linspace(0.0, T_max, n_steps + 1).tolist()
    for t in T_out:
        times.append(t)
    times = sorted(set(round(t, 15) for t in times))

    diff = 0.5 * sig2 / (dx * dx)          # diffusion coefficient on d2/dK2
    out: dict[float, np.ndarray] = {}
    max_ratio = 0.0

    def step(c_in: np.ndarray, t0: float, t1: float, theta: float) -> np.ndarray:
        dt = t1 - t0
        mu_mid = setup.drift(0.5 * (t0 + t1))
        adv = mu_mid / (2.0 * dx)          # central first derivative
        # L C = diff*(C[i+1] - 2C[i] + C[i-1]) - mu*(C[i+1] - C[i-1])/(2dx)
        lo_c = diff + adv                   # C[i-1]
        hi_c = diff - adv                   # C[i+1]
        mid_c = -2.0 * diff
        # (I - theta dt L) c_new = (I + (1-theta) dt L) c_old  (interior rows)
        rhs = c_in.copy()
        if theta < 1.0:
            w = (1.0 - theta) * dt
            rhs[1:-1] = (c_in[1:-1] + w * (lo_c[1:-1] * c_in[:-2]
                                           + mid_c[1:-1] * c_in[1:-1]
                                           + hi_c[1:-1] * c_in[2:]))
        ab = np.zeros((3, n))
        ab[1, :] = 1.0
        ab[1, 1:-1] = 1.0 - theta * dt * mid_c[1:-1]
        ab[0, 2:] = -theta * dt * hi_c[1:-1]
        ab[2, :-2] = -theta * dt * lo_c[1:-1]
        # Dirichlet boundaries: deep ITM C = F(t1) - K, far OTM C = 0
        rhs[0] = setup.forward(t1) - ks[0]
        rhs[-1] = 0.0
        return solve_banded((1, 1), ab, rhs)

    t_prev = times[0]
    rannacher_left = 2  # implicit half-steps damping the payoff kink
    for t_next in times[1:]:
        if rannacher_left > 0:
            tm = 0.5 * (t_prev + t_next)
            c = step(c, t_prev, tm, theta=1.0)
            c = step(c, tm, t_next, theta=1.0)
            rannacher_left -= 1
        else:
            c = step(c, t_prev, t_next, theta=0.5)
        dt = t_next - t_prev
        max_ratio = max(max_ratio, float(np.max(diff)) * dt)
        for t in T_out:
            if abs(t - t_next) <= 1e-12 * max(t, 1.0):
                out[t] = c.copy()
        t_prev = t_next

    prices = np.array([out[t] for t in T_out])
    meta = {"dx": dx, "n_steps": len(times) - 1, "max_diffusion_number": max_ratio}
    return PdeSolution(strikes=ks, times=tuple(T_out), prices=prices, setup=setup, meta=meta)


@dataclass(frozen=True)
class SmilePoint:
    strike: float
    maturity: float
    sigmaN: float
    order_tag: str = "exact"
    flag: str = "ok"


def implied_smile_from_pde(sol: PdeSolution, setup: MarketSetup, T: float,
                           strikes: Sequence[float] | None = None) -> list[SmilePoint]:
    """Per-strike implied normal vols from a solved price level.

    Strikes far (> 6 sigma_ATM sqrt(T)) from the forward are flagged
    low_confidence; prices below intrinsic (discretization dust) are clamped
    and flagged.
    """
    prices = sol.price_at(T)
    F = setup.forward(T)
    pts: list[SmilePoint] = []
    # ATM vol for the confidence band
    j_atm = int(np.argmin(np.abs(sol.strikes - F)))
    intrinsic_atm = max(F - sol.strikes[j_atm], 0.0)
    vol_atm = implied_normal_vol(max(prices[j_atm], intrinsic_atm), F, sol.strikes[j_atm], T)
    band = 6.0 * vol_atm * math.sqrt(T)

    wanted = sol.strikes if strikes is None else np.asarray(strikes, dtype=float)
    for k in wanted:
        j = int(np.argmin(np.abs(sol.strikes - k)))
        p = prices[j]
        kk = sol.strikes[j]
        intrinsic = max(F - kk, 0.0)
        flag = "ok"
        if p < intrinsic:
            p = intrinsic
            flag = "clamped"
        elif abs(kk - F) > band:
            flag = "low_confidence"
        try:
            vol = implied_normal_vol(p, F, kk, T)
        except (ValueError, RuntimeError):
            vol, flag = float("nan"), "clamped"
        pts.append(SmilePoint(strike=float(kk), maturity=T, sigmaN=vol, flag=flag))
    return pts


def atm_implied_vol(sol: PdeSolution, setup: MarketSetup, T: float) -> float:
    """Implied normal vol at K = F_T, interpolating the price in strike."""
    prices = sol.price_at(T)
    F = setup.forward(T)
    ks = sol.strikes
    j = int(np.argmin(np.abs(ks - F)))
    if abs(ks[j] - F) <= 1e-13 * max(1.0, abs(F)):
        p = prices[j]
    else:
        # quartic interpolation through the 5 nearest nodes
        j0 = min(max(j - 2, 0), len(ks) - 5)
        p = float(np.polyval(np.polyfit(ks[j0:j0 + 5] - F, prices[j0:j0 + 5], 4), 0.0))
    return implied_normal_vol(max(p, 0.0), F, F, T)


def extract_local_vol(surface, setup: MarketSetup, K: float, T: float,
                      dy: float | None = None, dT: float | None = None) -> float:
    """Invert the forward equation for sigma_D(K, T) from a vol surface.

    `surface` maps (K, T) -> sigmaN.  Central differences in strike, forward
    difference in maturity.  Raises on a non-positive denominator (the
    arbitrage-like regime where the inversion is singular).
    """
    F = setup.forward(T)
    y = K - F
    s = surface(K, T)
    if dy is None:
        dy = max(1e-4 * max(abs(F), 1e-8), 5e-3 * s * math.sqrt(T))
    if dT is None:
        dT = max(1e-4, 0.05 * T)
    sp = surface(K + dy, T)
    sm = surface(K - dy, T)
    ds_dy = (sp - sm) / (2.0 * dy)
    d2s_dy2 = (sp - 2.0 * s + sm) / (dy * dy)
    s_up = surface(K, T + dT)
    dvar_dT = (s_up * s_up * (T + dT) - s * s * T) / dT - s * s
    # dvar_dT above is T * d(sigma^2)/dT; numerator wants sigma^2 + T dT(sigma^2) + mu T dy(sigma^2)
    mu = setup.drift(T)
    num = s * s + dvar_dT + mu * T * 2.0 * s * ds_dy
    den = (1.0 - y / s * ds_dy) ** 2 + T * s * d2s_dy2
    if den <= 0.0:
        raise ValueError("singular surface: non-positive denominator in local-vol extraction")
    if num <= 0.0:
        raise ValueError("negative total-variance slope in local-vol extraction")
    return math.sqrt(num / den)
