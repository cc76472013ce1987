import math

import numpy as np
import pytest

from nvol.bachelier import NormalQuote, bachelier_call
from nvol.dupire_pde import (PdeGrid, atm_implied_vol, default_grid,
                             extract_local_vol, implied_smile_from_pde,
                             solve_forward)
from nvol.models import (MarketSetup, make_piecewise_linear,
                         make_shifted_lognormal)


def constant_model(c):
    return make_shifted_lognormal(c, 0.0, 0.0)


def atm_error(n_space, n_time_per_year, T=1.0, c=0.01):
    model = constant_model(c)
    setup = MarketSetup(S0=0.03)
    grid = default_grid(model, setup, T, n_space=n_space,
                        n_time_per_year=n_time_per_year)
    sol = solve_forward(model, setup, grid, T)
    return atm_implied_vol(sol, setup, T) - c


def test_constant_vol_atm_accuracy():
    assert abs(atm_error(801, 400)) < 2e-6


def test_space_time_convergence_second_order():
    # halving dx while quadrupling dt count should cut the error ~4x
    coarse = abs(atm_error(401, 256))
    fine = abs(atm_error(801, 1024))
    assert coarse / fine >= 3.5


def test_digital_limits_at_grid_edges():
    # -dC/dK -> 1 deep ITM and -> 0 deep OTM
    model = constant_model(0.01)
    setup = MarketSetup(S0=0.03)
    grid = default_grid(model, setup, 1.0, n_space=801)
    sol = solve_forward(model, setup, grid, 1.0)
    p = sol.price_at(1.0)
    dk = sol.strikes[1] - sol.strikes[0]
    digital_lo = -(p[1] - p[0]) / dk
    digital_hi = -(p[-1] - p[-2]) / dk
    assert digital_lo == pytest.approx(1.0, abs=1e-6)
    assert digital_hi == pytest.approx(0.0, abs=1e-6)


def test_drift_consistency_constant_vol():
    # with drift, the constant-vol price is Bachelier on the shifted forward
    c, mu0, mu1 = 0.012, 0.004, -0.002
    model = constant_model(c)
    setup = MarketSetup(S0=0.03, mu0=mu0, mu1=mu1)
    T = 2.0
    grid = default_grid(model, setup, T, n_space=1201, n_time_per_year=800)
    sol = solve_forward(model, setup, grid, T)
    F = setup.forward(T)
    for K in (F - 0.01, F, F + 0.015):
        j = int(np.argmin(np.abs(sol.strikes - K)))
        want = bachelier_call(NormalQuote(F=F, K=float(sol.strikes[j]), T=T, sigmaN=c))
        assert sol.price_at(T)[j] == pytest.approx(want, rel=5e-5, abs=1e-9)


def test_calendar_monotonicity():
    model = make_shifted_lognormal(0.002, 0.1, 0.03)
    setup = MarketSetup(S0=0.03)
    grid = default_grid(model, setup, 2.0, n_space=401)
    sol = solve_forward(model, setup, grid, 2.0, T_out=[0.5, 1.0, 2.0])
    assert sol.times == (0.5, 1.0, 2.0)
    interior = slice(40, -40)
    p = sol.prices
    assert np.all(p[1][interior] >= p[0][interior] - 1e-12)
    assert np.all(p[2][interior] >= p[1][interior] - 1e-12)


def test_smile_flags_and_band():
    model = constant_model(0.01)
    setup = MarketSetup(S0=0.03)
    grid = default_grid(model, setup, 1.0, n_space=801)
    sol = solve_forward(model, setup, grid, 1.0)
    pts = implied_smile_from_pde(sol, setup, 1.0)
    flags = {pt.flag for pt in pts}
    assert flags <= {"ok", "low_confidence", "clamped"}
    near = [pt for pt in pts if abs(pt.strike - 0.03) < 0.02]
    assert all(pt.flag == "ok" for pt in near)
    assert all(pt.sigmaN == pytest.approx(0.01, abs=5e-5) for pt in near)
    far = [pt for pt in pts if abs(pt.strike - 0.03) > 0.07]
    assert far and all(pt.flag != "ok" for pt in far)


def test_breakpoint_lands_on_node():
    model = make_piecewise_linear(0.008, -0.1, 0.1, 0.03)
    setup = MarketSetup(S0=0.031)
    grid = default_grid(model, setup, 1.0, n_space=401)
    sol = solve_forward(model, setup, grid, 1.0)
    assert np.min(np.abs(sol.strikes - 0.03)) < 1e-13
    assert np.min(np.abs(sol.strikes - 0.031)) < 1e-13


def test_grid_validation():
    with pytest.raises(ValueError):
        PdeGrid(K_min=0.0, K_max=0.1, n_space=11)
    with pytest.raises(ValueError):
        PdeGrid(K_min=0.2, K_max=0.1)


def test_export_csv_schema(tmp_path):
    model = constant_model(0.01)
    setup = MarketSetup(S0=0.03)
    grid = default_grid(model, setup, 0.5, n_space=101)
    sol = solve_forward(model, setup, grid, 0.5)
    out = tmp_path / "surface.csv"
    sol.export_csv(str(out))
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "K,T,price,sigmaN"
    assert len(lines) == 1 + 101


def test_extract_local_vol_flat_surface():
    # a strike- and maturity-independent implied vol inverts to sigma_D = c
    c = 0.011
    setup = MarketSetup(S0=0.03)
    got = extract_local_vol(lambda K, T: c, setup, K=0.035, T=1.0)
    assert got == pytest.approx(c, rel=1e-10)


def test_extract_local_vol_roundtrip_shifted_ln(tmp_path):
    from nvol.cli import _surface_from_csv

    model = make_shifted_lognormal(0.002, 0.15, 0.03)
    setup = MarketSetup(S0=0.03)
    T = 1.0
    grid = default_grid(model, setup, 1.2 * T, n_space=1601, n_time_per_year=800)
    sol = solve_forward(model, setup, grid, 1.2 * T,
                        T_out=[0.8 * T, T, 1.1 * T, 1.2 * T])
    path = tmp_path / "surface.csv"
    sol.export_csv(str(path))
    surface, _, _ = _surface_from_csv(str(path))
    for K in (0.025, 0.03, 0.035):
        got = extract_local_vol(surface, setup, K=K, T=T, dT=0.1 * T)
        assert got == pytest.approx(model.vol(K), rel=5e-3)


def test_extract_local_vol_singular_raises():
    setup = MarketSetup(S0=0.03)
    # strong negative strike curvature flips the denominator sign
    with pytest.raises(ValueError):
        extract_local_vol(lambda K, T: 0.02 - 100.0 * (K - 0.03) ** 2,
                          setup, K=0.03, T=1.0)
    # total variance decreasing in maturity
    with pytest.raises(ValueError):
        extract_local_vol(lambda K, T: 0.02 * math.exp(-2.0 * T),
                          setup, K=0.03, T=1.0)
