import math

import numpy as np
import pytest

from boussinesq_voigt import spectral as sp
from boussinesq_voigt.diagnostics import (
    CSV_COLUMNS,
    DiagConfig,
    DiagRecord,
    Monitor,
    agmon_verify,
    brezis_verify,
    cz_sqrtL_verify,
    lp_drift,
    poincare_ratio,
    record,
    scalar_corpus,
    theta_max_principle_residual,
    velocity_corpus,
    vorticity_bound_residual,
)
from boussinesq_voigt.errors import ConfigurationError, UnsupportedConfigurationError
from boussinesq_voigt.experiments import ic_catalog
from boussinesq_voigt.models import ModelParams, SimState
from boussinesq_voigt.spectral import Grid, SpectralField, VectorField
from boussinesq_voigt.timestepping import StepperConfig, integrate


def sine(grid):
    return SpectralField.from_physical(grid, np.sin(2 * np.pi * grid.points[0]))


def tg_state(grid, amp=1.0):
    x, y = grid.points
    u = amp * np.stack([-np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)])
    return SimState(VectorField.from_physical(grid, u, div_free=True), sine(grid))


def test_csv_columns_fixed_order():
    head = (
        "t l2_u h1_u h2_u l2_theta linf_theta_min linf_theta_max l2_omega sqrtL_omega voigt_energy "
        "energy_budget_residual blow_up_indicator vort_bound_residual theta_bound_residual"
    ).split()
    lp = [f"lp_theta_p{p}" for p in (2, 4, 8, 16, 32, 64)] + [f"lp_omega_p{p}" for p in (2, 4, 8, 16, 32, 64)]
    tail = ["buoyancy_work", "viscous_dissipation", "thermal_dissipation", "d1_omega_integral"]
    assert CSV_COLUMNS == tuple(head + lp + tail)


def test_record_taylor_green_closed_forms():
    grid = Grid(2, 32)
    alpha = 0.3
    rec = record(tg_state(grid), ModelParams(alpha=alpha))
    # |u|^2 = 1/2, |grad u|^2 = 2 (2pi)^2 / 2, omega = -4pi sin sin so |omega| = 2pi
    assert rec.l2_u == pytest.approx(math.sqrt(0.5), rel=1e-13)
    assert rec.h1_u == pytest.approx(2 * math.pi, rel=1e-13)
    assert rec.h2_u == pytest.approx(2 * (2 * math.pi) ** 2 * math.sqrt(0.5), rel=1e-13)
    assert rec.l2_omega == pytest.approx(2 * math.pi, rel=1e-13)
    assert rec.voigt_energy == pytest.approx(0.5 + alpha**2 * 4 * math.pi**2, rel=1e-13)
    assert rec.blow_up_indicator == pytest.approx(alpha**2 * 4 * math.pi**2, rel=1e-13)
    assert rec.l2_theta == pytest.approx(math.sqrt(0.5), rel=1e-13)
    assert rec.linf_theta_max == pytest.approx(1.0, rel=1e-13)
    assert rec.linf_theta_min == pytest.approx(-1.0, rel=1e-13)
    # sqrt(L): max over p of ||omega||_p / sqrt(p-1) is attained at p=2
    assert rec.sqrtL_omega == pytest.approx(rec.lp_omega[2], rel=1e-13)


def test_record_row_roundtrip():
    rec = record(tg_state(Grid(2, 16)), ModelParams(alpha=0.1))
    back = DiagRecord.from_row(rec.as_row())
    assert back.as_row() == rec.as_row()


def test_diag_config_validation():
    with pytest.raises(ConfigurationError):
        DiagConfig(p_grid=(1, 2))
    with pytest.raises(ConfigurationError):
        DiagConfig(max_principle_rtol=-1)


def test_monitor_residuals_zero_at_reference():
    grid = Grid(2, 16)
    s = tg_state(grid)
    mon = Monitor(ModelParams(nu=(0.1, 0.0)), s)
    rec = mon.record(s)
    assert rec.energy_budget_residual == 0.0
    assert rec.theta_bound_residual == 0.0
    assert rec.vort_bound_residual == 0.0


def test_theta_bound_residual_detects_growth():
    grid = Grid(2, 16)
    s = tg_state(grid)
    mon = Monitor(ModelParams(), s)
    rec = mon.record(s.replace(theta=s.theta * 1.5))
    assert rec.theta_bound_residual == pytest.approx(0.5, rel=1e-12)


def test_vorticity_bound_catches_violation():
    grid = Grid(2, 16)
    s = tg_state(grid)
    params = ModelParams(nu=(0.1, 0.0))
    mon = Monitor(params, s)
    # doubling omega at t=0 cannot satisfy ||omega||^2 <= ||omega_0||^2 + 0
    assert mon.record(s.replace(u=s.u * 2.0)).vort_bound_residual > 0


def test_vorticity_bound_holds_along_anisotropic_run():
    grid = Grid(2, 32)
    u0, th0 = ic_catalog("thermal_bubble_pair", grid)
    params = ModelParams(nu=(0.02, 0.0))
    traj = integrate(SimState(u0, th0), params, StepperConfig(t_end=0.3))
    res = vorticity_bound_residual(traj, params, per_p=True)
    assert set(res) == {2, 4, 8}
    assert max(res.values()) <= 1e-6 * traj.records[0].lp_omega[2] ** 2 + 1e-12
    # at n=32 the grid maximum overshoots by spectral ringing; the calibrated check runs at n=128
    assert theta_max_principle_residual(traj) <= 2e-2 * traj.records[0].linf_theta


def test_vorticity_bound_requires_its_setting():
    grid = Grid(2, 16)
    traj = integrate(tg_state(grid), ModelParams(nu=0.01, kappa=0.1), StepperConfig(t_end=0.01))
    with pytest.raises(UnsupportedConfigurationError):
        vorticity_bound_residual(traj, ModelParams(nu=0.01, kappa=0.1))


def test_lp_drift_zero_for_static_theta():
    grid = Grid(2, 16)
    s = SimState(grid.zero_vector(), sine(grid))
    traj = integrate(s, ModelParams(), StepperConfig(t_end=0.05, dt=0.01))
    assert max(lp_drift(traj).values()) <= 1e-14


def test_empty_trajectory_rejected():
    with pytest.raises(ConfigurationError):
        theta_max_principle_residual([])


# --- inequality verifiers ---------------------------------------------------


def test_brezis_single_mode_closed_form():
    grid = Grid(2, 32)
    w = sine(grid)
    h1 = 2 * math.pi / math.sqrt(2)
    h2 = 4 * math.pi**2 / math.sqrt(2)
    eps_grid = (1e-1, 1e-2, 1e-3)
    expected = max(1.0 / (h1 * e**-0.25 + h2 * math.exp(-(e**-0.25))) for e in eps_grid)
    assert brezis_verify([w], eps_grid) == pytest.approx(expected, rel=1e-12)


def test_brezis_empty_corpus():
    with pytest.raises(ConfigurationError):
        brezis_verify([])


def test_cz_on_taylor_green():
    grid = Grid(2, 64)
    u = tg_state(grid).u
    c_cz, c_sqrt = cz_sqrtL_verify([u], p_grid=(2,))
    assert c_cz == pytest.approx(0.5, rel=1e-12)  # ||grad u||_2 = ||omega||_2
    assert c_sqrt == pytest.approx(math.sqrt(0.5) / math.sqrt(0.5 + 4 * math.pi**2), rel=1e-12)


def test_cz_rejects_3d():
    grid = Grid(3, 8)
    with pytest.raises(UnsupportedConfigurationError):
        cz_sqrtL_verify([grid.zero_vector()])


def test_default_corpora_constants_finite_and_stable():
    grid = Grid(2, 32)
    b = [brezis_verify(scalar_corpus(grid, count=30, seed=s)) for s in (0, 1)]
    c = [cz_sqrtL_verify(velocity_corpus(grid, count=30, seed=s))[0] for s in (0, 1)]
    assert all(math.isfinite(v) and v <= 10 for v in b)
    assert all(math.isfinite(v) and v <= 5 for v in c)
    assert abs(b[1] - b[0]) <= 0.2 * b[0]


def test_agmon_single_mode():
    grid = Grid(2, 32)
    assert agmon_verify([sine(grid)]) == pytest.approx(1 / (math.pi * math.sqrt(2)), rel=1e-12)


def test_poincare_ratio():
    grid = Grid(2, 16)
    assert poincare_ratio(sine(grid)) == pytest.approx(1.0, rel=1e-14)
    assert poincare_ratio(grid.zeros()) == 0.0
    x = grid.points[0]
    assert poincare_ratio(SpectralField.from_physical(grid, np.sin(6 * np.pi * x))) == pytest.approx(1 / 3)
