import math

import numpy as np
import pytest

from boussinesq_voigt import spectral as sp
from boussinesq_voigt.errors import ConfigurationError, UnsupportedConfigurationError
from boussinesq_voigt.experiments import IC_NAMES, SweepSpec, blow_up_study, ic_catalog, run_sweep
from boussinesq_voigt.models import ModelParams
from boussinesq_voigt.runner import write_sweep
from boussinesq_voigt.spectral import Grid, SpectralField
from boussinesq_voigt.timestepping import StepperConfig


@pytest.mark.parametrize("name", IC_NAMES)
@pytest.mark.parametrize("d", [2, 3])
def test_catalog_invariants(name, d):
    grid = Grid(d, 8 if d == 3 else 16)
    u, th = ic_catalog(name, grid, seed=4)
    assert u.is_divergence_free()
    assert abs(th.mean) == 0 and not np.any(u.coeffs[(slice(None),) + (0,) * d])
    assert not np.any(th.coeffs[~grid.dealias_mask])
    np.testing.assert_allclose(sp.leray_project(u).coeffs, u.coeffs, atol=1e-15)


def test_taylor_green_closed_form(grid16):
    u, _ = ic_catalog("taylor_green", grid16, amplitude=0.5)
    x, y = grid16.points
    expected = 0.5 * np.stack([-np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)])
    np.testing.assert_allclose(u.to_physical(), expected, atol=1e-15)


def test_bubble_centred_and_positive_peak(grid32):
    _, th = ic_catalog("taylor_green", grid32, theta_amplitude=2.0)
    s = th.to_physical()
    assert np.unravel_index(np.argmax(s), s.shape) == (16, 16)


def test_random_band_deterministic(grid16):
    a = ic_catalog("random_band", grid16, seed=9, amplitude=2.0, theta_amplitude=0.5)
    b = ic_catalog("random_band", grid16, seed=9, amplitude=2.0, theta_amplitude=0.5)
    np.testing.assert_array_equal(a[0].coeffs, b[0].coeffs)
    np.testing.assert_array_equal(a[1].coeffs, b[1].coeffs)
    assert sp.norm(a[0], "L2") == pytest.approx(2.0)
    assert sp.norm(a[1], "L2") == pytest.approx(0.5)
    c = ic_catalog("random_band", grid16, seed=10)
    assert not np.array_equal(a[1].coeffs, c[1].coeffs)


def test_unknown_ic(grid16):
    with pytest.raises(ConfigurationError):
        ic_catalog("vortex_street", grid16)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="beta", values=(0.1,)),
        dict(family="alpha", values=(0.1, 0.2)),
        dict(family="alpha", values=(0.1, 0.1)),
        dict(family="alpha", values=(0.1, 0.0)),
        dict(family="alpha", values=(0.1,), T=0.0),
        dict(family="alpha", values=(0.1,), error_norms=("L7",)),
        dict(family="alpha", values=(0.1,), reference="best"),
    ],
)
def test_sweep_spec_validation(kwargs):
    with pytest.raises(ConfigurationError):
        SweepSpec(base_params=ModelParams(nu=0.01), **kwargs)


def test_nu_y_family_sets_second_viscosity():
    spec = SweepSpec("nu_y", (0.1, 0.05), ModelParams(nu=(0.3, 0.0)))
    assert spec.params_for(0.05).nu == (0.3, 0.05)
    assert spec.zero_member_stable()


def test_zero_ic_sweep_trivial():
    grid = Grid(2, 16)
    spec = SweepSpec(
        "alpha",
        (0.2, 0.1, 0.05, 0.025, 0.0125),
        ModelParams(nu=0.01),
        n=16,
        T=0.05,
        initial=(grid.zero_vector(), grid.zeros()),
        stepper=StepperConfig(dt=0.01),
    )
    res = run_sweep(spec)
    assert res.reference_value == 0.0
    for key in ("L2", "H1", "theta", "xi_H1"):
        assert not np.any(res.errors[key])
        assert res.orders[key] is None


def heat_sweep(T=0.1, values=(0.04, 0.02, 0.01, 0.005, 0.0025)):
    grid = Grid(2, 16)
    theta = SpectralField.from_physical(grid, np.cos(2 * np.pi * grid.points[1]))
    spec = SweepSpec(
        "kappa",
        values,
        ModelParams(nu=0.01),
        n=16,
        T=T,
        initial=(grid.zero_vector(), theta),
        stepper=StepperConfig(dt=T / 20),
    )
    return spec, run_sweep(spec)


def test_kappa_sweep_matches_heat_kernel():
    T = 0.1
    spec, res = heat_sweep(T)
    lam = (2 * np.pi) ** 2
    expected = np.array([math.sqrt(0.5) * (1 - math.exp(-k * lam * T)) for k in spec.values])
    np.testing.assert_allclose(res.errors["theta"], expected, rtol=1e-10)
    np.testing.assert_allclose(res.errors["xi_H1"], expected / (2 * np.pi), rtol=1e-10)
    assert np.all(res.errors["L2"] <= 1e-30)
    slope = np.polyfit(np.log(spec.values), np.log(expected), 1)[0]
    assert res.orders["theta"] == pytest.approx(slope, rel=1e-8)
    assert 0.9 <= res.orders["theta"] <= 1.0
    assert not res.monotonic_violations["theta"]


def test_kappa_sweep_theta_bounded_by_initial():
    _, res = heat_sweep()
    for v in res.values:
        l2 = [r.l2_theta for r in res.records[v]]
        assert max(l2) <= l2[0] * (1 + 1e-12)


def test_sweep_deterministic():
    _, a = heat_sweep()
    _, b = heat_sweep()
    for key in a.errors:
        np.testing.assert_array_equal(a.errors[key], b.errors[key])


def test_sweep_concurrent_matches_sequential():
    base = dict(
        family="alpha",
        values=(0.2, 0.1, 0.05),
        base_params=ModelParams(nu=0.01),
        n=16,
        T=0.05,
        stepper=StepperConfig(dt=0.01),
    )
    seq = run_sweep(SweepSpec(**base))
    par = run_sweep(SweepSpec(max_workers=3, **base))
    for key in seq.errors:
        np.testing.assert_array_equal(seq.errors[key], par.errors[key])


def test_inviscid_sweep_uses_smallest_value_as_reference():
    spec = SweepSpec("alpha", (0.2, 0.1, 0.05), ModelParams(), n=16, T=0.02, stepper=StepperConfig(dt=0.01))
    res = run_sweep(spec)
    assert res.reference_value == 0.05
    assert res.errors["L2"][-1] == 0.0


def test_censored_reference_raises():
    spec = SweepSpec("alpha", (0.2, 0.1), ModelParams(nu=0.01), n=16, T=0.1, stepper=StepperConfig(dt=0.01, guard=1e-3))
    with pytest.raises(UnsupportedConfigurationError):
        run_sweep(spec)


def test_blow_up_study_zero_ic():
    grid = Grid(2, 16)
    spec = SweepSpec(
        "alpha",
        (0.2, 0.1, 0.05),
        ModelParams(),
        n=16,
        T=0.05,
        initial=(grid.zero_vector(), grid.zeros()),
        stepper=StepperConfig(dt=0.01),
    )
    _, report = blow_up_study(spec)
    assert not np.any(report.table)
    assert not report.suspected


def test_blow_up_indicator_scales_with_alpha_squared():
    spec = SweepSpec(
        "alpha",
        (0.2, 0.1, 0.05, 0.025),
        ModelParams(),
        n=32,
        T=0.2,
        amplitude=0.1,
        theta_amplitude=1e-3,
        stepper=StepperConfig(output_every=5),
    )
    res, report = blow_up_study(spec)
    last = report.table[-1]
    np.testing.assert_allclose(last[1:] / last[:-1], 0.25, rtol=1e-2)
    assert abs(report.limits[-1]) <= 1e-3 * last[0]
    assert not report.suspected
    for a in res.values:
        assert res.max_budget_residual(a) <= 1e-10


def test_blow_up_study_preconditions():
    with pytest.raises(UnsupportedConfigurationError):
        blow_up_study(SweepSpec("alpha", (0.1,), ModelParams(nu=0.01)))
    with pytest.raises(ConfigurationError):
        blow_up_study(SweepSpec("kappa", (0.1,), ModelParams(nu=0.01)))


def test_write_sweep_layout(tmp_path):
    spec, res = heat_sweep()
    write_sweep(res, tmp_path)
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0] == "value,e_L2_u,e_V_u,e_L2_theta,e_H1_xi,sup_indicator,censored_flag"
    assert len(lines) == 1 + len(spec.values)
    assert len(list((tmp_path / "runs").glob("*.csv"))) == len(spec.values)
    manifest = dict(
        line.split(" = ", 1) for line in (tmp_path / "manifest.txt").read_text().splitlines()
    )
    assert manifest["family"] == "kappa"
    assert float(manifest["reference_value"]) == 0.0
