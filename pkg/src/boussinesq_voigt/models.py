"""Tendencies for the Boussinesq / Boussinesq-Voigt family.

One assembly covers isotropic and per-axis (anisotropic) viscosity, thermal
diffusion, the Voigt term and both dimensions. Zero coefficients only ever act
as zero multipliers, so the limit systems share the same code path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    InvariantViolationError,
    NumericalFaultError,
    UnsupportedConfigurationError,
    UnsupportedDimensionError,
)
from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    _flux_divergence,
    _leray,
    _physical_dealiased,
    _zero_mean,
    advect_scalar,
    biot_savart,
    leray_project,
)

__all__ = [
    "ModelParams",
    "SimState",
    "Tendency",
    "linear_multipliers",
    "rhs",
    "rhs_vorticity",
    "recover_pressure",
    "buoyancy",
]


class RegularityWarning(UserWarning):
    """3D Voigt run without thermal diffusion: global regularity is not guaranteed."""


@dataclass(frozen=True)
class ModelParams:
    """Coefficients selecting one member of the family.

    ``nu`` holds one viscosity per axis; a scalar is broadcast. Buoyancy always
    acts along the last axis.
    """

    d: int = 2
    nu: tuple | float = 0.0
    kappa: float = 0.0
    alpha: float = 0.0
    buoyancy_axis: int | None = None

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigurationError(f"d must be 2 or 3, got {self.d}")
        nu = self.nu
        if np.isscalar(nu):
            nu = (float(nu),) * self.d
        nu = tuple(float(v) for v in nu)
        if len(nu) != self.d:
            raise ConfigurationError(f"need {self.d} viscosities, got {len(nu)}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "alpha", float(self.alpha))
        axis = self.d if self.buoyancy_axis is None else int(self.buoyancy_axis)
        if axis != self.d:
            raise ConfigurationError(f"buoyancy_axis must equal d={self.d}, got {axis}")
        object.__setattr__(self, "buoyancy_axis", axis)
        for name, value in [("kappa", self.kappa), ("alpha", self.alpha)] + [
            (f"nu{j + 1}", v) for j, v in enumerate(nu)
        ]:
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {value}")
        if self.d == 3 and self.alpha > 0 and self.kappa == 0:
            warnings.warn(
                "3D Voigt system without thermal diffusion (kappa = 0) is exploratory",
                RegularityWarning,
                stacklevel=3,
            )

    def replace(self, **changes) -> "ModelParams":
        values = dict(d=self.d, nu=self.nu, kappa=self.kappa, alpha=self.alpha)
        values.update(changes)
        return ModelParams(**values)

    @property
    def is_isotropic(self) -> bool:
        return len(set(self.nu)) == 1


@dataclass(frozen=True, eq=False)
class SimState:
    """Velocity, temperature and time.

    ``integrals`` carries running time integrals advanced by the stepper
    together with the fields (see ``INTEGRAL_NAMES``); they make energy
    budgets checkable to integrator accuracy and survive restarts.
    """

    u: VectorField
    theta: SpectralField
    t: float = 0.0
    integrals: np.ndarray = field(default_factory=lambda: np.zeros(4))

    INTEGRAL_NAMES = ("buoyancy_work", "viscous_dissipation", "thermal_dissipation", "d1_omega_sq")

    def __post_init__(self):
        if self.u.grid != self.theta.grid:
            raise ConfigurationError("u and theta must share a grid")
        object.__setattr__(self, "integrals", np.asarray(self.integrals, dtype=float).copy())

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def replace(self, **changes) -> "SimState":
        values = dict(u=self.u, theta=self.theta, t=self.t, integrals=self.integrals)
        values.update(changes)
        return SimState(**values)


@dataclass(frozen=True, eq=False)
class Tendency:
    """Full time derivative plus its stiff-diagonal / explicit split.

    ``du_dt == lin_u * u + explicit_u`` and likewise for theta. The linear
    multipliers are non-positive real arrays on the Fourier lattice.
    """

    du_dt: VectorField
    dtheta_dt: SpectralField
    explicit_u: VectorField
    explicit_theta: SpectralField
    lin_u: np.ndarray
    lin_theta: np.ndarray


def linear_multipliers(grid: Grid, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode stiff rates: viscous (Voigt-rescaled) for u, diffusive for theta."""
    visc = sum(nu * kk**2 for nu, kk in zip(params.nu, grid.wavevector))
    visc = visc * np.ones(grid.shape)
    lin_u = -visc / (1.0 + params.alpha**2 * grid.ksq)
    lin_theta = -params.kappa * grid.ksq
    return lin_u, lin_theta


def buoyancy(theta: SpectralField, params: ModelParams) -> VectorField:
    """``theta e_d`` as an (unprojected) vector field."""
    g = theta.grid
    c = np.zeros((g.d,) + g.shape, dtype=complex)
    c[params.buoyancy_axis - 1] = theta.coeffs
    return VectorField(g, c)


def _check_inputs(state: SimState, params: ModelParams, step=None):
    if state.grid.d != params.d:
        raise ConfigurationError(f"state is {state.grid.d}D but params are {params.d}D")
    for name, arr in (("u", state.u.coeffs), ("theta", state.theta.coeffs)):
        if not np.all(np.isfinite(arr)):
            raise NumericalFaultError(f"non-finite values in {name}", step=step, diagnostic=name)


def explicit_parts(state: SimState, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Raw coefficient arrays of the non-stiff tendencies (used by the stepper)."""
    g = state.grid
    u_phys = _physical_dealiased(g, state.u.coeffs)
    th_phys = _physical_dealiased(g, state.theta.coeffs)
    forcing = -_flux_divergence(g, u_phys, u_phys)
    forcing[params.buoyancy_axis - 1] += state.theta.coeffs
    du = _leray(g, forcing)
    if params.alpha > 0:
        du = du / (1.0 + params.alpha**2 * g.ksq)
    dth = _zero_mean(g, -_flux_divergence(g, u_phys, th_phys))
    return du, dth


def rhs(state: SimState, params: ModelParams) -> Tendency:
    """Time derivative of (u, theta).

    ``du/dt = (I + alpha^2 A)^{-1} [-B(u,u) + P(theta e_d) + sum_j nu_j d_j^2 u]``
    and ``dtheta/dt = -div(u theta) + kappa lap(theta)``.
    """
    _check_inputs(state, params)
    g = state.grid
    if not state.u.div_free and not state.u.is_divergence_free():
        raise InvariantViolationError("velocity is not divergence-free")
    du, dth = explicit_parts(state, params)
    lin_u, lin_theta = linear_multipliers(g, params)
    explicit_u = VectorField(g, du, div_free=True)
    explicit_theta = SpectralField(g, dth)
    return Tendency(
        du_dt=VectorField(g, du + lin_u * state.u.coeffs, div_free=True),
        dtheta_dt=SpectralField(g, dth + lin_theta * state.theta.coeffs),
        explicit_u=explicit_u,
        explicit_theta=explicit_theta,
        lin_u=lin_u,
        lin_theta=lin_theta,
    )


def rhs_vorticity(omega: SpectralField, theta: SpectralField, params: ModelParams):
    """Vorticity-form tendency ``(domega/dt, dtheta/dt)`` for the 2D, alpha = 0 systems."""
    if params.d != 2 or omega.grid.d != 2:
        raise UnsupportedDimensionError("vorticity form is two-dimensional only")
    if params.alpha > 0:
        raise UnsupportedConfigurationError("vorticity form is not available with the Voigt term")
    g = omega.grid
    u = biot_savart(omega)
    d1, d2 = g.deriv
    k1, k2 = g.wavevector
    domega = (
        -advect_scalar(u, omega).coeffs
        - (params.nu[0] * k1**2 + params.nu[1] * k2**2) * omega.coeffs
        + d1 * theta.coeffs
    )
    dtheta = -advect_scalar(u, theta).coeffs - params.kappa * g.ksq * theta.coeffs
    return SpectralField(g, _zero_mean(g, domega)), SpectralField(g, _zero_mean(g, dtheta))


def recover_pressure(state: SimState, params: ModelParams) -> SpectralField:
    """Mean-zero pressure making the unprojected momentum tendency solenoidal."""
    if params.alpha > 0:
        raise UnsupportedConfigurationError("pressure recovery is only defined for alpha = 0")
    _check_inputs(state, params)
    g = state.grid
    u_phys = _physical_dealiased(g, state.u.coeffs)
    forcing = -_flux_divergence(g, u_phys, u_phys)
    forcing[params.buoyancy_axis - 1] += state.theta.coeffs
    div_f = sum(g.deriv[j] * forcing[j] for j in range(g.d))
    # laplacian(p) = div(F)
    return SpectralField(g, _zero_mean(g, -div_f * g.inv_ksq))


def momentum_tendency_unprojected(state: SimState, params: ModelParams) -> VectorField:
    """``-sum_j d_j(u^j u) + theta e_d + sum_j nu_j d_j^2 u`` (alpha = 0), for pressure checks."""
    g = state.grid
    u_phys = _physical_dealiased(g, state.u.coeffs)
    forcing = -_flux_divergence(g, u_phys, u_phys)
    forcing[params.buoyancy_axis - 1] += state.theta.coeffs
    lin_u, _ = linear_multipliers(g, params.replace(alpha=0.0))
    return VectorField(g, forcing + lin_u * state.u.coeffs)


def initial_state(u: VectorField, theta: SpectralField, t: float = 0.0) -> SimState:
    """Project ``u`` onto divergence-free fields and build a state."""
    return SimState(leray_project(u), theta, t)

