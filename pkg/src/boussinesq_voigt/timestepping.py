"""Integrating-factor RK4 time stepping.

The stiff part of the tendency is diagonal in Fourier space (viscosity after
Voigt rescaling, thermal diffusion), so it is integrated exactly with
exponential factors while the transport and buoyancy terms go through the
classical RK4 stages (Lawson's scheme).

Running integrals of the energy-budget integrands are advanced with the same
stages, which keeps budget residuals at the integrator's own accuracy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import DiagConfig, DiagRecord, Monitor
from .errors import ConfigurationError, NumericalFaultError
from .models import ModelParams, SimState, _check_inputs, explicit_parts, linear_multipliers
from .spectral import SpectralField, VectorField, _leray, _lp

log = logging.getLogger(__name__)

__all__ = ["StepperConfig", "Trajectory", "cfl_dt", "step", "integrate", "budget_integrands"]

SCHEMES = ("IFRK4", "RK4")
EPS_FLOOR = 1e-8


@dataclass(frozen=True)
class StepperConfig:
    """``dt=None`` selects CFL-adaptive steps, re-evaluated every ``adapt_every`` steps."""

    t_end: float = 1.0
    dt: float | None = None
    cfl_target: float = 0.5
    dt_max: float = 1e-2
    scheme: str = "IFRK4"
    output_every: int = 1
    guard: float = 1e6
    adapt_every: int = 10
    snapshot_every: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if not 0 < self.cfl_target <= 1:
            raise ConfigurationError(f"cfl_target must lie in (0, 1], got {self.cfl_target}")
        if not self.dt_max > 0:
            raise ConfigurationError(f"dt_max must be > 0, got {self.dt_max}")
        if not self.t_end >= 0 or not math.isfinite(self.t_end):
            raise ConfigurationError(f"t_end must be finite and >= 0, got {self.t_end}")
        if self.output_every < 1 or self.adapt_every < 1 or self.snapshot_every < 0:
            raise ConfigurationError("output_every, adapt_every must be >= 1; snapshot_every >= 0")
        if not self.guard > 0:
            raise ConfigurationError(f"guard must be > 0, got {self.guard}")

    def replace(self, **changes) -> "StepperConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return StepperConfig(**values)


@dataclass
class Trajectory:
    """Records at output times plus optional stored states."""

    records: list[DiagRecord] = field(default_factory=list)
    states: list[SimState] = field(default_factory=list)
    final_state: SimState | None = None
    steps: int = 0
    censored: bool = False
    reason: str | None = None
    status: "StepperStatus | None" = None
    reference: SimState | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def __len__(self):
        return len(self.records)


def max_speed(u: VectorField) -> float:
    return _lp(u.to_physical(), np.inf, u.grid.d)


def cfl_dt(state: SimState, params: ModelParams, cfl_target: float = 0.5, dt_max: float = 1e-2) -> float:
    """``cfl_target * dx / max(|u|_inf, 1e-8)``, capped at ``dt_max``."""
    dx = 1.0 / state.grid.n
    speed = max(max_speed(state.u), EPS_FLOOR)
    return min(cfl_target * dx / speed, dt_max)


def budget_integrands(grid, params: ModelParams, u: np.ndarray, th: np.ndarray) -> np.ndarray:
    """Integrands of ``SimState.integrals`` for raw coefficient arrays."""
    kk = grid.wavevector
    power_u = np.abs(u) ** 2
    work = 2.0 * float(np.sum((th * np.conj(u[params.buoyancy_axis - 1])).real))
    power_sum = power_u.sum(axis=0)
    visc = sum(2.0 * nu * float(np.sum(kk[axis] ** 2 * power_sum)) for axis, nu in enumerate(params.nu) if nu)
    therm = 2.0 * params.kappa * float(np.sum(grid.ksq * np.abs(th) ** 2)) if params.kappa else 0.0
    if grid.d == 2:
        omega = grid.deriv[0] * u[1] - grid.deriv[1] * u[0]
        d1w = float(np.sum(kk[0] ** 2 * np.abs(omega) ** 2))
    else:
        d1w = 0.0
    return np.array([work, visc, therm, d1w])


def _stage(state_u, state_th, grid, params, scheme, lin_u, lin_th):
    tmp = SimState(VectorField(grid, state_u, div_free=True), SpectralField(grid, state_th))
    du, dth = explicit_parts(tmp, params)
    if scheme == "RK4":
        du = du + lin_u * state_u
        dth = dth + lin_th * state_th
    return du, dth, budget_integrands(grid, params, state_u, state_th)


def step(state: SimState, params: ModelParams, dt: float, scheme: str = "IFRK4", step_index=None) -> SimState:
    """Advance one step of length ``dt``; the result is projected, mean-zero and dealiased."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    _check_inputs(state, params, step=step_index)
    g = state.grid
    lin_u, lin_th = linear_multipliers(g, params)
    if scheme == "RK4":
        e_u = e_uh = e_th = e_thh = 1.0
    else:
        e_u, e_uh = np.exp(lin_u * dt), np.exp(lin_u * dt / 2)
        e_th, e_thh = np.exp(lin_th * dt), np.exp(lin_th * dt / 2)
    h = dt
    u0, th0 = state.u.coeffs, state.theta.coeffs

    a_u, a_th, g1 = _stage(u0, th0, g, params, scheme, lin_u, lin_th)
    u2 = e_uh * (u0 + 0.5 * h * a_u)
    th2 = e_thh * (th0 + 0.5 * h * a_th)
    b_u, b_th, g2 = _stage(u2, th2, g, params, scheme, lin_u, lin_th)
    u3 = e_uh * u0 + 0.5 * h * b_u
    th3 = e_thh * th0 + 0.5 * h * b_th
    c_u, c_th, g3 = _stage(u3, th3, g, params, scheme, lin_u, lin_th)
    u4 = e_u * u0 + h * e_uh * c_u
    th4 = e_th * th0 + h * e_thh * c_th
    d_u, d_th, g4 = _stage(u4, th4, g, params, scheme, lin_u, lin_th)

    u_new = e_u * u0 + (h / 6.0) * (e_u * a_u + 2.0 * e_uh * (b_u + c_u) + d_u)
    th_new = e_th * th0 + (h / 6.0) * (e_th * a_th + 2.0 * e_thh * (b_th + c_th) + d_th)
    integrals = state.integrals + (h / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)

    mask = g.dealias_mask
    u_new = _leray(g, u_new * mask)
    th_new = th_new * mask
    th_new[(0,) * g.d] = 0.0
    for name, arr in (("u", u_new), ("theta", th_new), ("integrals", integrals)):
        if not np.all(np.isfinite(arr)):
            raise NumericalFaultError("non-finite values after step", step=step_index, diagnostic=name)
    return SimState(
        VectorField(g, u_new, div_free=True),
        SpectralField(g, th_new),
        state.t + dt,
        integrals,
    )


@dataclass
class StepperStatus:
    """Bookkeeping needed to continue a run bit-for-bit."""

    step_index: int = 0
    dt: float | None = None


def _project_initial(state: SimState) -> SimState:
    g = state.grid
    th = state.theta.coeffs * g.dealias_mask
    th = th.copy()
    th[(0,) * g.d] = 0.0
    u = _leray(g, state.u.coeffs * g.dealias_mask)
    return SimState(VectorField(g, u, div_free=True), SpectralField(g, th), state.t, state.integrals)


def integrate(
    state0: SimState,
    params: ModelParams,
    config: StepperConfig,
    diag_config: DiagConfig | None = None,
    *,
    reference: SimState | None = None,
    status: StepperStatus | None = None,
    snapshot_hook: Callable[[SimState, StepperStatus, SimState], None] | None = None,
) -> Trajectory:
    """Step from ``state0.t`` to ``config.t_end`` recording diagnostics.

    ``reference`` is the t = 0 state that budget residuals are measured
    against (defaults to ``state0``); ``status`` resumes a previous run's step
    counter and adaptive step. ``snapshot_hook(state, status, reference)`` is
    called every ``config.snapshot_every`` steps. On a numerical fault the partial trajectory is
    attached to the raised exception as ``exc.trajectory``.
    """
    diag_config = diag_config or DiagConfig()
    try:
        _check_inputs(state0, params, step=status.step_index if status else 0)
    except NumericalFaultError as exc:
        exc.trajectory = Trajectory(final_state=state0)
        raise
    resuming = status is not None
    status = StepperStatus(status.step_index, status.dt) if resuming else StepperStatus()
    state = state0 if resuming else _project_initial(state0)
    reference = reference if reference is not None else state
    monitor = Monitor(params, reference, diag_config)
    traj = Trajectory(reference=reference)

    def emit(s):
        traj.records.append(monitor.record(s))
        if diag_config.keep_states:
            traj.states.append(s)

    if not resuming:
        emit(state)
    t_end = float(config.t_end)
    tol = 1e-12 * max(1.0, abs(t_end))
    try:
        while state.t < t_end - tol:
            if config.dt is not None:
                dt = config.dt
            elif status.dt is None or status.step_index % config.adapt_every == 0:
                dt = cfl_dt(state, params, config.cfl_target, config.dt_max)
                status.dt = dt
            else:
                dt = status.dt
            last = state.t + dt >= t_end - tol
            if last:
                dt = t_end - state.t
            # overflow surfaces as a NumericalFaultError from the NaN check
            with np.errstate(over="ignore", invalid="ignore"):
                state = step(state, params, dt, config.scheme, step_index=status.step_index)
            if last:
                state = state.replace(t=t_end)
            status.step_index += 1
            traj.steps += 1
            speed = max_speed(state.u)
            if speed > config.guard:
                traj.censored = True
                traj.reason = f"velocity guard exceeded at t={state.t:.6g} (|u|_inf={speed:.3e})"
                log.warning(traj.reason)
                emit(state)
                break
            if last or status.step_index % config.output_every == 0:
                emit(state)
            if snapshot_hook is not None and config.snapshot_every and status.step_index % config.snapshot_every == 0:
                snapshot_hook(state, status, reference)
    except NumericalFaultError as exc:
        traj.final_state = state
        exc.trajectory = traj
        raise
    traj.final_state = state
    traj.status = status
    return traj
