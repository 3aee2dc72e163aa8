"""Vanishing-parameter continuations (alpha, kappa, nu_y) and the Voigt blow-up indicator."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagConfig, DiagRecord
from .errors import ConfigurationError, UnsupportedConfigurationError
from .models import ModelParams, SimState
from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    dealias,
    inverse_laplacian,
    leray_project,
    norm,
    random_field,
    random_vector_field,
)
from .timestepping import StepperConfig, cfl_dt, integrate

log = logging.getLogger(__name__)

__all__ = [
    "IC_NAMES",
    "ic_catalog",
    "SweepSpec",
    "SweepResult",
    "BlowUpReport",
    "run_sweep",
    "blow_up_study",
]

IC_NAMES = ("taylor_green", "shear_layer", "thermal_bubble_pair", "random_band")
FAMILIES = ("alpha", "kappa", "nu_y")
ERROR_NORMS = ("L2", "H1", "xi_H1")


def _bump(grid: Grid, center, width: float) -> np.ndarray:
    """Smooth periodic bump, Gaussian of std ``width`` near ``center``."""
    conc = 1.0 / (2.0 * np.pi * width) ** 2
    out = np.ones(grid.shape)
    for x, c in zip(grid.points, center):
        out = out * np.exp(conc * (np.cos(2.0 * np.pi * (x - c)) - 1.0))
    return out


def _finish(grid: Grid, u_phys, theta_phys):
    u = leray_project(dealias(VectorField.from_physical(grid, u_phys)))
    theta = dealias(SpectralField.from_physical(grid, theta_phys))
    return u, theta


def ic_catalog(name: str, grid: Grid, seed=None, amplitude=1.0, theta_amplitude=1.0, width=0.1):
    """Initial ``(u0, theta0)``; both mean-zero, dealiased, ``u0`` divergence-free.

    taylor_green
        ``u = A(-sin 2pi x1 cos 2pi x2, cos 2pi x1 sin 2pi x2)`` (3D: the
        classical ``(sin cos cos, -cos sin cos, 0)`` vortex) with a single warm
        bump of amplitude ``theta_amplitude`` at the box centre.
    shear_layer
        double tanh shear layer in ``u1(x2)`` (thickness 0.05) with a 5 %
        sinusoidal ``u2`` perturbation and a central warm bump.
    thermal_bubble_pair
        fluid at rest, warm bump below a cold bump along the buoyancy axis.
    random_band
        random fields on ``|k| <= 4`` (seeded), scaled so ``|u| = A`` and
        ``|theta| = theta_amplitude``.
    """
    d = grid.d
    x = grid.points
    two_pi = 2.0 * np.pi
    centre = (0.5,) * d
    if name == "taylor_green":
        if d == 2:
            u = [-np.sin(two_pi * x[0]) * np.cos(two_pi * x[1]), np.cos(two_pi * x[0]) * np.sin(two_pi * x[1])]
        else:
            u = [
                np.sin(two_pi * x[0]) * np.cos(two_pi * x[1]) * np.cos(two_pi * x[2]),
                -np.cos(two_pi * x[0]) * np.sin(two_pi * x[1]) * np.cos(two_pi * x[2]),
                np.zeros(grid.shape),
            ]
        theta = _bump(grid, centre, width)
        return _finish(grid, amplitude * np.stack(u), theta_amplitude * theta)
    if name == "shear_layer":
        delta = 0.05
        y = x[1]
        profile = np.tanh((y - 0.25) / delta) - np.tanh((y - 0.75) / delta) - 1.0
        u = [amplitude * profile, 0.05 * amplitude * np.sin(two_pi * x[0])]
        if d == 3:
            u.append(np.zeros(grid.shape))
        theta = _bump(grid, centre, width)
        return _finish(grid, np.stack(u), theta_amplitude * theta)
    if name == "thermal_bubble_pair":
        low = centre[:-1] + (0.3,)
        high = centre[:-1] + (0.7,)
        theta = _bump(grid, low, width) - _bump(grid, high, width)
        return _finish(grid, np.zeros((d,) + grid.shape), theta_amplitude * theta)
    if name == "random_band":
        rng = np.random.default_rng(seed)
        u = random_vector_field(grid, rng, kmax=4)
        theta = random_field(grid, rng, kmax=4)
        un, tn = norm(u, "L2"), norm(theta, "L2")
        u = u * (amplitude / un) if un else u
        theta = theta * (theta_amplitude / tn) if tn else theta
        return u, theta
    raise ConfigurationError(f"unknown initial condition {name!r}; known: {', '.join(IC_NAMES)}")


@dataclass(frozen=True)
class SweepSpec:
    """One continuation study: ``family`` is varied over ``values``, all else fixed.

    ``reference`` chooses the comparison run: ``"auto"`` uses the zero-value
    member whenever that system is integrable at this resolution (viscous
    baseline for alpha, nu > 0 or alpha > 0 for kappa, nu_1 > 0 for nu_y) and
    the smallest value otherwise. ``initial`` overrides the catalog IC.
    """

    family: str
    values: tuple
    base_params: ModelParams
    ic_name: str = "taylor_green"
    n: int = 64
    T: float = 0.5
    error_norms: tuple = ERROR_NORMS
    stepper: StepperConfig | None = None
    amplitude: float = 1.0
    theta_amplitude: float = 1.0
    width: float = 0.1
    seed: int | None = 0
    reference: str = "auto"
    initial: tuple | None = None
    max_workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        values = tuple(float(v) for v in self.values)
        if not values or any(v <= 0 for v in values):
            raise ConfigurationError("sweep values must be positive")
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ConfigurationError("sweep values must be strictly decreasing")
        object.__setattr__(self, "values", values)
        if not self.T > 0:
            raise ConfigurationError(f"T must be > 0, got {self.T}")
        bad = set(self.error_norms) - set(ERROR_NORMS)
        if bad:
            raise ConfigurationError(f"unknown error norms {sorted(bad)}")
        if self.reference not in ("auto", "zero", "smallest"):
            raise ConfigurationError(f"reference must be auto, zero or smallest, got {self.reference!r}")
        if self.family == "nu_y" and self.base_params.d != 2:
            raise UnsupportedConfigurationError("nu_y continuation is two-dimensional")

    def params_for(self, value: float) -> ModelParams:
        base = self.base_params
        if self.family == "alpha":
            return base.replace(alpha=value)
        if self.family == "kappa":
            return base.replace(kappa=value)
        nu = list(base.nu)
        nu[1] = value
        return base.replace(nu=tuple(nu))

    def zero_member_stable(self) -> bool:
        base = self.base_params
        if self.family == "alpha":
            return any(v > 0 for v in base.nu)
        if self.family == "kappa":
            return any(v > 0 for v in base.nu) or base.alpha > 0
        return base.nu[0] > 0


@dataclass
class SweepResult:
    spec: SweepSpec
    values: tuple
    reference_value: float
    records: dict = field(default_factory=dict)  # value -> list[DiagRecord]
    errors: dict = field(default_factory=dict)  # norm -> array over values
    orders: dict = field(default_factory=dict)  # norm -> fitted order or None
    pair_orders: dict = field(default_factory=dict)  # norm -> list of per-pair orders
    censored: dict = field(default_factory=dict)  # value -> bool
    monotonic_violations: dict = field(default_factory=dict)  # norm -> list of value pairs
    dt: float = 0.0

    def indicator(self, value) -> np.ndarray:
        """``alpha^2 ||u^alpha(t)||^2`` along the run with this value."""
        return np.array([r.blow_up_indicator for r in self.records[value]])

    def sup_indicator(self, value) -> float:
        series = self.indicator(value)
        return float(series.max()) if series.size else math.nan

    def max_budget_residual(self, value) -> float:
        return max(r.energy_budget_residual for r in self.records[value])

    def times(self, value=None) -> np.ndarray:
        value = self.values[0] if value is None else value
        return np.array([r.t for r in self.records[value]])

    def summary_rows(self):
        cols = {"L2": "e_L2_u", "H1": "e_V_u", "theta": "e_L2_theta", "xi_H1": "e_H1_xi"}
        rows = []
        for i, v in enumerate(self.values):
            row = {"value": v}
            for key, col in cols.items():
                row[col] = float(self.errors[key][i]) if key in self.errors else math.nan
            row["sup_indicator"] = self.sup_indicator(v)
            row["censored_flag"] = int(self.censored[v])
            rows.append(row)
        return rows


def _differences(state: SimState, ref: SimState) -> dict:
    du = state.u - ref.u
    dth = state.theta - ref.theta
    return {
        "L2": norm(du, "L2"),
        "H1": norm(du, "H1"),
        "theta": norm(dth, "L2"),
        "xi_H1": norm(inverse_laplacian(dth), "H1"),
    }


def _fit_order(values, errors):
    """Per-pair orders and least-squares slope of log e against log v.

    Needs at least three consecutive usable pairs; returns ``None`` otherwise.
    """
    pairs = []
    for i in range(len(values) - 1):
        e1, e2 = errors[i], errors[i + 1]
        if e1 > 0 and e2 > 0 and math.isfinite(e1) and math.isfinite(e2):
            pairs.append(math.log(e1 / e2) / math.log(values[i] / values[i + 1]))
        else:
            pairs.append(math.nan)
    usable = [i for i in range(len(values)) if errors[i] > 0 and math.isfinite(errors[i])]
    run = longest = []
    for i in usable:
        run = run + [i] if run and run[-1] == i - 1 else [i]
        if len(run) > len(longest):
            longest = run
    if len(longest) < 4:
        return pairs, None
    x = np.log([values[i] for i in longest])
    y = np.log([errors[i] for i in longest])
    slope = float(np.polyfit(x, y, 1)[0])
    return pairs, slope


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run every member from the same IC and compare against the reference run.

    All members use one fixed step (the stepper's ``dt``, or the CFL step of
    the initial condition), so output times coincide exactly.
    """
    grid = Grid(spec.base_params.d, spec.n)
    if spec.initial is not None:
        u0, theta0 = spec.initial
    else:
        u0, theta0 = ic_catalog(
            spec.ic_name,
            grid,
            seed=spec.seed,
            amplitude=spec.amplitude,
            theta_amplitude=spec.theta_amplitude,
            width=spec.width,
        )
    state0 = SimState(leray_project(u0), theta0)
    stepper = spec.stepper or StepperConfig()
    if stepper.dt is None:
        ref_params = spec.params_for(spec.values[0])
        dt = cfl_dt(state0, ref_params, stepper.cfl_target, stepper.dt_max)
    else:
        dt = stepper.dt
    stepper = stepper.replace(dt=dt, t_end=spec.T)

    use_zero = spec.reference == "zero" or (spec.reference == "auto" and spec.zero_member_stable())
    ref_value = 0.0 if use_zero else spec.values[-1]
    members = spec.values if use_zero else spec.values[:-1]
    log.info("sweep %s: reference %s=%g, dt=%g", spec.family, spec.family, ref_value, dt)

    ref_traj = integrate(state0, spec.params_for(ref_value), stepper, DiagConfig(keep_states=True))
    ref_states = {round(s.t / dt): s for s in ref_traj.states}
    if ref_traj.censored:
        raise UnsupportedConfigurationError(f"reference run censored: {ref_traj.reason}")

    def run_member(value):
        worst = {key: 0.0 for key in ("L2", "H1", "theta", "xi_H1")}
        traj = integrate(state0, spec.params_for(value), stepper, DiagConfig(keep_states=True))
        for s in traj.states:
            ref = ref_states.get(round(s.t / dt))
            if ref is None:
                continue
            for key, val in _differences(s, ref).items():
                worst[key] = max(worst[key], val)
        traj.states.clear()
        return value, traj, worst

    if spec.max_workers > 1:
        with ThreadPoolExecutor(spec.max_workers) as pool:
            outcomes = list(pool.map(run_member, members))
    else:
        outcomes = [run_member(v) for v in members]

    result = SweepResult(spec=spec, values=tuple(spec.values), reference_value=ref_value, dt=dt)
    per_value = {}
    for value, traj, worst in outcomes:
        result.records[value] = traj.records
        result.censored[value] = traj.censored
        per_value[value] = worst
    if not use_zero:
        v = spec.values[-1]
        ref_traj.states.clear()
        result.records[v] = ref_traj.records
        result.censored[v] = False
        per_value[v] = {key: 0.0 for key in ("L2", "H1", "theta", "xi_H1")}

    fit_values = [v for v in members if not result.censored[v]]
    for key in ("L2", "H1", "theta", "xi_H1"):
        arr = np.array([per_value[v][key] if not result.censored[v] else math.nan for v in spec.values])
        result.errors[key] = arr
        errs = [per_value[v][key] for v in fit_values]
        pairs, order = _fit_order(fit_values, errs)
        result.pair_orders[key] = pairs
        result.orders[key] = order
        result.monotonic_violations[key] = [
            (fit_values[i], fit_values[i + 1]) for i in range(len(errs) - 1) if errs[i + 1] > errs[i]
        ]
        if result.monotonic_violations[key]:
            log.warning("non-monotone %s errors at %s", key, result.monotonic_violations[key])
    return result


@dataclass
class BlowUpReport:
    """Per output time: the indicator across alpha and its extrapolated alpha -> 0 limit."""

    alphas: tuple
    times: np.ndarray
    table: np.ndarray  # shape (len(times), len(alphas))
    limits: np.ndarray  # linear-in-alpha^2 intercept per time
    plateau: np.ndarray  # bool per time: last three values within 20 %
    suspected_before: float | None
    energy_residuals: dict

    @property
    def suspected(self) -> bool:
        return self.suspected_before is not None


def blow_up_study(spec: SweepSpec, plateau_rtol: float = 0.2) -> tuple[SweepResult, BlowUpReport]:
    """alpha-sweep of the inviscid non-diffusive system and the indicator table.

    The flag is a heuristic: a time is marked when the three smallest-alpha
    indicator values agree within ``plateau_rtol`` (they are not shrinking
    with ``alpha^2``) and the extrapolated limit is positive.
    """
    base = spec.base_params
    if spec.family != "alpha":
        raise ConfigurationError("blow-up study sweeps alpha")
    if base.d != 2 or any(base.nu) or base.kappa:
        raise UnsupportedConfigurationError("blow-up study needs d=2 and nu = kappa = 0")
    result = run_sweep(spec)
    alphas = [a for a in result.values if not result.censored[a]]
    length = min(len(result.records[a]) for a in alphas)
    times = np.array([r.t for r in result.records[alphas[0]][:length]])
    table = np.array([[result.records[a][i].blow_up_indicator for a in alphas] for i in range(length)])
    a2 = np.array(alphas) ** 2
    limits = np.empty(length)
    plateau = np.zeros(length, dtype=bool)
    suspected = None
    for i in range(length):
        row = table[i]
        if len(alphas) >= 2:
            limits[i] = float(np.polyfit(a2, row, 1)[1])
        else:
            limits[i] = row[-1]
        tail = row[-3:]
        top = tail.max()
        plateau[i] = len(tail) == 3 and top > 0 and (top - tail.min()) <= plateau_rtol * top
        if suspected is None and plateau[i] and limits[i] > 0:
            suspected = float(times[i])
    residuals = {a: result.max_budget_residual(a) for a in result.values}
    report = BlowUpReport(tuple(alphas), times, table, limits, plateau, suspected, residuals)
    return result, report


def records_to_array(records: list[DiagRecord], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in records])
