"""Monitored functionals and numerical checks of the a priori estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, UnsupportedConfigurationError
from .spectral import (
    DEFAULT_P_GRID,
    Grid,
    SpectralField,
    VectorField,
    _lp,
    _to_physical,
    curl,
    norm,
    random_field,
    random_vector_field,
)

__all__ = [
    "DiagConfig",
    "DiagRecord",
    "Monitor",
    "record",
    "theta_max_principle_residual",
    "vorticity_bound_residual",
    "lp_drift",
    "brezis_verify",
    "cz_sqrtL_verify",
    "agmon_verify",
    "poincare_ratio",
    "scalar_corpus",
    "velocity_corpus",
    "CSV_COLUMNS",
]


@dataclass(frozen=True)
class DiagConfig:
    """What to record and the calibrated thresholds of the continuum bounds."""

    p_grid: tuple = DEFAULT_P_GRID
    keep_states: bool = False
    max_principle_rtol: float = 5e-3
    lp_drift_rtol: float = 1e-3

    def __post_init__(self):
        p_grid = tuple(float(p) if p != int(p) else int(p) for p in self.p_grid)
        if not p_grid or any(p < 2 for p in p_grid):
            raise ConfigurationError(f"p_grid entries must be >= 2, got {self.p_grid}")
        object.__setattr__(self, "p_grid", p_grid)
        if self.max_principle_rtol < 0 or self.lp_drift_rtol < 0:
            raise ConfigurationError("thresholds must be >= 0")


@dataclass
class DiagRecord:
    t: float = 0.0
    l2_u: float = 0.0
    h1_u: float = 0.0
    h2_u: float = 0.0
    l2_theta: float = 0.0
    linf_theta_min: float = 0.0
    linf_theta_max: float = 0.0
    l2_omega: float = 0.0
    sqrtL_omega: float = 0.0
    voigt_energy: float = 0.0
    energy_budget_residual: float = 0.0
    blow_up_indicator: float = 0.0
    vort_bound_residual: float = 0.0
    theta_bound_residual: float = 0.0
    lp_theta: dict = field(default_factory=dict)
    lp_omega: dict = field(default_factory=dict)
    # running integrals (appended CSV columns)
    buoyancy_work: float = 0.0
    viscous_dissipation: float = 0.0
    thermal_dissipation: float = 0.0
    d1_omega_integral: float = 0.0

    @property
    def linf_theta(self) -> float:
        return max(abs(self.linf_theta_min), abs(self.linf_theta_max))

    def as_row(self) -> list[float]:
        row = []
        for name in CSV_COLUMNS:
            if name.startswith("lp_theta_p"):
                row.append(self.lp_theta.get(int(name[10:]), math.nan))
            elif name.startswith("lp_omega_p"):
                row.append(self.lp_omega.get(int(name[10:]), math.nan))
            else:
                row.append(getattr(self, name))
        return row

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "DiagRecord":
        rec = cls()
        for name, value in zip(CSV_COLUMNS, row):
            value = float(value)
            if name.startswith("lp_theta_p"):
                if not math.isnan(value):
                    rec.lp_theta[int(name[10:])] = value
            elif name.startswith("lp_omega_p"):
                if not math.isnan(value):
                    rec.lp_omega[int(name[10:])] = value
            else:
                setattr(rec, name, value)
        return rec


_SCALAR_FIELDS = [f.name for f in fields(DiagRecord) if f.name not in ("lp_theta", "lp_omega")]
_HEAD = _SCALAR_FIELDS[:14]
_TAIL = _SCALAR_FIELDS[14:]
CSV_COLUMNS = tuple(
    _HEAD
    + [f"lp_theta_p{p}" for p in DEFAULT_P_GRID]
    + [f"lp_omega_p{p}" for p in DEFAULT_P_GRID]
    + _TAIL
)


def _vorticity_samples(u: VectorField) -> np.ndarray:
    return curl(u).to_physical()


def record(state, params, p_grid=DEFAULT_P_GRID) -> DiagRecord:
    """Norms of a single state; residual fields are left at zero."""
    g = state.grid
    u, theta = state.u, state.theta
    th_phys = theta.to_physical()
    om_phys = _vorticity_samples(u)
    l2_u, h1_u = norm(u, "L2"), norm(u, "H1")
    lp_set = sorted(set(DEFAULT_P_GRID) | set(p_grid))
    lp_omega = {p: _lp(om_phys, p, g.d) for p in lp_set}
    sqrt_l = max(lp_omega[p] / math.sqrt(p - 1.0) for p in p_grid)
    alpha = params.alpha
    integrals = state.integrals
    return DiagRecord(
        t=float(state.t),
        l2_u=l2_u,
        h1_u=h1_u,
        h2_u=norm(u, "H2"),
        l2_theta=norm(theta, "L2"),
        linf_theta_min=float(th_phys.min()),
        linf_theta_max=float(th_phys.max()),
        l2_omega=lp_omega[2],
        sqrtL_omega=sqrt_l,
        voigt_energy=l2_u**2 + alpha**2 * h1_u**2,
        blow_up_indicator=alpha**2 * h1_u**2,
        lp_theta={p: _lp(th_phys, p, g.d) for p in lp_set},
        lp_omega=lp_omega,
        buoyancy_work=float(integrals[0]),
        viscous_dissipation=float(integrals[1]),
        thermal_dissipation=float(integrals[2]),
        d1_omega_integral=float(integrals[3]),
    )


def _vorticity_bound_applies(params) -> bool:
    return params.d == 2 and params.nu[0] > 0 and params.alpha == 0


def _vorticity_residuals(rec: DiagRecord, ref: DiagRecord, nu1: float, p_grid) -> dict:
    """Per-p excess of ||omega(t)||_p^2 over its a priori bound (0 when satisfied)."""
    t = rec.t - ref.t
    out = {}
    for p in p_grid:
        bound = ref.lp_omega[p] ** 2 + (p - 1.0) / (2.0 * nu1) * ref.lp_theta[p] ** 2 * t
        out[p] = max(0.0, rec.lp_omega[p] ** 2 - bound)
    if 2 in out:
        # energy form with the anisotropic dissipation integral
        lhs = rec.l2_omega**2 + nu1 * (rec.d1_omega_integral - ref.d1_omega_integral)
        bound = ref.l2_omega**2 + t / nu1 * ref.l2_theta**2
        out[2] = max(out[2], lhs - bound, 0.0)
    return out


class Monitor:
    """Produces records whose residual fields are measured against a reference state."""

    def __init__(self, params, reference, config: DiagConfig | None = None):
        self.params = params
        self.config = config or DiagConfig()
        self.reference = record(reference, params, self.config.p_grid)

    def record(self, state) -> DiagRecord:
        params, ref = self.params, self.reference
        rec = record(state, params, self.config.p_grid)
        work = rec.buoyancy_work - ref.buoyancy_work
        visc = rec.viscous_dissipation - ref.viscous_dissipation
        rec.energy_budget_residual = abs(rec.voigt_energy - ref.voigt_energy - (work - visc))
        rec.theta_bound_residual = max(0.0, rec.linf_theta - ref.linf_theta)
        if _vorticity_bound_applies(params):
            res = _vorticity_residuals(rec, ref, params.nu[0], self.config.p_grid)
            rec.vort_bound_residual = max(res.values())
        return rec


# --- trajectory checks -------------------------------------------------------


def _records(traj):
    records = getattr(traj, "records", traj)
    if not records:
        raise ConfigurationError("trajectory has no records")
    return records


def theta_max_principle_residual(traj) -> float:
    """``max_t max(0, ||theta(t)||_inf - ||theta_0||_inf)`` on the collocation grid."""
    records = _records(traj)
    top = records[0].linf_theta
    return max(max(0.0, r.linf_theta - top) for r in records)


def vorticity_bound_residual(traj, params, p_grid=(2, 4, 8), per_p=False):
    """Largest violation of the anisotropic L^p vorticity bounds along a run.

    Valid for d = 2, nu_1 > 0, kappa = 0, alpha = 0. With ``per_p`` a dict
    ``{p: residual}`` is returned instead of the maximum.
    """
    if not (params.d == 2 and params.nu[0] > 0 and params.kappa == 0 and params.alpha == 0):
        raise UnsupportedConfigurationError(
            "vorticity bound needs d=2, nu_1>0, kappa=0, alpha=0"
        )
    records = _records(traj)
    ref = records[0]
    worst = {p: 0.0 for p in p_grid}
    for rec in records:
        for p, value in _vorticity_residuals(rec, ref, params.nu[0], p_grid).items():
            worst[p] = max(worst[p], value)
    return worst if per_p else max(worst.values())


def lp_drift(traj, p_grid=DEFAULT_P_GRID) -> dict:
    """Relative drift ``max_t |‖theta(t)‖_p - ‖theta_0‖_p| / ‖theta_0‖_p`` per p."""
    records = _records(traj)
    out = {}
    for p in p_grid:
        base = records[0].lp_theta[p]
        out[p] = max(abs(r.lp_theta[p] - base) for r in records) / base if base else 0.0
    return out


# --- functional inequality verifiers -----------------------------------------


def scalar_corpus(grid: Grid, count=100, seed=0, kmax=None, slope=1.0) -> list[SpectralField]:
    rng = np.random.default_rng(seed)
    return [random_field(grid, rng, kmax=kmax, slope=slope) for _ in range(count)]


def velocity_corpus(grid: Grid, count=100, seed=0, kmax=None, slope=1.0) -> list[VectorField]:
    rng = np.random.default_rng(seed)
    return [random_vector_field(grid, rng, kmax=kmax, slope=slope) for _ in range(count)]


def _brezis_required(w, eps: float) -> float:
    linf = norm(w, "Linf")
    if linf == 0.0:
        return 0.0
    rhs = norm(w, "H1") * eps**-0.25 + norm(w, "H2") * math.exp(-(eps**-0.25))
    return linf / rhs


def brezis_verify(corpus: Iterable, eps_grid=(1e-1, 1e-2, 1e-3)) -> float:
    """Smallest C with ``|w|_inf <= C (||w|| eps^-1/4 + |Aw| exp(-eps^-1/4))`` over the corpus."""
    corpus = list(corpus)
    if not corpus:
        raise ConfigurationError("empty corpus")
    return max(_brezis_required(w, eps) for w in corpus for eps in eps_grid)


def _gradient_samples(u: VectorField) -> np.ndarray:
    g = u.grid
    grads = np.stack([g.deriv[j] * u.coeffs[i] for i in range(g.d) for j in range(g.d)])
    return _to_physical(g, grads)


def cz_sqrtL_verify(corpus: Iterable[VectorField], p_grid=DEFAULT_P_GRID) -> tuple[float, float]:
    """Fit the constants of ``||grad u||_p <= C p ||omega||_p`` and ``||u||_p <= C sqrt(p-1) ||u||_H1``.

    Returns ``(c_cz, c_sqrt)``. The H^1 norm here is the full one,
    ``sqrt(|u|^2 + ||grad u||^2)``.
    """
    c_cz = c_sqrt = 0.0
    for u in corpus:
        g = u.grid
        if g.d != 2:
            raise UnsupportedConfigurationError("corpus must be two-dimensional")
        grad = _gradient_samples(u)
        omega = _vorticity_samples(u)
        u_phys = u.to_physical()
        h1_full = math.hypot(norm(u, "L2"), norm(u, "H1"))
        for p in p_grid:
            om_p = _lp(omega, p, 2)
            if om_p > 0:
                c_cz = max(c_cz, _lp(grad, p, 2) / (p * om_p))
            if h1_full > 0:
                c_sqrt = max(c_sqrt, _lp(u_phys, p, 2) / (math.sqrt(p - 1.0) * h1_full))
    return c_cz, c_sqrt


def agmon_verify(corpus: Iterable) -> float:
    """Smallest C with ``|w|_inf <= C |w|^1/2 |lap w|^1/2`` over the corpus."""
    best = 0.0
    for w in corpus:
        linf = norm(w, "Linf")
        if linf:
            best = max(best, linf / math.sqrt(norm(w, "L2") * norm(w, "H2")))
    return best


def poincare_ratio(f) -> float:
    """``|f| / (||grad f|| / 2 pi)``; at most 1 for mean-zero fields."""
    grad = norm(f, "H1")
    return 0.0 if grad == 0 else norm(f, "L2") * 2.0 * math.pi / grad

