"""Self-checks: operator oracles, discrete identities, a priori bounds, restart.

Each check returns one or more ``CheckResult`` rows. ``run_all`` executes the
whole suite (about half a minute on one core) and is what ``bv verify``
prints.
"""

from __future__ import annotations

import math
import os
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral as sp
from .config import ICConfig, OutputConfig, RunConfig
from .diagnostics import (
    agmon_verify,
    brezis_verify,
    cz_sqrtL_verify,
    scalar_corpus,
    velocity_corpus,
    vorticity_bound_residual,
)
from .experiments import SweepSpec, blow_up_study, ic_catalog, run_sweep
from .models import ModelParams, SimState
from .runner import resume, run
from .storage import read_diagnostics, read_snapshot
from .timestepping import StepperConfig, integrate

__all__ = ["CheckResult", "run_all", "format_table", "CHECKS"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""
    seconds: float = 0.0
    constants: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.value:.3e} (limit {self.limit:.3e}) {self.detail}".rstrip()


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        results = fn(*args, **kwargs)
        elapsed = time.perf_counter() - start
        for r in results:
            r.seconds = elapsed / len(results)
        return results

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# --- dense real-space oracles ------------------------------------------------


def _diff_matrix(n: int) -> np.ndarray:
    """Periodic spectral differentiation on n equispaced points of [0, 1) (Nyquist dropped)."""
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        out = np.pi * (-1.0) ** diff / np.tan(np.pi * diff / n)
    out[diff == 0] = 0.0
    return out


def _dft_matrix(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) / n


class _DenseOracle:
    """Operators of a 2D grid assembled as explicit matrices acting on flattened samples."""

    def __init__(self, grid: sp.Grid):
        n = grid.n
        eye = np.eye(n)
        d1 = _diff_matrix(n)
        self.grid = grid
        self.D = [np.kron(d1, eye), np.kron(eye, d1)]
        self.L = self.D[0] @ self.D[0] + self.D[1] @ self.D[1]
        f1 = _dft_matrix(n)
        self.F = np.kron(f1, f1)
        k = np.rint(np.fft.fftfreq(n, 1.0 / n)).astype(int)
        keep = (np.abs(k) <= grid.cutoff).astype(float)
        mask = np.kron(keep, keep)
        self.T = (np.linalg.inv(self.F) @ (mask[:, None] * self.F)).real
        G = np.hstack(self.D)
        self.P = np.eye(2 * n * n) - np.linalg.pinv(G) @ G
        self.Linv = np.linalg.pinv(self.L)

    def leray(self, v):
        return self.P @ np.concatenate(v)


def _flat(samples):
    return np.asarray(samples).reshape(samples.shape[0], -1) if samples.ndim == 3 else samples.ravel()


def _rel(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    scale = np.max(np.abs(b))
    return float(np.max(np.abs(a - b)) / (scale if scale else 1.0))


@_timed
def check_operator_oracles(n=8, seed=0, tol=1e-10):
    """Every spectral operator against dense matrices built in real space."""
    grid = sp.Grid(2, n)
    oracle = _DenseOracle(grid)
    rng = np.random.default_rng(seed)
    f = sp.random_field(grid, rng)
    g = sp.random_field(grid, rng)
    u = sp.random_vector_field(grid, rng)
    w = sp.random_vector_field(grid, rng)
    v = sp.random_vector_field(grid, rng, project=False)
    fs, gs = _flat(f.to_physical()), _flat(g.to_physical())
    us, ws, vs = _flat(u.to_physical()), _flat(w.to_physical()), _flat(v.to_physical())
    errs = {}
    errs["transform"] = _rel(f.coeffs.ravel(), oracle.F @ fs)
    for axis in (1, 2):
        errs[f"d{axis}"] = _rel(sp.partial_derivative(f, axis).to_physical(), oracle.D[axis - 1] @ fs)
    errs["laplacian"] = _rel(sp.laplacian(f).to_physical(), oracle.L @ fs)
    errs["leray"] = _rel(sp.leray_project(v).to_physical(), oracle.leray(vs))
    alpha = 0.3
    helm = np.eye(n * n) - alpha**2 * oracle.L
    errs["helmholtz"] = _rel(
        sp.helmholtz_invert(v, alpha).to_physical(), np.concatenate([np.linalg.solve(helm, c) for c in vs])
    )
    # B(u, w) = P T sum_j D_j (u^j w)
    conv = [oracle.T @ sum(oracle.D[j] @ (us[j] * ws[i]) for j in range(2)) for i in range(2)]
    errs["B"] = _rel(sp.advect_velocity(u, w).to_physical(), oracle.leray(conv))
    scal = oracle.T @ sum(oracle.D[j] @ (us[j] * gs) for j in range(2))
    errs["B_scalar"] = _rel(sp.advect_scalar(u, g).to_physical(), scal)
    psi = oracle.Linv @ fs
    errs["biot_savart"] = _rel(
        sp.biot_savart(f).to_physical(), np.concatenate([-oracle.D[1] @ psi, oracle.D[0] @ psi])
    )
    errs["inverse_laplacian"] = _rel(sp.inverse_laplacian(f).to_physical(), psi)
    worst = max(errs, key=errs.get)
    return [
        CheckResult(
            "operator oracles (n=8)",
            errs[worst] <= tol,
            errs[worst],
            tol,
            f"worst={worst}",
            constants={f"oracle_err_{k}": v for k, v in errs.items()},
        )
    ]


@_timed
def check_skew_symmetry(n=32, count=100, seed=1, tol=1e-10):
    """(B(u,w),w) and (B(u,theta),theta) vanish for random dealiased inputs."""
    grid = sp.Grid(2, n)
    rng = np.random.default_rng(seed)
    worst_v = worst_s = 0.0
    for _ in range(count):
        u = sp.random_vector_field(grid, rng)
        w = sp.random_vector_field(grid, rng)
        th = sp.random_field(grid, rng)
        nu_ = sp.norm(u, "H1")
        worst_v = max(worst_v, abs(sp.inner(sp.advect_velocity(u, w), w)) / (nu_ * sp.norm(w, "H1") ** 2))
        worst_s = max(worst_s, abs(sp.inner(sp.advect_scalar(u, th), th)) / (nu_ * sp.norm(th, "H1") ** 2))
    return [
        CheckResult("skew symmetry (B(u,w),w)", worst_v <= tol, worst_v, tol, f"{count} samples, n={n}"),
        CheckResult("skew symmetry (B(u,theta),theta)", worst_s <= tol, worst_s, tol, f"{count} samples, n={n}"),
    ]


@_timed
def check_voigt_inviscid(n=64, t_end=1.0, cfl=0.25):
    """kappa = nu = 0, alpha = 0.1: theta L^2 conservation and the Voigt energy law/bound."""
    grid = sp.Grid(2, n)
    u0, th0 = ic_catalog("taylor_green", grid)
    params = ModelParams(d=2, nu=0.0, kappa=0.0, alpha=0.1)
    traj = integrate(SimState(u0, th0), params, StepperConfig(t_end=t_end, cfl_target=cfl))
    recs = traj.records
    l0 = recs[0].l2_theta
    drift = max(abs(r.l2_theta - l0) for r in recs) / l0
    e0 = recs[0].voigt_energy
    budget = max(r.energy_budget_residual for r in recs)
    budget_tol = 1e-6 * (e0 + 1.0)
    excess = max(r.voigt_energy - (e0 + r.t**2 * l0**2) for r in recs[1:])
    return [
        CheckResult("theta L2 conservation (kappa=0, alpha=0.1)", drift <= 1e-8, drift, 1e-8, f"{traj.steps} steps"),
        CheckResult("Voigt energy budget residual", budget <= budget_tol, budget, budget_tol),
        CheckResult(
            "Voigt energy bound E(t) <= E(0) + t^2|theta0|^2",
            excess <= 1e-6,
            excess,
            1e-6,
            "(value: largest E(t) - bound)",
        ),
    ]


@_timed
def check_anisotropic(n=128, t_end=1.0, cfl=0.5):
    """nu = (1e-2, 0), kappa = alpha = 0: maximum principle and vorticity L^p bounds."""
    grid = sp.Grid(2, n)
    u0, th0 = ic_catalog("thermal_bubble_pair", grid)
    params = ModelParams(d=2, nu=(1e-2, 0.0))
    traj = integrate(SimState(u0, th0), params, StepperConfig(t_end=t_end, cfl_target=cfl, output_every=2))
    recs = traj.records
    top = recs[0].linf_theta
    overshoot = max(r.linf_theta for r in recs) - top
    rel = max(overshoot, 0.0) / top
    per_p = vorticity_bound_residual(traj, params, p_grid=(2, 4, 8), per_p=True)
    scaled = {p: per_p[p] / recs[0].lp_omega[p] ** 2 if recs[0].lp_omega[p] else per_p[p] for p in per_p}
    worst = max(scaled.values())
    return [
        CheckResult("maximum principle overshoot / |theta0|_inf", rel <= 5e-3, rel, 5e-3, f"{traj.steps} steps"),
        CheckResult(
            "anisotropic vorticity L^p bounds (p=2,4,8)",
            worst <= 1e-6,
            worst,
            1e-6,
            "(relative excess over bound)",
            constants={f"vort_excess_p{p}": v for p, v in scaled.items()},
        ),
    ]


@_timed
def check_time_order(n=32, t_end=0.1, steps=(10, 20, 40)):
    """Richardson self-convergence of the integrating-factor RK4 scheme."""
    grid = sp.Grid(2, n)
    u0, th0 = ic_catalog("taylor_green", grid)
    params = ModelParams(d=2, nu=1e-2, kappa=1e-2, alpha=0.1)
    finals = []
    for m in steps:
        cfg = StepperConfig(t_end=t_end, dt=t_end / m, output_every=10**6)
        finals.append(integrate(SimState(u0, th0), params, cfg).final_state)

    def gap(a, b):
        return sp.norm(a.u - b.u, "L2") + sp.norm(a.theta - b.theta, "L2")

    order = math.log2(gap(finals[0], finals[1]) / gap(finals[1], finals[2]))
    ok = 3.7 <= order <= 4.3
    return [CheckResult("time-integrator order", ok, order, 4.0, "(accepted range [3.7, 4.3])")]


ALPHA_VALUES = (0.2, 0.1, 0.05, 0.025, 0.0125)
BLOW_UP_ALPHAS = tuple(0.2 / 2**k for k in range(8))


@_timed
def check_alpha_continuation(n=128, t_end=0.5):
    """alpha -> 0 against the nu = 1e-3 limit system; monotone errors and order >= 1."""
    spec = SweepSpec(
        "alpha",
        ALPHA_VALUES,
        ModelParams(d=2, nu=1e-3),
        n=n,
        T=t_end,
        amplitude=0.2,
        theta_amplitude=0.2,
        width=0.2,
        stepper=StepperConfig(output_every=4),
    )
    res = run_sweep(spec)
    out = []
    for key, label in (("L2", "L2"), ("H1", "V")):
        order = res.orders[key]
        mono = not res.monotonic_violations[key]
        ok = mono and order is not None and order >= 1.0
        out.append(
            CheckResult(
                f"alpha continuation order ({label} norm)",
                ok,
                math.nan if order is None else order,
                1.0,
                f"monotone={mono}, errors={np.array2string(res.errors[key], precision=3)}",
                constants={f"alpha_order_{key}": order},
            )
        )
    return out


@_timed
def check_blow_up_indicator(n=64, t_end=0.5):
    """Low-amplitude regular data: alpha^2 ||u^alpha(T)||^2 -> 0, energy identity per run."""
    spec = SweepSpec(
        "alpha",
        BLOW_UP_ALPHAS,
        ModelParams(d=2, nu=0.0),
        n=n,
        T=t_end,
        amplitude=0.1,
        theta_amplitude=1e-3,
        stepper=StepperConfig(output_every=10),
    )
    res, report = blow_up_study(spec)
    last = report.table[-1]
    ratio = last[-1] / last[0]
    budget = max(
        res.max_budget_residual(a) / (res.records[a][0].voigt_energy + 1.0) for a in res.values
    )
    return [
        CheckResult(
            "blow-up indicator vanishes (last/first alpha)",
            ratio <= 1e-4 and not report.suspected,
            ratio,
            1e-4,
            f"extrapolated limit {report.limits[-1]:.2e}",
            constants={"indicator_limit": float(report.limits[-1])},
        ),
        CheckResult("blow-up energy identity per run", budget <= 1e-6, budget, 1e-6, "(relative to E(0)+1)"),
    ]


@_timed
def check_inequalities(n=64, seeds=(0, 1, 2)):
    """Fitted Brezis-Gallouet and Calderon-Zygmund constants, finite and reseed-stable."""
    grid = sp.Grid(2, n)
    brezis = [brezis_verify(scalar_corpus(grid, seed=s)) for s in seeds]
    cz = [cz_sqrtL_verify(velocity_corpus(grid, seed=s)) for s in seeds]
    c_cz = [c[0] for c in cz]
    c_sqrt = [c[1] for c in cz]
    agmon = agmon_verify(scalar_corpus(grid, seed=seeds[0]))

    def stable(vals):
        return all(abs(v - vals[0]) <= 0.2 * vals[0] for v in vals)

    ok_b = all(map(math.isfinite, brezis)) and max(brezis) <= 10 and stable(brezis)
    ok_c = all(map(math.isfinite, c_cz)) and max(c_cz) <= 5 and stable(c_cz)
    return [
        CheckResult(
            "Brezis-Gallouet constant",
            ok_b,
            max(brezis),
            10.0,
            f"seeds {list(seeds)}",
            constants={"C_brezis": max(brezis), "C_agmon": agmon},
        ),
        CheckResult(
            "Calderon-Zygmund constant",
            ok_c,
            max(c_cz),
            5.0,
            f"seeds {list(seeds)}",
            constants={"C_cz": max(c_cz), "C_sqrtL": max(c_sqrt)},
        ),
    ]


@_timed
def check_3d_smoke(n=16, t_end=0.2):
    """3D Voigt with thermal diffusion: theta L^2 nonincreasing, budget closes, no NaN."""
    grid = sp.Grid(3, n)
    u0, th0 = ic_catalog("taylor_green", grid)
    params = ModelParams(d=3, nu=0.0, kappa=1e-2, alpha=0.2)
    traj = integrate(SimState(u0, th0), params, StepperConfig(t_end=t_end))
    recs = traj.records
    l2 = np.array([r.l2_theta for r in recs])
    rise = float(np.max(np.diff(l2))) if len(l2) > 1 else 0.0
    budget = max(r.energy_budget_residual for r in recs)
    finite = all(np.isfinite(r.as_row()[:14]).all() for r in recs)
    return [
        CheckResult("3D theta L2 nonincreasing", rise <= 0.0 and finite, rise, 0.0, "(largest increase)"),
        CheckResult("3D Voigt energy budget residual", budget <= 1e-5 and finite, budget, 1e-5),
    ]


@contextmanager
def _deterministic():
    old = os.environ.get("BV_DETERMINISTIC")
    os.environ["BV_DETERMINISTIC"] = "1"
    try:
        yield
    finally:
        if old is None:
            del os.environ["BV_DETERMINISTIC"]
        else:
            os.environ["BV_DETERMINISTIC"] = old


@_timed
def check_restart(n=32, t_end=0.3, snapshot_every=8):
    """Resume from a mid-run snapshot and compare with the uninterrupted run bit for bit."""
    with _deterministic(), tempfile.TemporaryDirectory() as tmp:
        cfg = RunConfig(
            grid=sp.Grid(2, n),
            model=ModelParams(d=2, nu=(1e-3, 0.0), alpha=0.05),
            stepper=StepperConfig(t_end=t_end, output_every=5),
            ic=ICConfig("random_band", seed=3),
            output=OutputConfig(str(Path(tmp) / "full"), snapshot_every=snapshot_every),
        )
        full = run(cfg)
        snaps = sorted((full.directory / "snapshots").glob("*.bvsn"))
        if not snaps:
            return [CheckResult("restart equivalence", False, math.nan, 0.0, "no snapshot written")]
        mid = snaps[(len(snaps) - 1) // 2]
        resumed = resume(mid, t_end, directory=Path(tmp) / "resumed")
        t_mid = read_snapshot(mid).state.t
        a = [r.as_row() for r in read_diagnostics(full.diagnostics) if r.t > t_mid]
        b = [r.as_row() for r in read_diagnostics(resumed.diagnostics) if r.t > t_mid]
        same_rows = len(a) == len(b) and all(
            np.array_equal(np.array(x), np.array(y), equal_nan=True) for x, y in zip(a, b)
        )
        fa, fb = read_snapshot(full.final_snapshot).state, read_snapshot(resumed.final_snapshot).state
        same_state = (
            np.array_equal(fa.u.coeffs, fb.u.coeffs)
            and np.array_equal(fa.theta.coeffs, fb.theta.coeffs)
            and fa.t == fb.t
            and np.array_equal(fa.integrals, fb.integrals)
        )
        ok = same_rows and same_state and len(a) > 0
        mismatch = 0.0 if ok else 1.0
        return [
            CheckResult(
                "restart equivalence (bit-exact)",
                ok,
                mismatch,
                0.0,
                f"{len(a)} rows after t={t_mid:.4g} compared",
            )
        ]


CHECKS = (
    check_operator_oracles,
    check_skew_symmetry,
    check_voigt_inviscid,
    check_anisotropic,
    check_time_order,
    check_alpha_continuation,
    check_blow_up_indicator,
    check_inequalities,
    check_3d_smoke,
    check_restart,
)


def run_all(checks=CHECKS, progress=None) -> list[CheckResult]:
    results = []
    for check in checks:
        for r in check():
            results.append(r)
            if progress:
                progress(r)
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  {'value':>10}  {'limit':>10}  seconds"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name:<{width}}  {status:<6}  {r.value:>10.3e}  {r.limit:>10.3e}  {r.seconds:7.1f}")
    constants = {k: v for r in results for k, v in r.constants.items()}
    if constants:
        lines.append("")
        lines.append("fitted constants:")
        for key, value in constants.items():
            shown = "undefined" if value is None else f"{value:.4g}"
            lines.append(f"  {key} = {shown}")
    return "\n".join(lines)
