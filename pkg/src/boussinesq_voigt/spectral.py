"""Fourier representation of mean-zero periodic fields on the unit torus.

Coefficients are stored on the full FFT lattice in numpy ordering, normalised
so that ``coeffs = fftn(samples) / n**d``. With this convention the grid
average of ``samples**2`` equals ``sum(abs(coeffs)**2)`` and the mode with
integer wavevector ``k`` has physical wavenumber ``2*pi*k``.

All operations are pure: they never modify their inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft

from .errors import (
    ConfigurationError,
    InvariantViolationError,
    UnsupportedDimensionError,
)

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "DEFAULT_P_GRID",
    "transform_to_physical",
    "transform_to_spectral",
    "dealias",
    "partial_derivative",
    "laplacian",
    "inverse_laplacian",
    "divergence",
    "leray_project",
    "helmholtz_invert",
    "curl2d",
    "curl",
    "biot_savart",
    "advect_velocity",
    "advect_scalar",
    "norm",
    "inner",
    "random_field",
    "random_vector_field",
]

DEFAULT_P_GRID = (2, 4, 8, 16, 32, 64)

# relative threshold for the divergence-free certificate
DIV_FREE_RTOL = 1e-12
MEAN_ZERO_RTOL = 1e-12


def fft_workers() -> int:
    """Thread count for FFTs, from BV_THREADS; forced to 1 by BV_DETERMINISTIC=1."""
    if os.environ.get("BV_DETERMINISTIC", "") == "1":
        return 1
    value = os.environ.get("BV_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform collocation grid with ``n`` points per axis on [0, 1)^d."""

    d: int
    n: int
    dealias_fraction: Fraction = Fraction(2, 3)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigurationError(f"grid dimension must be 2 or 3, got {self.d}")
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ConfigurationError(f"modes per axis must be even and >= 8, got {self.n}")
        try:
            frac = Fraction(self.dealias_fraction).limit_denominator(10**6)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad dealias_fraction {self.dealias_fraction!r}") from exc
        if not 0 < frac <= 1:
            raise ConfigurationError(f"dealias_fraction must lie in (0, 1], got {frac}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dealias_fraction", frac)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    @property
    def cutoff(self) -> int:
        """Largest retained integer wavenumber per axis."""
        return int(self.dealias_fraction * self.n // 2)

    @cached_property
    def k_int(self) -> tuple[np.ndarray, ...]:
        """Integer wavevector components, each broadcastable to ``shape``."""
        k1 = np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(np.int64)
        out = []
        for axis in range(self.d):
            view = [1] * self.d
            view[axis] = self.n
            out.append(k1.reshape(view))
        return tuple(out)

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, ...]:
        """Physical wavenumbers ``2*pi*k_j``."""
        return tuple(2.0 * np.pi * k.astype(float) for k in self.k_int)

    @cached_property
    def deriv(self) -> tuple[np.ndarray, ...]:
        """First-derivative multipliers ``2*pi*i*k_j``; zero on the Nyquist plane."""
        out = []
        for k, kk in zip(self.k_int, self.wavevector):
            m = 1j * kk
            m = np.where(k == -self.n // 2, 0.0, m)
            out.append(m)
        return tuple(out)

    @cached_property
    def ksq(self) -> np.ndarray:
        """``|2*pi*k|**2`` on the full lattice."""
        total = np.zeros(self.shape)
        for kk in self.wavevector:
            total = total + kk**2
        return total

    @cached_property
    def inv_ksq(self) -> np.ndarray:
        out = np.zeros(self.shape)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.ksq[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for k in self.k_int:
            mask = mask & (np.abs(k) <= self.cutoff)
        return mask

    @cached_property
    def points(self) -> tuple[np.ndarray, ...]:
        """Collocation coordinates, indexing='ij'."""
        x = np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))

    def zeros(self) -> "SpectralField":
        return SpectralField(self, np.zeros(self.shape, dtype=complex))

    def zero_vector(self) -> "VectorField":
        return VectorField(self, np.zeros((self.d,) + self.shape, dtype=complex), div_free=True)


# --- raw array kernels -------------------------------------------------------


def _to_physical(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(coeffs, axes=grid.axes, norm="forward", workers=fft_workers()).real


def _to_spectral(grid: Grid, samples: np.ndarray) -> np.ndarray:
    out = scipy.fft.fftn(samples, axes=grid.axes, norm="forward", workers=fft_workers())
    out[(...,) + (0,) * grid.d] = 0.0
    return out


def _zero_mean(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    coeffs[(...,) + (0,) * grid.d] = 0.0
    return coeffs


def _leray(grid: Grid, c: np.ndarray) -> np.ndarray:
    kdotc = sum(kk * c[j] for j, kk in enumerate(grid.wavevector))
    factor = kdotc * grid.inv_ksq
    out = np.stack([c[j] - kk * factor for j, kk in enumerate(grid.wavevector)])
    return _zero_mean(grid, out)


def _div(grid: Grid, c: np.ndarray) -> np.ndarray:
    return sum(grid.deriv[j] * c[j] for j in range(grid.d))


# --- field types -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real periodic scalar field held as Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.shape != self.grid.shape:
            raise ConfigurationError(
                f"coefficient shape {c.shape} does not match grid {self.grid.shape}"
            )
        object.__setattr__(self, "coeffs", c.astype(complex, copy=False))

    @classmethod
    def from_physical(cls, grid: Grid, samples) -> "SpectralField":
        return transform_to_spectral(grid, samples)

    def to_physical(self) -> np.ndarray:
        return transform_to_physical(self)

    @property
    def mean(self) -> complex:
        return self.coeffs[(0,) * self.grid.d]

    def norm(self, kind="L2", **kw) -> float:
        return norm(self, kind, **kw)

    def _check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(d={self.grid.d}, n={self.grid.n})"


@dataclass(frozen=True, eq=False)
class VectorField:
    """``d`` scalar components on a shared grid plus a divergence-free certificate."""

    grid: Grid
    coeffs: np.ndarray
    div_free: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        expected = (self.grid.d,) + self.grid.shape
        if c.shape != expected:
            raise ConfigurationError(f"vector coefficient shape {c.shape}, expected {expected}")
        object.__setattr__(self, "coeffs", c.astype(complex, copy=False))

    @classmethod
    def from_components(cls, components: Sequence[SpectralField], div_free=False) -> "VectorField":
        grids = {c.grid for c in components}
        if len(grids) != 1:
            raise ConfigurationError("components must share one grid")
        grid = grids.pop()
        if len(components) != grid.d:
            raise ConfigurationError(f"need {grid.d} components, got {len(components)}")
        return cls(grid, np.stack([c.coeffs for c in components]), div_free=div_free)

    @classmethod
    def from_physical(cls, grid: Grid, samples, div_free=False) -> "VectorField":
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (grid.d,) + grid.shape:
            raise ConfigurationError(f"physical samples shape {samples.shape} does not match grid")
        return cls(grid, _to_spectral(grid, samples), div_free=div_free)

    @property
    def components(self) -> list[SpectralField]:
        return [SpectralField(self.grid, self.coeffs[j]) for j in range(self.grid.d)]

    def __getitem__(self, j) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[j])

    def to_physical(self) -> np.ndarray:
        return _to_physical(self.grid, self.coeffs)

    def norm(self, kind="L2", **kw) -> float:
        return norm(self, kind, **kw)

    def divergence_residual(self) -> float:
        """``max_k |sum_j 2 pi i k_j c_j(k)|``."""
        return float(np.max(np.abs(_div(self.grid, self.coeffs))))

    def is_divergence_free(self) -> bool:
        scale = norm(self, "H1")
        return self.divergence_residual() <= DIV_FREE_RTOL * scale

    def _check(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return VectorField(self.grid, self.coeffs + other.coeffs, self.div_free and other.div_free)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return VectorField(self.grid, self.coeffs - other.coeffs, self.div_free and other.div_free)

    def __neg__(self):
        return VectorField(self.grid, -self.coeffs, self.div_free)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return VectorField(self.grid, self.coeffs * scalar, self.div_free)

    __rmul__ = __mul__

    def __repr__(self):
        return f"VectorField(d={self.grid.d}, n={self.grid.n}, div_free={self.div_free})"


# --- transforms --------------------------------------------------------------


def transform_to_physical(f: SpectralField) -> np.ndarray:
    return _to_physical(f.grid, f.coeffs)


def transform_to_spectral(grid: Grid, samples) -> SpectralField:
    """Real samples to coefficients. Any spatial mean is projected out."""
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise ConfigurationError(f"samples shape {samples.shape} does not match grid {grid.shape}")
    if np.iscomplexobj(samples):
        if np.any(samples.imag):
            raise ConfigurationError("physical samples must be real")
        samples = samples.real
    return SpectralField(grid, _to_spectral(grid, samples.astype(float)))


# --- linear operators --------------------------------------------------------


def dealias(f):
    """Zero every mode with some ``|k_i|`` above the cutoff."""
    mask = f.grid.dealias_mask
    if isinstance(f, VectorField):
        return VectorField(f.grid, f.coeffs * mask, f.div_free)
    return SpectralField(f.grid, f.coeffs * mask)


def partial_derivative(f: SpectralField, axis: int) -> SpectralField:
    """Derivative along ``axis`` (1-based, as in x_1 .. x_d)."""
    if not isinstance(axis, (int, np.integer)) or not 1 <= axis <= f.grid.d:
        raise ConfigurationError(f"axis must be in 1..{f.grid.d}, got {axis!r}")
    return SpectralField(f.grid, _zero_mean(f.grid, f.coeffs * f.grid.deriv[axis - 1]))


def laplacian(f):
    if isinstance(f, VectorField):
        return VectorField(f.grid, -f.grid.ksq * f.coeffs, f.div_free)
    return SpectralField(f.grid, _zero_mean(f.grid, -f.grid.ksq * f.coeffs))


def _check_mean_zero(f: SpectralField, what="input"):
    scale = np.sqrt(np.sum(np.abs(f.coeffs) ** 2))
    if abs(f.mean) > MEAN_ZERO_RTOL * scale + 1e-300:
        raise InvariantViolationError(f"{what} must have zero mean, got mean {f.mean:.3e}")


def inverse_laplacian(theta: SpectralField) -> SpectralField:
    """Mean-zero ``xi`` with ``laplacian(xi) == theta``."""
    _check_mean_zero(theta)
    return SpectralField(theta.grid, -theta.coeffs * theta.grid.inv_ksq)


def divergence(v: VectorField) -> SpectralField:
    return SpectralField(v.grid, _zero_mean(v.grid, _div(v.grid, v.coeffs)))


def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto mean-zero divergence-free fields."""
    return VectorField(v.grid, _leray(v.grid, v.coeffs), div_free=True)


def helmholtz_invert(v, alpha: float):
    """Apply ``(I + alpha^2 A)^{-1}`` mode by mode."""
    if alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return v
    factor = 1.0 / (1.0 + alpha**2 * v.grid.ksq)
    if isinstance(v, VectorField):
        return VectorField(v.grid, v.coeffs * factor, v.div_free)
    return SpectralField(v.grid, v.coeffs * factor)


def curl2d(u: VectorField) -> SpectralField:
    """Scalar vorticity ``d1 u2 - d2 u1``."""
    g = u.grid
    if g.d != 2:
        raise UnsupportedDimensionError("curl2d needs d = 2")
    return SpectralField(g, _zero_mean(g, g.deriv[0] * u.coeffs[1] - g.deriv[1] * u.coeffs[0]))


def curl(u: VectorField):
    """Scalar vorticity in 2D, vector vorticity in 3D."""
    g = u.grid
    if g.d == 2:
        return curl2d(u)
    D, c = g.deriv, u.coeffs
    w = np.stack([D[1] * c[2] - D[2] * c[1], D[2] * c[0] - D[0] * c[2], D[0] * c[1] - D[1] * c[0]])
    return VectorField(g, _zero_mean(g, w), div_free=True)


def biot_savart(omega: SpectralField) -> VectorField:
    """Mean-zero divergence-free velocity whose curl is ``omega``."""
    g = omega.grid
    if g.d != 2:
        raise UnsupportedDimensionError("biot_savart needs d = 2")
    _check_mean_zero(omega, "vorticity")
    psi = -omega.coeffs * g.inv_ksq  # laplacian(psi) = omega
    u = np.stack([-g.deriv[1] * psi, g.deriv[0] * psi])
    return VectorField(g, u, div_free=True)


# --- bilinear terms ----------------------------------------------------------


def _require_div_free(u: VectorField):
    if not u.div_free and not u.is_divergence_free():
        raise InvariantViolationError(
            f"advecting velocity is not divergence-free (residual {u.divergence_residual():.3e})"
        )


def _physical_dealiased(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return _to_physical(grid, coeffs * grid.dealias_mask)


def _flux_divergence(grid: Grid, u_phys: np.ndarray, w_phys: np.ndarray) -> np.ndarray:
    """Dealiased coefficients of ``sum_j d_j(u^j w)`` for scalar or vector ``w``."""
    mask = grid.dealias_mask
    if w_phys.ndim == grid.d:
        flux = _to_spectral(grid, u_phys * w_phys[None])
        return mask * sum(grid.deriv[j] * flux[j] for j in range(grid.d))
    d = grid.d
    out = np.zeros((d,) + grid.shape, dtype=complex)
    for i in range(d):
        flux = _to_spectral(grid, u_phys * w_phys[i][None])
        out[i] = mask * sum(grid.deriv[j] * flux[j] for j in range(d))
    return out


def advect_velocity(u: VectorField, w: VectorField) -> VectorField:
    """``B(u, w) = P_sigma sum_j d_j(u^j w)`` evaluated pseudo-spectrally."""
    if u.grid != w.grid:
        raise ConfigurationError("fields live on different grids")
    _require_div_free(u)
    g = u.grid
    u_phys = _physical_dealiased(g, u.coeffs)
    w_phys = u_phys if w is u else _physical_dealiased(g, w.coeffs)
    return VectorField(g, _leray(g, _flux_divergence(g, u_phys, w_phys)), div_free=True)


def advect_scalar(u: VectorField, theta: SpectralField) -> SpectralField:
    """Conservative transport term ``sum_j d_j(u^j theta)``."""
    if u.grid != theta.grid:
        raise ConfigurationError("fields live on different grids")
    _require_div_free(u)
    _check_mean_zero(theta, "transported scalar")
    g = u.grid
    out = _flux_divergence(g, _physical_dealiased(g, u.coeffs), _physical_dealiased(g, theta.coeffs))
    return SpectralField(g, _zero_mean(g, out))


# --- norms and pairings ------------------------------------------------------


def inner(a, b) -> float:
    """L^2(T^d) inner product of two scalar or two vector fields."""
    if a.grid != b.grid:
        raise ConfigurationError("fields live on different grids")
    return float(np.sum((a.coeffs * np.conj(b.coeffs)).real))


def _lp(samples: np.ndarray, p: float, d: int) -> float:
    mag = np.abs(samples) if samples.ndim == d else np.sqrt(np.sum(samples**2, axis=0))
    top = float(np.max(mag)) if mag.size else 0.0
    if p == np.inf or top == 0.0:
        return top
    return top * float(np.mean((mag / top) ** p)) ** (1.0 / p)


_SOBOLEV_ORDERS = (-2, -1, 0, 1, 2, 3)


def norm(f, kind="L2", p_grid=DEFAULT_P_GRID) -> float:
    """Norm of a scalar or vector field.

    ``kind`` is one of ``"L<p>"`` (``p`` a number >= 2 or ``inf``), ``"H<s>"``
    with ``s`` in -2..3 (homogeneous: ``sum (2 pi |k|)^(2s) |c_k|^2``, so ``H1``
    is the gradient norm), or ``"sqrtL"``. Vector fields use the pointwise
    Euclidean magnitude for Lebesgue norms.
    """
    kind = str(kind).strip()
    g = f.grid
    if kind == "sqrtL":
        samples = f.to_physical()
        return max(_lp(samples, float(p), g.d) / np.sqrt(float(p) - 1.0) for p in p_grid)
    if kind.startswith("H"):
        try:
            s = int(kind[1:])
        except ValueError:
            s = None
        if s not in _SOBOLEV_ORDERS:
            raise ConfigurationError(f"unsupported Sobolev order in {kind!r}")
        weight = np.zeros(g.shape)
        nz = g.ksq > 0
        weight[nz] = g.ksq[nz] ** s
        power = np.abs(f.coeffs) ** 2
        if power.ndim > g.d:
            power = power.sum(axis=0)
        return float(np.sqrt(np.sum(weight * power)))
    if kind.startswith("L"):
        token = kind[1:].lower()
        try:
            p = np.inf if token in ("inf", "infty", "oo") else float(token)
        except ValueError:
            raise ConfigurationError(f"unknown norm kind {kind!r}") from None
        if not p >= 2:
            raise ConfigurationError(f"Lebesgue exponent must be >= 2, got {kind!r}")
        return _lp(f.to_physical(), p, g.d)
    raise ConfigurationError(f"unknown norm kind {kind!r}")


# --- random band-limited fields ---------------------------------------------


def _random_coeffs(grid: Grid, rng: np.random.Generator, count: int, kmax, slope) -> np.ndarray:
    kmax = grid.cutoff if kmax is None else min(int(kmax), grid.cutoff)
    shape = (count,) + grid.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kmag = np.sqrt(sum(k.astype(float) ** 2 for k in grid.k_int))
    band = grid.dealias_mask & (kmag <= kmax) & (kmag > 0)
    amp = np.where(band, np.maximum(kmag, 1.0) ** (-float(slope)), 0.0)
    c = c * amp
    # symmetrise so the field is real
    c = _to_spectral(grid, _to_physical(grid, c))
    return c * band


def random_field(grid: Grid, rng=None, kmax=None, slope=1.0) -> SpectralField:
    """Random real mean-zero field supported on ``0 < |k| <= kmax`` (within the cutoff)."""
    rng = np.random.default_rng(rng)
    return SpectralField(grid, _random_coeffs(grid, rng, 1, kmax, slope)[0])


def random_vector_field(grid: Grid, rng=None, kmax=None, slope=1.0, project=True) -> VectorField:
    rng = np.random.default_rng(rng)
    v = VectorField(grid, _random_coeffs(grid, rng, grid.d, kmax, slope))
    return leray_project(v) if project else v
