"""Pseudo-spectral solver for the periodic Boussinesq and Boussinesq-Voigt systems.

The discrete system is a Galerkin truncation on the torus [0, 1]^d with 2/3
dealiasing, advanced by an integrating-factor RK4 scheme. Diagnostics turn the
classical a priori estimates (energy laws, maximum principle, vorticity L^p
bounds, Voigt energy identity) into runtime checks.
"""

from .diagnostics import DiagConfig, DiagRecord, Monitor
from .errors import (
    BoussinesqError,
    ConfigurationError,
    InvariantViolationError,
    NumericalFaultError,
    UnsupportedConfigurationError,
    UnsupportedDimensionError,
)
from .experiments import SweepResult, SweepSpec, blow_up_study, ic_catalog, run_sweep
from .models import ModelParams, SimState, rhs, rhs_vorticity, recover_pressure
from .spectral import Grid, SpectralField, VectorField
from .timestepping import StepperConfig, Trajectory, integrate, step

__version__ = "0.1.0"

__all__ = [
    "BoussinesqError",
    "ConfigurationError",
    "DiagConfig",
    "DiagRecord",
    "Grid",
    "InvariantViolationError",
    "ModelParams",
    "Monitor",
    "NumericalFaultError",
    "SimState",
    "SpectralField",
    "StepperConfig",
    "SweepResult",
    "SweepSpec",
    "Trajectory",
    "UnsupportedConfigurationError",
    "UnsupportedDimensionError",
    "VectorField",
    "blow_up_study",
    "ic_catalog",
    "integrate",
    "recover_pressure",
    "rhs",
    "rhs_vorticity",
    "run_sweep",
    "step",
]
