"""Run configuration: a small ``key = value`` format with ``[section]`` headers.

Example::

    [grid]
    d = 2
    n = 64

    [model]
    nu = 0.01, 0       # one value per axis, or a single value for all axes
    kappa = 0
    alpha = 0.1

    [stepper]
    t_end = 1.0
    cfl = 0.5          # or: dt = 1e-3

Sections and keys (defaults in brackets):

``[grid]``     d [2], n [64], dealias_fraction [2/3]
``[model]``    nu [0], kappa [0], alpha [0], buoyancy_axis [d]
``[stepper]``  scheme [IFRK4], dt [adaptive], cfl [0.5], dt_max [0.01], t_end [1],
               output_every [1], guard [1e6], adapt_every [10]
``[ic]``       name [taylor_green], amplitude [1], theta_amplitude [1], seed [0], width [0.1]
``[diag]``     p_grid [2, 4, 8, 16, 32, 64], max_principle_rtol [5e-3], lp_drift_rtol [1e-3]
``[output]``   directory [output], snapshot_every [0]

Initial conditions (``[ic] name``), with A = amplitude and B = theta_amplitude:

* ``taylor_green``: u = A(-sin 2pi x1 cos 2pi x2, cos 2pi x1 sin 2pi x2); theta = B g(x - 1/2)
* ``shear_layer``: u1 = A(tanh((x2-1/4)/0.05) - tanh((x2-3/4)/0.05) - 1), u2 = 0.05 A sin 2pi x1; theta = B g(x - 1/2)
* ``thermal_bubble_pair``: u = 0; theta = B(g(x - c_low) - g(x - c_high)), bubbles at x_d = 0.3 and 0.7
* ``random_band``: seeded random fields on |k| <= 4 with |u| = A and |theta| = B

where g(y) = prod_j exp((cos 2pi y_j - 1)/(2pi width)^2) is a periodic Gaussian
of standard deviation ``width``. Every field is then mean-zero, dealiased and
(for u) Leray-projected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .diagnostics import DiagConfig
from .errors import ConfigurationError
from .experiments import IC_NAMES
from .models import ModelParams
from .spectral import DEFAULT_P_GRID, Grid
from .timestepping import SCHEMES, StepperConfig

__all__ = ["RunConfig", "ICConfig", "OutputConfig", "ConfigErrors", "parse_config", "serialize_config", "load_config"]


class ConfigErrors(ConfigurationError):
    """All problems found in one configuration text; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


@dataclass(frozen=True)
class ICConfig:
    name: str = "taylor_green"
    amplitude: float = 1.0
    theta_amplitude: float = 1.0
    seed: int = 0
    width: float = 0.1


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    snapshot_every: int = 0


@dataclass(frozen=True)
class RunConfig:
    grid: Grid = field(default_factory=lambda: Grid(2, 64))
    model: ModelParams = field(default_factory=ModelParams)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    ic: ICConfig = field(default_factory=ICConfig)
    diag: DiagConfig = field(default_factory=DiagConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def stepper_config(self) -> StepperConfig:
        return self.stepper.replace(snapshot_every=self.output.snapshot_every)


# value parsers --------------------------------------------------------------


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _int(text: str) -> int:
    return int(text)


def _float_list(text: str) -> tuple:
    return tuple(_float(part) for part in text.split(",") if part.strip())


def _fraction(text: str) -> Fraction:
    return Fraction(text.strip())


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else _float(text)


def _str(text: str) -> str:
    return text.strip()


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _positive(v):
    return None if v > 0 else "must be > 0"


def _at_least(lo):
    return lambda v: None if v >= lo else f"must be >= {lo}"


def _nonneg_list(vs):
    return None if all(v >= 0 for v in vs) else "entries must be >= 0"


def _choice(options):
    return lambda v: None if v in options else f"must be one of {', '.join(map(str, options))}"


def _opt_positive(v):
    return None if v is None or v > 0 else "must be > 0"


def _p_list(vs):
    return None if vs and all(p >= 2 for p in vs) else "entries must be >= 2"


def _fraction_range(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


def _cfl_range(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


Spec = tuple[Callable[[str], object], Callable | None]

SCHEMA: dict[str, dict[str, Spec]] = {
    "grid": {
        "d": (_int, _choice((2, 3))),
        "n": (_int, lambda v: None if v >= 8 and v % 2 == 0 else "must be even and >= 8"),
        "dealias_fraction": (_fraction, _fraction_range),
    },
    "model": {
        "nu": (_float_list, _nonneg_list),
        "kappa": (_float, _nonneg),
        "alpha": (_float, _nonneg),
        "buoyancy_axis": (_int, None),
    },
    "stepper": {
        "scheme": (_str, _choice(SCHEMES)),
        "dt": (_optional_float, _opt_positive),
        "cfl": (_float, _cfl_range),
        "dt_max": (_float, _positive),
        "t_end": (_float, _nonneg),
        "output_every": (_int, _at_least(1)),
        "guard": (_float, _positive),
        "adapt_every": (_int, _at_least(1)),
    },
    "ic": {
        "name": (_str, _choice(IC_NAMES)),
        "amplitude": (_float, None),
        "theta_amplitude": (_float, None),
        "seed": (_int, _nonneg),
        "width": (_float, _positive),
    },
    "diag": {
        "p_grid": (_float_list, _p_list),
        "max_principle_rtol": (_float, _nonneg),
        "lp_drift_rtol": (_float, _nonneg),
    },
    "output": {
        "directory": (_str, lambda v: None if v else "must not be empty"),
        "snapshot_every": (_int, _nonneg),
    },
}

_TYPE_NAMES = {
    _int: "an integer",
    _float: "a number",
    _float_list: "a comma-separated list of numbers",
    _fraction: "a fraction such as 2/3",
    _optional_float: "a number or 'auto'",
    _str: "a string",
}


def _lex(text: str):
    """Yield ``(line_number, section, key, raw_value)``; syntax errors are collected."""
    entries, errors = [], []
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                errors.append((number, f"malformed section header {raw.strip()!r}"))
                continue
            section = line[1:-1].strip()
            if section not in SCHEMA:
                errors.append((number, f"unknown section [{section}]"))
            continue
        if "=" not in line:
            errors.append((number, f"expected 'key = value', got {raw.strip()!r}"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            errors.append((number, f"key {key!r} appears before any [section]"))
            continue
        entries.append((number, section, key, value))
    return entries, errors


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ``ConfigErrors`` listing every problem with its line."""
    entries, errors = _lex(text)
    values: dict[str, dict[str, object]] = {name: {} for name in SCHEMA}
    where: dict[tuple[str, str], int] = {}
    for number, section, key, raw in entries:
        if section not in SCHEMA:
            continue
        if key not in SCHEMA[section]:
            errors.append((number, f"unknown key {key!r} in [{section}]"))
            continue
        if (section, key) in where:
            errors.append((number, f"duplicate key {section}.{key} (first set on line {where[section, key]})"))
            continue
        where[section, key] = number
        convert, check = SCHEMA[section][key]
        try:
            value = convert(raw)
        except (ValueError, ZeroDivisionError):
            errors.append((number, f"{section}.{key}: expected {_TYPE_NAMES[convert]}, got {raw!r}"))
            continue
        problem = check(value) if check else None
        if problem:
            errors.append((number, f"{section}.{key} {problem}, got {raw}"))
            continue
        values[section][key] = value

    def build(section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ConfigurationError as exc:
            lines = [where[section, k] for k in kwargs if (section, k) in where]
            errors.append((min(lines) if lines else 0, f"[{section}] {exc}"))
            return None

    g = values["grid"]
    d = g.get("d", 2)
    grid = build("grid", Grid, d=d, n=g.get("n", 64), dealias_fraction=g.get("dealias_fraction", Fraction(2, 3)))

    m = values["model"]
    nu = m.get("nu", (0.0,))
    if len(nu) == 1:
        nu = nu * d
    model = build(
        "model",
        ModelParams,
        d=d,
        nu=nu,
        kappa=m.get("kappa", 0.0),
        alpha=m.get("alpha", 0.0),
        buoyancy_axis=m.get("buoyancy_axis", d),
    )

    s = values["stepper"]
    stepper = build(
        "stepper",
        StepperConfig,
        t_end=s.get("t_end", 1.0),
        dt=s.get("dt"),
        cfl_target=s.get("cfl", 0.5),
        dt_max=s.get("dt_max", 1e-2),
        scheme=s.get("scheme", "IFRK4"),
        output_every=s.get("output_every", 1),
        guard=s.get("guard", 1e6),
        adapt_every=s.get("adapt_every", 10),
    )
    ic = ICConfig(**values["ic"])
    dg = values["diag"]
    diag = build(
        "diag",
        DiagConfig,
        p_grid=dg.get("p_grid", DEFAULT_P_GRID),
        max_principle_rtol=dg.get("max_principle_rtol", 5e-3),
        lp_drift_rtol=dg.get("lp_drift_rtol", 1e-3),
    )
    output = OutputConfig(**values["output"])
    if errors:
        raise ConfigErrors(sorted(errors))
    return RunConfig(grid=grid, model=model, stepper=stepper, ic=ic, diag=diag, output=output)


def _fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "auto"
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    sections = {
        "grid": {"d": cfg.grid.d, "n": cfg.grid.n, "dealias_fraction": cfg.grid.dealias_fraction},
        "model": {
            "nu": cfg.model.nu,
            "kappa": cfg.model.kappa,
            "alpha": cfg.model.alpha,
            "buoyancy_axis": cfg.model.buoyancy_axis,
        },
        "stepper": {
            "scheme": cfg.stepper.scheme,
            "dt": cfg.stepper.dt,
            "cfl": cfg.stepper.cfl_target,
            "dt_max": cfg.stepper.dt_max,
            "t_end": cfg.stepper.t_end,
            "output_every": cfg.stepper.output_every,
            "guard": cfg.stepper.guard,
            "adapt_every": cfg.stepper.adapt_every,
        },
        "ic": {
            "name": cfg.ic.name,
            "amplitude": cfg.ic.amplitude,
            "theta_amplitude": cfg.ic.theta_amplitude,
            "seed": cfg.ic.seed,
            "width": cfg.ic.width,
        },
        "diag": {
            "p_grid": cfg.diag.p_grid,
            "max_principle_rtol": cfg.diag.max_principle_rtol,
            "lp_drift_rtol": cfg.diag.lp_drift_rtol,
        },
        "output": {"directory": cfg.output.directory, "snapshot_every": cfg.output.snapshot_every},
    }
    out = []
    for name, items in sections.items():
        out.append(f"[{name}]")
        out.extend(f"{key} = {_fmt(value)}" for key, value in items.items())
        out.append("")
    return "\n".join(out)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
