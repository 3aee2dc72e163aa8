"""Single runs from a RunConfig, with snapshots and restart."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig, parse_config, serialize_config
from .experiments import SweepResult, ic_catalog
from .models import SimState
from .storage import read_diagnostics, read_snapshot, write_diagnostics, write_snapshot
from .timestepping import Trajectory, integrate

log = logging.getLogger(__name__)

__all__ = ["RunOutput", "initial_state_from_config", "run", "resume", "write_sweep"]

DIAGNOSTICS_NAME = "diagnostics.csv"
FINAL_SNAPSHOT = "final.bvsn"
SNAPSHOT_DIR = "snapshots"


@dataclass
class RunOutput:
    directory: Path
    trajectory: Trajectory
    diagnostics: Path
    final_snapshot: Path


def initial_state_from_config(cfg: RunConfig) -> SimState:
    ic = cfg.ic
    u0, theta0 = ic_catalog(
        ic.name, cfg.grid, seed=ic.seed, amplitude=ic.amplitude, theta_amplitude=ic.theta_amplitude, width=ic.width
    )
    return SimState(u0, theta0)


def _snapshot_writer(directory: Path, cfg: RunConfig, text: str):
    snap_dir = directory / SNAPSHOT_DIR

    def hook(state, status, reference):
        snap_dir.mkdir(parents=True, exist_ok=True)
        path = snap_dir / f"step_{status.step_index:08d}.bvsn"
        write_snapshot(
            path, state, cfg.model, status=status, reference=reference, config_text=text, scheme=cfg.stepper.scheme
        )
        log.info("snapshot %s (t=%.6g)", path, state.t)

    return hook


def run(cfg: RunConfig, directory=None) -> RunOutput:
    """Integrate the configured IC; write diagnostics.csv, snapshots and final.bvsn."""
    directory = Path(directory or cfg.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    text = serialize_config(cfg)
    (directory / "config.txt").write_text(text, encoding="utf-8")
    state0 = initial_state_from_config(cfg)
    hook = _snapshot_writer(directory, cfg, text)
    traj = integrate(state0, cfg.model, cfg.stepper_config(), cfg.diag, snapshot_hook=hook)
    diag_path = write_diagnostics(directory / DIAGNOSTICS_NAME, traj.records)
    final = write_snapshot(
        directory / FINAL_SNAPSHOT,
        traj.final_state,
        cfg.model,
        status=traj.status,
        reference=traj.reference,
        config_text=text,
        scheme=cfg.stepper.scheme,
    )
    return RunOutput(directory, traj, diag_path, final)


def resume(snapshot_path, t_end: float, cfg: RunConfig | None = None, directory=None) -> RunOutput:
    """Continue from a snapshot to ``t_end``.

    The configuration stored in the snapshot is used unless ``cfg`` is given,
    in which case its dynamics must match the snapshot's digest. Rows of an
    existing diagnostics.csv up to the snapshot time are kept and the new rows
    appended.
    """
    snap = read_snapshot(snapshot_path)
    if cfg is None:
        cfg = parse_config(snap.config_text)
    snap.check(cfg.grid, cfg.model, cfg.stepper.scheme)
    directory = Path(directory or cfg.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    text = serialize_config(cfg)
    stepper = cfg.stepper_config().replace(t_end=t_end)
    traj = integrate(
        snap.state,
        cfg.model,
        stepper,
        cfg.diag,
        reference=snap.reference,
        status=snap.status,
        snapshot_hook=_snapshot_writer(directory, cfg, text),
    )
    diag_path = directory / DIAGNOSTICS_NAME
    earlier = []
    if diag_path.exists():
        earlier = [r for r in read_diagnostics(diag_path) if r.t <= snap.state.t]
    write_diagnostics(diag_path, earlier + traj.records)
    final = write_snapshot(
        directory / FINAL_SNAPSHOT,
        traj.final_state,
        cfg.model,
        status=traj.status,
        reference=traj.reference,
        config_text=text,
        scheme=cfg.stepper.scheme,
    )
    return RunOutput(directory, traj, diag_path, final)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_sweep(result: SweepResult, directory) -> Path:
    """Per-run diagnostics CSVs, ``summary.csv`` and a key=value ``manifest.txt``."""
    directory = Path(directory)
    runs = directory / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    for value in result.values:
        write_diagnostics(runs / f"{spec.family}_{value!r}.csv", result.records[value])
    rows = result.summary_rows()
    cols = list(rows[0])
    lines = [",".join(cols)] + [",".join(_fmt(row[c]) for c in cols) for row in rows]
    (directory / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    base = spec.base_params
    manifest = {
        "family": spec.family,
        "values": ", ".join(repr(v) for v in spec.values),
        "reference_value": repr(result.reference_value),
        "d": base.d,
        "n": spec.n,
        "T": repr(spec.T),
        "nu": ", ".join(repr(v) for v in base.nu),
        "kappa": repr(base.kappa),
        "alpha": repr(base.alpha),
        "ic": spec.ic_name,
        "amplitude": repr(spec.amplitude),
        "theta_amplitude": repr(spec.theta_amplitude),
        "seed": spec.seed,
        "dt": repr(result.dt),
    }
    for key, order in result.orders.items():
        manifest[f"order_{key}"] = "undefined" if order is None else repr(order)
    text = "".join(f"{k} = {v}\n" for k, v in manifest.items())
    (directory / "manifest.txt").write_text(text, encoding="utf-8")
    return directory
