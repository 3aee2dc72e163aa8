"""Snapshots and diagnostics CSV files.

Snapshot layout (all little-endian)::

    magic           5 bytes  b"BVSN1", then 3 zero bytes
    d, n            uint32 each
    t               float64
    step_index      int64      steps taken so far
    dt              float64    current adaptive step (NaN if none yet)
    integrals       4 x float64 (see SimState.INTEGRAL_NAMES)
    digest          32 bytes   sha256 of the canonical parameter string
    has_reference   uint8
    config_length   uint32, followed by that many bytes of UTF-8 config text
    u_1 .. u_d      n^d complex coefficients each, numpy FFT order, C order,
    theta           stored as interleaved (re, im) float64 pairs
    [reference]     if has_reference: t, 4 integrals, then u_1 .. u_d, theta

Coefficients are written as spectral data, so a read gives back the state
bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagRecord
from .errors import ConfigurationError
from .models import ModelParams, SimState
from .spectral import Grid, SpectralField, VectorField
from .timestepping import StepperStatus

__all__ = [
    "MAGIC",
    "Snapshot",
    "params_digest",
    "write_snapshot",
    "read_snapshot",
    "write_diagnostics",
    "read_diagnostics",
]

MAGIC = b"BVSN1"
_HEADER = struct.Struct("<5s3xIIdqd4d32sBI")
_REF_HEADER = struct.Struct("<d4d")
_COMPLEX = np.dtype("<c16")


def params_digest(grid: Grid, params: ModelParams, scheme: str = "IFRK4") -> bytes:
    """sha256 over everything that changes the discrete dynamics."""
    text = ";".join(
        [
            f"d={grid.d}",
            f"n={grid.n}",
            f"dealias={grid.dealias_fraction}",
            "nu=" + ",".join(repr(v) for v in params.nu),
            f"kappa={params.kappa!r}",
            f"alpha={params.alpha!r}",
            f"axis={params.buoyancy_axis}",
            f"scheme={scheme}",
        ]
    )
    return hashlib.sha256(text.encode()).digest()


@dataclass
class Snapshot:
    state: SimState
    status: StepperStatus
    digest: bytes
    config_text: str = ""
    reference: SimState | None = None

    def check(self, grid: Grid, params: ModelParams, scheme: str = "IFRK4"):
        """Refuse to continue under different dynamics."""
        if self.state.grid.d != grid.d or self.state.grid.n != grid.n:
            raise ConfigurationError(
                f"snapshot grid {self.state.grid.d}D n={self.state.grid.n} does not match {grid.d}D n={grid.n}"
            )
        if params_digest(grid, params, scheme) != self.digest:
            raise ConfigurationError("snapshot parameter digest does not match the configuration; refusing to resume")


def _coeff_bytes(state: SimState) -> bytes:
    parts = [np.ascontiguousarray(c, dtype=_COMPLEX).tobytes() for c in state.u.coeffs]
    parts.append(np.ascontiguousarray(state.theta.coeffs, dtype=_COMPLEX).tobytes())
    return b"".join(parts)


def write_snapshot(
    path,
    state: SimState,
    params: ModelParams,
    *,
    status: StepperStatus | None = None,
    reference: SimState | None = None,
    config_text: str = "",
    scheme: str = "IFRK4",
) -> Path:
    """Write atomically (temporary file then rename)."""
    path = Path(path)
    g = state.grid
    status = status or StepperStatus()
    cfg = config_text.encode("utf-8")
    header = _HEADER.pack(
        MAGIC,
        g.d,
        g.n,
        float(state.t),
        int(status.step_index),
        math.nan if status.dt is None else float(status.dt),
        *(float(v) for v in state.integrals),
        params_digest(g, params, scheme),
        1 if reference is not None else 0,
        len(cfg),
    )
    blob = [header, cfg, _coeff_bytes(state)]
    if reference is not None:
        blob.append(_REF_HEADER.pack(float(reference.t), *(float(v) for v in reference.integrals)))
        blob.append(_coeff_bytes(reference))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(b"".join(blob))
    os.replace(tmp, path)
    return path


def _read_fields(buf: memoryview, offset: int, grid: Grid, dealias_fraction):
    count = grid.n**grid.d
    size = count * _COMPLEX.itemsize
    arrays = []
    for _ in range(grid.d + 1):
        if offset + size > len(buf):
            raise ConfigurationError("snapshot is truncated")
        arr = np.frombuffer(buf, dtype=_COMPLEX, count=count, offset=offset).reshape(grid.shape)
        arrays.append(arr.astype(complex))
        offset += size
    u = VectorField(grid, np.stack(arrays[:-1]), div_free=True)
    return u, SpectralField(grid, arrays[-1]), offset


def read_snapshot(path, dealias_fraction=None) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:5] != MAGIC:
        raise ConfigurationError(f"{path} is not a BVSN1 snapshot")
    magic, d, n, t, step_index, dt, i0, i1, i2, i3, digest, has_ref, cfg_len = _HEADER.unpack_from(data)
    offset = _HEADER.size
    config_text = data[offset : offset + cfg_len].decode("utf-8")
    offset += cfg_len
    if dealias_fraction is None:
        grid = Grid(d, n)
        if config_text:
            from .config import parse_config

            grid = parse_config(config_text).grid
    else:
        grid = Grid(d, n, dealias_fraction)
    buf = memoryview(data)
    u, theta, offset = _read_fields(buf, offset, grid, dealias_fraction)
    state = SimState(u, theta, t, np.array([i0, i1, i2, i3]))
    reference = None
    if has_ref:
        rt, *rint = _REF_HEADER.unpack_from(data, offset)
        offset += _REF_HEADER.size
        ru, rtheta, offset = _read_fields(buf, offset, grid, dealias_fraction)
        reference = SimState(ru, rtheta, rt, np.array(rint))
    status = StepperStatus(step_index, None if math.isnan(dt) else dt)
    return Snapshot(state, status, digest, config_text, reference)


def write_diagnostics(path, records, append=False):
    """One row per record, columns ``CSV_COLUMNS``; floats are written round-trip exact."""
    path = Path(path)
    new = not append or not path.exists()
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([repr(float(v)) for v in rec.as_row()])
    return path


def read_diagnostics(path) -> list[DiagRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[: len(CSV_COLUMNS)]) != CSV_COLUMNS:
            raise ConfigurationError(f"{path}: unexpected diagnostics columns")
        return [DiagRecord.from_row(row) for row in reader]
