import numpy as np
import pytest

from boussinesq_voigt import spectral as sp
from boussinesq_voigt.diagnostics import CSV_COLUMNS, record
from boussinesq_voigt.errors import ConfigurationError
from boussinesq_voigt.models import ModelParams, SimState
from boussinesq_voigt.spectral import Grid
from boussinesq_voigt.storage import (
    MAGIC,
    params_digest,
    read_diagnostics,
    read_snapshot,
    write_diagnostics,
    write_snapshot,
)
from boussinesq_voigt.timestepping import StepperStatus


@pytest.fixture
def state(rng):
    grid = Grid(2, 16)
    return SimState(sp.random_vector_field(grid, rng), sp.random_field(grid, rng), t=0.123456789, integrals=[1.0, 2.0, 3.0, 4.0])


def test_snapshot_bit_exact(tmp_path, state):
    params = ModelParams(nu=(0.1, 0.0), alpha=0.2)
    ref = state.replace(t=0.0, integrals=np.zeros(4))
    path = write_snapshot(
        tmp_path / "s.bvsn", state, params, status=StepperStatus(17, 0.003), reference=ref, config_text="[grid]\nn = 16\n"
    )
    snap = read_snapshot(path)
    np.testing.assert_array_equal(snap.state.u.coeffs, state.u.coeffs)
    np.testing.assert_array_equal(snap.state.theta.coeffs, state.theta.coeffs)
    np.testing.assert_array_equal(snap.state.integrals, state.integrals)
    assert snap.state.t == state.t
    assert (snap.status.step_index, snap.status.dt) == (17, 0.003)
    np.testing.assert_array_equal(snap.reference.theta.coeffs, ref.theta.coeffs)
    assert snap.config_text == "[grid]\nn = 16\n"
    snap.check(Grid(2, 16), params)


def test_snapshot_layout(tmp_path, state):
    path = write_snapshot(tmp_path / "s.bvsn", state, ModelParams())
    raw = path.read_bytes()
    assert raw[:5] == MAGIC
    assert int.from_bytes(raw[8:12], "little") == 2 and int.from_bytes(raw[12:16], "little") == 16
    # theta is the last block, interleaved little-endian re/im pairs
    tail = np.frombuffer(raw[-16 * 256 :], dtype="<f8").reshape(16, 16, 2)
    np.testing.assert_array_equal(tail[..., 0], state.theta.coeffs.real)
    np.testing.assert_array_equal(tail[..., 1], state.theta.coeffs.imag)


def test_snapshot_without_reference_or_dt(tmp_path, state):
    snap = read_snapshot(write_snapshot(tmp_path / "s.bvsn", state, ModelParams()))
    assert snap.reference is None and snap.status.dt is None


def test_digest_mismatch_refused(tmp_path, state):
    snap = read_snapshot(write_snapshot(tmp_path / "s.bvsn", state, ModelParams(alpha=0.1)))
    with pytest.raises(ConfigurationError):
        snap.check(Grid(2, 16), ModelParams(alpha=0.2))
    with pytest.raises(ConfigurationError):
        snap.check(Grid(2, 32), ModelParams(alpha=0.1))
    with pytest.raises(ConfigurationError):
        snap.check(Grid(2, 16), ModelParams(alpha=0.1), scheme="RK4")


def test_digest_sensitive_to_every_coefficient():
    g = Grid(2, 16)
    base = params_digest(g, ModelParams())
    for p in (ModelParams(nu=(1e-300, 0.0)), ModelParams(kappa=1e-9), ModelParams(alpha=1e-9)):
        assert params_digest(g, p) != base
    assert params_digest(Grid(2, 16, 1), ModelParams()) != base


def test_bad_and_truncated_files(tmp_path, state):
    bad = tmp_path / "bad.bvsn"
    bad.write_bytes(b"NOTASNAPSHOT" * 10)
    with pytest.raises(ConfigurationError):
        read_snapshot(bad)
    good = write_snapshot(tmp_path / "s.bvsn", state, ModelParams())
    cut = tmp_path / "cut.bvsn"
    cut.write_bytes(good.read_bytes()[:-100])
    with pytest.raises(ConfigurationError):
        read_snapshot(cut)


def test_diagnostics_csv_round_trip(tmp_path, state):
    recs = [record(state, ModelParams(alpha=0.1)), record(state.replace(t=1.0), ModelParams(alpha=0.1))]
    path = write_diagnostics(tmp_path / "d.csv", recs)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_diagnostics(path)
    assert [r.as_row() for r in back] == [r.as_row() for r in recs]


def test_diagnostics_append(tmp_path, state):
    rec = record(state, ModelParams())
    path = write_diagnostics(tmp_path / "d.csv", [rec])
    write_diagnostics(path, [rec], append=True)
    assert len(read_diagnostics(path)) == 2


def test_diagnostics_header_checked(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ConfigurationError):
        read_diagnostics(path)
