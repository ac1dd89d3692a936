from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tumorpatch.errors import GridMismatch, SnapshotScheduleEmpty
from tumorpatch.grid import GridSpec, ball, constant, lobed
from tumorpatch.master import m_of_t
from tumorpatch.scheme import (
    SchemeParams, SimState, advance, contraction_bound_check, contraction_factors,
    dirichlet_energy, run, save_run, time_lipschitz_excess,
)
from tumorpatch.io import read_rows, read_snapshot


def test_params_validation():
    with pytest.raises(ValueError):
        SchemeParams(tau=0.0, T_final=1.0)
    with pytest.raises(ValueError):
        SchemeParams(tau=0.1, T_final=1.0, b=10.0)
    with pytest.raises(ValueError):
        SchemeParams(tau=0.1, T_final=1.0, D=-1.0)
    with pytest.raises(ValueError):
        SchemeParams(tau=0.1, T_final=-1.0)
    assert SchemeParams(tau=0.01, T_final=0.35).n_steps == 35


@given(st.floats(0.0, 5.0), st.floats(0.0, 3.0))
def test_contraction_factors(a, t):
    N, M = contraction_factors(a, t)
    # N solves N' = (a-1) N + 1, N(0) = 0
    ref = t if abs(a - 1) < 1e-12 else (math.exp((a - 1) * t) - 1) / (a - 1)
    assert N == pytest.approx(ref, rel=1e-9, abs=1e-12)
    assert M == pytest.approx(a * N + 1, rel=1e-12)
    assert N >= 0 and M >= 1


def test_contraction_factors_at_one_is_continuous():
    assert contraction_factors(1.0 + 1e-9, 2.0)[0] == pytest.approx(contraction_factors(1.0, 2.0)[0], rel=1e-6)


@pytest.fixture(scope="module")
def blob_run():
    g = GridSpec.square(64, 4.0)
    p = SchemeParams(tau=5e-3, T_final=0.2, tol=1e-6)
    return run(lobed(g, 0.5, 0.3, 3), constant(g, 2.0), p, snapshot_times=[0.0, 0.1, 0.2])


def test_mass_follows_growth_law(blob_run):
    m0 = blob_run.trajectory[0].rho.mass()
    for s in blob_run.trajectory:
        # discrete steps give (1 + tau n (1 - ...)) products; compare with the continuous law loosely
        assert s.rho.mass() / (m_of_t(2.0, s.t) * m0) == pytest.approx(1.0, abs=0.01)
    for r in blob_run.diagnostics[1:]:
        assert r.mass_defect <= 1e-10


def test_run_invariants(blob_run):
    tol = blob_run.params.tol
    for r in blob_run.diagnostics[1:]:
        assert r.energy_residual <= tol * r.mass
        assert r.infeasibility <= tol * r.mass
        assert r.monotonicity_violation <= 2 * tol * r.mass
        assert r.lipschitz_excess == 0.0
    assert [s.t for s in blob_run.trajectory] == pytest.approx([0.0, 0.1, 0.2])
    assert blob_run.at(0.11).t == pytest.approx(0.1)


def test_nutrient_is_consumed_where_tumor_lives(blob_run):
    s = blob_run.trajectory[-1]
    inside = s.rho.values > 0.99
    assert np.all(s.n.values[inside] < 2.0)
    assert np.all(s.n.values[blob_run.trajectory[0].rho.values == 0] <= 2.0)
    # eta = n0 - n is carried alongside when D = 0
    assert np.allclose(s.eta.values, 2.0 - s.n.values, atol=1e-12)
    # w integrates the pressure
    assert s.w.values.min() >= 0 and s.w.values.max() > 0


def test_time_lipschitz(blob_run):
    assert time_lipschitz_excess(blob_run.trajectory, blob_run.params, 2.0) <= 0


def test_snapshot_schedule_errors(grid64):
    p = SchemeParams(tau=0.01, T_final=0.02)
    rho0, n0 = ball(grid64, 0.5), constant(grid64, 1.0)
    with pytest.raises(SnapshotScheduleEmpty):
        run(rho0, n0, p, snapshot_times=[])
    with pytest.raises(ValueError):
        run(rho0, n0, p, snapshot_times=[0.5])
    with pytest.raises(GridMismatch):
        run(rho0, constant(GridSpec.square(32), 1.0), p)
    with pytest.raises(ValueError):
        run(rho0.with_values(2 * rho0.values), n0, p)


def test_death_rate_and_diffusion(grid64):
    rho0 = ball(grid64, 0.5)
    p = SchemeParams(tau=0.01, T_final=0.1, b=0.5, D=0.5)
    res = run(rho0, constant(grid64, 2.0), p)
    end = res.trajectory[-1]
    assert end.eta is None
    # nutrient diffuses: values outside the original tumour drop below n0
    assert end.n.values[grid64.radius() < 0.6].max() < 2.0
    assert end.n.values.min() >= 0
    for r in res.diagnostics[1:]:
        assert r.monotonicity_violation <= 2 * p.tol * r.mass
        assert math.isnan(r.patch_residual)


def test_single_step_state(grid64):
    s0 = SimState.initial(ball(grid64, 0.5), constant(grid64, 2.0))
    p = SchemeParams(tau=0.01, T_final=0.01)
    s1, res = advance(s0, p)
    assert s1.k == 1 and s1.t == pytest.approx(0.01)
    assert np.allclose(s1.w.values, 0.01 * s1.p.values)
    assert res.rho is s1.rho


def test_dirichlet_energy_of_linear_ramp():
    g = GridSpec(1, (1.0,), (10,))
    # p = 1 inside, zero beyond the walls: only the two boundary faces contribute
    e = dirichlet_energy(g.field(np.ones(10)))
    assert e == pytest.approx(2 * (1 / g.h[0]) ** 2 * g.h[0])


def test_save_run_roundtrip(blob_run, tmp_path):
    out = save_run(blob_run, tmp_path / "r")
    rows = read_rows(out / "diagnostics.csv")
    assert len(rows) == len(blob_run.diagnostics)
    f, t = read_snapshot(out / "rho_000040.bin")
    assert t == pytest.approx(0.2)
    assert np.array_equal(f.values, blob_run.trajectory[-1].rho.values)


def test_contraction_on_nested_balls():
    g = GridSpec.square(64, 4.0)
    p = SchemeParams(tau=5e-3, T_final=0.1)
    n0 = constant(g, 2.0)
    a, b = ball(g, 0.4), ball(g, 0.5)
    ta = run(a, n0, p, snapshot_times=[0.0, 0.05, 0.1]).trajectory
    tb = run(b, n0, p, snapshot_times=[0.0, 0.05, 0.1]).trajectory
    fwd = contraction_bound_check(ta, tb, n0, n0, a, b)
    assert all(r["excess"] <= 0.1 * r["rhs"] for r in fwd)
    rev = contraction_bound_check(tb, ta, n0, n0, b, a)
    assert all(r["lhs"] <= 1e-5 for r in rev)
    with pytest.raises(GridMismatch):
        contraction_bound_check(ta, tb[:2], n0, n0, a, b)
