from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tumorpatch.elliptic import (
    eta_step_exact, evolve_elliptic, kkt_residual, obstacle_solve, stationary_solve,
)
from tumorpatch.errors import CapacityExceeded, NutrientAtCapacity
from tumorpatch.grid import GridSpec, ball, constant
from tumorpatch.presets import manufactured_obstacle, obstacle_line_oracle


def test_line_oracle_is_a_solution():
    """Check the closed form itself: w'' = 1 - f on {w > 0}, C^1 across r0 and R."""
    r0, m = 0.5, 3.0
    R = m * r0
    x = np.linspace(-2, 2, 400_001)
    h = x[1] - x[0]
    w = obstacle_line_oracle(x, r0, m)
    f = np.where(np.abs(x) < r0, m, 0.0)
    d2 = (w[2:] - 2 * w[1:-1] + w[:-2]) / h ** 2
    xi = x[1:-1]
    smooth = (np.abs(np.abs(xi) - r0) > 2 * h) & (np.abs(np.abs(xi) - R) > 2 * h) & (np.abs(xi) < R)
    assert np.allclose(d2[smooth], (1 - f[1:-1])[smooth], atol=1e-5)
    assert np.all(w >= 0) and np.all(w[np.abs(x) >= R] == 0)
    dw = np.gradient(w, h)
    assert np.abs(np.diff(dw)).max() < 10 * h


def test_line_obstacle_matches_closed_form():
    g = GridSpec(1, (4.0,), (4096,))
    x = g.coords()[0]
    f = g.field(np.where(np.abs(x) < 0.5, 3.0, 0.0))
    sol = obstacle_solve(f, tol=1e-8)
    assert sol.kkt_residual <= 1e-8
    assert np.abs(sol.w.values - obstacle_line_oracle(x, 0.5, 3.0)).max() <= 1e-6
    assert sol.rho.mass() == pytest.approx(f.mass(), rel=1e-6)


def test_manufactured_obstacle_certificate():
    f, v = manufactured_obstacle(64)
    sol = obstacle_solve(f, tol=1e-9)
    assert kkt_residual(sol.w, f) <= 1e-8
    assert np.abs(sol.w.values - v.values).max() <= 1e-6
    assert np.array_equal(sol.active_set, v.values > 0)
    # on {w > 0} the recovered density saturates
    assert np.allclose(sol.rho.values[sol.active_set], 1.0, atol=1e-6)


def test_obstacle_input_errors(grid64):
    with pytest.raises(ValueError):
        obstacle_solve(grid64.field(-np.ones(grid64.shape)))
    with pytest.raises(CapacityExceeded):
        obstacle_solve(grid64.field(np.ones(grid64.shape)))


@given(st.floats(0.0, 1.0), st.floats(0.0, 3.0), st.floats(1e-4, 0.5), st.floats(0.0, 1.0))
def test_eta_step_exact_solves_the_ode(eta0, n0, tau, rho):
    g = GridSpec.square(8)
    e1 = eta_step_exact(g.field(np.full(g.shape, eta0)), g.field(np.full(g.shape, rho)),
                        g.field(np.full(g.shape, n0)), tau).values[0, 0]
    # explicit solution of eta' = (n0 - eta) rho
    ref = n0 - (n0 - eta0) * np.exp(-rho * tau)
    assert e1 == pytest.approx(ref, rel=1e-12, abs=1e-15)
    # composition property of the flow
    half = eta_step_exact(g.field(np.full(g.shape, eta0)), g.field(np.full(g.shape, rho)),
                          g.field(np.full(g.shape, n0)), tau / 2)
    two = eta_step_exact(half, g.field(np.full(g.shape, rho)), g.field(np.full(g.shape, n0)), tau / 2)
    assert two.values[0, 0] == pytest.approx(e1, rel=1e-12, abs=1e-15)


def test_evolve_elliptic_radial_growth():
    g = GridSpec.square(64, 4.0)
    traj = evolve_elliptic(ball(g, 0.5), constant(g, 2.0), 5e-3, 0.2, snapshot_times=[0.0, 0.1, 0.2])
    assert [s.k for s in traj] == [0, 20, 40]
    ws = [s.w.values for s in traj]
    assert np.all(ws[2] >= ws[1] - 1e-12) and np.all(ws[1] >= 0)
    for s in traj[1:]:
        assert s.kkt_residual <= 1e-8
    assert traj[-1].rho.mass() > traj[0].rho.mass()


def test_stationary_support_on_the_line():
    g = GridSpec(1, (8.0,), (1024,))
    x = g.coords()[0]
    r0, n0 = 1.0, 0.5
    rho, w, res = stationary_solve(g.field((np.abs(x) < r0).astype(float)), constant(g, n0))
    assert res <= 1e-8
    # mass balance (1 - n0) |supp| = 2 r0
    assert rho.mass() == pytest.approx(2 * r0 / (1 - n0), rel=1e-6)
    support = x[rho.values > 0.5]
    assert support.max() == pytest.approx(r0 / (1 - n0), abs=2 * g.h[0])
    with pytest.raises(NutrientAtCapacity):
        stationary_solve(rho, constant(g, 1.0))
