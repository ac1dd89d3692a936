"""c-transforms: lattice (exact inf-convolution) and bilinear-interpolant versions."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from tumorpatch import _kernels as K
from tumorpatch.errors import GridTooLarge
from tumorpatch.grid import GridSpec
from tumorpatch.ot_projection import (
    _evaluate, brute_force_ctransform, ctransform, ctransform_interpolated, map_pushforward,
)

taus = st.floats(1e-4, 2.0)


@given(st.integers(0, 10_000), taus, st.floats(0.5, 6.0))
def test_lattice_matches_brute_force_2d(seed, tau, side):
    g = GridSpec(2, (side, side * 0.75), (16, 12))
    p = g.field(np.random.default_rng(seed).normal(size=g.shape))
    assert np.abs(ctransform(p, tau).values - brute_force_ctransform(p, tau).values).max() <= 1e-12


@given(st.integers(0, 10_000), taus)
def test_lattice_matches_brute_force_1d(seed, tau):
    g = GridSpec.square(64, 2.0, dim=1)
    p = g.field(np.random.default_rng(seed).uniform(-3, 3, g.shape))
    assert np.abs(ctransform(p, tau).values - brute_force_ctransform(p, tau).values).max() <= 1e-12


def test_lattice_transform_of_constant_and_quadratic():
    g = GridSpec.square(32, 2.0)
    c = g.field(np.full(g.shape, 0.7))
    assert np.array_equal(ctransform(c, 0.1).values, c.values)
    # p^c <= p, equality where p is locally minimal
    p = g.field(g.radius() ** 2)
    pc = ctransform(p, 0.3).values
    assert np.all(pc <= p.values + 1e-15)
    assert pc.min() == p.values.min()


def test_brute_force_guard():
    with pytest.raises(GridTooLarge):
        brute_force_ctransform(GridSpec.square(128).zeros(), 0.1)


def _bilinear(p, g, y):
    # interpolant on the cell-centre lattice at physical point y
    x0 = [g.axis(i)[0] for i in range(2)]
    s = [(y[i] - x0[i]) / g.h[i] for i in range(2)]
    a = [min(max(int(np.floor(s[i])), 0), g.N[i] - 2) for i in range(2)]
    f = [s[i] - a[i] for i in range(2)]
    i, j = a
    return ((1 - f[0]) * (1 - f[1]) * p[i, j] + f[0] * (1 - f[1]) * p[i + 1, j]
            + (1 - f[0]) * f[1] * p[i, j + 1] + f[0] * f[1] * p[i + 1, j + 1])


@pytest.mark.parametrize("seed", range(3))
def test_interpolated_transform_against_optimizer(seed):
    """Per-square bounded minimisation with scipy is an independent oracle."""
    rng = np.random.default_rng(seed)
    g = GridSpec.square(10, 1.0)
    p = rng.uniform(0, 1, g.shape)
    tau = 0.01
    pc, idx, wts = ctransform_interpolated(g.field(p), tau)
    X, Y = g.coords()
    ax0, ax1 = g.axis(0), g.axis(1)
    for (i, j) in [(0, 0), (3, 4), (5, 5), (9, 2), (7, 8)]:
        x = np.array([X[i, j], Y[i, j]])
        best = p[i, j]
        for a in range(g.N[0] - 1):
            for b in range(g.N[1] - 1):
                lo, hi = (ax0[a], ax1[b]), (ax0[a + 1], ax1[b + 1])

                def obj(y):
                    return _bilinear(p, g, y) + ((y - x) ** 2).sum() / (2 * tau)
                for start in ([lo[0], lo[1]], [hi[0], hi[1]], [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]):
                    r = minimize(obj, start, bounds=list(zip(lo, hi)), method="L-BFGS-B",
                                 options={"ftol": 1e-15, "gtol": 1e-12})
                    best = min(best, r.fun)
        assert pc[i, j] <= best + 1e-12
        assert pc[i, j] >= best - 1e-7


def test_interpolated_transform_is_identity_without_gradient():
    g = GridSpec.square(16)
    pc, idx, wts = ctransform_interpolated(g.field(np.full(g.shape, 2.0)), 0.1)
    assert np.allclose(pc, 2.0)
    assert np.allclose(wts.sum(axis=1), 1.0)


def test_interpolated_transform_1d_closed_form():
    # for p = a x (linear, away from the walls) the minimiser is y = x - tau a
    g = GridSpec.square(200, 4.0, dim=1)
    x = g.coords()[0]
    a, tau = 0.5, 0.02
    pc, idx, wts = ctransform_interpolated(g.field(a * x), tau)
    inner = np.abs(x) < 1.5
    assert np.allclose(pc[inner], a * x[inner] - 0.5 * tau * a * a, atol=1e-13)


@given(st.integers(0, 1000), st.floats(1e-9, 1e-4))
def test_soft_min_bounds(seed, eps):
    g = GridSpec.square(16, 2.0)
    p = g.field(np.random.default_rng(seed).uniform(0, 1, g.shape))
    hard, _, _ = ctransform_interpolated(p, 0.05, 0.0)
    soft, idx, wts = ctransform_interpolated(p, 0.05, eps)
    assert np.all(soft <= hard + 1e-15)
    assert np.all(soft >= hard - eps * np.log(8) - 1e-15)
    assert np.allclose(wts.sum(axis=1), 1.0)
    assert wts.min() >= 0


def test_soft_transform_converges_to_hard(rng):
    g = GridSpec.square(24, 2.0)
    p = g.field(rng.uniform(0, 1, g.shape))
    hard, _, _ = ctransform_interpolated(p, 0.05, 0.0)
    errs = [np.abs(ctransform_interpolated(p, 0.05, e)[0] - hard).max() for e in (1e-4, 1e-6, 1e-8)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-7


def _J(p, mu, g, tau, eps):
    return _evaluate(p, mu, g, tau, eps)


@pytest.mark.parametrize("dim", [1, 2])
def test_dual_gradient_is_pushforward_minus_one(dim, rng):
    """With the soft minimum J is differentiable and dJ = (rho - 1) dv."""
    g = GridSpec.square(24, 2.0, dim=dim)
    tau, eps = 0.01, 1e-4
    p = rng.uniform(0.0, 0.5, g.shape)
    mu = rng.uniform(0.0, 2.0, g.shape)
    st0 = _J(p, mu, g, tau, eps)
    d = rng.normal(size=g.shape)
    pred = float(((st0.rho - 1.0) * d).sum() * g.cell_volume)
    for delta in (1e-6, 1e-7):
        fd = (_J(p + delta * d, mu, g, tau, eps).J - _J(p - delta * d, mu, g, tau, eps).J) / (2 * delta)
        assert fd == pytest.approx(pred, rel=1e-4, abs=1e-10)


@given(st.integers(0, 1000), st.floats(0.0, 1e-5))
def test_dual_is_concave(seed, eps):
    g = GridSpec.square(12, 2.0)
    rng = np.random.default_rng(seed)
    p, q = rng.uniform(0, 1, g.shape), rng.uniform(0, 1, g.shape)
    mu = rng.uniform(0, 1, g.shape)
    tau = 0.05
    mid = _J(0.5 * (p + q), mu, g, tau, eps).J
    assert mid >= 0.5 * (_J(p, mu, g, tau, eps).J + _J(q, mu, g, tau, eps).J) - 1e-12


@given(st.integers(0, 1000))
def test_scatter_conserves_mass(seed):
    g = GridSpec.square(20, 2.0)
    rng = np.random.default_rng(seed)
    p = g.field(rng.uniform(0, 1, g.shape))
    mu = rng.uniform(0, 1, g.shape)
    _, idx, wts = ctransform_interpolated(p, 0.1, 1e-6)
    rho = map_pushforward(mu, g, idx, wts)
    assert rho.sum() == pytest.approx(mu.sum(), rel=1e-13)
    assert rho.min() >= 0


def test_kernel_square_min_interior_solution():
    # convex case: the stationary point lies inside the unit square
    v, s, t = K._q1_square_min(0.0, 0.0, 0.0, 0.0, 0.3, 0.6, 1.0, 1.0, 1.0)
    assert (v, s, t) == (0.0, 0.3, 0.6)


def test_brute_force_line_envelope():
    # a unit spike at the cell nearest x = 0: envelope min(1, |x - x0|^2 / (2 tau)) with tau = 1/2
    g = GridSpec.square(64, 4.0, dim=1)
    x = g.coords()[0]
    i0 = int(np.argmin(np.abs(x)))
    p = np.ones(g.shape)
    p[i0] = 0.0
    pc = brute_force_ctransform(g.field(p), 0.5).values
    assert np.allclose(pc, np.minimum(1.0, (x - x[i0]) ** 2), atol=1e-15)


@given(st.integers(0, 10_000), taus)
def test_lattice_transform_order_preserving(seed, tau):
    g = GridSpec.square(16, 2.0)
    rng = np.random.default_rng(seed)
    p = rng.uniform(0, 1, g.shape)
    q = p + rng.uniform(0, 1, g.shape)
    pc, qc = ctransform(g.field(p), tau).values, ctransform(g.field(q), tau).values
    assert np.all(pc <= qc) and np.all(pc <= p)
