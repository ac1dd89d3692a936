"""Wasserstein projection onto ``{rho <= 1}`` and its dual pressure problem.

For a source density ``mu`` and step ``tau`` the primal problem is

    min_{rho <= 1}  W_2^2(rho, mu) / (2 tau)

and the dual is

    max_{p >= 0}  J(p) = <p^c, mu> - <p, 1>,
    p^c(x) = inf_y p(y) + |x - y|^2 / (2 tau).

Two c-transforms live here. :func:`ctransform` is the exact lattice
inf-convolution (separable lower envelopes). The ascent itself uses
:func:`ctransform_interpolated`, the exact c-transform of the bilinear
interpolant of ``p``: it stays consistent when the optimal displacement is
far below one cell, and its exact supergradient is the bilinear scatter of
``mu`` to the minimisers (so mass is conserved to round-off).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import CapacityExceeded, GridTooLarge, MapLeavesBox, NoConvergence
from .grid import GridSpec, ScalarField, check_finite, inverse_neg_laplacian, laplacian_array, same_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DualPotential:
    p: ScalarField
    p_c: ScalarField
    tau: float
    dual_value: float
    kkt_residual: float


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    rho: ScalarField
    dual: DualPotential
    pushforward_residual: float
    complementarity_residual: float
    iterations: int = 0
    infeasibility: float = 0.0
    gap: float = 0.0
    dual_history: tuple = field(default=(), repr=False)


# --------------------------------------------------------------------------
# c-transforms

def ctransform(p: ScalarField, tau: float) -> ScalarField:
    """Lattice c-transform ``min_j p_j + |x_i - x_j|^2/(2 tau)``.

    Separable lower-envelope passes, O(N) per grid line.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    check_finite(p, "p")
    g = p.grid
    c = [hx * hx / (2.0 * tau) for hx in g.h]
    v = np.ascontiguousarray(p.values)
    if g.dim == 1:
        out = K.ctransform_lattice_1d(v.copy(), c[0])
    else:
        out = K.ctransform_lattice_2d(v, c[0], c[1])
    return p.with_values(out, name="p_c")


def brute_force_ctransform(p: ScalarField, tau: float, max_cells: int = 4096) -> ScalarField:
    """Exhaustive minimum over all cells (test oracle)."""
    g = p.grid
    n = int(np.prod(g.shape))
    if n > max_cells:
        raise GridTooLarge(f"{n} cells exceeds the brute-force guard of {max_cells}")
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.stack([c.ravel() for c in g.coords()], axis=1)
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    vals = p.values.ravel()[None, :] + d2 / (2.0 * tau)
    return p.with_values(vals.min(axis=1).reshape(g.shape), name="p_c")


def ctransform_interpolated(p: ScalarField, tau: float, eps: float = 0.0):
    """c-transform of the (bi)linear interpolant of ``p`` on cell centres.

    Returns the transform plus the minimiser of every node, as the corner
    nodes (flat indices) of its cell and the interpolation weights there.
    The weights are the exact supergradient of the transform in ``p``.
    ``eps > 0`` replaces the minimum over lattice squares by a soft minimum
    at that temperature, which keeps ridge nodes (two tied minimisers) from
    making the ascent chatter.
    """
    g = p.grid
    v = np.ascontiguousarray(p.values, dtype=np.float64)
    if g.dim == 1:
        pc, idx, wts = K.ctransform_q1_1d(v, g.h[0], float(tau), float(eps))
    else:
        pc, idx, wts = K.ctransform_q1_2d(v, g.h[0], g.h[1], float(tau), float(eps))
    return pc, idx, wts


# --------------------------------------------------------------------------
# pushforwards

def splat(grid: GridSpec, mass: np.ndarray, targets: tuple[np.ndarray, ...]):
    x0 = [grid.axis(i)[0] for i in range(grid.dim)]
    if grid.dim == 1:
        return K.splat_linear_1d(mass, targets[0], x0[0], grid.h[0])
    return K.splat_bilinear_2d(mass, targets[0], targets[1], x0[0], x0[1], grid.h[0], grid.h[1])


def central_gradient(v: np.ndarray, h) -> list[np.ndarray]:
    """Central differences inside, one-sided at the wall."""
    return [np.gradient(v, hx, axis=ax, edge_order=1) for ax, hx in enumerate(h)]


def pushforward(rho: ScalarField, p: ScalarField, tau: float, sign: float = 1.0) -> ScalarField:
    """Push ``rho`` forward by ``x -> x + sign * tau * grad p(x)``.

    Each cell's mass is split bilinearly between the four cell centres
    around its image, so the total mass is preserved exactly.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    g = same_grid(rho, p)
    check_finite(p, "p")
    grads = central_gradient(p.values, g.h)
    targets = tuple(c + sign * tau * gr for c, gr in zip(g.coords(), grads))
    mass = rho.values * g.cell_volume
    out, lost = splat(g, np.ascontiguousarray(mass), tuple(np.ascontiguousarray(t) for t in targets))
    if lost > 0.0:
        raise MapLeavesBox(f"map sends mass {lost:.3g} outside the grid")
    return rho.with_values(out / g.cell_volume)


def map_pushforward(mu: np.ndarray, grid: GridSpec, idx, wts) -> np.ndarray:
    """Density obtained by moving each cell of ``mu`` to its c-transform minimiser."""
    out = K.scatter_weights(np.ascontiguousarray(mu.ravel()), idx, wts, mu.size)
    return out.reshape(mu.shape)


# --------------------------------------------------------------------------
# the projection

@dataclass
class _State:
    p: np.ndarray
    pc: np.ndarray
    rho: np.ndarray
    J: float
    idx: np.ndarray
    wts: np.ndarray


def _evaluate(p: np.ndarray, mu: np.ndarray, grid: GridSpec, tau: float, eps: float = 0.0) -> _State:
    pc, idx, wts = ctransform_interpolated(grid.field(p), tau, eps)
    rho = map_pushforward(mu, grid, idx, wts)
    J = float((pc * mu - p).sum() * grid.cell_volume)
    return _State(p, pc, rho, J, idx, wts)


def _residuals(st: _State, grid: GridSpec):
    """Infeasibility ``||(rho-1)_+||_1`` and the KKT defect on ``{p > 0}``.

    The second number is the larger of the gap estimate ``||p (1-rho)||_1``
    and the unweighted deficit ``||(1-rho)_+||_1`` on the pressurised set,
    so cells with a tiny pressure cannot hide a density deficit.
    """
    dv = grid.cell_volume
    infeas = float(np.clip(st.rho - 1.0, 0.0, None).sum() * dv)
    comp = float((st.p * np.abs(1.0 - st.rho)).sum() * dv)
    deficit = float(np.clip(1.0 - st.rho, 0.0, None)[st.p > 0].sum() * dv)
    return infeas, max(comp, deficit)


def restricted_poisson(g: np.ndarray, free: np.ndarray, grid: GridSpec,
                       rtol: float = 1e-3, max_cg: int = 60) -> np.ndarray:
    """Solve ``-Delta_h d = g`` on the cells in ``free`` with ``d = 0`` elsewhere.

    Preconditioned CG; the preconditioner is the masked box inverse
    Laplacian, which is exact when ``free`` is the whole box.
    """
    fm = free.astype(float)

    def A(v):
        return -laplacian_array(v * fm, grid.h) * fm

    def P(r):
        return inverse_neg_laplacian(r * fm, grid) * fm

    b = g * fm
    bn = np.sqrt((b * b).sum())
    x = np.zeros_like(b)
    if bn == 0.0:
        return x
    r = b.copy()
    z = P(r)
    d = z.copy()
    rz = (r * z).sum()
    for _ in range(max_cg):
        Ad = A(d)
        dAd = (d * Ad).sum()
        if dAd <= 0:
            break
        a = rz / dAd
        x += a * d
        r -= a * Ad
        if np.sqrt((r * r).sum()) <= rtol * bn:
            break
        z = P(r)
        rz_new = (r * z).sum()
        d = z + (rz_new / rz) * d
        rz = rz_new
    return x


def _fail(msg, max_iters, infeas, comp, atol, J, raise_on_failure):
    res = {"infeasibility": infeas, "gap": comp, "dual": J}
    msg = f"{msg} (infeas={infeas:.3g}, gap={comp:.3g}, atol={atol:.3g})"
    if raise_on_failure:
        raise NoConvergence(msg, max_iters, res)
    log.warning(msg)


def project(mu: ScalarField, tau: float, tol: float = 1e-6, max_iters: int = 500,
            p0: ScalarField | np.ndarray | None = None, capacity: float = 0.9,
            raise_on_failure: bool = True, smoothing: float = 1e-6) -> ProjectionResult:
    """Project ``mu`` onto ``{rho <= 1}`` in the ``W_2^2/(2 tau)`` sense.

    Parameters
    ----------
    mu : nonnegative density.
    tau : time step in the transport cost.
    tol : relative tolerance; the ascent stops once both the infeasibility
        ``||(rho-1)_+||_1`` and the duality-gap estimate ``||p (1-rho)||_1``
        are below ``tol * mass(mu)``.
    p0 : warm start for the pressure (clipped to ``p >= 0``).
    smoothing : soft-min temperature in units of ``h^2 / tau`` (0 gives the
        hard c-transform).

    The ascent is projected gradient ascent on ``J`` with the inverse
    Laplacian as preconditioner, restricted to the free variables
    (``p > 0`` or positive gradient), with backtracking so that ``J`` never
    decreases. The default step ``1/(tau max mu)`` is the Newton step of
    the linearised problem.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    check_finite(mu, "mu")
    grid = mu.grid
    m = np.ascontiguousarray(mu.values, dtype=np.float64)
    if m.min() < 0:
        raise ValueError("mu must be nonnegative")
    dv = grid.cell_volume
    mass = float(m.sum() * dv)
    if mass > capacity * grid.volume:
        raise CapacityExceeded(f"mass {mass:.4g} exceeds {capacity} x box volume {grid.volume:.4g}")
    atol = tol * max(mass, 1e-300)

    if p0 is None:
        p = np.zeros(grid.shape)
    else:
        p = np.clip(np.asarray(getattr(p0, "values", p0), dtype=float), 0.0, None)

    eps = smoothing * grid.hmin ** 2 / tau
    st = _evaluate(p, m, grid, tau, eps)
    history = [st.J]
    sigma0 = 1.0 / (tau * max(m.max(), 1.0))
    sigma = sigma0
    infeas, comp = _residuals(st, grid)
    it = 0
    while not (infeas <= atol and comp <= atol):
        if it >= max_iters:
            _fail(f"projection did not converge in {max_iters} iterations", max_iters,
                  infeas, comp, atol, st.J, raise_on_failure)
            break
        it += 1
        grad = st.rho - 1.0
        free = (st.p > 0.0) | (grad > 0.0)
        d = restricted_poisson(grad, free, grid)
        accepted = False
        s = sigma
        for _ in range(40):
            trial = np.clip(st.p + s * d, 0.0, None)
            nst = _evaluate(trial, m, grid, tau, eps)
            if nst.J >= st.J:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            _fail(f"line search found no ascent at iteration {it}", max_iters,
                  infeas, comp, atol, st.J, raise_on_failure)
            break
        st = nst
        history.append(st.J)
        sigma = min(sigma0, 2.0 * s) if s < sigma else sigma0
        infeas, comp = _residuals(st, grid)

    rho = st.rho
    p_field = grid.field(st.p, "p")
    # primal/dual link: (id + tau grad p)_# rho should give back mu
    try:
        back = pushforward(grid.field(rho), p_field, tau).values
        push_res = float(np.abs(back - m).sum() * dv)
    except MapLeavesBox:
        push_res = float("inf")
    dual = DualPotential(p=p_field, p_c=grid.field(st.pc, "p_c"), tau=float(tau),
                         dual_value=st.J, kkt_residual=max(infeas, comp))
    return ProjectionResult(rho=grid.field(rho, "rho"), dual=dual,
                            pushforward_residual=push_res, complementarity_residual=comp,
                            iterations=it, infeasibility=infeas, gap=comp,
                            dual_history=tuple(history))
