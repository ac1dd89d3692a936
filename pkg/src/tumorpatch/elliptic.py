"""Time-integrated formulation for ``b = D = 0``: an obstacle problem per time.

With ``w(x, t) = int_0^t p`` and ``eta = n0 - n`` the density at time ``t``
solves ``rho - Lap w = rho0 + eta`` with ``w >= 0`` and ``w (1 - rho) = 0``;
equivalently ``w`` minimises

    1/2 int |grad w|^2 + int (1 - f) w   over w >= 0,   f = rho0 + eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import CapacityExceeded, NoConvergence, NutrientAtCapacity
from .grid import ScalarField, check_finite, laplacian_array, same_grid


@dataclass(frozen=True, eq=False)
class ObstacleSolution:
    w: ScalarField
    rho: ScalarField
    active_set: np.ndarray
    kkt_residual: float
    clip: float = 0.0
    sweeps: int = 0


def default_omega(grid) -> float:
    """Over-relaxation factor that is optimal for the box Poisson problem."""
    h = grid.hmin
    L = max(grid.L)
    return 2.0 / (1.0 + math.sin(math.pi * h / L))


def _psor(w: np.ndarray, g: np.ndarray, grid, omega, tol, max_sweeps):
    if grid.dim == 1:
        return K.psor_1d(w, g, grid.h[0], omega, tol, max_sweeps)
    return K.psor_2d(w, g, grid.h[0], grid.h[1], omega, tol, max_sweeps)


def kkt_residual(w: ScalarField, f: ScalarField) -> float:
    """``|| min(w, -Lap_h w + 1 - f) ||_inf``."""
    r = -laplacian_array(w.values, w.grid.h) + 1.0 - f.values
    return float(np.abs(np.minimum(w.values, r)).max())


def solve_linear_obstacle(g: np.ndarray, grid, tol: float, w0=None, omega=None,
                          max_sweeps: int = 200_000):
    """``min 1/2 |grad w|^2 + <g, w>`` over ``w >= 0`` by red-black projected SOR."""
    w = np.zeros(grid.shape) if w0 is None else np.clip(np.array(getattr(w0, "values", w0), dtype=float), 0, None)
    omega = default_omega(grid) if omega is None else omega
    sweeps, res = _psor(w, np.ascontiguousarray(g, dtype=float), grid, omega, tol, max_sweeps)
    if not res <= tol:
        raise NoConvergence(f"projected SOR stopped at residual {res:.3g} > {tol:.3g}",
                            max_sweeps, {"kkt_residual": float(res)})
    return w, int(sweeps), float(res)


def obstacle_solve(f: ScalarField, tol: float = 1e-8, w0=None, omega=None,
                   max_sweeps: int = 200_000, capacity: float = 0.9) -> ObstacleSolution:
    """Solve the obstacle problem with source ``f`` and recover ``rho = f + Lap_h w``."""
    check_finite(f, "f")
    g = f.grid
    if f.values.min() < 0:
        raise ValueError("f must be nonnegative")
    if f.mass() > capacity * g.volume:
        raise CapacityExceeded(f"mass {f.mass():.4g} exceeds {capacity} x box volume")
    w, sweeps, res = solve_linear_obstacle(1.0 - f.values, g, tol, w0, omega, max_sweeps)
    rho = f.values + laplacian_array(w, g.h)
    clipped = np.clip(rho, 0.0, 1.0)
    clip = float(np.abs(clipped - rho).sum() * g.cell_volume)
    return ObstacleSolution(
        w=g.field(w, "w"), rho=g.field(clipped, "rho"), active_set=w > 0,
        kkt_residual=res, clip=clip, sweeps=sweeps,
    )


def eta_step_exact(eta: ScalarField, rho: ScalarField, n0: ScalarField, tau: float) -> ScalarField:
    """Exact solution of ``d eta/dt = (n0 - eta) rho`` over ``tau`` with ``rho`` frozen."""
    same_grid(eta, rho, n0)
    v = n0.values - (n0.values - eta.values) * np.exp(-tau * rho.values)
    return eta.with_values(v)


@dataclass(frozen=True, eq=False)
class EllipticState:
    t: float
    rho: ScalarField
    w: ScalarField
    eta: ScalarField
    kkt_residual: float = 0.0
    clip: float = 0.0
    k: int = 0


def evolve_elliptic(rho0: ScalarField, n0: ScalarField, tau: float, T: float,
                    snapshot_times=None, tol: float = 1e-8) -> list[EllipticState]:
    """Alternate the exact ``eta`` update with an obstacle solve for ``f = rho0 + eta``.

    Each solve is warm-started from the previous ``w`` (``{w > 0}`` only grows).
    """
    g = same_grid(rho0, n0)
    check_finite(rho0, "rho0")
    check_finite(n0, "n0")
    n_steps = int(round(T / tau))
    if snapshot_times is None:
        keep = {0, n_steps}
    else:
        keep = {min(int(round(t / tau)), n_steps) for t in snapshot_times}
    rho = rho0
    eta = g.zeros("eta")
    w = np.zeros(g.shape)
    traj = [EllipticState(0.0, rho0, g.zeros("w"), eta, 0.0, 0.0, 0)] if 0 in keep else []
    for k in range(1, n_steps + 1):
        eta = eta_step_exact(eta, rho, n0, tau)
        sol = obstacle_solve(rho0.with_values(rho0.values + eta.values), tol=tol, w0=w)
        rho, w = sol.rho, sol.w.values
        if k in keep:
            traj.append(EllipticState(k * tau, sol.rho, sol.w, eta, sol.kkt_residual, sol.clip, k))
    return traj


def stationary_solve(rho0: ScalarField, n0: ScalarField, tol: float = 1e-8):
    """Long-time limit for ``||n0||_inf < 1``: ``(1 - n0) rho_inf - Lap w_inf = rho0``.

    Returns ``(rho_inf, w_inf, kkt_residual)``.
    """
    g = same_grid(rho0, n0)
    if float(n0.values.max()) >= 1.0 - 1e-6:
        raise NutrientAtCapacity("stationary state needs ||n0||_inf < 1")
    c = 1.0 - n0.values
    w, _, res = solve_linear_obstacle(c - rho0.values, g, tol)
    rho = (rho0.values + laplacian_array(w, g.h)) / c
    return g.field(np.clip(rho, 0.0, 1.0), "rho_inf"), g.field(w, "w_inf"), res
