"""Constant-nutrient structure: mass factor, the two parameter-free master flows,
rescaling equivalences, harmonic moments and radial oracles.

For constant ``n0`` the total mass grows like ``m(t) mass(0)`` with

    m(t) = (n0 e^{(n0-1)t} - 1) / (n0 - 1)      (t + 1 when n0 = 1),

and the density is a time/space reparametrisation of two flows without
nutrient: one with a constant source ``rho0`` and one confined by the
potential ``V(x) = |x|^2 / (2d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CheckpointOutOfRange, MOutOfRange, MapLeavesBox, NotHarmonic, SparseTrajectory
from .geometry import sample
from .grid import ScalarField, check_finite, same_grid
from .ot_projection import splat, project


def _is_one(n0: float) -> bool:
    return abs(n0 - 1.0) < 1e-12


def m_of_t(n0: float, t):
    if not n0 > 0:
        raise MOutOfRange(f"n0 must be positive, got {n0}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise MOutOfRange("t must be nonnegative")
    if _is_one(n0):
        out = t + 1.0
    else:
        a = n0 - 1.0
        # (n0 e^{a t} - 1)/a written to stay accurate for small a t
        out = 1.0 + n0 * np.expm1(a * t) / a
    return float(out) if out.ndim == 0 else out


def t_of_m(n0: float, m):
    if not n0 > 0:
        raise MOutOfRange(f"n0 must be positive, got {n0}")
    m = np.asarray(m, dtype=float)
    if np.any(m < 1.0):
        raise MOutOfRange("m must be >= 1")
    if _is_one(n0):
        out = m - 1.0
    else:
        a = n0 - 1.0
        if n0 < 1 and np.any(m >= 1.0 / (1.0 - n0)):
            raise MOutOfRange(f"m must stay below the limit 1/(1-n0) = {1.0 / (1.0 - n0):.6g}")
        out = np.log1p(a * (m - 1.0) / n0) / a
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MassFactor:
    n0: float

    def __post_init__(self):
        if not self.n0 > 0:
            raise MOutOfRange("n0 must be positive")

    def m(self, t):
        return m_of_t(self.n0, t)

    def t(self, m):
        return t_of_m(self.n0, m)

    @property
    def limit(self) -> float:
        return 1.0 / (1.0 - self.n0) if self.n0 < 1 else math.inf


def radial_radius(r0: float, n0: float, t: float, d: int = 2) -> float:
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    return m_of_t(n0, t) ** (1.0 / d) * r0


# --------------------------------------------------------------------------
# master flows

@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    rho: ScalarField
    p: ScalarField
    k: int = 0


def _keep_steps(times, tau: float, n_steps: int) -> set:
    if times is None:
        return {0, n_steps}
    return {min(int(round(t / tau)), n_steps) for t in times}


def run_hs_source(rho0: ScalarField, T: float, tau: float, snapshot_times=None,
                  tol: float = 1e-6) -> list[FlowState]:
    """Congested flow with constant source ``rho0``: ``rho^{k+1} = project(rho^k + tau rho0)``."""
    check_finite(rho0, "rho0")
    n_steps = int(round(T / tau))
    keep = _keep_steps(snapshot_times, tau, n_steps)
    g = rho0.grid
    rho = rho0.values.copy()
    p = np.zeros(g.shape)
    traj = [FlowState(0.0, rho0, g.zeros("p"), 0)] if 0 in keep else []
    for k in range(1, n_steps + 1):
        res = project(g.field(rho + tau * rho0.values), tau, tol=tol, p0=p)
        rho, p = res.rho.values, res.dual.p.values
        if k in keep:
            traj.append(FlowState(k * tau, res.rho, res.dual.p, k))
    return traj


def dilate(rho: ScalarField, factor: float) -> ScalarField:
    """Push ``rho`` forward by ``x -> factor x``; total mass is kept exactly."""
    g = rho.grid
    targets = tuple(np.ascontiguousarray(factor * c) for c in g.coords())
    mass = np.ascontiguousarray(rho.values * g.cell_volume)
    out, lost = splat(g, mass, targets)
    if lost > 0:
        raise MapLeavesBox(f"dilation sends mass {lost:.3g} outside the grid")
    return rho.with_values(out / g.cell_volume)


def run_hs_potential(rho0: ScalarField, T: float, tau: float, snapshot_times=None,
                     tol: float = 1e-6) -> list[FlowState]:
    """Congested flow confined by ``V = |x|^2/(2d)``.

    Splitting: move by the exact gradient map ``x -> (1 - tau/d) x``, then project.
    """
    check_finite(rho0, "rho0")
    g = rho0.grid
    d = g.dim
    if tau / d >= 1:
        raise ValueError("tau/d must be < 1")
    n_steps = int(round(T / tau))
    keep = _keep_steps(snapshot_times, tau, n_steps)
    rho = rho0
    p = np.zeros(g.shape)
    traj = [FlowState(0.0, rho0, g.zeros("p"), 0)] if 0 in keep else []
    for k in range(1, n_steps + 1):
        moved = dilate(rho, 1.0 - tau / d)
        res = project(moved, tau, tol=tol, p0=p)
        rho, p = res.rho, res.dual.p.values
        if k in keep:
            traj.append(FlowState(k * tau, res.rho, res.dual.p, k))
    return traj


# --------------------------------------------------------------------------
# equivalence checks

def _nearest(traj, s: float, tau_hint: float | None = None):
    times = np.array([st.t for st in traj])
    i = int(np.argmin(np.abs(times - s)))
    spacing = np.diff(times).max() if len(times) > 1 else 0.0
    slack = max(spacing, tau_hint or 0.0)
    if s > times[-1] + slack or s < times[0] - slack:
        raise CheckpointOutOfRange(f"reparametrised time {s:.4g} outside [{times[0]:.4g}, {times[-1]:.4g}]")
    return traj[i]


def _rho(item):
    return getattr(item, "rho", item)


def equivalence_check_I(full_traj, hs_traj, n0: float) -> list[dict]:
    """``||rho(t) - rho_*(m(t) - 1)||_1 / mass`` per checkpoint of ``full_traj``."""
    rows = []
    for st in full_traj:
        s = m_of_t(n0, st.t) - 1.0
        hs = _nearest(hs_traj, s)
        same_grid(_rho(st), _rho(hs))
        a, b = _rho(st), _rho(hs)
        err = float(np.abs(a.values - b.values).sum() * a.grid.cell_volume) / a.mass()
        rows.append({"t": st.t, "s_matched": hs.t, "l1_error": err, "resample_floor": 0.0})
    return rows


def rescale(field: ScalarField, factor: float) -> ScalarField:
    """``x -> field(factor x)`` by bilinear resampling."""
    g = field.grid
    pts = np.stack([factor * c for c in g.coords()])
    return field.with_values(sample(field.values, g, pts))


def equivalence_check_II(full_traj, hsp_traj, n0: float) -> list[dict]:
    """``||rho(x, t) - rho_dagger(m^{-1/d} x, ln m)||_1 / mass`` per checkpoint.

    ``resample_floor`` is the L1 error (relative to mass) of rescaling the
    matched field by ``m^{-1/d}`` and back, i.e. what resampling alone costs.
    """
    rows = []
    for st in full_traj:
        a = _rho(st)
        d = a.grid.dim
        m = m_of_t(n0, st.t)
        s = math.log(m)
        hs = _nearest(hsp_traj, s)
        b = _rho(hs)
        same_grid(a, b)
        pred = rescale(b, m ** (-1.0 / d))
        err = float(np.abs(a.values - pred.values).sum() * a.grid.cell_volume) / a.mass()
        back = rescale(pred, m ** (1.0 / d))
        floor = float(np.abs(back.values - b.values).sum() * a.grid.cell_volume) / max(b.mass(), 1e-300)
        rows.append({"t": st.t, "s_matched": hs.t, "l1_error": err, "resample_floor": floor})
    return rows


# --------------------------------------------------------------------------
# moments and nutrient reconstruction

_HARMONIC_2D = {
    "1": lambda x, y: np.ones_like(x),
    "x1": lambda x, y: x,
    "x2": lambda x, y: y,
    "x1x2": lambda x, y: x * y,
    "x1^2-x2^2": lambda x, y: x * x - y * y,
}
_HARMONIC_1D = {
    "1": lambda x: np.ones_like(x),
    "x": lambda x: x,
}


def harmonic_family(dim: int) -> tuple[str, ...]:
    return tuple(_HARMONIC_2D if dim == 2 else _HARMONIC_1D)


def harmonic_moment(rho: ScalarField, g: str) -> float:
    """``h^d sum rho g`` for ``g`` in the built-in harmonic family."""
    fam = _HARMONIC_2D if rho.grid.dim == 2 else _HARMONIC_1D
    if g not in fam:
        raise NotHarmonic(f"{g!r} is not in the harmonic family {sorted(fam)}")
    vals = fam[g](*rho.grid.coords())
    return float((rho.values * vals).sum() * rho.grid.cell_volume)


def nutrient_from_density(rho_traj: Sequence, n0, t: float | None = None,
                          max_spacing: float | None = None) -> ScalarField:
    """``n(t) = n0 - n0 int_0^t e^{-(t-s)} rho(s) ds`` by the trapezoid rule.

    ``rho_traj`` holds states (``.t`` and ``.rho``) or ``(t, rho)`` pairs in
    increasing time starting at 0. ``max_spacing`` (e.g. ``10 tau``) guards
    against trajectories too sparse for the quadrature.
    """
    items = [(it[0], it[1]) if isinstance(it, tuple) else (it.t, it.rho) for it in rho_traj]
    if not items:
        raise SparseTrajectory("empty trajectory")
    times = np.array([a for a, _ in items])
    if t is None:
        t = float(times[-1])
    sel = times <= t + 1e-12
    times = times[sel]
    fields = [f for (_, f), keep in zip(items, sel) if keep]
    if abs(times[0]) > 1e-12:
        raise SparseTrajectory("trajectory must start at t = 0")
    if max_spacing is not None and len(times) > 1 and np.diff(times).max() > max_spacing + 1e-12:
        raise SparseTrajectory(f"snapshot spacing {np.diff(times).max():.3g} exceeds {max_spacing:.3g}")
    if abs(times[-1] - t) > 1e-9:
        raise SparseTrajectory(f"no snapshot at t = {t}")
    g = fields[0].grid
    n0v = n0.values if isinstance(n0, ScalarField) else float(n0)
    acc = np.zeros(g.shape)
    for i in range(len(times) - 1):
        dt = times[i + 1] - times[i]
        acc += 0.5 * dt * (np.exp(-(t - times[i])) * fields[i].values
                           + np.exp(-(t - times[i + 1])) * fields[i + 1].values)
    return g.field(n0v - n0v * acc, "n")
