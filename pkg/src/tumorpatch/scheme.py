"""Time stepping of the density/nutrient system by repeated Wasserstein projection.

One step of size ``tau``::

    rho^{k+1} = project(rho^k (1 + tau (n^k - b)))
    n^{k+1}   = heat(tau D) [ n^k (1 - tau rho^{k+1}) ]
    w^{k+1}   = w^k + tau p^{k+1}
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatch, NutrientNegative, SnapshotScheduleEmpty
from .geometry import boundary_radii, center_of_mass
from .grid import GridSpec, ScalarField, bv, bv_a, check_finite, heat_step, same_grid
from .io import write_rows, write_snapshot
from .ot_projection import ProjectionResult, project

log = logging.getLogger(__name__)

ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class SchemeParams:
    tau: float
    T_final: float
    b: float = 0.0
    D: float = 0.0
    tol: float = 1e-6
    max_iters: int = 500
    grid: GridSpec | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.b < 0 or self.D < 0:
            raise ValueError("b and D must be nonnegative")
        if self.tau * self.b >= 1:
            raise ValueError(f"tau*b = {self.tau * self.b:.3g} must be < 1 for the step to stay monotone")
        if self.T_final < 0:
            raise ValueError("T_final must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.T_final / self.tau))


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    rho: ScalarField
    n: ScalarField
    p: ScalarField
    eta: ScalarField | None
    w: ScalarField
    k: int = 0

    @classmethod
    def initial(cls, rho0: ScalarField, n0: ScalarField) -> "SimState":
        g = same_grid(rho0, n0)
        z = g.zeros
        return cls(0.0, rho0.with_values(rho0.values, "rho"), n0.with_values(n0.values, "n"),
                   z("p"), z("eta"), z("w"), 0)


@dataclass
class DiagnosticsRow:
    k: int
    t: float
    mass: float
    bv: float
    bv_a: float
    energy_residual: float
    patch_residual: float
    complementarity: float
    monotonicity_violation: float
    lipschitz_excess: float
    r_min: float
    r_max: float
    center: tuple
    max_p: float
    iterations: int
    infeasibility: float
    mass_defect: float


def growth_source(state: SimState, params: SchemeParams) -> ScalarField:
    mu = state.rho.values * (1.0 + params.tau * (state.n.values - params.b))
    return state.rho.with_values(mu, "mu")


def advance(state: SimState, params: SchemeParams) -> tuple[SimState, ProjectionResult]:
    """One step; also returns the projection certificate."""
    tau = params.tau
    mu = growth_source(state, params)
    if mu.values.min() < 0:
        raise NutrientNegative("growth factor became negative; reduce tau")
    res = project(mu, tau, tol=params.tol, max_iters=params.max_iters, p0=state.p)
    rho = res.rho.values
    n_new = state.n.values * (1.0 - tau * rho)
    if params.D > 0:
        n_new = heat_step(state.n.with_values(n_new), tau * params.D).values
    if n_new.min() < -params.tol:
        raise NutrientNegative(f"nutrient undershoots to {n_new.min():.3g}; reduce tau")
    eta = None
    if params.D == 0 and state.eta is not None:
        # eta = n0 - n, carried by the same multiplicative rule
        eta = state.eta.with_values(state.eta.values + state.n.values - n_new)
    p = res.dual.p
    new = SimState(
        t=(state.k + 1) * tau,
        rho=res.rho,
        n=state.n.with_values(n_new),
        p=p,
        eta=eta,
        w=state.w.with_values(state.w.values + tau * p.values),
        k=state.k + 1,
    )
    return new, res


def step(state: SimState, params: SchemeParams) -> SimState:
    return advance(state, params)[0]


def dirichlet_energy(p: ScalarField) -> float:
    """``sum |D_h p|^2 h^d`` over cell faces, zero beyond the wall."""
    g = p.grid
    total = 0.0
    for ax, hx in enumerate(g.h):
        pad = [(0, 0)] * g.dim
        pad[ax] = (1, 1)
        d = np.diff(np.pad(p.values, pad), axis=ax) / hx
        total += (d * d).sum()
    return float(total * g.cell_volume)


def energy_residual(prev: SimState, new: SimState, params: SchemeParams) -> float:
    """``max(0, 1/2 ||grad p||^2 - int rho^k (n^k - b) p^{k+1})``."""
    dv = prev.rho.grid.cell_volume
    rhs = float((prev.rho.values * (prev.n.values - params.b) * new.p.values).sum() * dv)
    return max(0.0, 0.5 * dirichlet_energy(new.p) - rhs)


def _snapshot_steps(times, params: SchemeParams) -> list[int]:
    if times is None:
        return sorted({0, params.n_steps})
    times = list(times)
    if not times:
        raise SnapshotScheduleEmpty("no snapshot times requested")
    out = set()
    for t in times:
        if t < -1e-12 or t > params.T_final + 1e-9:
            raise ValueError(f"snapshot time {t} outside [0, {params.T_final}]")
        out.add(min(int(round(t / params.tau)), params.n_steps))
    return sorted(out)


@dataclass
class RunResult:
    trajectory: list
    diagnostics: list
    params: SchemeParams
    n0: ScalarField = field(repr=False, default=None)

    def times(self):
        return [s.t for s in self.trajectory]

    def at(self, t: float) -> SimState:
        i = int(np.argmin([abs(s.t - t) for s in self.trajectory]))
        return self.trajectory[i]


def run(rho0: ScalarField, n0: ScalarField, params: SchemeParams, snapshot_times=None,
        out_dir=None, patch_check: bool | None = None, on_step: Callable | None = None) -> RunResult:
    """March from ``(rho0, n0)`` to ``T_final``.

    Diagnostics are recorded every step; full states only at the requested
    snapshot times (rounded to the nearest step). ``out_dir`` receives one
    snapshot file per field and time plus ``diagnostics.csv``.
    """
    check_finite(rho0, "rho0")
    check_finite(n0, "n0")
    g = same_grid(rho0, n0)
    if params.grid is not None and params.grid != g:
        raise GridMismatch("initial data grid differs from params.grid")
    if rho0.values.min() < 0 or rho0.values.max() > 1 + 1e-12:
        raise ValueError("rho0 must take values in [0, 1]")
    if n0.values.min() < 0:
        raise ValueError("n0 must be nonnegative")
    keep = set(_snapshot_steps(snapshot_times, params))
    if patch_check is None:
        patch_check = params.b == 0 and bool(np.all((rho0.values == 0) | (rho0.values == 1)))

    n0max = float(n0.values.max())
    state = SimState.initial(rho0, n0)
    traj = [state] if 0 in keep else []
    rows = [_row(state, None, None, params, n0max, patch_check)]
    for k in range(params.n_steps):
        new, res = advance(state, params)
        row = _row(new, state, res, params, n0max, patch_check)
        rows.append(row)
        if on_step is not None:
            on_step(new, row)
        state = new
        if new.k in keep:
            traj.append(new)
    result = RunResult(traj, rows, params, n0)
    if out_dir is not None:
        save_run(result, out_dir)
    return result


def _row(new: SimState, prev: SimState | None, res: ProjectionResult | None,
         params: SchemeParams, n0max: float, patch_check: bool) -> DiagnosticsRow:
    g = new.rho.grid
    dv = g.cell_volume
    rho = new.rho.values
    mass = float(rho.sum() * dv)
    r_min, r_max = boundary_radii(new.rho)
    patch_res = float((np.abs(rho * (1.0 - rho))).sum() * dv) if patch_check else float("nan")
    comp = float((new.p.values * np.abs(1.0 - rho)).sum() * dv)
    bva = bv_a(new.rho, ROTATION) if g.dim == 2 else 0.0
    if prev is None:
        return DiagnosticsRow(new.k, new.t, mass, bv(new.rho), bva, 0.0, patch_res, comp, 0.0, 0.0,
                              r_min, r_max, center_of_mass(new.rho), 0.0, 0, 0.0, 0.0)
    tau = params.tau
    mono = float(np.clip(prev.rho.values * (1.0 - tau * params.b) - rho, 0.0, None).sum() * dv)
    step_l1 = float(np.abs(rho - prev.rho.values).sum() * dv)
    sup_mass = max(mass, float(prev.rho.values.sum() * dv))
    lip_bound = 2.0 * tau * (2.0 * params.b + n0max) * sup_mass
    mu_mass = float(growth_source(prev, params).values.sum() * dv)
    return DiagnosticsRow(
        k=new.k, t=new.t, mass=mass, bv=bv(new.rho), bv_a=bva,
        energy_residual=energy_residual(prev, new, params),
        patch_residual=patch_res, complementarity=comp,
        monotonicity_violation=mono,
        lipschitz_excess=max(0.0, step_l1 - lip_bound),
        r_min=r_min, r_max=r_max, center=center_of_mass(new.rho),
        max_p=float(new.p.values.max()), iterations=res.iterations,
        infeasibility=res.infeasibility,
        mass_defect=abs(mass - mu_mass) / max(mu_mass, 1e-300),
    )


def save_run(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in result.trajectory:
        for name in ("rho", "n", "p", "w"):
            f = getattr(s, name)
            write_snapshot(out / f"{name}_{s.k:06d}.bin", f.with_values(f.values, name), s.t)
    write_rows(out / "diagnostics.csv", result.diagnostics)
    return out


def time_lipschitz_excess(traj: Sequence[SimState], params: SchemeParams, n0max: float) -> float:
    """Largest ``||rho(t1) - rho(t0)||_1 - (t1 - t0 + tau)(2b + ||n0||) sup-mass`` over snapshot pairs."""
    worst = -math.inf
    masses = [s.rho.mass() for s in traj]
    sup_mass = max(masses) if masses else 0.0
    for i in range(len(traj)):
        for j in range(i + 1, len(traj)):
            a, b = traj[i], traj[j]
            lhs = float(np.abs(b.rho.values - a.rho.values).sum() * a.rho.grid.cell_volume)
            rhs = (b.t - a.t + params.tau) * (2 * params.b + n0max) * sup_mass
            worst = max(worst, lhs - rhs)
    return worst


# --------------------------------------------------------------------------
# contraction

def contraction_factors(n0_sup: float, t: float) -> tuple[float, float]:
    """``N(t) = int_0^t e^{(a-1)s} ds`` and ``M(t) = a N(t) + 1`` with ``a = ||n0||_inf``."""
    a = float(n0_sup)
    if abs(a - 1.0) < 1e-12:
        N = t
    else:
        N = math.expm1((a - 1.0) * t) / (a - 1.0)
    return N, a * N + 1.0


def contraction_bound_check(traj0, traj1, n0_0: ScalarField, n0_1: ScalarField,
                            rho0_0: ScalarField, rho0_1: ScalarField) -> list[dict]:
    """Per-snapshot excess of ``||(rho1 - rho0)_+||_1`` over ``N ||(n1 - n0)_+||_1 + M ||(r1 - r0)_+||_1``.

    Nonpositive excess means the bound holds.
    """
    g = same_grid(n0_0, n0_1, rho0_0, rho0_1)
    if len(traj0) != len(traj1):
        raise GridMismatch("trajectories have different snapshot counts")
    dv = g.cell_volume
    dn = float(np.clip(n0_1.values - n0_0.values, 0, None).sum() * dv)
    dr = float(np.clip(rho0_1.values - rho0_0.values, 0, None).sum() * dv)
    a = float(n0_0.values.max())
    rows = []
    for s0, s1 in zip(traj0, traj1):
        same_grid(s0.rho, s1.rho, n0_0)
        if abs(s0.t - s1.t) > 1e-12:
            raise GridMismatch("snapshot times differ")
        lhs = float(np.clip(s1.rho.values - s0.rho.values, 0, None).sum() * dv)
        N, M = contraction_factors(a, s0.t)
        rhs = N * dn + M * dr
        rows.append({"t": s0.t, "lhs": lhs, "rhs": rhs, "N": N, "M": M, "excess": lhs - rhs})
    return rows
