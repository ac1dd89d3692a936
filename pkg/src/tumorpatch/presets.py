"""Named scenarios and config-driven runs, each with machine-checkable assertions.

Every runner writes its artifacts (snapshots, CSV tables) under ``out_dir``
and returns a list of :class:`Assertion`; ``summary.jsonl`` holds one line
``{id, bound, measured, pass}`` per assertion.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import elliptic, geometry, master, scheme
from .grid import GridSpec, ScalarField, ball, balls, constant, lobed
from .io import write_rows, write_snapshot

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Assertion:
    id: str
    bound: float
    measured: float
    passed: bool

    def as_dict(self) -> dict:
        return {"id": self.id, "bound": self.bound, "measured": self.measured, "pass": self.passed}


def at_most(id_: str, measured, bound) -> Assertion:
    m, b = float(measured), float(bound)
    return Assertion(id_, b, m, bool(m <= b))


def above(id_: str, measured, bound=0.0) -> Assertion:
    """Strict lower bound."""
    m, b = float(measured), float(bound)
    return Assertion(id_, b, m, bool(m > b))


def write_summary(out_dir, assertions) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.jsonl"
    with open(path, "w") as fh:
        for a in assertions:
            fh.write(json.dumps(a.as_dict()) + "\n")
    return path


# --------------------------------------------------------------------------
# shared measurements

def mean_radius(rho: ScalarField, n_rays: int = 256) -> float:
    """Mean outermost half-level crossing along rays from the origin."""
    return float(geometry.extract_patch(rho, n_rays).radius.mean())


def boundary_cell_measure(rho: ScalarField, cells: int = 2) -> float:
    """``cells`` layers of boundary cells of ``{rho >= 1/2}``, as an L1 amount."""
    inside = rho.values >= geometry.THRESHOLD
    return cells * float(geometry.boundary_mask(inside).sum() * rho.grid.cell_volume)


def scheme_invariants(prefix: str, result: scheme.RunResult) -> list[Assertion]:
    """Certificates every run of the scheme must carry."""
    rows = result.diagnostics[1:]
    tol = result.params.tol
    if not rows:
        return []
    mass = max(r.mass for r in result.diagnostics)
    out = [
        at_most(f"{prefix}.energy_dissipation", max(r.energy_residual for r in rows), tol * mass),
        at_most(f"{prefix}.feasibility", max(r.infeasibility for r in rows), tol * mass),
        at_most(f"{prefix}.mass_conservation", max(r.mass_defect for r in rows), 1e-8),
        at_most(f"{prefix}.monotone_step", max(r.monotonicity_violation for r in rows), 2 * tol * mass),
    ]
    return out


def rate_fit(times, masses, t0: float, t1: float) -> float:
    """Slope of ``log(d mass / dt)`` over ``[t0, t1]`` (finite differences)."""
    t = np.asarray(times, float)
    m = np.asarray(masses, float)
    dm = np.diff(m) / np.diff(t)
    tm = 0.5 * (t[1:] + t[:-1])
    sel = (tm >= t0) & (tm <= t1) & (dm > 0)
    if sel.sum() < 2:
        raise ValueError("not enough growing steps in the fit window")
    return float(np.polyfit(tm[sel], np.log(dm[sel]), 1)[0])


def shape_ratios(traj) -> list[float]:
    return [geometry.shape_ratio(s.rho) for s in traj]


# --------------------------------------------------------------------------
# presets

def radial(out_dir, n: int = 128, tau: float = 2e-3, T: float = 0.35, side: float = 4.0,
           r0: float = 0.5, n0: float = 2.0, tol: float = 1e-6) -> list[Assertion]:
    """Ball under constant nutrient; radius and mass against the closed form."""
    g = GridSpec.square(n, side)
    checkpoints = [T * k / 5 for k in range(1, 6)]
    params = scheme.SchemeParams(tau=tau, T_final=T, tol=tol)
    t_start = time.perf_counter()
    res = scheme.run(ball(g, r0), constant(g, n0), params, snapshot_times=[0.0] + checkpoints, out_dir=out_dir)
    elapsed = time.perf_counter() - t_start
    h = g.hmin
    rows, asserts = [], []
    for s in res.trajectory[1:]:
        r_num = mean_radius(s.rho)
        r_ex = master.radial_radius(r0, n0, s.t)
        m_ex = master.m_of_t(n0, s.t) * math.pi * r0 * r0
        rows.append({"t": s.t, "radius": r_num, "radius_exact": r_ex, "mass": s.rho.mass(), "mass_exact": m_ex})
        asserts.append(at_most(f"radial.radius_error.t={s.t:.3f}", abs(r_num - r_ex), 2 * h))
        asserts.append(at_most(f"radial.mass_error.t={s.t:.3f}", abs(s.rho.mass() / m_ex - 1), 0.01))
    write_rows(Path(out_dir) / "radial.csv", rows)
    asserts += scheme_invariants("radial", res)
    asserts.append(at_most("radial.runtime_s", elapsed, 600.0))
    return asserts


def stationary(out_dir, n: int = 128, tau: float = 1e-2, T: float = 8.0, side: float = 4.0,
               r0: float = 1.0, n0: float = 0.5, tol: float = 1e-6) -> list[Assertion]:
    """Sub-critical nutrient: the patch saturates at radius ``r0 / sqrt(1 - n0)``."""
    g = GridSpec.square(n, side)
    params = scheme.SchemeParams(tau=tau, T_final=T, tol=tol)
    res = scheme.run(ball(g, r0), constant(g, n0), params, snapshot_times=[0.0, T / 2, T], out_dir=out_dir)
    r_inf = r0 / math.sqrt(1.0 - n0)
    final = res.trajectory[-1]
    rate = rate_fit([r.t for r in res.diagnostics], [r.mass for r in res.diagnostics], 2.0, T)
    rho_inf, _, _ = elliptic.stationary_solve(ball(g, r0), constant(g, n0))
    write_rows(Path(out_dir) / "stationary.csv", [{
        "radius_final": mean_radius(final.rho), "radius_limit": r_inf, "rate": rate,
        "rate_expected": n0 - 1.0, "radius_stationary_solve": mean_radius(rho_inf),
    }])
    return [
        at_most("stationary.radius_error", abs(mean_radius(final.rho) - r_inf), 1.5 * g.hmin),
        at_most("stationary.rate_rel_error", abs(rate / (n0 - 1.0) - 1.0), 0.2),
    ] + scheme_invariants("stationary", res)


def _master_setup(n, tau, T, side, n0, tol, times):
    g = GridSpec.square(n, side)
    rho0 = lobed(g, 0.5, 0.3, 3)
    params = scheme.SchemeParams(tau=tau, T_final=T, tol=tol)
    res = scheme.run(rho0, constant(g, n0), params, snapshot_times=[0.0] + list(times))
    return g, rho0, res


def master_I(out_dir, n: int = 128, tau: float = 2e-3, T: float = 0.3, side: float = 4.0,
             n0: float = 2.0, tol: float = 1e-6) -> list[Assertion]:
    """Full solution against the constant-source flow at ``s = m(t) - 1``."""
    times = [0.1, 0.2, 0.3]
    g, rho0, res = _master_setup(n, tau, T, side, n0, tol, times)
    ss = [master.m_of_t(n0, t) - 1.0 for t in [0.0] + times]
    hs = master.run_hs_source(rho0, ss[-1] + tau, tau, snapshot_times=ss, tol=tol)
    rows = master.equivalence_check_I(res.trajectory, hs, n0)
    write_rows(Path(out_dir) / "master_I.csv", rows)
    _save_pairs(out_dir, res.trajectory, hs, "hs")
    return [at_most(f"master-I.l1_error.t={r['t']:.2f}", r["l1_error"], 0.05) for r in rows if r["t"] > 0] \
        + scheme_invariants("master-I", res)


def master_II(out_dir, n: int = 128, tau: float = 2e-3, T: float = 0.3, side: float = 4.0,
              n0: float = 2.0, tol: float = 1e-6) -> list[Assertion]:
    """Full solution against the confined flow, rescaled by ``m(t)^{-1/d}``, at ``s = ln m(t)``."""
    times = [0.1, 0.2, 0.3]
    g, rho0, res = _master_setup(n, tau, T, side, n0, tol, times)
    ss = [math.log(master.m_of_t(n0, t)) for t in [0.0] + times]
    hp = master.run_hs_potential(rho0, ss[-1] + tau, tau, snapshot_times=ss, tol=tol)
    rows = master.equivalence_check_II(res.trajectory, hp, n0)
    write_rows(Path(out_dir) / "master_II.csv", rows)
    _save_pairs(out_dir, res.trajectory, hp, "hsp")
    return [at_most(f"master-II.l1_error.t={r['t']:.2f}", r["l1_error"], 0.05 + r["resample_floor"])
            for r in rows if r["t"] > 0] + scheme_invariants("master-II", res)


def _save_pairs(out_dir, full, flow, tag):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in full:
        write_snapshot(out / f"rho_{s.k:06d}.bin", s.rho, s.t)
    for s in flow:
        write_snapshot(out / f"{tag}_rho_{s.k:06d}.bin", s.rho, s.t)


def dendrite(out_dir, resolutions=(64, 128), tau: float = 5e-3, T: float = 8.0, side: float = 6.0,
             b: float = 0.4, n0: float = 2.0, n_snap: int = 16, tol: float = 1e-6) -> list[Assertion]:
    """Growth with cell death (b > 0, D = 0); tracks perimeter/sqrt(area) of ``{rho >= 1/2}``.

    Asserted: the ratio at the end exceeds the initial one at every
    resolution. The full sequence is written to ``shape_ratio.csv``.
    """
    asserts, rows = [], []
    times = [T * k / n_snap for k in range(n_snap + 1)]
    for n in resolutions:
        g = GridSpec.square(n, side)
        rho0 = lobed(g, 0.5, 0.1, 5)
        params = scheme.SchemeParams(tau=tau, T_final=T, b=b, tol=tol)
        res = scheme.run(rho0, constant(g, n0), params, snapshot_times=times,
                         out_dir=Path(out_dir) / f"n{n}")
        ratios = shape_ratios(res.trajectory)
        rows += [{"n": n, "t": s.t, "ratio": r, "mass": s.rho.mass()} for s, r in zip(res.trajectory, ratios)]
        asserts.append(above(f"dendrite.n={n}.ratio_increase", ratios[-1] - ratios[0], 0.0))
        asserts += scheme_invariants(f"dendrite.n={n}", res)
    write_rows(Path(out_dir) / "shape_ratio.csv", rows)
    return asserts


def two_blob_setup(g: GridSpec):
    """Large ball left of ``x1 = 0``, small ball right of it; the small one reflected lies inside the large one."""
    return balls(g, [(-0.45, 0.0), (0.45, 0.0)], [0.4, 0.3])


def two_blob_merge(out_dir, n: int = 128, tau: float = 2e-3, T: float = 0.6, side: float = 4.0,
                   n0: float = 2.0, tol: float = 1e-6) -> list[Assertion]:
    """Reflection ordering across ``{x1 = 0}`` through the merge of two patches."""
    g = GridSpec.square(n, side)
    rho0 = two_blob_setup(g)
    times = [T * k / 12 for k in range(13)]
    params = scheme.SchemeParams(tau=tau, T_final=T, tol=tol)
    res = scheme.run(rho0, constant(g, n0), params, snapshot_times=times, out_dir=out_dir)
    normal, offset = (1.0, 0.0), 0.0
    viol, floor = geometry.reflection_violation(res.trajectory, normal, offset, side=-1)
    control, _ = geometry.reflection_violation([res.trajectory[0]], normal, offset, side=1)
    rows, asserts = [], []
    for s, v in zip(res.trajectory, viol):
        allow = floor + boundary_cell_measure(s.rho)
        n_comp = int(ndimage.label(s.rho.values >= geometry.THRESHOLD)[1])
        rows.append({"t": s.t, "violation": v, "allowed": allow, "components": n_comp})
        asserts.append(at_most(f"two-blob.reflection.t={s.t:.2f}", v, allow))
    write_rows(Path(out_dir) / "reflection.csv", rows)
    # the run must start from two separate patches and end with one
    asserts.append(at_most("two-blob.initial_components", abs(rows[0]["components"] - 2), 0))
    asserts.append(at_most("two-blob.merged_components", rows[-1]["components"], 1))
    asserts.append(above("two-blob.negative_control", control[0], 0.0))
    return asserts + scheme_invariants("two-blob", res)


PRESETS = {
    "radial": radial,
    "stationary": stationary,
    "master-I": master_I,
    "master-II": master_II,
    "dendrite": dendrite,
    "two-blob-merge": two_blob_merge,
}


def run_preset(name: str, out_dir) -> list[Assertion]:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    asserts = PRESETS[name](out)
    write_summary(out, asserts)
    return asserts


# --------------------------------------------------------------------------
# config-driven runs

def run_config(cfg, out_dir=None) -> list[Assertion]:
    """Execute a :class:`RunConfig`; returns its assertions and writes the summary."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfg.source)
    g = cfg.grid
    rho0 = cfg.initial.build(g)
    n0 = cfg.nutrient()
    p = cfg.params
    snaps = list(cfg.snapshots) or None
    mode = cfg.mode
    asserts: list[Assertion] = []

    if mode == "scheme":
        res = scheme.run(rho0, n0, p, snapshot_times=snaps, out_dir=out)
        asserts = scheme_invariants("scheme", res)

    elif mode == "elliptic":
        traj = elliptic.evolve_elliptic(rho0, n0, p.tau, p.T_final, snapshot_times=snaps, tol=cfg.obstacle_tol)
        for s in traj:
            write_snapshot(out / f"rho_{s.k:06d}.bin", s.rho, s.t)
            write_snapshot(out / f"w_{s.k:06d}.bin", s.w, s.t)
        write_rows(out / "elliptic.csv", [{"t": s.t, "kkt_residual": s.kkt_residual, "clip": s.clip,
                                           "mass": s.rho.mass()} for s in traj])
        asserts = [at_most("elliptic.kkt_residual", max(s.kkt_residual for s in traj), cfg.obstacle_tol)]

    elif mode in ("hs_source", "hs_potential"):
        fn = master.run_hs_source if mode == "hs_source" else master.run_hs_potential
        traj = fn(rho0, p.T_final, p.tau, snapshot_times=snaps, tol=p.tol)
        m0 = rho0.mass()
        rows = []
        for s in traj:
            write_snapshot(out / f"rho_{s.k:06d}.bin", s.rho, s.t)
            expected = m0 * (1.0 + s.k * p.tau) if mode == "hs_source" else m0
            rows.append({"t": s.t, "mass": s.rho.mass(), "mass_expected": expected})
        write_rows(out / f"{mode}.csv", rows)
        err = max(abs(r["mass"] / r["mass_expected"] - 1.0) for r in rows)
        asserts = [at_most(f"{mode}.mass_law", err, 1e-8)]

    elif mode == "check_master":
        nv = n0.values
        if not np.allclose(nv, nv.flat[0]):
            raise ValueError("check_master needs a constant nutrient")
        c = float(nv.flat[0])
        times = snaps or [p.T_final * k / 3 for k in range(4)]
        res = scheme.run(rho0, n0, p, snapshot_times=times)
        ss = [master.m_of_t(c, s.t) - 1.0 for s in res.trajectory]
        hs = master.run_hs_source(rho0, max(ss) + p.tau, p.tau, snapshot_times=ss, tol=p.tol)
        ls = [math.log(master.m_of_t(c, s.t)) for s in res.trajectory]
        hp = master.run_hs_potential(rho0, max(ls) + p.tau, p.tau, snapshot_times=ls, tol=p.tol)
        r1 = master.equivalence_check_I(res.trajectory, hs, c)
        r2 = master.equivalence_check_II(res.trajectory, hp, c)
        write_rows(out / "master_I.csv", r1)
        write_rows(out / "master_II.csv", r2)
        asserts = [at_most(f"master-I.l1_error.t={r['t']:.3f}", r["l1_error"], 0.05) for r in r1 if r["t"] > 0]
        asserts += [at_most(f"master-II.l1_error.t={r['t']:.3f}", r["l1_error"], 0.05 + r["resample_floor"])
                    for r in r2 if r["t"] > 0]

    elif mode == "check_contraction":
        rho1 = cfg.compare.build(g)
        n1 = constant(g, cfg.compare_n0) if cfg.compare_n0 is not None else n0
        times = snaps or [p.T_final * k / 5 for k in range(6)]
        a = scheme.run(rho0, n0, p, snapshot_times=times)
        b_ = scheme.run(rho1, n1, p, snapshot_times=times)
        asserts = contraction_assertions(a, b_, n0, n1, rho0, rho1, out)

    elif mode == "geometry":
        res = scheme.run(rho0, n0, p, snapshot_times=snaps, out_dir=out)
        normal, offset, side = cfg.hyperplane
        viol, floor = geometry.reflection_violation(res.trajectory, normal, offset, side)
        rows = []
        for s, v in zip(res.trajectory, viol):
            patch = geometry.extract_patch(s.rho)
            lip = geometry.polar_lipschitz(patch) if patch.star_shaped else float("nan")
            rows.append({"t": s.t, "r_min": patch.r_min, "r_max": patch.r_max, "star_shaped": patch.star_shaped,
                         "polar_lipschitz": lip, "reflection_violation": v, "resample_floor": floor,
                         "allowed": floor + boundary_cell_measure(s.rho)})
        write_rows(out / "geometry.csv", rows)
        if rows and rows[0]["reflection_violation"] <= rows[0]["resample_floor"]:
            # hypotheses hold initially: ordering must persist
            asserts = [at_most(f"geometry.reflection.t={r['t']:.3f}", r["reflection_violation"], r["allowed"])
                       for r in rows]
        else:
            log.info("initial data violate the reflection hypothesis; violations reported only")
        asserts += scheme_invariants("geometry", res)

    else:  # parse_config guards this
        raise ValueError(f"unknown mode {mode!r}")

    write_summary(out, asserts)
    return asserts


def contraction_assertions(a, b_, n0a, n0b, rho0a, rho0b, out=None, slack: float = 0.10) -> list[Assertion]:
    """Ordering and L1 contraction between two runs whose data satisfy ``b_ <= a``.

    ``||(rho_a - rho_b)_+||_1`` is checked against ``(1 + slack)`` times
    ``N ||(n_a - n_b)_+||_1 + M ||(rho0_a - rho0_b)_+||_1``; the reverse
    part ``||(rho_b - rho_a)_+||_1`` must stay within two boundary layers.
    """
    fwd = scheme.contraction_bound_check(b_.trajectory, a.trajectory, n0b, n0a, rho0b, rho0a)
    rev = scheme.contraction_bound_check(a.trajectory, b_.trajectory, n0a, n0b, rho0a, rho0b)
    ordered = bool(np.all(rho0b.values <= rho0a.values) and np.all(n0b.values <= n0a.values))
    asserts, rows = [], []
    for f, r, sb in zip(fwd, rev, b_.trajectory):
        row = {"t": f["t"], "N": f["N"], "M": f["M"], "l1_gap": f["lhs"], "bound": f["rhs"],
               "order_violation": r["lhs"], "order_allowed": boundary_cell_measure(sb.rho)}
        rows.append(row)
        asserts.append(at_most(f"contraction.t={f['t']:.3f}", f["lhs"], (1 + slack) * f["rhs"]))
        if ordered:
            asserts.append(at_most(f"ordering.t={f['t']:.3f}", r["lhs"], row["order_allowed"]))
    if out is not None:
        write_rows(Path(out) / "contraction.csv", rows)
    return asserts


# --------------------------------------------------------------------------
# standalone checks (``sim check <mode>``)

def ctransform_oracle(n_instances: int = 200, seed: int = 0) -> dict:
    """Worst deviation of the lattice c-transform from brute force on random data."""
    from .ot_projection import brute_force_ctransform, ctransform

    rng = np.random.default_rng(seed)
    worst = {"2d": 0.0, "1d": 0.0}
    for k in range(n_instances):
        for key, g in (("2d", GridSpec.square(16, float(rng.uniform(0.5, 4.0)))),
                       ("1d", GridSpec.square(64, float(rng.uniform(0.5, 4.0)), dim=1))):
            p = g.field(rng.uniform(-1.0, 1.0, g.shape) * rng.uniform(0.01, 10.0))
            tau = float(10 ** rng.uniform(-4, 0))
            err = np.abs(ctransform(p, tau).values - brute_force_ctransform(p, tau).values).max()
            worst[key] = max(worst[key], float(err))
    return worst


def manufactured_obstacle(n: int = 128, side: float = 4.0, amp: float = 0.02, radius: float = 0.8):
    """Obstacle data with known discrete solution ``w = v``.

    ``v = amp (radius^2 - |x|^2)_+^2``; ``f = 1 - Lap_h v`` where ``v > 0`` and
    ``f = 1 - Lap_h v - s`` with a slack ``s = 1/2`` on the coincidence set.
    """
    g = GridSpec.square(n, side)
    from .grid import laplacian_array

    R2 = g.radius() ** 2
    v = amp * np.clip(radius ** 2 - R2, 0.0, None) ** 2
    lap = laplacian_array(v, g.h)
    f = np.where(v > 0, 1.0 - lap, 1.0 - lap - 0.5)
    if f.min() < 0:
        raise ValueError("amplitude too large: f would be negative")
    return g.field(f, "f"), g.field(v, "w_exact")


def obstacle_line_oracle(x, r0: float, m: float):
    """Exact ``w`` on the line for ``f = m chi_{|x| < r0}`` (``m > 1``): ``{w > 0} = (-m r0, m r0)``."""
    R = m * r0
    ax = np.abs(np.asarray(x, float))
    inner = 0.5 * (R - r0) ** 2 + 0.5 * (m - 1.0) * (r0 ** 2 - ax ** 2)
    outer = 0.5 * np.clip(R - ax, 0.0, None) ** 2
    return np.where(ax < r0, inner, outer)


def obstacle_checks(n: int = 128, n_line: int = 4096, tol: float = 1e-8) -> dict:
    f, v = manufactured_obstacle(n)
    sol = elliptic.obstacle_solve(f, tol=tol)
    out = {
        "manufactured_kkt": sol.kkt_residual,
        "manufactured_kkt_independent": elliptic.kkt_residual(sol.w, f),
        "manufactured_w_error": float(np.abs(sol.w.values - v.values).max()),
    }
    g = GridSpec(1, (4.0,), (n_line,))
    r0, m = 0.5, 3.0
    x = g.coords()[0]
    fl = g.field(np.where(np.abs(x) < r0, m, 0.0), "f")
    sl = elliptic.obstacle_solve(fl, tol=tol)
    out["line_kkt"] = sl.kkt_residual
    out["line_w_error"] = float(np.abs(sl.w.values - obstacle_line_oracle(x, r0, m)).max())
    return out


def elliptic_vs_scheme(n: int = 128, tau: float = 2e-3, T: float = 0.35, side: float = 4.0,
                       r0: float = 0.5, n0: float = 2.0, tol: float = 1e-6, obstacle_tol: float = 1e-8) -> dict:
    """Final density and time-integrated pressure of both formulations on the radial case."""
    g = GridSpec.square(n, side)
    rho0, nut = ball(g, r0), constant(g, n0)
    res = scheme.run(rho0, nut, scheme.SchemeParams(tau=tau, T_final=T, tol=tol))
    ell = elliptic.evolve_elliptic(rho0, nut, tau, T, tol=obstacle_tol)
    a, e = res.trajectory[-1], ell[-1]
    dv = g.cell_volume
    return {
        "rho_l1": float(np.abs(a.rho.values - e.rho.values).sum() * dv),
        "rho_bound": 5 * tau * a.rho.mass(),
        "w_linf": float(np.abs(a.w.values - e.w.values).max()),
        "w_bound": 10 * tau * float(e.w.values.max()),
    }


def check_ctransform(out_dir) -> list[Assertion]:
    w = ctransform_oracle()
    return [at_most("ctransform.2d_vs_brute_force", w["2d"], 1e-12),
            at_most("ctransform.1d_vs_brute_force", w["1d"], 1e-12)]


def check_obstacle(out_dir) -> list[Assertion]:
    r = obstacle_checks()
    write_rows(Path(out_dir) / "obstacle.csv", [r])
    return [at_most("obstacle.manufactured_kkt", r["manufactured_kkt_independent"], 1e-8),
            at_most("obstacle.line_oracle_linf", r["line_w_error"], 1e-6)]


def check_elliptic(out_dir) -> list[Assertion]:
    r = elliptic_vs_scheme()
    write_rows(Path(out_dir) / "elliptic_vs_scheme.csv", [r])
    return [at_most("elliptic.rho_l1", r["rho_l1"], r["rho_bound"]),
            at_most("elliptic.w_linf", r["w_linf"], r["w_bound"])]


def check_contraction(out_dir, n: int = 128, tau: float = 2e-3, T: float = 0.35, side: float = 4.0,
                      n0: float = 2.0) -> list[Assertion]:
    g = GridSpec.square(n, side)
    big, small, nut = ball(g, 0.5), ball(g, 0.4), constant(g, n0)
    params = scheme.SchemeParams(tau=tau, T_final=T)
    times = [T * k / 5 for k in range(6)]
    a = scheme.run(big, nut, params, snapshot_times=times)
    b_ = scheme.run(small, nut, params, snapshot_times=times)
    return contraction_assertions(a, b_, nut, nut, big, small, out_dir)


def check_master(out_dir) -> list[Assertion]:
    return master_I(Path(out_dir) / "I") + master_II(Path(out_dir) / "II")


CHECKS = {
    "ctransform": check_ctransform,
    "obstacle": check_obstacle,
    "elliptic": check_elliptic,
    "contraction": check_contraction,
    "master": check_master,
}


def run_check(name: str, out_dir) -> list[Assertion]:
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}; available: {', '.join(CHECKS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    asserts = CHECKS[name](out)
    write_summary(out, asserts)
    return asserts
