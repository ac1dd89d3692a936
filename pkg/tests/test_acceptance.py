"""Acceptance criteria, one test (or pair of tests) per criterion.

Each test records a pass/fail line that is printed in the terminal summary
("acceptance criteria" section). Two literal readings that the discrete
model cannot meet are kept as strict xfails; the reasons are documented in
the design notes: the cell-averaged patch residual (7.b) and whole-run
strict monotonicity of the dendrite shape ratio (14.b).
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE
from tumorpatch import elliptic, master, presets, scheme
from tumorpatch.geometry import center_of_mass
from tumorpatch.grid import GridSpec, bv, constant, lobed

pytestmark = pytest.mark.slow

_CACHE: dict = {}


def record(key, assertions, note=""):
    ok = all(a.passed for a in assertions)
    worst = max(assertions, key=lambda a: (not a.passed, a.measured / a.bound if a.bound else 0.0))
    detail = f"worst {worst.id}: {worst.measured:.4g} vs {worst.bound:.4g}"
    ACCEPTANCE[key] = ("PASS" if ok else "FAIL", f"{detail} {note}".strip())
    return ok


def _failed(assertions):
    return [a.as_dict() for a in assertions if not a.passed]


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def preset(name, out_root):
    if name not in _CACHE:
        _CACHE[name] = presets.run_preset(name, out_root / name)
    return _CACHE[name]


def blob_run(n0, n=128, tau=2e-3, T=0.5):
    key = ("blob", n0, n, tau, T)
    if key not in _CACHE:
        g = GridSpec.square(n, 4.0)
        rho0 = lobed(g, 0.5, 0.3, 3)
        times = [round(0.1 * k, 10) for k in range(int(round(T / 0.1)) + 1)]
        _CACHE[key] = (g, rho0, scheme.run(rho0, constant(g, n0), scheme.SchemeParams(tau=tau, T_final=T),
                                           snapshot_times=times))
    return _CACHE[key]


def test_01_radial_growth_law(out_root):
    # the preset default is 128^2; the criterion asks for 256^2 with tau = 1e-3
    a = presets.radial(out_root / "radial-256", n=256, tau=1e-3)
    _CACHE["radial-256"] = a
    assert record("1", a), _failed(a)


def test_02_mass_law_non_radial():
    asserts = []
    for n0 in (0.5, 1.0, 2.0):
        g, rho0, res = blob_run(n0)
        m0 = rho0.mass()
        c0 = np.array(center_of_mass(rho0))
        for s in res.trajectory:
            ratio = s.rho.mass() / (master.m_of_t(n0, s.t) * m0)
            asserts.append(presets.at_most(f"mass.n0={n0}.t={s.t:.1f}", abs(ratio - 1), 0.01))
            drift = float(np.linalg.norm(np.array(center_of_mass(s.rho)) - c0))
            asserts.append(presets.at_most(f"com.n0={n0}.t={s.t:.1f}", drift, g.hmin))
        asserts += presets.scheme_invariants(f"blob.n0={n0}", res)
    _CACHE["blob-invariants"] = asserts
    assert record("2", asserts), _failed(asserts)


def test_03_master_dynamics_I(out_root):
    a = preset("master-I", out_root)
    assert record("3", a), _failed(a)


def test_04_master_dynamics_II(out_root):
    a = preset("master-II", out_root)
    assert record("4", a), _failed(a)


def test_05_stationary_state(out_root):
    a = preset("stationary", out_root)
    assert record("5", a), _failed(a)


def test_06_comparison_and_contraction(out_root):
    a = presets.run_check("contraction", out_root / "contraction")
    assert any(x.id.startswith("ordering") for x in a)
    assert record("6", a), _failed(a)


def _complementarity_rows():
    g, rho0, res = blob_run(2.0)
    return res.diagnostics[1:]


def test_07a_complementarity():
    rows = _complementarity_rows()
    a = [presets.at_most(f"complementarity.k={r.k}", r.complementarity, 1e-3 * r.mass * r.max_p) for r in rows]
    assert record("7.a", a), _failed(a)


@pytest.mark.xfail(strict=True, reason="cell averages on the moving boundary keep ||rho(1-rho)||_1 "
                                       "near h/(3R) of the mass, above 1e-3 on practical grids")
def test_07b_patch_residual():
    rows = _complementarity_rows()
    a = [presets.at_most(f"patch.k={r.k}", r.patch_residual, 1e-3 * r.mass) for r in rows]
    record("7.b", a, "(expected failure, see design notes)")
    assert all(x.passed for x in a)


def test_08_energy_dissipation(out_root):
    a = []
    for name in presets.PRESETS:
        a += [x for x in preset(name, out_root) if x.id.endswith("energy_dissipation")]
    if "radial-256" in _CACHE:
        a += [x for x in _CACHE["radial-256"] if x.id.endswith("energy_dissipation")]
    for n0 in (0.5, 1.0, 2.0):
        g, rho0, res = blob_run(n0)
        a += [x for x in presets.scheme_invariants(f"blob.n0={n0}", res) if x.id.endswith("energy_dissipation")]
    # every step of every preset: one assertion per run, each the max over its steps
    assert len(a) >= len(presets.PRESETS) + 3
    assert record("8", a), _failed(a)


def test_09_ctransform_oracle():
    w = presets.ctransform_oracle(200)
    a = [presets.at_most("ctransform.2d", w["2d"], 1e-12), presets.at_most("ctransform.1d", w["1d"], 1e-12)]
    assert record("9", a), _failed(a)


def test_10_path_equivalence():
    r = presets.elliptic_vs_scheme()
    a = [presets.at_most("elliptic.rho_l1", r["rho_l1"], r["rho_bound"]),
         presets.at_most("elliptic.w_linf", r["w_linf"], r["w_bound"])]
    assert record("10", a), _failed(a)


def test_11_bv_bounds():
    g, rho0, res = blob_run(2.0, n=256, T=0.3)
    n0 = constant(g, 2.0)
    bv_n0 = bv(n0, zero_extend=False)
    bv_r0 = bv(rho0)
    a = []
    for s in res.trajectory[1:]:
        N, M = scheme.contraction_factors(2.0, s.t)
        a.append(presets.at_most(f"bv.t={s.t:.1f}", bv(s.rho), 1.15 * (N * bv_n0 + M * bv_r0)))
    assert record("11", a), _failed(a)


def test_12_reflection_suite(out_root):
    a = preset("two-blob-merge", out_root)
    assert any(x.id == "two-blob.negative_control" for x in a)
    assert record("12", a), _failed(a)


def test_13_obstacle_certificates():
    a = []
    for amp, radius in ((0.02, 0.8), (0.01, 1.2)):
        f, v = presets.manufactured_obstacle(128, amp=amp, radius=radius)
        sol = elliptic.obstacle_solve(f, tol=1e-9)
        a.append(presets.at_most(f"obstacle.kkt.amp={amp}", elliptic.kkt_residual(sol.w, f), 1e-8))
    r = presets.obstacle_checks()
    a.append(presets.at_most("obstacle.kkt.preset", r["manufactured_kkt_independent"], 1e-8))
    a.append(presets.at_most("obstacle.line_oracle_linf", r["line_w_error"], 1e-6))
    assert record("13", a), _failed(a)


def _dendrite_ratios(out_root):
    preset("dendrite", out_root)
    from tumorpatch.io import read_rows
    rows = read_rows(out_root / "dendrite" / "shape_ratio.csv")
    by_n: dict = {}
    for r in rows:
        by_n.setdefault(int(r["n"]), []).append(float(r["ratio"]))
    return by_n


def test_14a_dendrite_ratio_increases(out_root):
    a = preset("dendrite", out_root)
    assert len(_dendrite_ratios(out_root)) == 2
    assert record("14.a", a), _failed(a)


@pytest.mark.xfail(strict=True, reason="during the growth phase the ratio is flat to within "
                                       "pixel jitter; it rises only once the necrotic core opens")
def test_14b_dendrite_ratio_strictly_monotone(out_root):
    ratios = _dendrite_ratios(out_root)
    a = [presets.above(f"dendrite.n={n}.min_increment", float(np.diff(r).min()), 0.0) for n, r in ratios.items()]
    record("14.b", a, "(expected failure, see design notes)")
    assert all(x.passed for x in a)
