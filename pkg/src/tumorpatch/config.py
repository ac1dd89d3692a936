"""Run configuration: a flat TOML document validated into :class:`RunConfig`.

Example::

    mode = "scheme"

    [grid]
    n = 128
    side = 4.0

    [scheme]
    tau = 2e-3
    T = 0.35

    [initial]
    shape = "ball"
    radius = 0.5

    [nutrient]
    n0 = 2.0

    [output]
    dir = "out/radial"
    snapshots = [0.0, 0.175, 0.35]

Sections and keys are listed in ``SCHEMA``; unknown keys are rejected so
that typos do not silently fall back to defaults.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .grid import GridSpec, ScalarField, ball, balls, constant, lobed
from .io import read_snapshot
from .scheme import SchemeParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("scheme", "elliptic", "hs_source", "hs_potential", "check_master",
         "check_contraction", "geometry")
SHAPES = ("ball", "blob", "balls", "file")

_NUM = (int, float)
_SHAPE_KEYS = {
    "shape": str, "radius": _NUM, "center": list, "amp": _NUM, "lobes": int,
    "centers": list, "radii": list, "path": str,
}
SCHEMA = {
    "": {"mode": str},
    "grid": {"n": int, "side": _NUM, "dim": int},
    "scheme": {"tau": _NUM, "T": _NUM, "b": _NUM, "D": _NUM, "tol": _NUM, "max_iters": int},
    "initial": dict(_SHAPE_KEYS),
    "nutrient": {"n0": _NUM, "path": str},
    "output": {"dir": str, "snapshots": list},
    "obstacle": {"tol": _NUM},
    "compare": dict(_SHAPE_KEYS, n0=_NUM),
    "hyperplane": {"normal": list, "offset": _NUM, "side": int},
}
REQUIRED = {"": ("mode",), "grid": ("n",), "scheme": ("tau", "T")}


@dataclass(frozen=True)
class InitialSpec:
    shape: str = "ball"
    radius: float = 0.5
    center: tuple = ()
    amp: float = 0.3
    lobes: int = 3
    centers: tuple = ()
    radii: tuple = ()
    path: str | None = None

    def build(self, grid: GridSpec) -> ScalarField:
        if self.shape == "ball":
            return ball(grid, self.radius, self.center or None)
        if self.shape == "blob":
            return lobed(grid, self.radius, self.amp, self.lobes)
        if self.shape == "balls":
            return balls(grid, self.centers, self.radii)
        f, _ = read_snapshot(self.path)
        if f.grid != grid:
            raise SchemaError("initial.path", f"field grid {f.grid} differs from [grid]")
        return f.with_values(f.values, "rho0")


@dataclass(frozen=True)
class RunConfig:
    mode: str
    grid: GridSpec
    params: SchemeParams
    initial: InitialSpec
    n0: float = 2.0
    n0_path: str | None = None
    snapshots: tuple = ()
    out_dir: str = "out"
    obstacle_tol: float = 1e-8
    compare: InitialSpec | None = None
    compare_n0: float | None = None
    hyperplane: tuple | None = None          # (normal, offset, side)
    source: str = field(default="", repr=False)

    def nutrient(self) -> ScalarField:
        if self.n0_path is None:
            return constant(self.grid, self.n0)
        f, _ = read_snapshot(self.n0_path)
        if f.grid != self.grid:
            raise SchemaError("nutrient.path", "field grid differs from [grid]")
        return f.with_values(f.values, "n0")


def _key_line(text: str, section: str, key: str | None) -> int | None:
    """Line (1-based) where ``key`` is set inside ``[section]``, or the section header."""
    current = ""
    header_line = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if m:
            current = m.group(1)
            if current == section:
                header_line = i
            continue
        if current == section and key is not None and re.match(rf"{re.escape(key)}\s*=", line):
            return i
    return header_line


def _err(text, section, key, reason):
    path = f"{section}.{key}" if section and key else (key or section)
    return SchemaError(path, reason, _key_line(text, section, key))


def _check_types(doc: dict, text: str) -> None:
    for name, body in doc.items():
        if name not in SCHEMA[""] and isinstance(body, dict):
            if name not in SCHEMA:
                raise _err(text, name, None, f"unknown section (known: {sorted(k for k in SCHEMA if k)})")
            spec = SCHEMA[name]
            for key, val in body.items():
                if key not in spec:
                    raise _err(text, name, key, f"unknown key (known: {sorted(spec)})")
                _check_value(text, name, key, val, spec[key])
        elif name in SCHEMA[""]:
            _check_value(text, "", name, body, SCHEMA[""][name])
        else:
            raise _err(text, "", name, "unknown top-level key")
    for section, keys in REQUIRED.items():
        body = doc if section == "" else doc.get(section, {})
        for key in keys:
            if key not in body:
                raise _err(text, section, key, "required key missing")


def _check_value(text, section, key, val, typ):
    ok = isinstance(val, typ) and not (isinstance(val, bool) and typ is not bool)
    if not ok:
        want = typ.__name__ if isinstance(typ, type) else "number"
        raise _err(text, section, key, f"expected {want}, got {type(val).__name__}")


def _shape(text: str, section: str, body: dict, grid: GridSpec) -> InitialSpec:
    shape = body.get("shape", "ball")
    if shape not in SHAPES:
        raise _err(text, section, "shape", f"unknown shape {shape!r} (known: {', '.join(SHAPES)})")
    if shape == "file" and "path" not in body:
        raise _err(text, section, "path", "shape 'file' needs a path")
    if shape == "blob" and grid.dim != 2:
        raise _err(text, section, "shape", "blob needs dim = 2")
    if shape == "balls":
        c, r = body.get("centers"), body.get("radii")
        if not c or not r or len(c) != len(r):
            raise _err(text, section, "centers", "balls need equally long centers and radii")
        if any(len(ci) != grid.dim for ci in c):
            raise _err(text, section, "centers", f"every center needs {grid.dim} coordinates")
    center = tuple(float(x) for x in body.get("center", ()))
    if center and len(center) != grid.dim:
        raise _err(text, section, "center", f"needs {grid.dim} coordinates")
    radius = float(body.get("radius", 0.5))
    if radius <= 0:
        raise _err(text, section, "radius", "must be positive")
    return InitialSpec(
        shape=shape, radius=radius, center=center,
        amp=float(body.get("amp", 0.3)), lobes=int(body.get("lobes", 3)),
        centers=tuple(tuple(float(x) for x in ci) for ci in body.get("centers", ())),
        radii=tuple(float(x) for x in body.get("radii", ())),
        path=body.get("path"),
    )


def parse_config(text: str) -> RunConfig:
    """Validate a TOML run description; raises SchemaError on the first problem."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise SchemaError("<document>", f"not valid TOML: {exc}", int(m.group(1)) if m else None) from None
    _check_types(doc, text)

    mode = doc["mode"]
    if mode not in MODES:
        raise _err(text, "", "mode", f"unknown mode {mode!r} (known: {', '.join(MODES)})")

    gsec = doc["grid"]
    dim = gsec.get("dim", 2)
    if dim not in (1, 2):
        raise _err(text, "grid", "dim", "must be 1 or 2")
    if gsec["n"] < 8:
        raise _err(text, "grid", "n", "need at least 8 cells per axis")
    side = float(gsec.get("side", 4.0))
    if side <= 0:
        raise _err(text, "grid", "side", "must be positive")
    grid = GridSpec.square(gsec["n"], side, dim)

    s = doc["scheme"]
    tau, T = float(s["tau"]), float(s["T"])
    b, D = float(s.get("b", 0.0)), float(s.get("D", 0.0))
    if tau <= 0:
        raise _err(text, "scheme", "tau", "must be positive")
    if T < 0:
        raise _err(text, "scheme", "T", "must be nonnegative")
    if b < 0:
        raise _err(text, "scheme", "b", "must be nonnegative")
    if D < 0:
        raise _err(text, "scheme", "D", "must be nonnegative")
    if tau * b >= 1:
        raise _err(text, "scheme", "b",
                   f"tau*b = {tau * b:.3g}; the growth step rho -> rho (1 + tau (n - b)) is only "
                   "monotone (rho^k (1 - tau b) <= rho^(k+1)) when tau*b < 1")
    tol = float(s.get("tol", 1e-6))
    if not 0 < tol < 1:
        raise _err(text, "scheme", "tol", "must lie in (0, 1)")
    params = SchemeParams(tau=tau, T_final=T, b=b, D=D, tol=tol, max_iters=int(s.get("max_iters", 500)))
    if mode == "elliptic" and (b != 0 or D != 0):
        raise _err(text, "scheme", "b", "elliptic mode needs b = D = 0")

    initial = _shape(text, "initial", doc.get("initial", {}), grid)
    nut = doc.get("nutrient", {})
    n0 = float(nut.get("n0", 2.0))
    if n0 < 0:
        raise _err(text, "nutrient", "n0", "must be nonnegative")

    out = doc.get("output", {})
    snaps = out.get("snapshots", [])
    for t in snaps:
        if not isinstance(t, _NUM) or isinstance(t, bool) or not 0 <= t <= T + 1e-12:
            raise _err(text, "output", "snapshots", f"snapshot time {t!r} outside [0, T = {T}]")

    compare = compare_n0 = None
    if mode == "check_contraction":
        if "compare" not in doc:
            raise _err(text, "compare", None, "check_contraction needs a [compare] section")
        compare = _shape(text, "compare", doc["compare"], grid)
        compare_n0 = float(doc["compare"].get("n0", n0))

    hyper = None
    if "hyperplane" in doc:
        hsec = doc["hyperplane"]
        normal = tuple(float(x) for x in hsec.get("normal", [1.0] + [0.0] * (dim - 1)))
        if len(normal) != dim or not any(normal):
            raise _err(text, "hyperplane", "normal", f"needs {dim} components, not all zero")
        side_ = int(hsec.get("side", 1))
        if side_ not in (-1, 1):
            raise _err(text, "hyperplane", "side", "must be 1 or -1")
        hyper = (normal, float(hsec.get("offset", 0.0)), side_)
    elif mode == "geometry":
        raise _err(text, "hyperplane", None, "geometry mode needs a [hyperplane] section")

    return RunConfig(
        mode=mode, grid=grid, params=params, initial=initial, n0=n0,
        n0_path=nut.get("path"), snapshots=tuple(float(t) for t in snaps),
        out_dir=out.get("dir", "out"),
        obstacle_tol=float(doc.get("obstacle", {}).get("tol", 1e-8)),
        compare=compare, compare_n0=compare_n0, hyperplane=hyper, source=text,
    )


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise SchemaError(str(p), "config must be UTF-8") from None
    return parse_config(text)
