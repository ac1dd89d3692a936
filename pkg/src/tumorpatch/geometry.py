"""Free-boundary and symmetry diagnostics on discrete densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BallNotContained, EmptyPatch, NoFinitePairs, NotStarShaped
from .grid import GridSpec, ScalarField

THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class PatchGeometry:
    indicator: np.ndarray            # bool, rho >= 1/2
    boundary_cells: np.ndarray       # (k, dim) integer indices
    center_of_mass: tuple
    r_min: float
    r_max: float
    theta: np.ndarray                # ray angles (2D) or [0, pi] (1D)
    radius: np.ndarray               # outermost crossing per ray
    crossings: np.ndarray            # number of threshold crossings per ray
    grid: GridSpec = None

    @property
    def star_shaped(self) -> bool:
        return bool(np.all(self.crossings == 1))


def boundary_mask(inside: np.ndarray) -> np.ndarray:
    """Inside cells with at least one face neighbour outside (box exterior counts as outside)."""
    padded = np.pad(inside, 1, constant_values=False)
    out = np.zeros_like(inside)
    for ax in range(inside.ndim):
        for shift in (-1, 1):
            nb = np.roll(padded, shift, axis=ax)[tuple(slice(1, -1) for _ in range(inside.ndim))]
            out |= ~nb
    return inside & out


def center_of_mass(rho: ScalarField) -> tuple:
    m = rho.values.sum()
    if m <= 0:
        return tuple(0.0 for _ in range(rho.grid.dim))
    return tuple(float((rho.values * c).sum() / m) for c in rho.grid.coords())


def sample(values: np.ndarray, grid: GridSpec, pts: np.ndarray) -> np.ndarray:
    """Bilinear (linear in 1D) interpolation at physical points ``pts`` of shape (dim, ...)."""
    idx = []
    for i in range(grid.dim):
        u = (pts[i] - grid.axis(i)[0]) / grid.h[i]
        # round-off can push points on the outer cell centres just past the edge
        u = np.where((u < 0) & (u > -1e-9), 0.0, u)
        u = np.where((u > grid.N[i] - 1) & (u < grid.N[i] - 1 + 1e-9), grid.N[i] - 1.0, u)
        idx.append(u)
    return ndimage.map_coordinates(values, idx, order=1, mode="constant", cval=0.0)


def ray_cast(values: np.ndarray, grid: GridSpec, theta: np.ndarray, level: float = THRESHOLD,
             step: float | None = None):
    """Level crossings of ``values`` along rays from the origin.

    Returns the outermost crossing radius (sub-sample linear interpolation)
    and the number of crossings per ray.
    """
    step = step or grid.hmin / 4.0
    rmax = 0.5 * float(np.hypot(*grid.L)) if grid.dim == 2 else 0.5 * grid.L[0]
    r = np.arange(0.0, rmax + step, step)
    dirs = np.stack([np.cos(theta), np.sin(theta)]) if grid.dim == 2 else np.array([np.cos(theta)])
    pts = dirs[:, :, None] * r[None, None, :]
    f = sample(values, grid, pts) - level
    sgn = f >= 0
    change = sgn[:, 1:] != sgn[:, :-1]
    crossings = change.sum(axis=1)
    radius = np.zeros(theta.size)
    for k in range(theta.size):
        where = np.flatnonzero(change[k])
        if where.size == 0:
            continue
        j = where[-1]
        f0, f1 = f[k, j], f[k, j + 1]
        radius[k] = r[j] + step * f0 / (f0 - f1)
    return radius, crossings


def extract_patch(rho: ScalarField, n_rays: int = 256) -> PatchGeometry:
    """Threshold ``rho`` at one half and describe the resulting set."""
    g = rho.grid
    inside = rho.values >= THRESHOLD
    if not inside.any():
        raise EmptyPatch("no cell reaches the threshold 1/2")
    bnd = boundary_mask(inside)
    if g.dim == 2:
        theta = np.linspace(0.0, 2 * np.pi, n_rays, endpoint=False)
    else:
        theta = np.array([0.0, np.pi])
    radius, crossings = ray_cast(rho.values, g, theta)
    return PatchGeometry(
        indicator=inside,
        boundary_cells=np.argwhere(bnd),
        center_of_mass=center_of_mass(rho),
        r_min=float(radius.min()),
        r_max=float(radius.max()),
        theta=theta,
        radius=radius,
        crossings=crossings,
        grid=g,
    )


def contour_length(rho: ScalarField, level: float = THRESHOLD) -> float:
    """Length of the ``level`` contour of the bilinear interpolant (marching squares).

    The field is padded by one ring of zeros so contours touching the box
    close up. Saddle squares are resolved by the value at the square centre.
    """
    g = rho.grid
    if g.dim != 2:
        raise ValueError("contour length needs a 2D grid")
    v = np.pad(rho.values, 1) - level
    hx, hy = g.h
    a, b = v[:-1, :-1], v[1:, :-1]
    c, d = v[:-1, 1:], v[1:, 1:]

    def cross(u, w):
        # crossing fraction along an edge, nan where the edge is not cut
        hit = (u >= 0) != (w >= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(hit, u / (u - w), np.nan)
        return s

    sb, st = cross(a, b), cross(c, d)      # edges along x at y=0 and y=1
    sl, sr = cross(a, c), cross(b, d)      # edges along y at x=0 and x=1
    pts = {
        "b": (sb * hx, 0.0 * sb),
        "t": (st * hx, 0.0 * st + hy),
        "l": (0.0 * sl, sl * hy),
        "r": (0.0 * sr + hx, sr * hy),
    }

    def seg(e1, e2):
        x1, y1 = pts[e1]
        x2, y2 = pts[e2]
        return np.hypot(x1 - x2, y1 - y2)

    n_cut = sum(np.isfinite(s).astype(int) for s in (sb, st, sl, sr))
    total = 0.0
    two = n_cut == 2
    if two.any():
        # the two finite crossings of each square, in a fixed edge order
        names = ("b", "t", "l", "r")
        length = np.zeros(a.shape)
        for i, e1 in enumerate(names):
            for e2 in names[i + 1:]:
                m = two & np.isfinite(pts[e1][0]) & np.isfinite(pts[e2][0]) \
                    & np.isfinite(pts[e1][1]) & np.isfinite(pts[e2][1])
                length[m] = seg(e1, e2)[m]
        total += float(length[two].sum())
    four = n_cut == 4
    if four.any():
        centre = 0.25 * (a + b + c + d)
        cut_ad = (a >= 0) != (centre >= 0)
        l_ad = seg("b", "l") + seg("r", "t")
        l_bc = seg("b", "r") + seg("l", "t")
        total += float(np.where(cut_ad, l_ad, l_bc)[four].sum())
    return total


def shape_ratio(rho: ScalarField, level: float = THRESHOLD) -> float:
    """``perimeter / sqrt(area)`` of ``{rho >= level}``; ``2 sqrt(pi)`` for a disc."""
    area = float((rho.values >= level).sum() * rho.grid.cell_volume)
    if area <= 0:
        raise EmptyPatch("no cell reaches the threshold")
    return contour_length(rho, level) / np.sqrt(area)


def boundary_radii(rho: ScalarField) -> tuple[float, float]:
    """Min and max distance from the origin of the threshold-1/2 boundary cells."""
    inside = rho.values >= THRESHOLD
    if not inside.any():
        return 0.0, 0.0
    r = rho.grid.radius()[boundary_mask(inside)]
    return float(r.min()), float(r.max())


# --------------------------------------------------------------------------
# reflections

def _reflect_points(grid: GridSpec, normal, offset):
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    X = np.stack(grid.coords())
    s = np.tensordot(nu, X, axes=1) - offset
    return X - 2.0 * s[None] * nu.reshape((-1,) + (1,) * grid.dim), s


def _exact_reflection(values: np.ndarray, grid: GridSpec, normal, offset):
    """Cell permutation for hyperplanes that map cell centres onto cell centres, else None."""
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    h = grid.h
    for ax in range(grid.dim):
        if np.allclose(np.abs(nu), np.eye(grid.dim)[ax]):
            # x -> 2c - x along axis ax: index i -> 2c/h + N - 1 - i
            c = offset * nu[ax]
            shift = 2.0 * c / h[ax]
            if abs(shift - round(shift)) > 1e-9:
                return None
            n = grid.N[ax]
            src = int(round(shift)) + n - 1 - np.arange(n)
            valid = (src >= 0) & (src < n)
            out = np.zeros_like(values)
            sl_dst = [slice(None)] * grid.dim
            sl_src = [slice(None)] * grid.dim
            sl_dst[ax] = np.flatnonzero(valid)
            sl_src[ax] = src[valid]
            out[tuple(sl_dst)] = values[tuple(sl_src)]
            return out
    if grid.dim == 2 and grid.N[0] == grid.N[1] and np.isclose(h[0], h[1]):
        if np.isclose(abs(nu[0]), abs(nu[1])):
            # diagonal: (x1, x2) -> (x2 + a, x1 - a) or (-x2 + a, -x1 + a)
            a = offset * np.sqrt(2.0)
            k = a / h[0]
            if abs(k - round(k)) > 1e-9:
                return None
            k = int(round(k))
            n = grid.N[0]
            i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            if nu[0] * nu[1] < 0:
                # normal along (1, -1): reflection swaps coordinates and shifts
                sgn = 1 if nu[0] > 0 else -1
                si, sj = j + sgn * k, i - sgn * k
            else:
                sgn = 1 if nu[0] > 0 else -1
                si, sj = n - 1 - j + sgn * k, n - 1 - i + sgn * k
            valid = (si >= 0) & (si < n) & (sj >= 0) & (sj < n)
            out = np.zeros_like(values)
            out[valid] = values[si[valid], sj[valid]]
            return out
    return None


def reflect(field: ScalarField, normal, offset: float, exact_only: bool = False) -> tuple[ScalarField, bool]:
    """``field o phi_H`` for ``H = {x . normal = offset}``; returns (field, exact)."""
    g = field.grid
    ex = _exact_reflection(field.values, g, normal, offset)
    if ex is not None:
        return field.with_values(ex), True
    if exact_only:
        raise ValueError("hyperplane does not map cells onto cells")
    pts, _ = _reflect_points(g, normal, offset)
    return field.with_values(sample(field.values, g, pts)), False


def half_space(grid: GridSpec, normal, offset: float, side: int = 1) -> np.ndarray:
    _, s = _reflect_points(grid, normal, offset)
    return s > 0 if side > 0 else s < 0


def reflection_violation(traj, normal, offset: float, side: int = 1):
    """``||(rho_H - rho)_+||_{L^1(H^+)}`` for each density in ``traj``.

    ``traj`` is a sequence of ScalarFields (or objects with a ``rho``
    attribute). Returns (violations, resample_floor); the floor is zero for
    hyperplanes that permute cells exactly, else the L1 error of reflecting
    twice, which bounds what resampling alone contributes.
    """
    out = []
    floor = 0.0
    for item in traj:
        rho = getattr(item, "rho", item)
        g = rho.grid
        refl, exact = reflect(rho, normal, offset)
        mask = half_space(g, normal, offset, side)
        v = np.clip(refl.values - rho.values, 0.0, None)
        out.append(float(v[mask].sum() * g.cell_volume))
        if not exact:
            twice, _ = reflect(refl, normal, offset)
            floor = max(floor, float(np.abs(twice.values - rho.values)[mask].sum() * g.cell_volume))
    return out, floor


def r_reflection_violation(patch: PatchGeometry, r: float, n_normals: int = 16,
                           offsets=None, band: int = 2) -> float:
    """Largest area of ``phi_H(Omega cap H^+) minus Omega`` over a fan of hyperplanes.

    Hyperplanes ``{x . nu = d}`` with ``d >= r`` have ``B_r(0)`` on their
    origin side. Violating cells within ``band`` cells of ``Omega`` are
    ignored (discretisation of the reflected boundary).
    """
    g = patch.grid
    if g.dim != 2:
        raise ValueError("r-reflection diagnostics are two-dimensional")
    inside = patch.indicator
    R = g.radius()
    if not np.all(inside[R < r]) or r >= patch.r_min:
        raise BallNotContained(f"patch does not contain B_{r}(0) (min radius {patch.r_min:.4g})")
    if offsets is None:
        offsets = r + (patch.r_max - r) * np.array([0.0, 0.25, 0.5, 0.75])
    dist_out = ndimage.distance_transform_edt(~inside)
    far = dist_out > band
    worst = 0.0
    vals = inside.astype(float)
    for k in range(n_normals):
        th = 2 * np.pi * k / n_normals
        nu = np.array([np.cos(th), np.sin(th)])
        for d in offsets:
            pts, s = _reflect_points(g, nu, d)
            near_side = s < 0
            image = sample(vals, g, pts) >= THRESHOLD
            bad = near_side & image & far
            worst = max(worst, float(bad.sum() * g.cell_volume))
    return worst


def polar_lipschitz(patch: PatchGeometry) -> float:
    """Lipschitz constant of ``theta -> ln r(theta)`` on the ray-cast boundary."""
    if patch.grid is not None and patch.grid.dim != 2:
        raise ValueError("polar graph is two-dimensional")
    if not patch.star_shaped or np.any(patch.radius <= 0):
        raise NotStarShaped("some ray crosses the boundary more than once")
    lr = np.log(patch.radius)
    dth = np.diff(np.append(patch.theta, patch.theta[0] + 2 * np.pi))
    dl = np.diff(np.append(lr, lr[0]))
    return float(np.max(np.abs(dl) / dth))


# --------------------------------------------------------------------------
# arrival times

@dataclass(frozen=True, eq=False)
class ArrivalTimeField:
    grid: GridSpec
    T: np.ndarray
    w_thresh: float

    def as_field(self) -> ScalarField:
        return self.grid.field(np.where(np.isfinite(self.T), self.T, -1.0), "arrival_time")


def arrival_times(w_traj, w_thresh: float | None = None, rel_thresh: float = 1e-8) -> ArrivalTimeField:
    """First snapshot time at which ``w`` exceeds the threshold; ``inf`` if never.

    ``w_traj`` is a sequence of ``(t, ScalarField)`` pairs in increasing time.
    """
    w_traj = list(w_traj)
    if not w_traj:
        raise ValueError("empty trajectory")
    g = w_traj[-1][1].grid
    if w_thresh is None:
        w_thresh = rel_thresh * float(w_traj[-1][1].values.max())
    T = np.full(g.shape, np.inf)
    for t, w in w_traj:
        hit = (w.values > w_thresh) & ~np.isfinite(T)
        T[hit] = t
    return ArrivalTimeField(g, T, float(w_thresh))


def holder_modulus(field: ArrivalTimeField, alpha: float, radius_cap: float,
                   n_pairs: int = 10_000, seed: int = 0):
    """Sampled ``sup |T_x - T_y| / |x - y|^alpha`` over finite pairs with ``|x - y| <= radius_cap``.

    Returns ``(value, (x, y))``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    g = field.grid
    fin = np.argwhere(np.isfinite(field.T))
    if len(fin) < 2:
        raise NoFinitePairs("fewer than two cells with finite arrival time")
    rng = np.random.default_rng(seed)
    h = np.asarray(g.h)
    ii = fin[rng.integers(0, len(fin), n_pairs)]
    # partner: random offset inside the cap, snapped to the lattice
    off = rng.uniform(-radius_cap, radius_cap, size=(n_pairs, g.dim))
    jj = ii + np.round(off / h).astype(int)
    ok = np.all((jj >= 0) & (jj < np.asarray(g.N)), axis=1)
    ii, jj = ii[ok], jj[ok]
    Ti = field.T[tuple(ii.T)]
    Tj = field.T[tuple(jj.T)]
    dist = np.sqrt((((ii - jj) * h) ** 2).sum(axis=1))
    ok = np.isfinite(Tj) & (dist > 0) & (dist <= radius_cap)
    if not ok.any():
        raise NoFinitePairs("no sampled pair has two finite arrival times")
    q = np.abs(Ti[ok] - Tj[ok]) / dist[ok] ** alpha
    k = int(np.argmax(q))
    x0 = [float(g.axis(a)[ii[ok][k, a]]) for a in range(g.dim)]
    y0 = [float(g.axis(a)[jj[ok][k, a]]) for a in range(g.dim)]
    return float(q[k]), (tuple(x0), tuple(y0))
