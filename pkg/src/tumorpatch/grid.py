"""Uniform cell-centred grids, scalar fields and spectral solvers.

The whole space is truncated to a box centred at the origin. Elliptic
solves use homogeneous Dirichlet data on the box wall (emulating decay at
infinity) and the heat semigroup uses homogeneous Neumann data, so both
are diagonalised by fast sine / cosine transforms of type II.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import (
    BoundaryContactWarning,
    GridMismatch,
    MassMismatch,
    NonFiniteInput,
    NotAntisymmetric,
    NotRadial,
    SupportTouchesBoundary,
)


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred grid on the box ``prod_i [-L_i/2, L_i/2]``."""

    dim: int
    L: tuple[float, ...]
    N: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        L = tuple(float(x) for x in np.broadcast_to(np.asarray(self.L, float), (self.dim,)))
        N = tuple(int(x) for x in np.broadcast_to(np.asarray(self.N, int), (self.dim,)))
        if any(n < 8 for n in N):
            raise ValueError(f"need at least 8 cells per side, got {N}")
        if any(not np.isfinite(x) or x <= 0 for x in L):
            raise ValueError(f"box side lengths must be positive, got {L}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "N", N)

    @classmethod
    def square(cls, n: int, side: float = 4.0, dim: int = 2) -> "GridSpec":
        return cls(dim=dim, L=(side,) * dim, N=(n,) * dim)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(l / n for l, n in zip(self.L, self.N))

    @property
    def hmin(self) -> float:
        return min(self.h)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.N

    @property
    def volume(self) -> float:
        return float(np.prod(self.L))

    def axis(self, i: int) -> np.ndarray:
        h = self.h[i]
        return -self.L[i] / 2 + (np.arange(self.N[i]) + 0.5) * h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinates, one array of ``shape`` per axis."""
        return tuple(np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij"))

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords()))

    def zeros(self, name: str = "") -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape), name)

    def field(self, values, name: str = "") -> "ScalarField":
        return ScalarField(self, values, name)

    def from_function(self, fn: Callable[..., np.ndarray], name: str = "") -> "ScalarField":
        return ScalarField(self, np.asarray(fn(*self.coords()), dtype=float), name)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on a :class:`GridSpec`, one per cell (cell averages).

    The value array is copied and frozen on construction.
    """

    grid: GridSpec
    values: np.ndarray
    name: str = field(default="")

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, name: str | None = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.name if name is None else name)

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def __repr__(self):
        return (f"ScalarField(name={self.name!r}, shape={self.grid.shape}, "
                f"min={self.values.min():.4g}, max={self.values.max():.4g})")


def check_finite(f: ScalarField | np.ndarray, what: str = "field") -> None:
    v = f.values if isinstance(f, ScalarField) else f
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput(f"{what} contains non-finite values")


def same_grid(*fields: ScalarField) -> GridSpec:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch("fields live on different grids")
    return g


def boundary_distance_cells(values: np.ndarray, atol: float = 0.0) -> int:
    """Smallest number of cells between the support of ``values`` and the box wall."""
    idx = np.nonzero(np.abs(values) > atol)
    if len(idx[0]) == 0:
        return min(values.shape)
    return int(min(min(i.min(), n - 1 - i.max()) for i, n in zip(idx, values.shape)))


# --------------------------------------------------------------------------
# discrete operators

def laplacian_array(v: np.ndarray, h: Sequence[float]) -> np.ndarray:
    """5-point (3-point in 1D) Laplacian with zero Dirichlet data on the box wall.

    Cell-centred: the ghost value beyond the wall is ``-v`` of the adjacent cell.
    """
    out = np.zeros_like(v)
    for ax, hx in enumerate(h):
        pad = [(0, 0)] * v.ndim
        pad[ax] = (1, 1)
        vp = np.pad(v, pad)
        sl_lo = [slice(None)] * v.ndim
        sl_hi = [slice(None)] * v.ndim
        sl_lo[ax] = slice(0, 1)
        sl_hi[ax] = slice(-1, None)
        src_lo = [slice(None)] * v.ndim
        src_hi = [slice(None)] * v.ndim
        src_lo[ax] = slice(0, 1)
        src_hi[ax] = slice(-1, None)
        vp[tuple(sl_lo)] = -v[tuple(src_lo)]
        vp[tuple(sl_hi)] = -v[tuple(src_hi)]
        lo = [slice(None)] * v.ndim
        hi = [slice(None)] * v.ndim
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out += (vp[tuple(lo)] - 2.0 * v + vp[tuple(hi)]) / (hx * hx)
    return out


def laplacian(f: ScalarField) -> ScalarField:
    return f.with_values(laplacian_array(f.values, f.grid.h))


def _dirichlet_symbol(grid: GridSpec) -> np.ndarray:
    # eigenvalues of -Delta_h for the DST-II basis sin(pi k (i+1/2)/N), k = 1..N
    parts = []
    for n, h in zip(grid.N, grid.h):
        k = np.arange(1, n + 1)
        parts.append(4.0 / h**2 * np.sin(np.pi * k / (2 * n)) ** 2)
    return sum(np.meshgrid(*parts, indexing="ij"))


def _neumann_symbol(grid: GridSpec) -> np.ndarray:
    # eigenvalues of -Delta_h for the DCT-II basis cos(pi k (i+1/2)/N), k = 0..N-1
    parts = []
    for n, h in zip(grid.N, grid.h):
        k = np.arange(n)
        parts.append(4.0 / h**2 * np.sin(np.pi * k / (2 * n)) ** 2)
    return sum(np.meshgrid(*parts, indexing="ij"))


_SYMBOL_CACHE: dict = {}


def _symbol(grid: GridSpec, kind: str) -> np.ndarray:
    key = (grid, kind)
    sym = _SYMBOL_CACHE.get(key)
    if sym is None:
        sym = _dirichlet_symbol(grid) if kind == "dirichlet" else _neumann_symbol(grid)
        sym.setflags(write=False)
        _SYMBOL_CACHE[key] = sym
    return sym


def inverse_neg_laplacian(rhs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Array-level ``(-Delta_h)^{-1}`` with Dirichlet walls (no checks)."""
    coef = sfft.dstn(rhs, type=2, norm="ortho")
    coef /= _symbol(grid, "dirichlet")
    return sfft.idstn(coef, type=2, norm="ortho")


def poisson_solve(rhs: ScalarField, strict: bool = False, margin: int = 4) -> ScalarField:
    """Solve ``-Delta_h w = rhs`` with ``w = 0`` on the box wall.

    If the support of ``rhs`` comes within ``margin`` cells of the wall a
    :class:`BoundaryContactWarning` is emitted, or
    :class:`SupportTouchesBoundary` raised when ``strict``.
    """
    check_finite(rhs, "rhs")
    if boundary_distance_cells(rhs.values) < margin:
        msg = "rhs support is within %d cells of the box boundary" % margin
        if strict:
            raise SupportTouchesBoundary(msg)
        warnings.warn(msg, BoundaryContactWarning, stacklevel=2)
    return rhs.with_values(inverse_neg_laplacian(rhs.values, rhs.grid), name="w")


def heat_step(u: ScalarField, s: float) -> ScalarField:
    """Exact solve of ``v_t = Delta_h v`` over time ``s`` with Neumann walls."""
    if s < 0:
        raise ValueError("heat_step needs s >= 0")
    check_finite(u, "u")
    if s == 0:
        return u.with_values(u.values)
    coef = sfft.dctn(u.values, type=2, norm="ortho")
    coef *= np.exp(-s * _symbol(u.grid, "neumann"))
    v = sfft.idctn(coef, type=2, norm="ortho")
    # the semigroup is a positive averaging operator; clip round-off only
    v = np.clip(v, u.values.min(), u.values.max())
    return u.with_values(v)


# --------------------------------------------------------------------------
# norms

def l1(f: ScalarField) -> float:
    return float(np.abs(f.values).sum() * f.grid.cell_volume)


def linf(f: ScalarField) -> float:
    return float(np.abs(f.values).max())


def bv(f: ScalarField, zero_extend: bool = True) -> float:
    """Anisotropic discrete total variation.

    With ``zero_extend`` the field is extended by zero outside the box (the
    right choice for compactly supported densities); otherwise only interior
    jumps count, so a constant has variation 0.
    """
    v = f.values
    g = f.grid
    total = 0.0
    for ax in range(g.dim):
        pad = [(0, 0)] * g.dim
        pad[ax] = (1, 1) if zero_extend else (0, 0)
        jumps = np.abs(np.diff(np.pad(v, pad), axis=ax))
        total += jumps.sum() * g.cell_volume / g.h[ax]
    return float(total)


def norms(f: ScalarField) -> dict:
    return {"l1": l1(f), "linf": linf(f), "bv": bv(f)}


def bv_a(f: ScalarField, A) -> float:
    """Discrete ``|| Ax . grad f ||_{L^1}`` for antisymmetric ``A``.

    Since ``div(Ax) = tr A = 0`` the distributional definition reduces to
    the total variation of ``div(f Ax)``, evaluated here in conservative
    form with face averages. Because ``(Ax)_i`` does not depend on ``x_i``
    this equals the central-difference form ``sum_i (Ax)_i D_i f``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    g = f.grid
    if A.shape != (g.dim, g.dim):
        raise ValueError(f"A must be {g.dim}x{g.dim}")
    if np.max(np.abs(A + A.T)) > 1e-12:
        raise NotAntisymmetric("A is not antisymmetric")
    if g.dim == 1:
        return 0.0
    x = g.coords()
    v = np.pad(f.values, 1)
    div = np.zeros(g.shape)
    for ax in range(g.dim):
        vel = sum(A[ax, j] * x[j] for j in range(g.dim))  # (Ax)_ax, independent of x_ax
        c = [slice(1, -1)] * g.dim
        lo = list(c)
        hi = list(c)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        div += vel * (v[tuple(hi)] - v[tuple(lo)]) / (2 * g.h[ax])
    return float(np.abs(div).sum() * g.cell_volume)


# --------------------------------------------------------------------------
# radial Wasserstein distance

def _radial_quantile_pieces(f: ScalarField):
    """Cumulative radial mass profile as a piecewise-linear CDF.

    Each cell's mass is spread uniformly over ``[r - h/2, r + h/2]`` (clipped at 0).
    Returns sorted breakpoints ``r`` and cumulative masses ``F`` (1D: signed positions).
    """
    g = f.grid
    m = f.values.ravel() * g.cell_volume
    if g.dim == 1:
        pos = g.axis(0)
    else:
        pos = g.radius().ravel()
    half = 0.5 * g.hmin
    lo = pos - half
    hi = pos + half
    if g.dim == 2:
        lo = np.maximum(lo, 0.0)
    # piecewise-linear CDF: density m/(hi-lo) on [lo, hi]
    knots = np.unique(np.concatenate([lo, hi]))
    dens = np.zeros(len(knots))
    il = np.searchsorted(knots, lo)
    ih = np.searchsorted(knots, hi)
    rate = m / (hi - lo)
    np.add.at(dens, il, rate)
    np.add.at(dens, ih, -rate)
    rate_on = np.cumsum(dens)[:-1]  # density on [knots[k], knots[k+1]]
    F = np.concatenate([[0.0], np.cumsum(rate_on * np.diff(knots))])
    return knots, F


def _quantile(knots, F, q):
    """Generalised inverse ``inf {r : F(r) >= q}`` of a nondecreasing piecewise-linear CDF."""
    j = np.clip(np.searchsorted(F, q, side="left"), 1, len(F) - 1)
    f0, f1 = F[j - 1], F[j]
    frac = np.where(f1 > f0, (q - f0) / np.where(f1 > f0, f1 - f0, 1.0), 1.0)
    return knots[j - 1] + np.clip(frac, 0.0, 1.0) * (knots[j] - knots[j - 1])


def _angular_spread(f: ScalarField, sectors: int = 8) -> float:
    x, y = f.grid.coords()
    theta = np.arctan2(y, x)
    k = np.floor((theta + np.pi) / (2 * np.pi) * sectors).astype(int) % sectors
    w = np.bincount(k.ravel(), weights=f.values.ravel(), minlength=sectors)
    mean = w.mean()
    if mean <= 0:
        return 0.0
    return float(np.max(np.abs(w - mean)) / mean)


def w2_radial(mu: ScalarField, nu: ScalarField, mass_rtol: float = 5e-3,
              angular_rtol: float = 0.05, samples: int = 20001) -> float:
    """2-Wasserstein distance between radially symmetric densities.

    In 2D the optimal map is radial, so the distance reduces to the 1D
    quantile formula applied to ``r -> mass(B_r)``. In 1D the ordinary
    quantile formula on the line is used.
    """
    g = same_grid(mu, nu)
    check_finite(mu, "mu")
    check_finite(nu, "nu")
    if mu.values.min() < 0 or nu.values.min() < 0:
        raise ValueError("w2_radial needs nonnegative densities")
    m1, m2 = mu.mass(), nu.mass()
    if abs(m1 - m2) > mass_rtol * max(m1, m2):
        raise MassMismatch(f"masses differ: {m1:.6g} vs {m2:.6g}")
    if g.dim == 2:
        for f in (mu, nu):
            spread = _angular_spread(f)
            if spread > angular_rtol:
                raise NotRadial(f"angular mass spread {spread:.3g} exceeds {angular_rtol}")
    k1, F1 = _radial_quantile_pieces(mu)
    k2, F2 = _radial_quantile_pieces(nu)
    q = (np.arange(samples) + 0.5) / samples
    r1 = _quantile(k1, F1 / F1[-1], q)
    r2 = _quantile(k2, F2 / F2[-1], q)
    mass = 0.5 * (m1 + m2)
    return float(np.sqrt(mass * np.mean((r1 - r2) ** 2)))


# --------------------------------------------------------------------------
# common initial data

def indicator(grid: GridSpec, inside: Callable[..., np.ndarray], name: str = "rho0") -> ScalarField:
    """Patch ``chi_Omega`` sampled at cell centres (values exactly 0 or 1)."""
    return ScalarField(grid, np.asarray(inside(*grid.coords()), dtype=float), name)


def ball(grid: GridSpec, r: float, center=None, name: str = "rho0") -> ScalarField:
    c = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    return indicator(grid, lambda *x: sum((xi - ci) ** 2 for xi, ci in zip(x, c)) < r * r, name)


def constant(grid: GridSpec, value: float, name: str = "n0") -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)), name)


def lobed(grid: GridSpec, r0: float = 0.5, amp: float = 0.3, lobes: int = 3, name: str = "rho0") -> ScalarField:
    """Star-shaped patch ``r <= r0 (1 + amp cos(lobes theta))`` (2D)."""
    if grid.dim != 2:
        raise ValueError("lobed patches are two-dimensional")
    if not 0 <= amp < 1:
        raise ValueError("amp must lie in [0, 1)")

    def inside(x, y):
        return np.hypot(x, y) <= r0 * (1.0 + amp * np.cos(lobes * np.arctan2(y, x)))

    return indicator(grid, inside, name)


def balls(grid: GridSpec, centers, radii, name: str = "rho0") -> ScalarField:
    """Union of balls."""
    out = np.zeros(grid.shape, dtype=bool)
    for c, r in zip(centers, radii):
        out |= ball(grid, r, c).values > 0
    return ScalarField(grid, out.astype(float), name)
