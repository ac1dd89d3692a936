"""Compiled inner loops (numba). Array-level, no validation."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


# --------------------------------------------------------------------------
# lattice c-transform: separable lower envelope of parabolas

@njit(cache=True)
def lower_envelope_1d(f, c, out):
    """out[q] = min_k f[k] + c (q-k)^2 for unit-spaced samples.

    Ties go to the leftmost parabola.
    """
    n = f.shape[0]
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        while True:
            r = v[k]
            s = ((f[q] + c * q * q) - (f[r] + c * r * r)) / (2.0 * c * (q - r))
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        k += 1
        v[k] = q
        z[k] = s if k > 0 else -np.inf
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        r = v[k]
        out[q] = f[r] + c * (q - r) * (q - r)


@njit(cache=True)
def ctransform_lattice_2d(p, c0, c1):
    n0, n1 = p.shape
    tmp = np.empty_like(p)
    out = np.empty_like(p)
    buf_in = np.empty(n1)
    buf_out = np.empty(n1)
    for i in range(n0):
        for j in range(n1):
            buf_in[j] = p[i, j]
        lower_envelope_1d(buf_in, c1, buf_out)
        for j in range(n1):
            tmp[i, j] = buf_out[j]
    buf_in = np.empty(n0)
    buf_out = np.empty(n0)
    for j in range(n1):
        for i in range(n0):
            buf_in[i] = tmp[i, j]
        lower_envelope_1d(buf_in, c0, buf_out)
        for i in range(n0):
            out[i, j] = buf_out[i]
    return out


@njit(cache=True)
def ctransform_lattice_1d(p, c0):
    out = np.empty_like(p)
    lower_envelope_1d(p, c0, out)
    return out


# --------------------------------------------------------------------------
# c-transform of the interpolant of p (solver path)

@njit(cache=True)
def _q1_square_min(p00, p10, p01, p11, sx, sy, h0, h1, tau):
    """Minimise the bilinear patch plus |x-y|^2/(2 tau) over one square.

    Local coordinates (s, t) in [0, 1]^2, the node sits at (sx, sy).
    Returns (value, s, t).
    """
    bs = p10 - p00
    bt = p01 - p00
    e = p00 - p10 - p01 + p11
    A = h0 * h0 / tau
    B = h1 * h1 / tau
    best = 1e300
    bs_ = 0.0
    bt_ = 0.0
    det = A * B - e * e
    if det > 0.0:
        # stationarity: bs + e t + A (s - sx) = 0, bt + e s + B (t - sy) = 0
        r0 = A * sx - bs
        r1 = B * sy - bt
        s = (B * r0 - e * r1) / det
        t = (A * r1 - e * r0) / det
        if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
            v = p00 + bs * s + bt * t + e * s * t + 0.5 * (A * (s - sx) ** 2 + B * (t - sy) ** 2)
            return v, s, t
    # boundary: each edge is a convex quadratic in one variable
    for k in range(4):
        if k < 2:
            t = float(k)
            s = sx - (bs + e * t) / A
            s = min(max(s, 0.0), 1.0)
        else:
            s = float(k - 2)
            t = sy - (bt + e * s) / B
            t = min(max(t, 0.0), 1.0)
        v = p00 + bs * s + bt * t + e * s * t + 0.5 * (A * (s - sx) ** 2 + B * (t - sy) ** 2)
        if v < best:
            best = v
            bs_ = s
            bt_ = t
    return best, bs_, bt_


@njit(cache=True)
def ctransform_q1_2d(p, h0, h1, tau, eps):
    """c-transform of the bilinear interpolant of ``p``, optionally soft.

    For every node the minimum over the lattice squares near it is taken
    exactly per square. With ``eps > 0`` the per-square minima are combined
    by the soft minimum ``-eps log sum exp(-v_s / eps)`` (kept to the
    ``MAXC`` best squares), which is still concave in ``p`` and whose
    gradient splits the node's mass between nearly tied minimisers.

    Returns the transform, and per node up to ``4 * MAXC`` (node, weight)
    pairs: the bilinear weights of each minimiser times its soft weight.
    """
    MAXC = 8
    n0, n1 = p.shape
    pmin = p.min()
    gx = 0.0
    for i in range(n0 - 1):
        for j in range(n1):
            d = abs(p[i + 1, j] - p[i, j]) / h0
            if d > gx:
                gx = d
    gy = 0.0
    for i in range(n0):
        for j in range(n1 - 1):
            d = abs(p[i, j + 1] - p[i, j]) / h1
            if d > gy:
                gy = d
    lip = math.sqrt(gx * gx + gy * gy)
    pc = np.empty_like(p)
    idx = np.empty((n0 * n1, 4 * MAXC), dtype=np.int64)
    wts = np.zeros((n0 * n1, 4 * MAXC))
    cv = np.empty(MAXC)
    ca = np.empty(MAXC, dtype=np.int64)
    cb = np.empty(MAXC, dtype=np.int64)
    cs = np.empty(MAXC)
    ct = np.empty(MAXC)
    for i in range(n0):
        for j in range(n1):
            node = i * n1 + j
            pij = p[i, j]
            for c in range(4 * MAXC):
                idx[node, c] = node
                wts[node, c] = 0.0
            wts[node, 0] = 1.0
            # minimisers lie within r of the node; the squares touching the
            # node are always included so the formula does not switch branch
            r = min(math.sqrt(max(2.0 * tau * (pij - pmin), 0.0)), tau * lip)
            r *= 1.0 + 1e-12
            k0 = max(int(math.ceil(r / h0)), 1)
            k1 = max(int(math.ceil(r / h1)), 1)
            a_lo = max(i - k0, 0)
            a_hi = min(i + k0 - 1, n0 - 2)
            b_lo = max(j - k1, 0)
            b_hi = min(j + k1 - 1, n1 - 2)
            nc = 0
            for a in range(a_lo, a_hi + 1):
                for b in range(b_lo, b_hi + 1):
                    v, s, t = _q1_square_min(p[a, b], p[a + 1, b], p[a, b + 1], p[a + 1, b + 1],
                                             float(i - a), float(j - b), h0, h1, tau)
                    # keep the MAXC smallest values, sorted ascending
                    if nc < MAXC:
                        pos = nc
                        nc += 1
                    elif v < cv[MAXC - 1]:
                        pos = MAXC - 1
                    else:
                        continue
                    while pos > 0 and cv[pos - 1] > v:
                        cv[pos] = cv[pos - 1]
                        ca[pos] = ca[pos - 1]
                        cb[pos] = cb[pos - 1]
                        cs[pos] = cs[pos - 1]
                        ct[pos] = ct[pos - 1]
                        pos -= 1
                    cv[pos] = v
                    ca[pos] = a
                    cb[pos] = b
                    cs[pos] = s
                    ct[pos] = t
            best = cv[0]
            wsum = 0.0
            for c in range(nc):
                if eps > 0.0:
                    e = math.exp(-(cv[c] - best) / eps)
                else:
                    e = 1.0 if c == 0 else 0.0
                cv[c] = e
                wsum += e
            pc[i, j] = best - (eps * math.log(wsum) if eps > 0.0 else 0.0)
            for c in range(nc):
                f = cv[c] / wsum
                a = ca[c]
                b = cb[c]
                s = cs[c]
                t = ct[c]
                idx[node, 4 * c + 0] = a * n1 + b
                idx[node, 4 * c + 1] = (a + 1) * n1 + b
                idx[node, 4 * c + 2] = a * n1 + b + 1
                idx[node, 4 * c + 3] = (a + 1) * n1 + b + 1
                wts[node, 4 * c + 0] = f * (1.0 - s) * (1.0 - t)
                wts[node, 4 * c + 1] = f * s * (1.0 - t)
                wts[node, 4 * c + 2] = f * (1.0 - s) * t
                wts[node, 4 * c + 3] = f * s * t
    return pc, idx, wts


@njit(cache=True)
def ctransform_q1_1d(p, h0, tau, eps):
    """1D counterpart of :func:`ctransform_q1_2d` (piecewise-linear interpolant)."""
    MAXC = 4
    n0 = p.shape[0]
    pmin = p.min()
    lip = 0.0
    for i in range(n0 - 1):
        d = abs(p[i + 1] - p[i]) / h0
        if d > lip:
            lip = d
    inv2t = 0.5 / tau
    pc = np.empty_like(p)
    idx = np.empty((n0, 2 * MAXC), dtype=np.int64)
    wts = np.zeros((n0, 2 * MAXC))
    cv = np.empty(MAXC)
    ca = np.empty(MAXC, dtype=np.int64)
    ct = np.empty(MAXC)
    for i in range(n0):
        for c in range(2 * MAXC):
            idx[i, c] = i
            wts[i, c] = 0.0
        wts[i, 0] = 1.0
        r = min(math.sqrt(max(2.0 * tau * (p[i] - pmin), 0.0)), tau * lip)
        r *= 1.0 + 1e-12
        k0 = max(int(math.ceil(r / h0)), 1)
        nc = 0
        for a in range(max(i - k0, 0), min(i + k0 - 1, n0 - 2) + 1):
            xa = (a - i) * h0
            g = (p[a + 1] - p[a]) / h0
            y = min(max(-tau * g, xa), xa + h0)
            t = (y - xa) / h0
            v = (1.0 - t) * p[a] + t * p[a + 1] + y * y * inv2t
            if nc < MAXC:
                pos = nc
                nc += 1
            elif v < cv[MAXC - 1]:
                pos = MAXC - 1
            else:
                continue
            while pos > 0 and cv[pos - 1] > v:
                cv[pos] = cv[pos - 1]
                ca[pos] = ca[pos - 1]
                ct[pos] = ct[pos - 1]
                pos -= 1
            cv[pos] = v
            ca[pos] = a
            ct[pos] = t
        best = cv[0]
        wsum = 0.0
        for c in range(nc):
            if eps > 0.0:
                e = math.exp(-(cv[c] - best) / eps)
            else:
                e = 1.0 if c == 0 else 0.0
            cv[c] = e
            wsum += e
        for c in range(nc):
            w = cv[c] / wsum
            idx[i, 2 * c] = ca[c]
            idx[i, 2 * c + 1] = ca[c] + 1
            wts[i, 2 * c] = w * (1.0 - ct[c])
            wts[i, 2 * c + 1] = w * ct[c]
        pc[i] = best - eps * math.log(wsum) if eps > 0.0 else best
    return pc, idx, wts


@njit(cache=True)
def scatter_weights(mass, idx, wts, n):
    out = np.zeros(n)
    for k in range(mass.shape[0]):
        m = mass[k]
        if m == 0.0:
            continue
        for s in range(idx.shape[1]):
            out[idx[k, s]] += m * wts[k, s]
    return out


# --------------------------------------------------------------------------
# forward splatting of cell masses with bilinear (tent) weights

@njit(cache=True)
def splat_bilinear_2d(mass, tx, ty, x0, y0, h0, h1):
    """Deposit mass[i,j] at (tx, ty) onto the cell-centre lattice.

    Returns (field of deposited mass, amount that fell outside the lattice hull).
    """
    n0, n1 = mass.shape
    out = np.zeros((n0, n1))
    lost = 0.0
    for i in range(n0):
        for j in range(n1):
            m = mass[i, j]
            if m == 0.0:
                continue
            fx = (tx[i, j] - x0) / h0
            fy = (ty[i, j] - y0) / h1
            a = int(math.floor(fx))
            b = int(math.floor(fy))
            sx = fx - a
            sy = fy - b
            if fx < 0.0 or fy < 0.0 or fx > n0 - 1 or fy > n1 - 1:
                lost += m
                continue
            if a == n0 - 1:
                a -= 1
                sx = 1.0
            if b == n1 - 1:
                b -= 1
                sy = 1.0
            out[a, b] += m * (1.0 - sx) * (1.0 - sy)
            out[a + 1, b] += m * sx * (1.0 - sy)
            out[a, b + 1] += m * (1.0 - sx) * sy
            out[a + 1, b + 1] += m * sx * sy
    return out, lost


@njit(cache=True)
def splat_linear_1d(mass, tx, x0, h0):
    n0 = mass.shape[0]
    out = np.zeros(n0)
    lost = 0.0
    for i in range(n0):
        m = mass[i]
        if m == 0.0:
            continue
        fx = (tx[i] - x0) / h0
        if fx < 0.0 or fx > n0 - 1:
            lost += m
            continue
        a = int(math.floor(fx))
        sx = fx - a
        if a == n0 - 1:
            a -= 1
            sx = 1.0
        out[a] += m * (1.0 - sx)
        out[a + 1] += m * sx
    return out, lost


# --------------------------------------------------------------------------
# projected SOR for  min 1/2 |grad w|^2 + (g, w)  over w >= 0

@njit(cache=True)
def psor_2d(w, g, h0, h1, omega, tol, max_sweeps):
    """Red-black projected SOR; KKT residual is ``max |min(w, -Lap w + g)|``.

    ``g`` is the linear coefficient (``1 - f`` for the obstacle problem).
    Returns (sweeps used, final residual).
    """
    n0, n1 = w.shape
    a0 = 1.0 / (h0 * h0)
    a1 = 1.0 / (h1 * h1)
    res = np.inf
    sweeps = 0
    for sweep in range(max_sweeps):
        for colour in range(2):
            for i in range(n0):
                jstart = (i + colour) % 2
                for j in range(jstart, n1, 2):
                    diag = 2.0 * a0 + 2.0 * a1
                    s = 0.0
                    if i > 0:
                        s += a0 * w[i - 1, j]
                    else:
                        diag += a0
                    if i < n0 - 1:
                        s += a0 * w[i + 1, j]
                    else:
                        diag += a0
                    if j > 0:
                        s += a1 * w[i, j - 1]
                    else:
                        diag += a1
                    if j < n1 - 1:
                        s += a1 * w[i, j + 1]
                    else:
                        diag += a1
                    gs = (s - g[i, j]) / diag
                    val = w[i, j] + omega * (gs - w[i, j])
                    w[i, j] = val if val > 0.0 else 0.0
        sweeps = sweep + 1
        if sweeps % 10 == 0 or sweeps == max_sweeps:
            res = kkt_residual_2d(w, g, h0, h1)
            if res <= tol:
                break
    return sweeps, res


@njit(cache=True)
def kkt_residual_2d(w, g, h0, h1):
    n0, n1 = w.shape
    a0 = 1.0 / (h0 * h0)
    a1 = 1.0 / (h1 * h1)
    res = 0.0
    for i in range(n0):
        for j in range(n1):
            wl = w[i - 1, j] if i > 0 else -w[i, j]
            wr = w[i + 1, j] if i < n0 - 1 else -w[i, j]
            wd = w[i, j - 1] if j > 0 else -w[i, j]
            wu = w[i, j + 1] if j < n1 - 1 else -w[i, j]
            lap = a0 * (wl - 2.0 * w[i, j] + wr) + a1 * (wd - 2.0 * w[i, j] + wu)
            r = -lap + g[i, j]
            m = w[i, j] if w[i, j] < r else r
            if abs(m) > res:
                res = abs(m)
    return res


@njit(cache=True)
def psor_1d(w, g, h0, omega, tol, max_sweeps):
    n0 = w.shape[0]
    a0 = 1.0 / (h0 * h0)
    res = np.inf
    sweeps = 0
    for sweep in range(max_sweeps):
        for colour in range(2):
            for i in range(colour, n0, 2):
                diag = 2.0 * a0
                s = 0.0
                if i > 0:
                    s += a0 * w[i - 1]
                else:
                    diag += a0
                if i < n0 - 1:
                    s += a0 * w[i + 1]
                else:
                    diag += a0
                gs = (s - g[i]) / diag
                val = w[i] + omega * (gs - w[i])
                w[i] = val if val > 0.0 else 0.0
        sweeps = sweep + 1
        if sweeps % 10 == 0 or sweeps == max_sweeps:
            res = kkt_residual_1d(w, g, h0)
            if res <= tol:
                break
    return sweeps, res


@njit(cache=True)
def kkt_residual_1d(w, g, h0):
    n0 = w.shape[0]
    a0 = 1.0 / (h0 * h0)
    res = 0.0
    for i in range(n0):
        wl = w[i - 1] if i > 0 else -w[i]
        wr = w[i + 1] if i < n0 - 1 else -w[i]
        r = -a0 * (wl - 2.0 * w[i] + wr) + g[i]
        m = w[i] if w[i] < r else r
        if abs(m) > res:
            res = abs(m)
    return res
