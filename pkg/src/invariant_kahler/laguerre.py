"""Exact Laguerre-cell integrals for a piecewise-constant density on a grid.

The source measure lives on the uniform grid over [-k, k]^n (n = 1, 2) and is
constant on every grid cell.  Laguerre cells

    C_j = {x : <x, y_j> - psi_j >= <x, y_i> - psi_i for all i}

are intervals (n = 1) or convex polygons (n = 2), so their masses, first and
second moments and facet integrals can be computed exactly.  In 2D the area
integrals go through Green's theorem: for each row strip the x-antiderivative
of the density is piecewise polynomial, so every polygon edge is split at
grid lines and integrated with a 3-point Gauss rule, which is exact here.

Mass derivatives are taken with respect to the Laguerre weights
w_j = |y_j|^2 / 2 - psi_j, for which dm_j/dw_j >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

_GL_S = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass
class CellIntegrals:
    mass: np.ndarray  # (m,)
    first: np.ndarray  # (m, n)  int_C x rho
    second: np.ndarray  # (m,)    int_C |x|^2 rho
    hessian: np.ndarray | None  # (m, m) dm/dw, symmetric, rows sum to ~0


class GridSource:
    """Piecewise-constant density on the uniform grid over [-k, k]^n.

    ``values`` holds the density per grid cell (shape (N,) or (N, N) indexed
    [row=y, col=x] in 2D).
    """

    def __init__(self, k: float, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim not in (1, 2):
            raise ValueError("only rank 1 and rank 2 grids are supported")
        if values.ndim == 2 and values.shape[0] != values.shape[1]:
            raise ValueError("2D grids must be square")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite and non-negative")
        self.k = float(k)
        self.rank = values.ndim
        self.n_cells = values.shape[0]
        self.h = 2.0 * self.k / self.n_cells
        self.values = values
        self.edges = -self.k + self.h * np.arange(self.n_cells + 1)
        self.centers = 0.5 * (self.edges[1:] + self.edges[:-1])
        # prefix moments along x (per row in 2D): P_a[..., c] = int_{-k}^{X_c} rho s^a ds
        lo, hi = self.edges[:-1], self.edges[1:]
        self._prefix = []
        self._cell_mom = []
        for a in range(3):
            cell = values * (hi ** (a + 1) - lo ** (a + 1)) / (a + 1)
            self._cell_mom.append(cell)
            pre = np.zeros(values.shape[:-1] + (self.n_cells + 1,))
            pre[..., 1:] = np.cumsum(cell, axis=-1)
            self._prefix.append(pre)

    # -- whole-domain quantities ------------------------------------------

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.values) * self.h**self.rank)

    def cell_points(self) -> np.ndarray:
        if self.rank == 1:
            return self.centers[:, None]
        X, Y = np.meshgrid(self.centers, self.centers)
        return np.stack([X, Y], axis=-1)

    def cell_masses(self) -> np.ndarray:
        return self.values * self.h**self.rank

    def _col(self, x):
        return np.clip(np.floor((np.asarray(x) + self.k) / self.h).astype(int), 0, self.n_cells - 1)

    def density_at(self, x) -> np.ndarray:
        """Density value at points (batched, shape (..., n)); zero outside the grid box."""
        x = np.asarray(x, dtype=float)
        inside = np.all(np.abs(x) <= self.k, axis=-1)
        if self.rank == 1:
            v = self.values[self._col(x[..., 0])]
        else:
            v = self.values[self._col(x[..., 1]), self._col(x[..., 0])]
        return np.where(inside, v, 0.0)

    # -- rank 1 -----------------------------------------------------------

    def _cum1(self, x, a: int) -> np.ndarray:
        """int_{-k}^{x} rho(s) s^a ds for x clipped to [-k, k]."""
        x = np.clip(np.asarray(x, dtype=float), -self.k, self.k)
        c = self._col(x)
        lo = self.edges[c]
        return self._prefix[a][c] + self.values[c] * (x ** (a + 1) - lo ** (a + 1)) / (a + 1)

    def _rho_at_point1(self, b) -> np.ndarray:
        """Density at boundary points, averaging the two sides at grid edges."""
        b = np.asarray(b, dtype=float)
        d = 1e-9 * self.h
        left = self.density_at((b - d)[..., None])
        right = self.density_at((b + d)[..., None])
        return 0.5 * (left + right)


def upper_envelope_1d(slopes: np.ndarray, intercepts: np.ndarray):
    """Active pieces of max_j (slopes_j x + intercepts_j) and their breakpoints.

    ``slopes`` must be strictly increasing.  Returns (active indices in
    increasing slope order, breakpoints between consecutive active pieces).
    """
    active: list[int] = []
    breaks: list[float] = []
    for j in range(len(slopes)):
        while active:
            i = active[-1]
            x = (intercepts[i] - intercepts[j]) / (slopes[j] - slopes[i])
            if breaks and x <= breaks[-1]:
                active.pop()
                breaks.pop()
            else:
                active.append(j)
                breaks.append(x)
                break
        else:
            active.append(j)
    return np.array(active, dtype=int), np.array(breaks)


def _intervals_1d(points: np.ndarray, psi: np.ndarray, lo: float, hi: float):
    """Laguerre intervals clipped to [lo, hi]; returns (left, right, adjacency pairs, breakpoints)."""
    y = points[:, 0]
    order = np.argsort(y, kind="stable")
    if np.any(np.diff(y[order]) <= 0):
        raise ValueError("target points must be distinct")
    act, br = upper_envelope_1d(y[order], -psi[order])
    idx = order[act]
    m = len(y)
    left = np.full(m, np.nan)
    right = np.full(m, np.nan)
    bounds = np.concatenate([[-np.inf], br, [np.inf]])
    left[idx] = np.clip(bounds[:-1], lo, hi)
    right[idx] = np.clip(bounds[1:], lo, hi)
    pairs = np.stack([idx[:-1], idx[1:]], axis=1) if len(idx) > 1 else np.zeros((0, 2), int)
    empty = np.isnan(left)
    left[empty] = 0.0
    right[empty] = 0.0
    return left, right, pairs, br


def _integrals_1d(src: GridSource, points, psi, hessian: bool, region=None) -> CellIntegrals:
    lo, hi = -src.k, src.k
    if region is not None:
        lo, hi = max(lo, region[0]), min(hi, region[1])
    left, right, pairs, br = _intervals_1d(points, psi, lo, hi)
    right = np.maximum(right, left)
    mom = [src._cum1(right, a) - src._cum1(left, a) for a in range(3)]
    H = None
    if hessian:
        m = len(points)
        H = np.zeros((m, m))
        if len(pairs):
            inside = (br > lo) & (br < hi)
            gap = points[pairs[:, 1], 0] - points[pairs[:, 0], 0]
            val = np.where(inside, src._rho_at_point1(br), 0.0) / gap
            i, j = pairs[:, 0], pairs[:, 1]
            H[i, j] -= val
            H[j, i] -= val
            np.add.at(H, (i, i), val)
            np.add.at(H, (j, j), val)
    return CellIntegrals(mass=mom[0], first=mom[1][:, None], second=mom[2], hessian=H)


# -- rank 2 -------------------------------------------------------------------


def _neighbors(points: np.ndarray, psi: np.ndarray) -> list[set | None]:
    """Adjacency of power cells from the lower hull of the lifted points.

    ``None`` marks a hidden point (not on the lower hull), whose cell is empty.
    """
    m = len(points)
    if m == 1:
        return [set()]
    if m <= 3:
        return [set(range(m)) - {i} for i in range(m)]
    lifted = np.column_stack([points, psi])
    try:
        hull = ConvexHull(lifted, qhull_options="Qc")
    except QhullError:
        # degenerate lifting (e.g. all lifted points coplanar): fall back to all pairs
        return [set(range(m)) - {i} for i in range(m)]
    nb: list[set | None] = [None] * m
    lower = hull.equations[:, 2] < 0
    for simplex in hull.simplices[lower]:
        a, b, c = (int(s) for s in simplex)
        for u, v, w in ((a, b, c), (b, a, c), (c, a, b)):
            if nb[u] is None:
                nb[u] = set()
            nb[u].update((v, w))
    # points coplanar with a lower facet may own a sliver cell; give them a
    # generous candidate set and let the clipping sort it out
    for idx, facet in hull.coplanar[:, :2] if len(hull.coplanar) else ():
        if not lower[facet]:
            continue
        cand = set()
        for v in hull.simplices[facet]:
            cand.add(int(v))
            cand.update(nb[int(v)] or ())
        cand.discard(int(idx))
        nb[int(idx)] = cand
        for v in cand:
            if nb[v] is not None:
                nb[v].add(int(idx))
    return nb


def _clip(poly: np.ndarray, labels: np.ndarray, normal, offset, label):
    """Sutherland-Hodgman clip of a convex polygon by <x, normal> <= offset.

    ``labels[e]`` tags the edge from vertex e to vertex e+1.
    """
    if len(poly) == 0:
        return poly, labels
    s = poly @ normal - offset
    inside = s <= 0
    if inside.all():
        return poly, labels
    if not inside.any():
        return poly[:0], labels[:0]
    out_pts = []
    out_lab = []
    n = len(poly)
    for e in range(n):
        p, q = poly[e], poly[(e + 1) % n]
        sp, sq = s[e], s[(e + 1) % n]
        if sp <= 0:
            out_pts.append(p)
            if sq <= 0:
                out_lab.append(labels[e])
            else:
                t = sp / (sp - sq)
                out_pts_x = p + t * (q - p)
                out_lab.append(labels[e])
                out_pts.append(out_pts_x)
                out_lab.append(label)
        elif sq <= 0:
            t = sp / (sp - sq)
            out_pts.append(p + t * (q - p))
            out_lab.append(labels[e])
    return np.array(out_pts), np.array(out_lab, dtype=int)


def laguerre_polygons(points, psi, k: float, extra_halfplanes=()):
    """Clipped Laguerre cells as (vertices, edge labels) per point.

    Edge label i >= 0 marks the facet shared with cell i; -1 marks the domain
    box or an extra clipping half-plane.
    """
    points = np.asarray(points, dtype=float)
    psi = np.asarray(psi, dtype=float)
    nb = _neighbors(points, psi)
    extra_normals = np.array([np.asarray(n, float) for n, _ in extra_halfplanes]).reshape(-1, 2)
    extra_offsets = np.array([float(o) for _, o in extra_halfplanes])
    box = np.array([[-k, -k], [k, -k], [k, k], [-k, k]], dtype=float)
    box_lab = np.full(4, -1, dtype=int)
    polys = []
    for j in range(len(points)):
        if nb[j] is None:
            polys.append((box[:0], box_lab[:0]))
            continue
        poly, lab = box, box_lab
        for i in sorted(nb[j]):
            poly, lab = _clip(poly, lab, points[i] - points[j], psi[i] - psi[j], i)
            if len(poly) == 0:
                break
        if len(poly) and len(extra_normals):
            # the polygon only shrinks, so half-planes it already satisfies stay satisfied
            hit = np.any(poly @ extra_normals.T > extra_offsets, axis=0)
            for normal, offset in zip(extra_normals[hit], extra_offsets[hit]):
                poly, lab = _clip(poly, lab, normal, offset, -1)
                if len(poly) == 0:
                    break
        polys.append((poly, lab))
    return polys


def _split_segments(src: GridSource, p0: np.ndarray, p1: np.ndarray):
    """Split segments at grid lines; returns sub-segment endpoints and parent ids."""
    k, h = src.k, src.h
    nseg = len(p0)
    ts = [np.zeros(nseg), np.ones(nseg)]
    ids = [np.arange(nseg), np.arange(nseg)]
    for axis in (0, 1):
        a, b = p0[:, axis], p1[:, axis]
        ia = np.floor((a + k) / h)
        ib = np.floor((b + k) / h)
        lo = np.minimum(ia, ib) + 1
        cnt = np.maximum(np.maximum(ia, ib) - lo + 1, 0).astype(int)
        cnt[a == b] = 0
        if cnt.sum() == 0:
            continue
        seg = np.repeat(np.arange(nseg), cnt)
        start = np.repeat(lo, cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        line = -k + h * (start + offs)
        t = (line - a[seg]) / (b[seg] - a[seg])
        ts.append(np.clip(t, 0.0, 1.0))
        ids.append(seg)
    t = np.concatenate(ts)
    sid = np.concatenate(ids)
    order = np.lexsort((t, sid))
    t, sid = t[order], sid[order]
    same = sid[1:] == sid[:-1]
    ta, tb, s = t[:-1][same], t[1:][same], sid[:-1][same]
    keep = tb > ta
    ta, tb, s = ta[keep], tb[keep], s[keep]
    d = p1[s] - p0[s]
    return p0[s] + ta[:, None] * d, p0[s] + tb[:, None] * d, s


def _green_moments(src: GridSource, q0, q1):
    """Per sub-segment contributions to int rho * {1, x, y, |x|^2} via Green's theorem.

    Each sub-segment must lie inside one grid cell.  Uses
    int_P F dA = oint G dy with G(x, y) = int_{-k}^{x} F(s, y) ds.
    """
    mid = 0.5 * (q0 + q1)
    c = src._col(mid[:, 0])
    r = src._col(mid[:, 1])
    rho = src.values[r, c]
    xl = src.edges[c]
    dy = q1[:, 1] - q0[:, 1]
    out = np.zeros((len(q0), 4))
    for s, w in zip(_GL_S, _GL_W):
        x = q0[:, 0] + s * (q1[:, 0] - q0[:, 0])
        y = q0[:, 1] + s * dy
        g = []
        for a in range(3):
            g.append(src._prefix[a][r, c] + rho * (x ** (a + 1) - xl ** (a + 1)) / (a + 1))
        out[:, 0] += w * g[0]
        out[:, 1] += w * g[1]
        out[:, 2] += w * y * g[0]
        out[:, 3] += w * (g[2] + y * y * g[0])
    return out * dy[:, None]


def _integrals_2d(src: GridSource, points, psi, hessian: bool, extra_halfplanes=()) -> CellIntegrals:
    m = len(points)
    polys = laguerre_polygons(points, psi, src.k, extra_halfplanes)
    p0, p1, owner, label = [], [], [], []
    for j, (poly, lab) in enumerate(polys):
        if len(poly) < 3:
            continue
        p0.append(poly)
        p1.append(np.roll(poly, -1, axis=0))
        owner.append(np.full(len(poly), j))
        label.append(lab)
    mom = np.zeros((m, 4))
    H = np.zeros((m, m)) if hessian else None
    if p0:
        p0 = np.concatenate(p0)
        p1 = np.concatenate(p1)
        owner = np.concatenate(owner)
        label = np.concatenate(label)
        q0, q1, sid = _split_segments(src, p0, p1)
        contrib = _green_moments(src, q0, q1)
        np.add.at(mom, owner[sid], contrib)
        if hessian:
            facet = label[sid] >= 0
            q0f, q1f, sf = q0[facet], q1[facet], sid[facet]
            d = q1f - q0f
            length = np.hypot(d[:, 0], d[:, 1])
            normal = np.column_stack([d[:, 1], -d[:, 0]]) / np.maximum(length, 1e-300)[:, None]
            mid = 0.5 * (q0f + q1f)
            eps = 1e-9 * src.h
            rho = 0.5 * (src.density_at(mid + eps * normal) + src.density_at(mid - eps * normal))
            i = owner[sf]
            j = label[sf]
            gap = np.linalg.norm(points[i] - points[j], axis=1)
            val = rho * length / gap
            # each facet is visited once from each side; average the two
            np.add.at(H, (i, j), -0.5 * val)
            np.add.at(H, (j, i), -0.5 * val)
            np.add.at(H, (i, i), 0.5 * val)
            np.add.at(H, (j, j), 0.5 * val)
    return CellIntegrals(mass=mom[:, 0], first=mom[:, 1:3], second=mom[:, 3], hessian=H)


def cell_integrals(src: GridSource, points, psi, hessian: bool = False, region=None) -> CellIntegrals:
    """Exact masses, moments and (optionally) the mass Jacobian of the Laguerre cells.

    ``region`` restricts the integration: an interval (lo, hi) in rank 1, a list
    of half-planes (normal, offset) meaning <x, normal> <= offset in rank 2.
    """
    points = np.asarray(points, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if points.ndim != 2 or points.shape[1] != src.rank:
        raise ValueError("points must have shape (m, rank)")
    if src.rank == 1:
        return _integrals_1d(src, points, psi, hessian, region)
    return _integrals_2d(src, points, psi, hessian, region or ())


def assign_labels(src: GridSource, points, psi) -> np.ndarray:
    """Owner of every grid cell center (argmax <x, y_j> - psi_j, lowest index on ties)."""
    pts = src.cell_points().reshape(-1, src.rank)
    labels = np.empty(len(pts), dtype=int)
    step = max(1, 2_000_000 // max(1, len(points)))
    for s in range(0, len(pts), step):
        score = pts[s : s + step] @ np.asarray(points).T - np.asarray(psi)
        labels[s : s + step] = np.argmax(score, axis=1)
    return labels.reshape(src.values.shape)
