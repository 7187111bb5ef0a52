"""Weak Monge-Ampere solutions through semi-discrete optimal transport.

The source measure g dx on B_k is discretized as a piecewise-constant density
on a uniform grid, and the target measure f dy on B_{R_k} as a finite cloud of
points y_j with masses nu_j, closed under the Weyl group.  The Brenier
potential is phi(x) = max_j (<x, y_j> - psi_j); its dual weights are found by
damped Newton ascent on the concave Kantorovich dual

    D(w) = sum_j w_j nu_j + int min_j (|x - y_j|^2 / 2 - w_j) g(x) dx,

with one unknown per Weyl orbit, so phi is exactly W-invariant.

Cell masses are reported for the Weyl symmetrization of the grid measure,
(1/|W|) sum_w w_# mu_grid.  With orbit-tied weights the cells of one orbit are
permuted by W, so under that measure each cell carries the orbit mass divided
by the orbit size.  This matters in rank 2, where a square grid is not
invariant under 60- or 30-degree reflections.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .densities import DensitySpec, balance_radius, source_density, target_density
from .laguerre import GridSource, assign_labels, cell_integrals
from .rootsys import RootSystem, chamber_rays, weyl_group
from .special import sinh2_minus_2

log = logging.getLogger(__name__)

MAX_GRID_CELLS = 2**24


class TransportError(RuntimeError):
    """Solver failure; ``best_residual`` holds the smallest residual reached."""

    def __init__(self, msg, best_residual=float("nan"), weights=None):
        super().__init__(msg)
        self.best_residual = best_residual
        self.weights = weights


class EmptyCellError(TransportError):
    pass


# --- data types --------------------------------------------------------------


@dataclass
class TargetCloud:
    points: np.ndarray  # (m, n), grouped by orbit
    masses: np.ndarray  # (m,)
    orbit_ids: np.ndarray  # (m,) int
    radius: float

    @property
    def n_orbits(self) -> int:
        return int(self.orbit_ids.max()) + 1

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


@dataclass
class TransportDiagnostics:
    max_rel_cell_residual: float
    iterations: int
    empty_cells: int
    duality_gap_estimate: float
    dual_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "max_rel_cell_residual": self.max_rel_cell_residual,
            "iterations": self.iterations,
            "empty_cells": self.empty_cells,
            "duality_gap_estimate": self.duality_gap_estimate,
            "dual_history": list(self.dual_history),
        }


@dataclass
class ConvexPotential:
    """phi(x) = max_j (<x, y_j> - psi_j) + offset, gauged so that phi(0) = 0."""

    points: np.ndarray
    psi: np.ndarray
    offset: float = 0.0

    _CHUNK = 20_000

    def _pts(self, x):
        x = np.asarray(x, dtype=float)
        n = self.points.shape[1]
        if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return x

    def scores(self, x) -> np.ndarray:
        x = self._pts(x)
        return x @ self.points.T - self.psi

    def __call__(self, x) -> np.ndarray:
        x = self._pts(x)
        flat = x.reshape(-1, x.shape[-1])
        out = np.empty(len(flat))
        for s in range(0, len(flat), self._CHUNK):
            out[s : s + self._CHUNK] = np.max(flat[s : s + self._CHUNK] @ self.points.T - self.psi, axis=1)
        return (out + self.offset).reshape(x.shape[:-1])

    def active_index(self, x) -> np.ndarray:
        """Index of the selected affine piece (lowest index on ties)."""
        x = self._pts(x)
        flat = x.reshape(-1, x.shape[-1])
        out = np.empty(len(flat), dtype=int)
        for s in range(0, len(flat), self._CHUNK):
            out[s : s + self._CHUNK] = np.argmax(flat[s : s + self._CHUNK] @ self.points.T - self.psi, axis=1)
        return out.reshape(x.shape[:-1])

    def subgradient(self, x) -> np.ndarray:
        return self.points[self.active_index(x)]

    def gradient_set(self, x, tol: float = 1e-12) -> np.ndarray:
        """All slopes of supporting hyperplanes at a single point x."""
        s = self.scores(np.asarray(x, dtype=float).reshape(1, -1))[0]
        return self.points[s >= s.max() - tol * max(1.0, abs(s.max()))]


@dataclass
class TransportRun:
    """One solved problem f_k(grad phi) det D^2 phi = g_k on B_k."""

    spec: DensitySpec
    k: float
    radius: float
    source: GridSource
    cloud: TargetCloud
    weights: np.ndarray
    potential: ConvexPotential
    diagnostics: TransportDiagnostics


# --- source grid -------------------------------------------------------------


def make_source_grid(spec: DensitySpec, k: float, resolution: int) -> GridSource:
    """Piecewise-constant source: g at cell centers times the covered fraction of B_k."""
    n = spec.rs.rank
    if n not in (1, 2):
        raise NotImplementedError("the transport solver supports rank 1 and rank 2 only")
    if resolution < 2 or resolution**n > MAX_GRID_CELLS:
        raise ValueError(f"grid resolution {resolution} out of range")
    h = 2.0 * k / resolution
    c = -k + h * (np.arange(resolution) + 0.5)
    if n == 1:
        return GridSource(k, source_density(spec, c[:, None]))
    X, Y = np.meshgrid(c, c)
    pts = np.stack([X, Y], axis=-1)
    g = source_density(spec, pts)
    # coverage of each square by the disk, exact for interior/exterior squares,
    # 16x16 subsampling on the boundary ring
    r_near = np.hypot(np.maximum(np.abs(X) - h / 2, 0), np.maximum(np.abs(Y) - h / 2, 0))
    r_far = np.hypot(np.abs(X) + h / 2, np.abs(Y) + h / 2)
    cover = (r_far <= k).astype(float)
    ring = (r_near < k) & (r_far > k)
    sub = (np.arange(16) + 0.5) / 16 - 0.5
    sx, sy = np.meshgrid(sub, sub)
    for i, j in zip(*np.nonzero(ring)):
        px = X[i, j] + h * sx
        py = Y[i, j] + h * sy
        cover[i, j] = np.mean(px * px + py * py <= k * k)
    return GridSource(k, g * cover)


# --- target cloud ------------------------------------------------------------


def _chamber_sector(rs: RootSystem):
    rays = chamber_rays(rs)[: rs.rank]
    ang = np.arctan2(rays[:, 1], rays[:, 0])
    a, b = ang
    d = (b - a) % (2 * np.pi)
    if d > np.pi:
        a, d = b, 2 * np.pi - d
    return a, d


def _row_counts(n_c: int, n_r: int) -> np.ndarray:
    w = 2 * np.arange(n_r) + 1.0
    raw = n_c * w / w.sum()
    cnt = np.maximum(np.floor(raw).astype(int), 1)
    while cnt.sum() > n_c:
        i = int(np.argmax(cnt - raw))
        cnt[i] -= 1
    while cnt.sum() < n_c:
        i = int(np.argmax(raw - cnt))
        cnt[i] += 1
    return cnt


def chamber_sample(rs: RootSystem, R: float, n_c: int, rng: np.random.Generator) -> np.ndarray:
    """Stratified, jittered sample of n_c points in the open chamber inside B_R."""
    jit = lambda size: rng.uniform(0.25, 0.75, size)  # noqa: E731
    if rs.rank == 1:
        d = np.sign(rs.generators[0, 0])
        return (d * R * (np.arange(n_c) + jit(n_c)) / n_c)[:, None]
    if rs.rank != 2:
        raise NotImplementedError("target sampling supports rank 1 and rank 2 only")
    a, width = _chamber_sector(rs)
    n_r = max(1, min(n_c, int(round(math.sqrt(2 * n_c / width)))))
    counts = _row_counts(n_c, n_r)
    pts = []
    for i, c in enumerate(counts):
        r = R * (i + jit(c)) / n_r
        th = a + width * (np.arange(c) + jit(c)) / c
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    return np.vstack(pts)


def _lump_rank1(spec: DensitySpec, pts: np.ndarray, R: float) -> np.ndarray:
    order = np.argsort(pts[:, 0])
    y = pts[order, 0]
    mid = 0.5 * (y[1:] + y[:-1])
    lo = np.concatenate([[-R], mid])
    hi = np.concatenate([mid, [R]])
    xg, wg = np.polynomial.legendre.leggauss(8)
    nodes = 0.5 * (hi - lo)[:, None] * (xg + 1) + lo[:, None]
    vals = target_density(spec, nodes[..., None])
    out = np.empty(len(y))
    out[order] = 0.5 * (hi - lo) * (vals @ wg)
    return out


def _lump_grid(spec: DensitySpec, pts: np.ndarray, R: float, resolution: int) -> np.ndarray:
    h = 2 * R / resolution
    c = -R + h * (np.arange(resolution) + 0.5)
    X, Y = np.meshgrid(c, c)
    g = np.column_stack([X.ravel(), Y.ravel()])
    g = g[np.sum(g * g, axis=1) <= R * R]
    _, owner = cKDTree(pts).query(g, workers=1)
    return np.bincount(owner, weights=target_density(spec, g), minlength=len(pts)) * h * h


def sample_target_cloud(
    spec: DensitySpec,
    R: float,
    m: int,
    seed: int = 0,
    total_mass: float | None = None,
    fine_resolution: int | None = None,
) -> TargetCloud:
    """Orbit-closed discretization of f dy on B_R with Voronoi-lumped masses.

    ``m`` is rounded down to a multiple of |W|.  Masses are averaged over each
    orbit and, when ``total_mass`` is given, rescaled to sum to it.
    """
    rs = spec.rs
    order = rs.order
    if R <= 0:
        raise ValueError("R must be positive")
    if m < order:
        raise ValueError(f"m={m} is smaller than the Weyl group order {order}")
    n_c = m // order
    rng = np.random.default_rng(seed)
    base = chamber_sample(rs, R, n_c, rng)
    group = weyl_group(rs)
    pts = np.einsum("gab,cb->cga", group, base).reshape(-1, rs.rank)
    orbit_ids = np.repeat(np.arange(n_c), order)
    if rs.rank == 1:
        masses = _lump_rank1(spec, pts, R)
    else:
        res = fine_resolution or max(512, int(16 * math.sqrt(m)))
        masses = _lump_grid(spec, pts, R, res)
    orbit_mass = np.bincount(orbit_ids, weights=masses)
    masses = (orbit_mass / order)[orbit_ids]
    if np.any(masses <= 0):
        raise ValueError("a target point received no mass; increase the lumping resolution")
    if total_mass is not None:
        masses = masses * (total_mass / masses.sum())
    return TargetCloud(points=pts, masses=masses, orbit_ids=orbit_ids, radius=float(R))


# --- cells and the dual --------------------------------------------------------


def weights_to_psi(points, weights) -> np.ndarray:
    return 0.5 * np.sum(np.asarray(points) ** 2, axis=1) - np.asarray(weights)


def _orbit_sum(cloud: TargetCloud, v) -> np.ndarray:
    return np.bincount(cloud.orbit_ids, weights=v, minlength=cloud.n_orbits)


def _orbit_sizes(cloud: TargetCloud) -> np.ndarray:
    return np.bincount(cloud.orbit_ids, minlength=cloud.n_orbits).astype(float)


def assign_cells(cloud: TargetCloud, weights, src: GridSource, lumped: bool = False) -> np.ndarray:
    """Per-point masses of the Laguerre cells of (cloud, weights).

    By default the cell masses are exact for the piecewise-constant source,
    symmetrized over each orbit.  ``lumped=True`` gives each grid cell's mass
    to the single point minimizing |x - y_j|^2 / 2 - w_j at its center, ties
    going to the lowest index.
    """
    psi = weights_to_psi(cloud.points, weights)
    if lumped:
        labels = assign_labels(src, cloud.points, psi)
        return np.bincount(labels.ravel(), weights=src.cell_masses().ravel(), minlength=len(cloud.points))
    ci = cell_integrals(src, cloud.points, psi)
    return (_orbit_sum(cloud, ci.mass) / _orbit_sizes(cloud))[cloud.orbit_ids]


def _dual_value(cloud: TargetCloud, w, ci) -> float:
    y = cloud.points
    cost = 0.5 * ci.second - np.sum(y * ci.first, axis=1) + 0.5 * np.sum(y * y, axis=1) * ci.mass
    return float(np.sum(w * (cloud.masses - ci.mass)) + np.sum(cost))


def _evaluate(cloud, src, w, hessian):
    ci = cell_integrals(src, cloud.points, weights_to_psi(cloud.points, w), hessian=hessian)
    sizes = _orbit_sizes(cloud)
    orbit_mass = _orbit_sum(cloud, ci.mass)
    return ci, orbit_mass, _dual_value(cloud, w, ci), orbit_mass / sizes


def solve_weights(
    cloud: TargetCloud,
    src: GridSource,
    tol: float = 1e-6,
    max_iter: int = 100,
    weights0=None,
    k: float | None = None,
):
    """Dual weights matching every cell mass to its target within ``tol`` (relative).

    Damped Newton on orbit-tied weights: the step is halved until no cell
    drops below half of its initial or target mass, the orbit residual shrinks
    by the factor (1 - tau/2) and the dual objective does not decrease.
    """
    if not (1e-12 < tol < 1e-2):
        raise ValueError("tol must lie in (1e-12, 1e-2)")
    y = cloud.points
    sizes = _orbit_sizes(cloud)
    target = _orbit_sum(cloud, cloud.masses)
    target_pt = target / sizes
    if abs(target.sum() - src.total_mass) > 1e-8 * src.total_mass:
        raise ValueError("target masses must sum to the source mass")
    if weights0 is None:
        kk = src.k if k is None else k
        w = 0.5 * np.sum(y * y, axis=1) * (1.0 - kk / cloud.radius)
    else:
        w = np.array(weights0, dtype=float)
    ci, M, D, m_pt = _evaluate(cloud, src, w, hessian=True)
    if np.any(m_pt <= 0):
        raise EmptyCellError(
            f"{int(np.sum(m_pt <= 0))} empty cell(s) at the initial weights: m is too large for the grid",
        )
    floor = 0.5 * min(m_pt.min(), target_pt.min())
    history = [D]
    best = np.inf
    it = 0
    no = cloud.n_orbits
    oid = cloud.orbit_ids
    while True:
        G = target - M
        rel = np.abs(G) / target
        res = float(rel.max())
        best = min(best, res)
        log.debug("iter %d residual %.3e dual %.12e", it, res, D)
        if res <= tol:
            break
        if it >= max_iter:
            raise TransportError(f"no convergence in {max_iter} iterations", best_residual=best, weights=w)
        Hr = np.zeros((no, no))
        np.add.at(Hr, (oid[:, None], oid[None, :]), ci.hessian)
        Hr = 0.5 * (Hr + Hr.T)
        shift = np.abs(np.diag(Hr)).mean() / no
        try:
            step = np.linalg.solve(Hr + shift * np.ones((no, no)), G)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Hr, G, rcond=None)[0]
        step = step - step.mean()
        gnorm = np.linalg.norm(G)
        tau = 1.0
        slack = 1e-13 * (abs(D) + 1.0)
        for _ in range(40):
            w_new = w + tau * step[oid]
            ci_new, M_new, D_new, m_new = _evaluate(cloud, src, w_new, hessian=False)
            if (
                m_new.min() >= floor
                and np.linalg.norm(target - M_new) <= (1 - tau / 2) * gnorm
                and D_new >= D - slack
            ):
                break
            tau *= 0.5
        else:
            raise EmptyCellError(
                "step control stalled (cells keep emptying): m is too large for the grid resolution",
                best_residual=best,
                weights=w,
            )
        w = w_new
        it += 1
        ci, M, D, m_pt = _evaluate(cloud, src, w, hessian=True)
        history.append(D)
    # gauge: mass-weighted mean of psi is zero
    psi = weights_to_psi(y, w)
    w = w + np.sum(cloud.masses * psi) / cloud.masses.sum()
    m_final = (M / sizes)[oid]
    diag = TransportDiagnostics(
        max_rel_cell_residual=res,
        iterations=it,
        empty_cells=int(np.sum(m_final <= 0)),
        duality_gap_estimate=float(abs(np.sum(w * (cloud.masses - m_final)))),
        dual_history=history,
    )
    return w, diag


def build_potential(cloud: TargetCloud, weights) -> ConvexPotential:
    """Upper envelope of the affine pieces <x, y_j> - psi_j, gauged to phi(0) = 0."""
    psi = weights_to_psi(cloud.points, weights)
    return ConvexPotential(points=np.asarray(cloud.points, float), psi=psi, offset=float(-np.max(-psi)))


def solve_transport(
    spec: DensitySpec,
    k: float,
    m: int,
    resolution: int,
    tol: float = 1e-6,
    seed: int = 0,
    max_iter: int = 100,
    radius: float | None = None,
) -> TransportRun:
    """Discretize and solve f(grad phi) det D^2 phi = g on B_k."""
    R = balance_radius(spec, k) if radius is None else radius
    src = make_source_grid(spec, k, resolution)
    cloud = sample_target_cloud(spec, R, m, seed=seed, total_mass=src.total_mass)
    w, diag = solve_weights(cloud, src, tol=tol, max_iter=max_iter, k=k)
    return TransportRun(spec, k, R, src, cloud, w, build_potential(cloud, w), diag)


# --- the exhaustion sequence ---------------------------------------------------


@dataclass
class SequenceReport:
    runs: list
    sup_differences: list  # sup |phi_{i+1} - phi_i| on the monitor ball
    lipschitz: list  # max |subgradient| on B_{k/2}, per run
    monitor_radius: float

    @property
    def radii(self):
        return [r.radius for r in self.runs]


def ball_samples(rank: int, radius: float, per_axis: int) -> np.ndarray:
    c = np.linspace(-radius, radius, per_axis)
    if rank == 1:
        return c[:, None]
    g = np.stack(np.meshgrid(*([c] * rank), indexing="ij"), axis=-1).reshape(-1, rank)
    return g[np.sum(g * g, axis=1) <= radius * radius * (1 + 1e-12)]


def solve_sequence(
    spec: DensitySpec,
    k_list,
    m_schedule,
    tol: float = 1e-6,
    resolution: int | list = 4096,
    seed: int = 0,
    regularization="inverse_k",
    monitor_radius: float = 0.5,
    max_iter: int = 100,
) -> SequenceReport:
    """Run the exhaustion scheme: solve on B_k with eps_k = 1/k for each k.

    ``regularization`` may also be a fixed number used for every k.
    """
    k_list = [float(k) for k in k_list]
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ValueError("k_list must be increasing")
    if len(m_schedule) != len(k_list):
        raise ValueError("m_schedule must have the same length as k_list")
    res_list = resolution if isinstance(resolution, (list, tuple)) else [resolution] * len(k_list)
    runs = []
    for k, m, res in zip(k_list, m_schedule, res_list):
        eps = 1.0 / k if regularization == "inverse_k" else float(regularization)
        sk = spec.with_regularization(eps)
        try:
            runs.append(solve_transport(sk, k, int(m), int(res), tol=tol, seed=seed, max_iter=max_iter))
        except TransportError as exc:
            raise TransportError(f"k={k}: {exc}", exc.best_residual, exc.weights) from exc
    n = spec.rs.rank
    per_axis = 401 if n == 1 else 81
    probe = ball_samples(n, monitor_radius, per_axis)
    sups = [float(np.max(np.abs(b.potential(probe) - a.potential(probe)))) for a, b in zip(runs, runs[1:])]
    lips = []
    for r in runs:
        pts = ball_samples(n, r.k / 2, per_axis)
        lips.append(float(np.max(np.linalg.norm(r.potential.subgradient(pts), axis=-1))))
    return SequenceReport(runs, sups, lips, monitor_radius)


# --- closed form in rank 1 ---------------------------------------------------


def rank1_closed_form(spec: DensitySpec, x):
    """K'(x) for the rank-1 problem, solving int_0^{K'} f = int_0^x g.

    With root alpha(x) = c x, f(y) = c^2 y^2 + eps and g = e^u sinh^2(c x) + eps,
    so K' is the real root of c^2 K'^3 / 3 + eps K' = int_0^x g.  For u == 0 and
    eps == 0 this is ((3/4)(sinh 2x - 2x))^(1/3) when c = 1.
    """
    rs = spec.rs
    if rs.rank != 1:
        raise ValueError("rank1_closed_form needs a rank-1 root system")
    c = float(rs.positive_roots[0, 0])
    eps = spec.regularization
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(c * xs) > spec.overflow_radius):
        raise ValueError("x beyond the overflow radius")
    out = np.empty_like(xs)
    for i, xv in enumerate(xs):
        t = abs(xv)
        if spec.u is None:
            G = sinh2_minus_2(c * t) / (4 * c) + eps * t
        else:
            fn = lambda s: float(np.exp(spec.u_value(np.array([s])))) * math.sinh(c * s) ** 2  # noqa: E731
            G = quad(fn, 0.0, t, epsabs=0, epsrel=1e-13, limit=200)[0] + eps * t
        if eps == 0.0:
            kp = np.cbrt(3.0 * G / (c * c))
        elif G == 0.0:
            kp = 0.0
        else:
            cub = lambda p: c * c * p**3 / 3.0 + eps * p - G  # noqa: E731
            kp = brentq(cub, 0.0, max(G / eps, np.cbrt(3 * G / (c * c))) + 1.0, xtol=1e-15, rtol=1e-15)
        out[i] = math.copysign(kp, xv)
    return out if np.ndim(x) else float(out[0])


# --- weak-solution check -------------------------------------------------------


@dataclass
class Region:
    """Convex region {x : <x, normal_i> <= offset_i for all i}."""

    normals: np.ndarray
    offsets: np.ndarray
    radius: float | None = None  # set for centered balls

    def transformed(self, g) -> "Region":
        return Region(self.normals @ np.asarray(g).T, self.offsets, self.radius)

    def interval(self):
        n = self.normals[:, 0]
        lo = max([o / v for v, o in zip(n, self.offsets) if v < 0], default=-np.inf)
        hi = min([o / v for v, o in zip(n, self.offsets) if v > 0], default=np.inf)
        return lo, hi

    def halfplanes(self):
        return list(zip(self.normals, self.offsets))

    def contains(self, x) -> np.ndarray:
        return np.all(np.asarray(x) @ self.normals.T <= self.offsets, axis=-1)


def ball_region(rank: int, radius: float, sides: int = 720) -> Region:
    if rank == 1:
        return Region(np.array([[1.0], [-1.0]]), np.array([radius, radius]), radius)
    th = 2 * np.pi * np.arange(sides) / sides
    # circumscribed polygon, so the ball itself is covered
    return Region(np.column_stack([np.cos(th), np.sin(th)]), np.full(sides, radius), radius)


def halfspace_region(normal, offset: float = 0.0) -> Region:
    return Region(np.atleast_2d(np.asarray(normal, float)), np.array([float(offset)]))


def cell_region(potential: ConvexPotential, j: int) -> Region:
    y = potential.points
    others = np.delete(np.arange(len(y)), j)
    return Region(y[others] - y[j], potential.psi[others] - potential.psi[j])


def _permutations(rs: RootSystem, points: np.ndarray):
    group = weyl_group(rs)
    tree = cKDTree(points)
    perms = []
    for g in group:
        d, idx = tree.query(points @ g.T)
        if np.max(d) > 1e-8 * max(1.0, np.abs(points).max()):
            raise ValueError("target cloud is not closed under the Weyl group")
        perms.append(idx)
    return group, perms


def symmetrized_region_masses(run: TransportRun, region: Region) -> np.ndarray:
    """mu_sym(C_j intersect B) for every cell, mu_sym the W-symmetrized source measure."""
    group, perms = _permutations(run.spec.rs, run.cloud.points)
    psi = run.potential.psi
    out = np.zeros(len(psi))
    for g, perm in zip(group, perms):
        reg = region.transformed(g)
        arg = reg.interval() if run.source.rank == 1 else reg.halfplanes()
        masses = cell_integrals(run.source, run.cloud.points, psi, region=arg).mass
        out += masses[perm]
    return out / len(group)


def ma_measure_check(run: TransportRun, region: Region) -> float:
    """|int_B g - sum_j nu_j frac_j| / int_B g, frac_j the share of cell j inside B."""
    if region.radius is not None and region.radius > run.k * (1 + 1e-12):
        raise ValueError("region extends beyond the solved ball")
    inside = symmetrized_region_masses(run, region)
    whole = assign_cells(run.cloud, run.weights, run.source)
    total = inside.sum()
    if total <= 0:
        raise ValueError("region carries no source mass")
    frac = np.divide(inside, whole, out=np.zeros_like(inside), where=whole > 0)
    return float(abs(total - np.sum(run.cloud.masses * frac)) / total)
