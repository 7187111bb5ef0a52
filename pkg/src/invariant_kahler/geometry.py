"""Spectral assembly of the invariant Kahler metric and its checks.

At a regular point x of the Cartan subalgebra, with grad = grad K(x) and
hess = D^2 K(x), every operator in the metric formula is diagonal on the root
spaces.  For a positive root a:

    l_a   = sinh a(x) / a(x)                 (L, from sin(ad h)/ad h)
    a_a   = a(grad)                          (ad mu)
    d_a   = (a(grad) / a(x)) cosh a(x)       (D mu)
    phi_a = l_a / d_a = tanh a(x) / a(grad)  (Phi = L o (D mu)^-1)

and on the Cartan block D mu = L^-1 ... = hess, Phi = hess^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .rootsys import RootSystem
from .special import sinhc, tanhc

WALL_SERIES = 1e-4


class GeometryError(ValueError):
    pass


@dataclass
class SpectralMetric:
    x: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    root_values: np.ndarray  # a(x)
    ratio: np.ndarray  # a(grad) / a(x), directional second derivative on walls
    l: np.ndarray
    d: np.ndarray
    phi: np.ndarray
    a: np.ndarray

    @property
    def tanh_values(self) -> np.ndarray:
        return np.tanh(self.root_values)


def spectral_data(rs: RootSystem, x, grad, hess, overflow_radius: float = 350.0) -> SpectralMetric:
    x = np.asarray(x, dtype=float).reshape(rs.rank)
    grad = np.asarray(grad, dtype=float).reshape(rs.rank)
    hess = np.asarray(hess, dtype=float).reshape(rs.rank, rs.rank)
    hess = 0.5 * (hess + hess.T)
    roots = rs.positive_roots
    t = roots @ x
    if np.any(np.abs(t) > overflow_radius):
        raise GeometryError("point lies beyond the overflow radius")
    a = roots @ grad
    near = np.abs(t) < WALL_SERIES
    # on a wall a(grad K) vanishes with a(x); the ratio becomes <a, hess a>/|a|^2
    on_wall = np.einsum("ri,ij,rj->r", roots, hess, roots) / np.sum(roots * roots, axis=1)
    ratio = np.where(near, on_wall, a / np.where(near, 1.0, t))
    l = sinhc(t)
    d = ratio * np.cosh(t)
    phi = tanhc(t) / ratio
    return SpectralMetric(x=x, grad=grad, hess=hess, root_values=t, ratio=ratio, l=l, d=d, phi=phi, a=a)


def ricci_defect(rs: RootSystem, sm: SpectralMetric, u_value: float = 0.0) -> float:
    """exp(-u) det(hess) prod_a (a(grad)/sinh a(x))^2; constant exactly for solutions."""
    det = float(np.linalg.det(sm.hess))
    if det <= 0:
        raise GeometryError("Hessian determinant is not positive: the fitted potential is not convex here")
    return float(np.exp(-u_value) * det * np.prod((sm.ratio / sm.l) ** 2))


@dataclass
class PositivityVerdict:
    hessian_positive: bool
    phi_positive: bool
    second_condition: bool
    min_hessian_eigenvalue: float
    min_phi: float
    flags: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.hessian_positive and self.phi_positive and self.second_condition


def positivity_check(sm: SpectralMetric) -> PositivityVerdict:
    """Phi > 0 and Phi + Phi (ad mu Phi)^2 > 0, read off the spectral data.

    On a root space the second operator has eigenvalue phi (1 - a^2 phi^2) and
    a phi = tanh a(x), so it is positive whenever phi is.
    """
    ev = np.linalg.eigvalsh(sm.hess)
    hpos = bool(ev.min() > 0)
    ppos = bool(np.all(sm.phi > 0))
    second = sm.phi * (1.0 - (sm.a * sm.phi) ** 2) if np.all(np.abs(sm.root_values) >= WALL_SERIES) else None
    if second is None:
        second = sm.phi * (1.0 - np.tanh(sm.root_values) ** 2)
    # on the Cartan block the second operator equals Phi = hess^-1
    spos = bool(np.all(second > 0) and hpos)
    flags = []
    if not (hpos and ppos):
        flags.append("Phi not positive")
    if not spos:
        flags.append("Phi + Phi(ad mu Phi)^2 not positive")
    if ppos and hpos and not spos:
        flags.append("implication from convexity violated")
    return PositivityVerdict(hpos, ppos, spos, float(ev.min()), float(sm.phi.min()) if sm.phi.size else np.inf, flags)


@dataclass
class MetricReport:
    horizontal_root: np.ndarray  # h_a
    horizontal_cartan: np.ndarray  # hess
    vertical_root: np.ndarray  # 1/phi_a
    vertical_cartan: np.ndarray  # hess
    positive: bool
    ricci_defect: float
    assembly_mismatch: float


def horizontal_three_term(sm: SpectralMetric) -> np.ndarray:
    """phi d^2 - phi (a phi d)^2: first two terms of the submersion formula on a root space."""
    return sm.phi * sm.d**2 - sm.phi * (sm.a * sm.phi * sm.d) ** 2


def horizontal_closed_form(sm: SpectralMetric) -> np.ndarray:
    """a(grad) tanh a(x) / a(x)^2, written through the wall-safe ratio."""
    return sm.ratio * tanhc(sm.root_values)


def metric_eigenvalues(rs: RootSystem, sm: SpectralMetric, u_value: float = 0.0) -> MetricReport:
    verdict = positivity_check(sm)
    if not verdict.ok:
        raise GeometryError("positivity failed: " + ", ".join(verdict.flags))
    h_simple = horizontal_closed_form(sm)
    if np.all(np.abs(sm.root_values) >= WALL_SERIES):
        h_three = horizontal_three_term(sm)
        mismatch = float(np.max(np.abs(h_three - h_simple) / np.abs(h_simple), initial=0.0))
    else:
        mismatch = 0.0
    return MetricReport(
        horizontal_root=h_simple,
        horizontal_cartan=sm.hess.copy(),
        vertical_root=1.0 / sm.phi,
        vertical_cartan=sm.hess.copy(),
        positive=True,
        ricci_defect=ricci_defect(rs, sm, u_value),
        assembly_mismatch=mismatch,
    )


# --- completeness ---------------------------------------------------------------


@dataclass
class CompletenessReport:
    T: np.ndarray  # geometric sample of ray lengths
    length: np.ndarray  # L(T)
    length_exponent: float  # d log L / d log T on the tail
    hessian_rate: float  # d log lambda_min / dt on the tail
    verdict: str


def completeness_trend(radial_hessian, T_max: float, n_points: int = 4000, T_min: float = 0.5) -> CompletenessReport:
    """Length L(T) = int_0^T sqrt(lambda_min(hess along the ray)) dt and its growth.

    ``radial_hessian(t)`` returns a scalar or a matrix (lambda_min is taken).
    Divergence is only ever a trend up to T_max, never a proof.
    """
    t = np.linspace(0.0, T_max, n_points)
    lam = np.empty_like(t)
    for i, ti in enumerate(t):
        v = np.asarray(radial_hessian(ti), dtype=float)
        lam[i] = v if v.ndim == 0 else np.linalg.eigvalsh(np.atleast_2d(v)).min()
    if np.any(~np.isfinite(lam)):
        raise GeometryError("radial Hessian profile is not finite on [0, T_max]")
    if np.any(lam <= 0):
        raise GeometryError("radial Hessian is not positive along the ray")
    L = cumulative_trapezoid(np.sqrt(lam), t, initial=0.0)
    T = np.geomspace(T_min, T_max, 16)
    LT = np.interp(T, t, L)
    tail = slice(len(T) // 2, None)
    length_exp = float(np.polyfit(np.log(T[tail]), np.log(LT[tail]), 1)[0])
    half = t >= T_max / 2
    rate = float(np.polyfit(t[half], np.log(lam[half]), 1)[0])
    # a bounded length flattens out on the log-log scale
    verdict = "diverging" if length_exp > 0.2 else "bounded length"
    return CompletenessReport(T=T, length=LT, length_exponent=length_exp, hessian_rate=rate, verdict=verdict)


# --- closedness ---------------------------------------------------------------


def closedness_check(mu, points, spacing: float, max_spacing: float = 0.1) -> float:
    """max |d_i mu_j - d_j mu_i| over the points, by central differences."""
    if spacing > max_spacing:
        raise GeometryError(f"grid spacing {spacing} exceeds the cap {max_spacing}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    worst = 0.0
    for p in points:
        J = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = spacing
            J[:, i] = (np.asarray(mu(p + e), float) - np.asarray(mu(p - e), float)) / (2 * spacing)
        worst = max(worst, float(np.max(np.abs(J - J.T))))
    return worst


# --- properness ---------------------------------------------------------------


@dataclass
class PropernessReport:
    min_margin: float
    margins: np.ndarray  # phi(R d) - phi(0) per ray
    growing: np.ndarray  # margin increasing along the outer half of each ray
    proper: bool


def properness_check(phi, rays, radius: float, n_steps: int = 64) -> PropernessReport:
    rays = np.atleast_2d(np.asarray(rays, dtype=float))
    center = float(np.asarray(phi(np.zeros((1, rays.shape[1])))).reshape(-1)[0])
    t = np.linspace(0.0, radius, n_steps)
    margins, growing = [], []
    for d in rays:
        vals = np.asarray(phi(t[:, None] * d[None, :]), dtype=float).reshape(-1) - center
        outer = vals[n_steps // 2 :]
        margins.append(vals[-1])
        growing.append(bool(vals[-1] > 0 and np.all(np.diff(outer) >= -1e-12) and outer[-1] > outer[0]))
    margins = np.array(margins)
    growing = np.array(growing)
    return PropernessReport(float(margins.min()), margins, growing, bool(growing.all()))


# --- derivatives of a piecewise-linear potential ----------------------------------


@dataclass
class LocalFit:
    grad: np.ndarray
    hess: np.ndarray
    residual: float
    pieces: int
    consistent: bool
    flags: list = field(default_factory=list)


def _stencil(rank: int, per_axis: int) -> np.ndarray:
    c = np.linspace(-1.0, 1.0, per_axis)
    if rank == 1:
        return c[:, None]
    g = np.stack(np.meshgrid(*([c] * rank), indexing="ij"), axis=-1).reshape(-1, rank)
    return g[np.sum(g * g, axis=1) <= 1.0 + 1e-12]


def _quadratic_design(z: np.ndarray) -> np.ndarray:
    n = z.shape[1]
    cols = [np.ones(len(z))] + [z[:, i] for i in range(n)]
    for i in range(n):
        for j in range(i, n):
            cols.append(z[:, i] * z[:, j] * (0.5 if i == j else 1.0))
    return np.column_stack(cols)


def fit_local_quadratic(phi, x, stencil_radius: float, per_axis: int | None = None) -> LocalFit:
    """Least-squares quadratic through phi on a ball of the given radius around x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = len(x)
    per_axis = per_axis or (81 if n == 1 else 21)
    z = _stencil(n, per_axis)
    if len(z) < (n + 1) * (n + 2) // 2:
        raise GeometryError("stencil has too few points for a quadratic fit")
    A = _quadratic_design(z)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise GeometryError("degenerate stencil")
    pts = x + stencil_radius * z
    vals = np.asarray(phi(pts), dtype=float).reshape(-1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - vals) ** 2)))
    grad = coef[1 : n + 1] / stencil_radius
    hess = np.zeros((n, n))
    idx = n + 1
    for i in range(n):
        for j in range(i, n):
            hess[i, j] = hess[j, i] = coef[idx] / stencil_radius**2
            idx += 1
    flags = []
    pieces = 0
    consistent = True
    if hasattr(phi, "subgradient"):
        slopes = np.atleast_2d(phi.subgradient(pts))
        pieces = len(np.unique(phi.active_index(pts)))
        if pieces <= 1:
            hess = np.zeros((n, n))
            flags.append("insufficient cell resolution")
        lo, hi = slopes.min(axis=0), slopes.max(axis=0)
        slack = 1e-9 + 0.5 * (hi - lo)
        consistent = bool(np.all(grad >= lo - slack) and np.all(grad <= hi + slack))
        if not consistent:
            flags.append("gradient outside the local slope range")
    return LocalFit(grad=grad, hess=hess, residual=resid, pieces=pieces, consistent=consistent, flags=flags)


def default_stencil_radius(points: np.ndarray, factor: float = 4.0) -> float:
    """A few target spacings: wide enough to average several cells, small enough to stay local."""
    from scipy.spatial import cKDTree

    d, _ = cKDTree(points).query(points, k=2)
    return float(factor * np.median(d[:, 1]))
