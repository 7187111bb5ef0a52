"""Source and target densities of the Weyl-invariant Monge-Ampere problem.

The equation on the Cartan subalgebra reads

    prod_a a(grad K)^2 * det D^2 K = exp(u(x)) * prod_a sinh(a(x))^2,

with products over positive roots (each pair +-a contributes a square).  In
transport form this is f(grad K) det D^2 K = g(x) with

    g(x) = exp(u(x)) prod sinh^2 a(x) + eps,      f(y) = prod a(y)^2 + eps,

where eps >= 0 is the regularization used by the exhaustion argument.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .rootsys import RootSystem

OVERFLOW_RADIUS = 350.0
MAX_QUADRATURE_CELLS = 2**26


class DensityDomainError(ValueError):
    """Evaluation outside the representable range of the densities."""


# --- Ricci datum -----------------------------------------------------------

_ALLOWED_NAMES = {"r2", "p"}


class UExpression:
    """W-invariant scalar built from r2 = |x|^2 and p = prod_{a>0} a(x)^2.

    Accepts constants, +, -, * and non-negative integer powers (``**`` or ``^``).
    Invariance holds by construction because only invariant generators appear.
    """

    def __init__(self, text: str):
        self.text = text.strip()
        src = self.text.replace("^", "**")
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse u-expression {text!r}: {exc.msg}") from None
        self._check(tree.body)
        self._code = compile(tree, "<u-expression>", "eval")

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Pow)):
                raise ValueError(f"operator {type(node.op).__name__} not allowed in u-expression")
            if isinstance(node.op, ast.Pow):
                e = node.right
                if not (isinstance(e, ast.Constant) and isinstance(e.value, int) and e.value >= 0):
                    raise ValueError("exponents must be non-negative integer literals")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ValueError("only numeric constants are allowed")
        elif isinstance(node, ast.Name):
            if node.id not in _ALLOWED_NAMES:
                raise ValueError(f"unknown symbol {node.id!r}; use r2 and p")
        else:
            raise ValueError(f"construct {type(node).__name__} not allowed in u-expression")

    def __call__(self, rs: RootSystem, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        env = {
            "r2": np.sum(x * x, axis=-1),
            "p": np.prod(rs.root_values(x) ** 2, axis=-1),
            "__builtins__": {},
        }
        out = eval(self._code, env)
        return np.broadcast_to(np.asarray(out, dtype=float), env["r2"].shape).copy()

    def __repr__(self):
        return f"UExpression({self.text!r})"


def parse_u(spec) -> UExpression | None:
    """``None``/"zero"/"0" mean u == 0 (the Ricci-flat case)."""
    if spec is None:
        return None
    if isinstance(spec, UExpression):
        return spec
    s = str(spec).strip()
    if s.lower() in {"zero", "0", "0.0", ""}:
        return None
    return UExpression(s)


# --- densities -------------------------------------------------------------


@dataclass(frozen=True)
class DensitySpec:
    rs: RootSystem
    u: UExpression | None = None
    regularization: float = 0.0
    overflow_radius: float = OVERFLOW_RADIUS

    def __post_init__(self):
        if self.regularization < 0:
            raise ValueError("regularization must be non-negative")

    @property
    def u_text(self) -> str:
        return "zero" if self.u is None else self.u.text

    def u_value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.u is None:
            return np.zeros(x.shape[:-1]) if x.ndim > 1 else np.zeros(())
        return self.u(self.rs, x)

    def with_regularization(self, eps: float) -> "DensitySpec":
        return DensitySpec(self.rs, self.u, float(eps), self.overflow_radius)


def _as_points(rs: RootSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if rs.rank == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def source_density(spec: DensitySpec, x) -> np.ndarray:
    """g(x) = exp(u(x)) * prod_{a>0} sinh^2 a(x) + eps (batched over leading axes)."""
    x = _as_points(spec.rs, x)
    vals = spec.rs.root_values(x)
    if np.any(np.abs(vals) > spec.overflow_radius):
        raise DensityDomainError(
            f"|a(x)| exceeds the overflow radius {spec.overflow_radius}; sinh^2 is not representable"
        )
    g = np.prod(np.sinh(vals) ** 2, axis=-1)
    if spec.u is not None:
        g = g * np.exp(spec.u_value(x))
    return g + spec.regularization


def target_density(spec: DensitySpec, y) -> np.ndarray:
    """f(y) = prod_{a>0} a(y)^2 + eps."""
    y = _as_points(spec.rs, y)
    return np.prod(spec.rs.root_values(y) ** 2, axis=-1) + spec.regularization


# --- quadrature on balls ---------------------------------------------------


@dataclass
class MassReport:
    radius: float
    mass: float
    quadrature_cells: int
    estimated_error: float


def _grid_mass(density: Callable, n: int, radius: float, resolution: int) -> tuple[float, int]:
    """Midpoint rule on a uniform tensor grid over [-R, R]^n, clipped to the ball."""
    if resolution**n > MAX_QUADRATURE_CELLS:
        raise ValueError(f"quadrature grid {resolution}^{n} exceeds the cell cap {MAX_QUADRATURE_CELLS}")
    h = 2.0 * radius / resolution
    c = -radius + h * (np.arange(resolution) + 0.5)
    if n == 1:
        pts = c[:, None]
    else:
        pts = np.stack(np.meshgrid(*([c] * n), indexing="ij"), axis=-1).reshape(-1, n)
    inside = np.sum(pts * pts, axis=1) <= radius * radius
    pts = pts[inside]
    vals = np.asarray(density(pts), dtype=float)
    # numpy's pairwise summation keeps the reduction order fixed
    return float(np.sum(vals) * h**n), int(inside.sum())


def ball_mass(density: Callable, radius: float, resolution: int = 256, rank: int | None = None) -> MassReport:
    """Mass of ``density`` on the centered ball, with a one-step refinement error estimate.

    ``density`` maps an (m, n) array of points to m values.  When ``rank`` is not
    given it is read from a DensitySpec-bound callable (see ``source_of``).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    n = rank if rank is not None else getattr(density, "rank", None)
    if n is None:
        raise ValueError("rank must be given for a plain callable")
    coarse, _ = _grid_mass(density, n, radius, resolution)
    fine, cells = _grid_mass(density, n, radius, 2 * resolution)
    return MassReport(radius=radius, mass=fine, quadrature_cells=cells, estimated_error=abs(fine - coarse))


class _Bound:
    def __init__(self, fn, spec: DensitySpec):
        self.fn = fn
        self.spec = spec
        self.rank = spec.rs.rank

    def __call__(self, pts):
        return self.fn(self.spec, pts)


def source_of(spec: DensitySpec) -> _Bound:
    return _Bound(source_density, spec)


def target_of(spec: DensitySpec) -> _Bound:
    return _Bound(target_density, spec)


_DEFAULT_RES = {1: 4096, 2: 512, 3: 96}


def default_resolution(rank: int) -> int:
    return _DEFAULT_RES.get(rank, 32)


def balance_radius(spec: DensitySpec, k: float, resolution: int | None = None, rtol: float = 1e-8) -> float:
    """R_k with int_{B_R} f = int_{B_k} g, by bracketing and bisection."""
    if k <= 0:
        raise ValueError("k must be positive")
    n = spec.rs.rank
    res = resolution or default_resolution(n)
    src, _ = _grid_mass(source_of(spec), n, k, res)

    def mismatch(r):
        m, _ = _grid_mass(target_of(spec), n, r, res)
        return m - src

    if src == 0.0:
        return 0.0
    lo, hi = 0.0, max(k, 1.0)
    while mismatch(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise RuntimeError("could not bracket the balance radius: target mass bounded")
    r = brentq(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(mismatch(r)) > rtol * src:
        raise RuntimeError("balance radius did not reach the requested mass tolerance")
    return float(r)


def rank1_source_mass_exact(k: float) -> float:
    """int_{-k}^{k} sinh^2 = sinh(2k)/2 - k (u == 0, eps == 0)."""
    return math.sinh(2 * k) / 2 - k
