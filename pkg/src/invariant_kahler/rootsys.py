"""Root systems and Weyl-group operations on a Cartan subalgebra.

The Cartan subalgebra is identified with Euclidean R^n and a root is stored
as a covector, so that alpha(x) = <alpha, x>.  Built-in systems are scaled so
that the shortest root has unit length; for A1 this gives alpha(x) = x, which
is the SU(2) convention in which ad(h) has eigenvalues +-i|h|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import nnls

# Catalog group orders, used to validate the generated reflection groups.
WEYL_ORDERS = {"A1": 2, "A2": 6, "B2": 8, "G2": 12, "A3": 24}

_ORBIT_CAP = 10_000


class RootSystemError(ValueError):
    """Invalid root data or unknown catalog name."""


@dataclass(frozen=True)
class RootSystem:
    name: str
    rank: int
    positive_roots: np.ndarray  # (N, n)
    generators: np.ndarray  # simple roots, (n, n)
    scale: float = 1.0
    order: int = field(default=0, compare=False)

    @property
    def num_positive(self) -> int:
        return len(self.positive_roots)

    def root_values(self, x) -> np.ndarray:
        """alpha(x) for every positive root; x may be a batch of shape (..., n)."""
        return np.asarray(x, dtype=float) @ self.positive_roots.T

    def simple_values(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.generators.T

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rank": self.rank,
            "scale": self.scale,
            "positive_roots": self.positive_roots.tolist(),
        }


def reflect(root, x) -> np.ndarray:
    """Reflection s_a(x) = x - 2 <a, x>/<a, a> a.  Works on batches of points."""
    a = np.asarray(root, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float)
    aa = a @ a
    if aa == 0.0:
        raise RootSystemError("cannot reflect in a zero root")
    if x.ndim == 0:
        x = x.reshape(1)
    coef = 2.0 * (x @ a) / aa
    return x - np.multiply.outer(coef, a)


def _a_roots(n: int) -> np.ndarray:
    # e_i - e_j in R^{n+1}, expressed in an orthonormal basis of the sum-zero
    # hyperplane and scaled to unit length.
    basis = np.linalg.qr(np.vstack([np.ones(n + 1), np.eye(n + 1)[:n]]).T)[0][:, 1:]
    roots = []
    for i, j in combinations(range(n + 1), 2):
        v = np.zeros(n + 1)
        v[i], v[j] = 1.0, -1.0
        roots.append(v @ basis / np.sqrt(2.0))
    return np.array(roots)


def _catalog(name: str) -> np.ndarray:
    s3 = np.sqrt(3.0)
    if name == "A1":
        return np.array([[1.0]])
    if name == "A2":
        return np.array([[1.0, 0.0], [-0.5, s3 / 2], [0.5, s3 / 2]])
    if name == "B2":
        return np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
    if name == "G2":
        short = [np.array([np.cos(t), np.sin(t)]) for t in np.pi / 3 * np.arange(3)]
        long_ = [s3 * np.array([np.cos(t), np.sin(t)]) for t in np.pi / 6 + np.pi / 3 * np.arange(3)]
        return np.array(short + long_)
    if name == "A3":
        return _a_roots(3)
    raise RootSystemError(f"unknown root system {name!r}; built-ins are {sorted(WEYL_ORDERS)}")


def _orient(roots: np.ndarray) -> np.ndarray:
    """Flip signs so that all roots are positive for a fixed generic functional."""
    n = roots.shape[1]
    v = np.array([1.0 + 0.1 * np.pi ** (-(i + 1)) * (i + 1) for i in range(n)])
    v = v + 1e-3 * np.sqrt(np.arange(2, n + 2))
    vals = roots @ v
    if np.any(np.abs(vals) < 1e-12):
        # A degenerate choice is possible only for contrived input.
        raise RootSystemError("could not choose a positive system")
    return roots * np.sign(vals)[:, None]


def _simple_roots(pos: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    simple = []
    for i, a in enumerate(pos):
        others = np.delete(pos, i, axis=0)
        if len(others) == 0:
            simple.append(a)
            continue
        _, resid = nnls(others.T, a)
        if resid > tol * np.linalg.norm(a):
            simple.append(a)
    return np.array(simple)


def _check_reflection_closed(pos: np.ndarray, tol: float = 1e-8) -> None:
    full = np.vstack([pos, -pos])
    for a in pos:
        images = reflect(a, full)
        d = np.linalg.norm(images[:, None, :] - full[None, :, :], axis=-1)
        if np.any(d.min(axis=1) > tol * max(1.0, np.abs(full).max())):
            bad = images[np.argmax(d.min(axis=1))]
            raise RootSystemError(
                f"roots are not closed under reflection: s_{a.tolist()} produces {bad.tolist()}"
            )


def load_root_system(name_or_roots, scale: float = 1.0) -> RootSystem:
    """Return a validated root system from the catalog or from a list of roots.

    ``scale`` multiplies every root; it is the configurable normalization of the
    invariant inner product.  Custom input is a sequence of n-vectors, one per
    positive root; signs are re-oriented if needed.
    """
    if scale <= 0:
        raise RootSystemError("scale must be positive")
    if isinstance(name_or_roots, str):
        name = name_or_roots
        pos = _catalog(name)
    else:
        name = "custom"
        pos = np.atleast_2d(np.asarray(name_or_roots, dtype=float))
        if pos.size == 0:
            raise RootSystemError("empty root list")
    if not np.all(np.isfinite(pos)):
        raise RootSystemError("root entries must be finite")
    norms = np.linalg.norm(pos, axis=1)
    if np.any(norms == 0):
        raise RootSystemError("zero root")
    n = pos.shape[1]
    if np.linalg.matrix_rank(pos) != n:
        raise RootSystemError("roots must span the Cartan subalgebra")
    pos = _orient(pos)
    unit = pos / norms[:, None]
    for i, j in combinations(range(len(pos)), 2):
        if abs(abs(unit[i] @ unit[j]) - 1.0) < 1e-10:
            raise RootSystemError("proportional roots are not allowed (reduced systems only)")
    _check_reflection_closed(pos)
    simple = _simple_roots(pos)
    if len(simple) != n:
        raise RootSystemError(f"expected {n} simple roots, found {len(simple)}")
    pos = pos * scale
    simple = simple * scale
    rs = RootSystem(name=name, rank=n, positive_roots=pos, generators=simple, scale=float(scale))
    order = len(weyl_orbit(rs, _generic_point(rs)))
    if name in WEYL_ORDERS and order != WEYL_ORDERS[name]:
        raise RootSystemError(f"{name}: generated group has order {order}, expected {WEYL_ORDERS[name]}")
    object.__setattr__(rs, "order", order)
    return rs


def _generic_point(rs: RootSystem) -> np.ndarray:
    """A point strictly inside the fundamental chamber."""
    # dual basis to the simple roots: <omega_i, alpha_j> = delta_ij
    coweights = np.linalg.inv(rs.generators).T
    c = 1.0 + np.arange(rs.rank) / (np.pi * rs.rank)
    return c @ coweights


def weyl_orbit(rs: RootSystem, x, tol: float = 1e-9) -> np.ndarray:
    """Orbit of x under the reflection group, as an array of distinct points."""
    x = np.asarray(x, dtype=float).reshape(rs.rank)
    scale = max(1.0, float(np.abs(x).max()))
    pts = [x]
    frontier = [x]
    while frontier:
        new = []
        for p in frontier:
            for g in rs.generators:
                q = reflect(g, p)
                if all(np.abs(q - r).max() > tol * scale for r in pts):
                    pts.append(q)
                    new.append(q)
        frontier = new
        if len(pts) > _ORBIT_CAP:
            raise RootSystemError("reflection group appears to be infinite")
    return np.array(pts)


def project_to_chamber(rs: RootSystem, x) -> np.ndarray:
    """Orbit representative with alpha(x) >= 0 for every simple root."""
    y = np.array(x, dtype=float).reshape(rs.rank)
    cap = max(rs.order, 1) * rs.rank + 1
    # rounding can leave -1e-17 on a wall; reflecting there would cycle
    tol = 1e-12 * max(1.0, float(np.linalg.norm(y)))
    for _ in range(cap):
        vals = rs.generators @ y
        i = int(np.argmin(vals))
        if vals[i] >= -tol:
            return y
        y = reflect(rs.generators[i], y)
    raise RootSystemError("projection to chamber did not terminate; invalid root data")


def in_chamber(rs: RootSystem, x, margin: float = 0.0) -> np.ndarray:
    """Elementwise test alpha(x) > margin for all simple roots (batched)."""
    return np.all(rs.simple_values(x) > margin, axis=-1)


def wall_distance(rs: RootSystem, x) -> np.ndarray:
    """Euclidean distance from x to the nearest root hyperplane (batched)."""
    norms = np.linalg.norm(rs.positive_roots, axis=1)
    return np.min(np.abs(rs.root_values(x)) / norms, axis=-1)


def chamber_rays(rs: RootSystem) -> np.ndarray:
    """Unit directions of the chamber edges (these lie in walls) plus one interior direction."""
    coweights = np.linalg.inv(rs.generators).T
    rays = [w / np.linalg.norm(w) for w in coweights]
    mid = coweights.sum(axis=0)
    rays.append(mid / np.linalg.norm(mid))
    return np.array(rays)


def weyl_group(rs: RootSystem) -> np.ndarray:
    """All group elements as orthogonal matrices, shape (|W|, n, n); identity first."""
    n = rs.rank
    gens = [np.eye(n) - 2.0 * np.outer(a, a) / (a @ a) for a in rs.generators]
    elems = [np.eye(n)]
    frontier = [np.eye(n)]
    while frontier:
        new = []
        for g in frontier:
            for s in gens:
                h = s @ g
                if all(np.abs(h - e).max() > 1e-9 for e in elems):
                    elems.append(h)
                    new.append(h)
        frontier = new
        if len(elems) > _ORBIT_CAP:
            raise RootSystemError("reflection group appears to be infinite")
    return np.array(elems)
