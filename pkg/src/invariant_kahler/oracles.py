"""Closed-form reference metrics: SU(2), Heisenberg and the canonical flat potential."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .geometry import SpectralMetric, spectral_data
from .rootsys import RootSystem
from .special import sinh2_minus_2, sinhc

OVERFLOW_T = 350.0

# int_0^R (sinh 2t - 2t)^(1/3) dt equals this factor times int_0^R Kp dt.
SU2_POTENTIAL_HOMOTHETY = (4.0 / 3.0) ** (1.0 / 3.0)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > OVERFLOW_T):
        raise ValueError(f"t must lie in [0, {OVERFLOW_T}]")
    return t


# --- SU(2) ------------------------------------------------------------------


@dataclass
class Su2Profile:
    t: float
    u_val: float
    f_val: float
    Kp: float
    Kpp: float


def su2_u(t):
    """(sinh 2t - 2t) / (4 t^3), with limit 1/3 at t = 0."""
    t = _check_t(t)
    small = t < 1e-3
    ts = np.where(small, 1.0, t)
    # series: 1/3 + t^2/15 + 2 t^4/315
    series = 1.0 / 3.0 + t * t / 15.0 + 2.0 * t**4 / 315.0
    return np.where(small, series, sinh2_minus_2(ts) / (4.0 * ts**3))


def su2_profile(t) -> Su2Profile:
    """Ricci-flat SU(2) profile: f = (3u)^(1/3), K' = t f, K'' = f + t f'.

    K'' comes from the ODE itself: f^2 (f + t f') = (sinh t / t)^2.
    """
    t = float(t)
    u = float(su2_u(t))
    f = float(np.cbrt(3.0 * u))
    kpp = float(sinhc(t)) ** 2 / (f * f)
    return Su2Profile(t=t, u_val=u, f_val=f, Kp=t * f, Kpp=kpp)


def su2_arrays(t):
    """Vectorized (u, f, Kp, Kpp) over an array of t >= 0."""
    t = _check_t(t)
    u = su2_u(t)
    f = np.cbrt(3.0 * u)
    return u, f, t * f, sinhc(t) ** 2 / (f * f)


def su2_potential(R: float) -> float:
    """K(R) = int_0^R (sinh 2t - 2t)^(1/3) dt."""
    if R < 0:
        raise ValueError("R must be non-negative")
    _check_t(R)
    if R == 0:
        return 0.0
    val, _ = quad(lambda s: float(np.cbrt(sinh2_minus_2(s))), 0.0, R, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def su2_eigenvalues(t):
    """(lambda_0, lambda_+, lambda_-) of the operator d mu + [mu, (exp(i ad h) - 1)/ad h]."""
    t = float(t)
    if not 0 < t <= OVERFLOW_T:
        raise ValueError("t must lie in (0, 350]")
    p = su2_profile(t)
    return p.Kpp, p.f_val * math.exp(t), p.f_val * math.exp(-t)


# --- Heisenberg ---------------------------------------------------------------


@dataclass
class HeisenbergModel:
    n: int
    f_profile: Callable[[float], float]
    c: float = 1.0


def heisenberg_operator(model: HeisenbergModel, t: float) -> np.ndarray:
    """Phi^-1 + i ad mu in the basis p_1, q_1, ..., p_n, q_n, z.

    With mu the dual-basis identification, <mu, [X, Y]> = t omega(v, w), so ad mu
    is t times the matrix of omega on V and vanishes on the centre.
    """
    n = model.n
    dim = 2 * n + 1
    A = np.zeros((dim, dim))
    for i in range(n):
        A[2 * i, 2 * i + 1] = t
        A[2 * i + 1, 2 * i] = -t
    f = float(model.f_profile(t))
    if f <= 0:
        raise ValueError("f must be positive")
    phi_inv = np.diag(np.r_[np.ones(2 * n), 1.0 / f])
    return phi_inv + 1j * A


def heisenberg_det(model: HeisenbergModel, t: float):
    """(numeric determinant, (1 - t^2)^n / f(t), |difference|)."""
    if abs(t) >= 1:
        raise ValueError("the Heisenberg example lives on |t| < 1")
    numeric = complex(np.linalg.det(heisenberg_operator(model, t)))
    formula = (1.0 - t * t) ** model.n / float(model.f_profile(t))
    return numeric, formula, abs(numeric - formula)


def ricci_flat_profile(n: int, c: float = 1.0):
    return lambda t: c * (1.0 - t * t) ** n


def heisenberg_profile(name: str, n: int, seed: int = 0):
    """Named f-profiles: constant, ricci-flat, or a random positive polynomial."""
    if name == "constant":
        return lambda t: 1.0
    if name == "ricci-flat":
        return ricci_flat_profile(n)
    if name == "polynomial":
        coef = np.random.default_rng(seed).uniform(0.1, 2.0, 4)
        return lambda t: float(np.polyval(coef, t * t))
    raise ValueError(f"unknown profile {name!r}")


# --- canonical ----------------------------------------------------------------


def canonical_example(rs: RootSystem, x) -> SpectralMetric:
    """Spectral data of K = |x|^2 / 2: grad = x, hess = identity."""
    x = np.asarray(x, dtype=float).reshape(rs.rank)
    return spectral_data(rs, x, x, np.eye(rs.rank))


def su2_spectral(rs: RootSystem, t: float) -> SpectralMetric:
    """Spectral data of the SU(2) profile at x = t on an A1 system (alpha(x) = x)."""
    p = su2_profile(abs(t))
    kp = math.copysign(p.Kp, t)
    return spectral_data(rs, [t], [kp], [[p.Kpp]])
