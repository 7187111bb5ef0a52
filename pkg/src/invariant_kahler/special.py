"""Cancellation-free elementary functions used near the chamber walls."""

import numpy as np

_SERIES_CUT = 0.5


def sinhc(z):
    """sinh(z)/z, equal to 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z * z / 6.0, np.sinh(safe) / safe)


def tanhc(z):
    """tanh(z)/z, equal to 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z * z / 3.0, np.tanh(safe) / safe)


def sinh2_minus_2(t):
    """sinh(2t) - 2t, summed as a series for |t| < 0.5 to avoid cancellation."""
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < _SERIES_CUT
    ts = np.where(small, t, 0.0)
    # sum_{j>=1} (2t)^(2j+1) / (2j+1)!
    z = 2.0 * ts
    term = z**3 / 6.0
    acc = term.copy()
    for j in range(2, 14):
        term = term * z * z / ((2 * j) * (2 * j + 1))
        acc = acc + term
    big = np.where(small, 1.0, t)
    return np.where(small, acc, np.sinh(2.0 * big) - 2.0 * big)
