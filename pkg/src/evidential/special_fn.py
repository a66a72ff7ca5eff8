"""Log-gamma and polygamma functions on the positive real axis.

All functions accept scalars or arrays.  Scalar input gives a Python float back.
Arguments are shifted upward with the standard recurrences until they reach
``SHIFT_TO`` and then evaluated with the Stirling / Bernoulli asymptotic series.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DomainError",
    "log_gamma",
    "digamma",
    "trigamma",
    "tetragamma",
    "log_beta_fn",
]

SHIFT_TO = 10.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class DomainError(ValueError):
    """Argument outside the domain of a special function or distribution."""


def _positive(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} requires strictly positive arguments")
    return arr


def _out(arr: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    x = _positive(x, "log_gamma")
    z = x.copy()
    # ln of the rising product x (x+1) ... accumulated as a product per step;
    # at most ceil(SHIFT_TO) factors so no overflow is possible.
    prod = np.ones_like(z)
    while True:
        small = z < SHIFT_TO
        if not small.any():
            break
        prod = np.where(small, prod * z, prod)
        z = np.where(small, z + 1.0, z)
    inv = 1.0 / z
    inv2 = inv * inv
    series = inv * (
        1.0 / 12.0
        + inv2 * (-1.0 / 360.0
        + inv2 * (1.0 / 1260.0
        + inv2 * (-1.0 / 1680.0
        + inv2 * (1.0 / 1188.0
        + inv2 * (-691.0 / 360360.0
        + inv2 * (1.0 / 156.0))))))
    )
    res = (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series - np.log(prod)
    return _out(res, x)


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0."""
    x = _positive(x, "digamma")
    z = x.copy()
    acc = np.zeros_like(z)
    while True:
        small = z < SHIFT_TO
        if not small.any():
            break
        acc = np.where(small, acc - 1.0 / z, acc)
        z = np.where(small, z + 1.0, z)
    inv2 = 1.0 / (z * z)
    series = inv2 * (
        1.0 / 12.0
        + inv2 * (-1.0 / 120.0
        + inv2 * (1.0 / 252.0
        + inv2 * (-1.0 / 240.0
        + inv2 * (1.0 / 132.0
        + inv2 * (-691.0 / 32760.0
        + inv2 * (1.0 / 12.0))))))
    )
    res = np.log(z) - 0.5 / z - series + acc
    return _out(res, x)


def trigamma(x):
    """First polygamma function psi'(x) for x > 0."""
    x = _positive(x, "trigamma")
    z = x.copy()
    acc = np.zeros_like(z)
    while True:
        small = z < SHIFT_TO
        if not small.any():
            break
        acc = np.where(small, acc + 1.0 / (z * z), acc)
        z = np.where(small, z + 1.0, z)
    inv = 1.0 / z
    inv2 = inv * inv
    series = inv * inv2 * (
        1.0 / 6.0
        + inv2 * (-1.0 / 30.0
        + inv2 * (1.0 / 42.0
        + inv2 * (-1.0 / 30.0
        + inv2 * (5.0 / 66.0
        + inv2 * (-691.0 / 2730.0
        + inv2 * (7.0 / 6.0))))))
    )
    res = inv + 0.5 * inv2 + series + acc
    return _out(res, x)


def tetragamma(x):
    """Second polygamma function psi''(x) for x > 0.

    Only needed as the derivative rule of :func:`trigamma` in the autodiff tape.
    """
    x = _positive(x, "tetragamma")
    z = x.copy()
    acc = np.zeros_like(z)
    while True:
        small = z < SHIFT_TO
        if not small.any():
            break
        acc = np.where(small, acc - 2.0 / (z * z * z), acc)
        z = np.where(small, z + 1.0, z)
    inv = 1.0 / z
    inv2 = inv * inv
    series = inv2 * inv2 * (
        -0.5
        + inv2 * (1.0 / 6.0
        + inv2 * (-1.0 / 6.0
        + inv2 * (3.0 / 10.0
        + inv2 * (-5.0 / 6.0
        + inv2 * (691.0 / 210.0))))))
    res = -inv2 - inv2 * inv + series + acc
    return _out(res, x)


def log_beta_fn(alphas) -> float:
    """Log of the multivariate Beta function, sum ln Gamma(a_k) - ln Gamma(sum a_k)."""
    a = np.asarray(alphas, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise DomainError("log_beta_fn requires a vector of length >= 2")
    a = _positive(a, "log_beta_fn")
    return float(np.sum(log_gamma(a)) - log_gamma(float(np.sum(a))))
