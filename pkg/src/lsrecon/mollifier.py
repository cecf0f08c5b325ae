"""Compactly supported smooth Dirac delta and Heaviside approximations.

All functions accept scalars or numpy arrays. The transition band is
``[-eps, eps]``; ``heaviside_eps' == delta_eps`` exactly.
"""

import numpy as np

from .errors import DomainError

DEFAULT_EPSILON = 0.15


def _check(eps):
    if not eps > 0:
        raise DomainError(f"epsilon must be positive, got {eps}")


def _out(x, y):
    return float(y) if np.ndim(x) == 0 else y


def delta_eps(x, eps=DEFAULT_EPSILON):
    _check(eps)
    x = np.asarray(x, dtype=np.float64)
    inside = np.abs(x) <= eps
    y = np.where(inside, (1.0 + np.cos(np.pi * x / eps)) / (2.0 * eps), 0.0)
    return _out(x, y)


def heaviside_eps(x, eps=DEFAULT_EPSILON):
    _check(eps)
    x = np.asarray(x, dtype=np.float64)
    band = 0.5 * (1.0 + x / eps + np.sin(np.pi * x / eps) / np.pi)
    y = np.where(x > eps, 1.0, np.where(x < -eps, 0.0, band))
    return _out(x, y)


def delta_eps_prime(x, eps=DEFAULT_EPSILON):
    """Derivative of :func:`delta_eps`."""
    _check(eps)
    x = np.asarray(x, dtype=np.float64)
    inside = np.abs(x) < eps
    y = np.where(inside, -np.pi / (2.0 * eps**2) * np.sin(np.pi * x / eps), 0.0)
    return _out(x, y)
