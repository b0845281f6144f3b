"""Modal Legendre basis on the reference cell [-1, 1]."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .angular import gauss_legendre


def legendre_values(k: int, xi) -> np.ndarray:
    """P_0..P_k at the points ``xi``; shape (len(xi), k+1)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.empty((xi.size, k + 1))
    out[:, 0] = 1.0
    if k >= 1:
        out[:, 1] = xi
    for m in range(2, k + 1):
        out[:, m] = ((2 * m - 1) * xi * out[:, m - 1] - (m - 1) * out[:, m - 2]) / m
    return out


def legendre_derivatives(k: int, xi) -> np.ndarray:
    """dP_m/dxi for m = 0..k at ``xi``; shape (len(xi), k+1)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    p = legendre_values(k, xi)
    d = np.zeros_like(p)
    # P'_m = (2m-1) P_{m-1} + P'_{m-2}
    for m in range(1, k + 1):
        d[:, m] = (2 * m - 1) * p[:, m - 1] + (d[:, m - 2] if m >= 2 else 0.0)
    return d


def mass_diagonal(k: int) -> np.ndarray:
    """Reference integrals of P_m^2 over [-1, 1]."""
    return 2.0 / (2.0 * np.arange(k + 1) + 1.0)


def right_values(k: int) -> np.ndarray:
    return np.ones(k + 1)


def left_values(k: int) -> np.ndarray:
    return (-1.0) ** np.arange(k + 1)


@lru_cache(maxsize=None)
def _stiffness(k: int) -> np.ndarray:
    xi, w = gauss_legendre(k + 1)
    p = legendre_values(k, xi)
    dp = legendre_derivatives(k, xi)
    return np.einsum("q,qm,qn->mn", w, dp, p)


def stiffness(k: int) -> np.ndarray:
    """S[m, n] = int P_n P_m' dxi, the transpose-advection block on the reference cell."""
    return _stiffness(k).copy()


def volume_rule(k: int, points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Reference Gauss rule used for every volume integral (2k+2 points by default)."""
    return gauss_legendre(2 * k + 2 if points is None else points)


def project_function(func, mesh, k: int, points: int | None = None) -> np.ndarray:
    """L2 projection of a callable onto P_k per cell; shape (ncells, k+1)."""
    xi, w = volume_rule(k, points)
    x = mesh.map_points(xi)
    fx = np.asarray(func(x), dtype=float)
    fx = np.broadcast_to(fx, x.shape)
    p = legendre_values(k, xi)
    return np.einsum("q,cq,qm->cm", w, fx, p) / mass_diagonal(k)


def evaluate(coeffs: np.ndarray, xi) -> np.ndarray:
    """Evaluate modal coefficients (..., k+1) at reference points; shape (..., len(xi))."""
    k = coeffs.shape[-1] - 1
    return coeffs @ legendre_values(k, xi).T
