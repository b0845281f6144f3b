"""Gauss-Legendre rules and the slab angular quadrature {mu_l, w_l}."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["AngularQuadrature", "gauss_legendre", "build_quadrature", "angular_average"]


@lru_cache(maxsize=None)
def _gauss_legendre_cached(n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    # Chebyshev-type initial guesses, then Newton on P_n using the three-term recurrence.
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for m in range(2, n + 1):
            p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        if n == 1:
            p0, p1 = np.ones_like(x), x
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # one more derivative evaluation at the converged nodes for the weights
    p0 = np.ones_like(x)
    p1 = x.copy()
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    if n == 1:
        p0, p1 = np.ones_like(x), x
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce the exact mirror symmetry of the rule
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return tuple(x.tolist()), tuple(w.tolist())


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the ``n``-point Gauss-Legendre nodes and weights on [-1, 1].

    Nodes are sorted ascending; weights sum to 2.
    """
    if n < 1:
        raise ValueError(f"number of Gauss points must be >= 1, got {n}")
    x, w = _gauss_legendre_cached(int(n))
    return np.array(x), np.array(w)


@dataclass(frozen=True)
class AngularQuadrature:
    """Ordinates and weights of the normalized slab measure d(mu)/2."""

    ordinates: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.ordinates, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if mu.shape != w.shape or mu.ndim != 1:
            raise ValueError("ordinates and weights must be 1-D arrays of equal length")
        mu.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "ordinates", mu)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.ordinates.size

    def check(self, tol: float = 1e-14) -> list[str]:
        """List every violated invariant (empty when the quadrature is valid)."""
        mu, w = self.ordinates, self.weights
        problems = []
        if np.any(w <= 0):
            problems.append("weights must be positive")
        if abs(w.sum() - 1.0) > tol:
            problems.append(f"weights sum to {w.sum():.17g}, not 1")
        if abs(np.dot(w, mu)) > tol:
            problems.append(f"first moment is {np.dot(w, mu):.3e}, not 0")
        if np.any(mu == 0):
            problems.append("zero ordinate present")
        if np.any(np.diff(mu) <= 0):
            problems.append("ordinates are not strictly increasing")
        if not (np.allclose(mu, -mu[::-1], rtol=0, atol=tol) and np.allclose(w, w[::-1], rtol=0, atol=tol)):
            problems.append("ordinate set is not symmetric under mu -> -mu")
        return problems

    def mirror_index(self) -> np.ndarray:
        """Index of -mu_l for each l."""
        return np.arange(self.size)[::-1]


def build_quadrature(L: int) -> AngularQuadrature:
    """Gauss-Legendre S_N set with ``L`` ordinates, weights normalized to 1.

    Exact for polynomials in mu up to degree ``2L - 1`` under d(mu)/2.
    """
    if isinstance(L, bool) or int(L) != L or L < 2 or L % 2:
        raise ValueError(f"number of ordinates must be an even integer >= 2, got {L!r}")
    x, w = gauss_legendre(int(L))
    return AngularQuadrature(x, 0.5 * w)


def angular_average(quadrature: AngularQuadrature, values) -> float:
    """Weighted average sum_l w_l v^l."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] != quadrature.size:
        raise ValueError(f"expected {quadrature.size} per-ordinate values, got {v.shape[0]}")
    return float(np.dot(quadrature.weights, v))
