"""Boundary-layer tools: the H-function, the diffusion-limit corrector and blended inflow data.

For conservative isotropic scattering the boundary-layer weight is
W(mu) = (sqrt(3)/2) mu H(mu), normalized so that its integral over (0, 1] is one.
The corrector alpha_b is the W-weighted half-range average of the inflow data,
and the blended condition uses lambda alpha + (1 - lambda) alpha_b.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .angular import gauss_legendre
from .operators import ProblemSpec, as_function

__all__ = [
    "HFunctionTable",
    "HFunctionError",
    "compute_h_function",
    "boundary_corrector",
    "lambda_star",
    "lambda_exponential",
    "BlendSpec",
    "make_blend",
    "blended_boundary",
]

ALBEDO_MOMENT = 0.710446089598763  # int_0^1 mu W(mu) dmu, used by the tests and verify
SQRT3_2 = np.sqrt(3.0) / 2.0
HALF_RANGE_POINTS = 64


class HFunctionError(RuntimeError):
    """The H-function fixed point did not converge."""


def _half_range_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class HFunctionTable:
    """Converged H on a Gauss grid of (0, 1], with Nystrom evaluation in between."""

    mu_grid: np.ndarray
    weights: np.ndarray
    h_values: np.ndarray
    tolerance: float
    iterations: int

    def __call__(self, mu) -> np.ndarray:
        """H(mu) for mu in [0, 1] from the converged reciprocal relation."""
        mu = np.asarray(mu, dtype=float)
        kernel = (0.5 * self.weights * self.mu_grid * self.h_values) / (mu[..., None] + self.mu_grid)
        return 1.0 / kernel.sum(axis=-1)

    def weight(self, mu) -> np.ndarray:
        """W(mu) = (sqrt(3)/2) mu H(mu)."""
        mu = np.asarray(mu, dtype=float)
        return SQRT3_2 * mu * self(mu)

    @property
    def moments(self) -> tuple[float, float]:
        """(int W dmu, int mu W dmu) over (0, 1] on the table grid."""
        W = SQRT3_2 * self.mu_grid * self.h_values
        return float(np.sum(self.weights * W)), float(np.sum(self.weights * self.mu_grid * W))


def compute_h_function(n_nodes: int = 64, tolerance: float = 1e-12, max_iterations: int = 1000,
                       damping: float = 0.5) -> HFunctionTable:
    """Solve 1/H(mu) = int_0^1 mu' H(mu') / (2 (mu + mu')) dmu' by damped fixed-point iteration.

    The plain iteration alternates between two states in the conservative case;
    averaging each update with the previous iterate removes the oscillation.

    Raises
    ------
    HFunctionError
        If the max-norm update stays above ``tolerance`` after ``max_iterations``.
    """
    if n_nodes < 16:
        raise ValueError(f"n_nodes must be >= 16, got {n_nodes}")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    mu, w = _half_range_rule(n_nodes)
    kernel = 0.5 * (w * mu)[None, :] / (mu[:, None] + mu[None, :])
    H = np.ones(n_nodes)
    change = np.inf
    for it in range(1, max_iterations + 1):
        new = (1.0 - damping) * H + damping / (kernel @ H)
        change = float(np.max(np.abs(new - H)))
        H = new
        if change <= tolerance:
            return HFunctionTable(mu, w, H, tolerance, it)
    raise HFunctionError(
        f"H-function iteration did not converge in {max_iterations} steps: "
        f"last update {change:.3e}, |H|_inf = {np.max(np.abs(H)):.6f}"
    )


def boundary_corrector(alpha, table: HFunctionTable, side: str = "left") -> float:
    """alpha_b = int_0^1 W(mu) alpha(+-mu) dmu on a dedicated 64-point half-range rule.

    ``side="left"`` samples the incoming directions mu > 0 at x = a,
    ``side="right"`` samples mu < 0 at x = b with |mu| in W.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    alpha = as_function(alpha)
    mu, w = _half_range_rule(HALF_RANGE_POINTS)
    arg = mu if side == "left" else -mu
    vals = np.asarray(alpha(arg), dtype=float) * np.ones_like(mu)
    return float(np.sum(w * table.weight(mu) * vals))


def lambda_star(epsilon: float, h: float, q: int) -> float:
    """Optimal blend eps^2 / (eps^2 + h^(2q))."""
    if not (epsilon > 0 and h > 0):
        raise ValueError("epsilon and h must be positive")
    if int(q) != q or q < 1:
        raise ValueError(f"q must be an integer >= 1, got {q}")
    e2 = float(epsilon) ** 2
    return e2 / (e2 + float(h) ** (2 * int(q)))


def lambda_exponential(epsilon: float, sigma_t: float = 1.0) -> float:
    """The older rule 1 - exp(-sigma_t/eps), available as a configuration choice."""
    return float(-np.expm1(-sigma_t / epsilon))


@dataclass(frozen=True)
class BlendSpec:
    lam: float
    alpha_b_left: float
    alpha_b_right: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0,1], got {self.lam}")


def make_blend(spec: ProblemSpec, lam: float, table: HFunctionTable | None = None) -> BlendSpec:
    """BlendSpec for ``spec`` with correctors computed from its own boundary data."""
    table = table if table is not None else compute_h_function()
    return BlendSpec(
        float(lam),
        boundary_corrector(spec.boundary_left, table, "left"),
        boundary_corrector(spec.boundary_right, table, "right"),
    )


def _blend(alpha, lam: float, alpha_b: float):
    def blended(mu):
        return lam * np.asarray(alpha(mu), dtype=float) + (1.0 - lam) * alpha_b

    return blended


def blended_boundary(spec: ProblemSpec, blend: BlendSpec) -> ProblemSpec:
    """Copy of ``spec`` with inflow data lam alpha(mu) + (1 - lam) alpha_b on each side."""
    if blend.lam == 1.0:
        return spec
    if blend.lam == 0.0:
        return replace(spec, boundary_left=blend.alpha_b_left, boundary_right=blend.alpha_b_right)
    return replace(
        spec,
        boundary_left=_blend(spec.boundary_left, blend.lam, blend.alpha_b_left),
        boundary_right=_blend(spec.boundary_right, blend.lam, blend.alpha_b_right),
    )
