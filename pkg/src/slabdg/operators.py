"""Problem data, the DG field container, the collision operator Q, norms and a_h.

All volume integrals use the ``2k + 2``-point Gauss rule of :func:`basis.volume_rule`,
so norms, assembly and error measurement share one quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import basis
from .angular import AngularQuadrature
from .mesh import Mesh1D

__all__ = [
    "ProblemSpec",
    "DgField",
    "as_function",
    "apply_collision",
    "apply_collision_inverse",
    "l2_norm",
    "q_norm",
    "boundary_norm",
    "jump_norm",
    "triple_norm",
    "apply_operator",
    "rhs_vector",
    "bilinear_form",
    "rhs_functional",
    "galerkin_residual",
]


class DomainError(ValueError):
    """Raised when cross sections violate the positivity assumptions."""


def as_function(value) -> Callable:
    """Wrap a constant as a vectorized callable; callables pass through."""
    if callable(value):
        return value
    c = float(value)

    def constant(x):
        return np.full(np.shape(x), c)

    constant.value = c
    return constant


@dataclass(frozen=True)
class ProblemSpec:
    """Scaled slab problem mu u_x + (sigma_t/eps) u = (sigma_t/eps - eps sigma_a) avg(u) + eps f.

    ``boundary_left`` is sampled at mu > 0 (x = a), ``boundary_right`` at mu < 0 (x = b).
    """

    sigma_t: Callable = 1.0
    sigma_a: Callable = 1.0
    epsilon: float = 1.0
    source: Callable = 0.0
    boundary_left: Callable = 0.0
    boundary_right: Callable = 0.0

    def __post_init__(self):
        for name in ("sigma_t", "sigma_a", "source", "boundary_left", "boundary_right"):
            object.__setattr__(self, name, as_function(getattr(self, name)))
        eps = float(self.epsilon)
        if not 0.0 < eps <= 1.0:
            raise ValueError("epsilon must lie in (0,1]")
        object.__setattr__(self, "epsilon", eps)

    def coefficients(self, x) -> tuple[np.ndarray, np.ndarray]:
        """sigma_t and sigma_a at ``x``, validated against the positivity assumptions."""
        st = np.asarray(self.sigma_t(x), dtype=float)
        sa = np.asarray(self.sigma_a(x), dtype=float)
        if np.any(sa <= 0):
            raise DomainError("sigma_a must be strictly positive")
        if np.any(st - self.epsilon**2 * sa <= 0):
            raise DomainError("sigma_t - eps^2 sigma_a must be strictly positive")
        return np.broadcast_to(st, np.shape(x)), np.broadcast_to(sa, np.shape(x))

    def inflow_values(self, quadrature: AngularQuadrature) -> np.ndarray:
        """Per-ordinate inflow samples: alpha_l(mu_l) for mu_l > 0, alpha_r(mu_l) for mu_l < 0."""
        mu = quadrature.ordinates
        left = np.asarray(self.boundary_left(mu), dtype=float) * np.ones_like(mu)
        right = np.asarray(self.boundary_right(mu), dtype=float) * np.ones_like(mu)
        return np.where(mu > 0, left, right)

    def with_boundary(self, left, right) -> "ProblemSpec":
        return replace(self, boundary_left=left, boundary_right=right)


@dataclass
class DgField:
    """Discrete ordinates DG field: ``coeffs[l, cell, m]`` are modal Legendre coefficients."""

    coeffs: np.ndarray
    mesh: Mesh1D
    quadrature: AngularQuadrature = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        L, nc, _ = self.coeffs.shape
        if L != self.quadrature.size or nc != self.mesh.ncells:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} incompatible with "
                f"L={self.quadrature.size}, ncells={self.mesh.ncells}"
            )

    @property
    def degree(self) -> int:
        return self.coeffs.shape[2] - 1

    @classmethod
    def zeros(cls, mesh: Mesh1D, quadrature: AngularQuadrature, k: int) -> "DgField":
        return cls(np.zeros((quadrature.size, mesh.ncells, k + 1)), mesh, quadrature)

    @classmethod
    def from_function(cls, func, mesh, quadrature, k) -> "DgField":
        """Project ``func(x, mu)`` onto the space ordinate by ordinate."""
        coeffs = np.stack(
            [basis.project_function(lambda x, m=m: func(x, m), mesh, k) for m in quadrature.ordinates]
        )
        return cls(coeffs, mesh, quadrature)

    def scalar_flux(self) -> np.ndarray:
        return np.tensordot(self.quadrature.weights, self.coeffs, axes=(0, 0))

    def traces(self) -> tuple[np.ndarray, np.ndarray]:
        """Values at the left and right end of every cell; each shape (L, ncells)."""
        k = self.degree
        return self.coeffs @ basis.left_values(k), self.coeffs @ basis.right_values(k)

    def evaluate(self, x) -> np.ndarray:
        """Point values u^l(x), shape (L, len(x)); points on an edge take the right cell."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        m = self.mesh
        cell = np.clip(((x - m.a) / m.h).astype(int), 0, m.ncells - 1)
        xi = 2.0 * (x - m.centers[cell]) / m.h
        p = basis.legendre_values(self.degree, xi)
        return np.einsum("lcm,cm->lc", self.coeffs[:, cell, :], p)

    def __add__(self, other: "DgField") -> "DgField":
        return DgField(self.coeffs + other.coeffs, self.mesh, self.quadrature)

    def __sub__(self, other: "DgField") -> "DgField":
        return DgField(self.coeffs - other.coeffs, self.mesh, self.quadrature)

    def __mul__(self, scalar: float) -> "DgField":
        return DgField(self.coeffs * scalar, self.mesh, self.quadrature)

    __rmul__ = __mul__


def apply_collision(spec: ProblemSpec, quadrature: AngularQuadrature, values, x) -> np.ndarray:
    """(Q v)_l = (sigma_t/eps)(v_l - avg v) + eps sigma_a avg v at the point ``x``."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] != quadrature.size:
        raise ValueError(f"expected {quadrature.size} per-ordinate values, got {v.shape[0]}")
    st, sa = spec.coefficients(x)
    eps = spec.epsilon
    vbar = np.tensordot(quadrature.weights, v, axes=(0, 0))
    return st / eps * (v - vbar) + eps * sa * vbar


def apply_collision_inverse(spec: ProblemSpec, quadrature: AngularQuadrature, values, x) -> np.ndarray:
    """Q^{-1} v = avg(v)/(eps sigma_a) + (eps/sigma_t)(v - avg v)."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] != quadrature.size:
        raise ValueError(f"expected {quadrature.size} per-ordinate values, got {v.shape[0]}")
    st, sa = spec.coefficients(x)
    eps = spec.epsilon
    vbar = np.tensordot(quadrature.weights, v, axes=(0, 0))
    return vbar / (eps * sa) + eps / st * (v - vbar)


def _volume_data(u: DgField):
    # Gauss weights scaled to physical cells and point values u^l(x_cq)
    xi, wq = basis.volume_rule(u.degree)
    x = u.mesh.map_points(xi)
    vals = np.einsum("lcm,qm->lcq", u.coeffs, basis.legendre_values(u.degree, xi))
    return x, 0.5 * u.mesh.h * wq, vals


def l2_norm(u: DgField) -> float:
    """sqrt(sum_l w_l ||u^l||^2_{L2(X)})."""
    _, wx, vals = _volume_data(u)
    return float(np.sqrt(np.einsum("l,lcq,q->", u.quadrature.weights, vals**2, wx)))


def q_norm(u: DgField, spec: ProblemSpec) -> float:
    """||u||_Q^2 = (1/eps)||sigma_t^{1/2}(u - avg u)||^2 + eps||sigma_a^{1/2} avg u||^2."""
    x, wx, vals = _volume_data(u)
    st, sa = spec.coefficients(x)
    w = u.quadrature.weights
    ubar = np.tensordot(w, vals, axes=(0, 0))
    aniso = np.einsum("l,lcq,cq,q->", w, (vals - ubar) ** 2, st, wx)
    iso = np.einsum("cq,cq,q->", ubar**2, sa, wx)
    eps = spec.epsilon
    return float(np.sqrt(aniso / eps + eps * iso))


def boundary_norm(u: DgField, side: str = "both") -> float:
    """|mu|-weighted boundary norm over the inflow ("in"), outflow ("out") or both ends."""
    if side not in ("in", "out", "both"):
        raise ValueError(f"side must be 'in', 'out' or 'both', got {side!r}")
    mu, w = u.quadrature.ordinates, u.quadrature.weights
    left, right = u.traces()
    at_a, at_b = left[:, 0], right[:, -1]
    inflow = np.where(mu > 0, at_a, at_b)
    outflow = np.where(mu > 0, at_b, at_a)
    total = 0.0
    if side in ("in", "both"):
        total += np.sum(w * np.abs(mu) * inflow**2)
    if side in ("out", "both"):
        total += np.sum(w * np.abs(mu) * outflow**2)
    return float(np.sqrt(total))


def jump_norm(u: DgField) -> float:
    """sqrt(sum over interior edges of sum_l w_l |mu_l| [u^l]^2)."""
    mu, w = u.quadrature.ordinates, u.quadrature.weights
    left, right = u.traces()
    jumps = right[:, :-1] - left[:, 1:]
    return float(np.sqrt(np.einsum("l,le->", w * np.abs(mu), jumps**2)))


def triple_norm(u: DgField, spec: ProblemSpec) -> float:
    """|||u|||^2 = eps(||u||_Q^2 + ||u||_dX^2/2 + ||[u]||^2/2)."""
    sq = q_norm(u, spec) ** 2 + 0.5 * boundary_norm(u) ** 2 + 0.5 * jump_norm(u) ** 2
    return float(np.sqrt(spec.epsilon * sq))


def apply_operator(u: DgField, spec: ProblemSpec) -> np.ndarray:
    """Tensor r with a_h(u, v) = sum(r * v.coeffs) for every discrete v.

    Upwind form: interior-edge flux of the upwind trace against the jump of v,
    minus the advection volume term, plus outflow boundary and collision terms.
    """
    quad, mesh, k = u.quadrature, u.mesh, u.degree
    mu, w = quad.ordinates, quad.weights
    eps = spec.epsilon
    pl, pr = basis.left_values(k), basis.right_values(k)
    left, right = u.traces()
    pos = (mu > 0)[:, None]

    # edge e sits between cell e (K+, normal +1) and cell e+1 (K-); [v] = v_e(x_R) - v_{e+1}(x_L)
    upwind = np.where(pos, right[:, :-1], left[:, 1:])
    flux = (w * mu)[:, None] * upwind
    r = np.zeros_like(u.coeffs)
    r[:, :-1, :] += flux[:, :, None] * pr
    r[:, 1:, :] -= flux[:, :, None] * pl

    # -(u, mu dv/dx)_K: the h/2 Jacobian cancels against d/dx = (2/h) d/dxi
    S = basis.stiffness(k)
    r -= (w * mu)[:, None, None] * np.einsum("mn,lcn->lcm", S, u.coeffs)

    # outflow boundary: x=b for mu>0, x=a for mu<0
    wa = w * np.abs(mu)
    out_b = np.where(mu > 0, right[:, -1], 0.0)
    out_a = np.where(mu < 0, left[:, 0], 0.0)
    r[:, -1, :] += (wa * out_b)[:, None] * pr
    r[:, 0, :] += (wa * out_a)[:, None] * pl

    # collision (Q u, v) by quadrature
    x, wx, vals = _volume_data(u)
    st, sa = spec.coefficients(x)
    ubar = np.tensordot(w, vals, axes=(0, 0))
    qu = st / eps * (vals - ubar) + eps * sa * ubar
    xi, _ = basis.volume_rule(k)
    p = basis.legendre_values(k, xi)
    r += np.einsum("l,lcq,q,qm->lcm", w, qu, wx, p)
    return r


def rhs_vector(spec: ProblemSpec, quadrature: AngularQuadrature, mesh: Mesh1D, k: int) -> np.ndarray:
    """Tensor b with l(v) = sum(b * v.coeffs): eps (f, v) + (alpha, v) on the inflow boundary."""
    mu, w = quadrature.ordinates, quadrature.weights
    xi, wq = basis.volume_rule(k)
    x = mesh.map_points(xi)
    fx = np.broadcast_to(np.asarray(spec.source(x), dtype=float), x.shape)
    p = basis.legendre_values(k, xi)
    fv = spec.epsilon * 0.5 * mesh.h * np.einsum("cq,q,qm->cm", fx, wq, p)
    b = w[:, None, None] * fv[None, :, :]
    alpha = spec.inflow_values(quadrature)
    wa = w * np.abs(mu) * alpha
    b[:, 0, :] += np.where(mu > 0, wa, 0.0)[:, None] * basis.left_values(k)
    b[:, -1, :] += np.where(mu < 0, wa, 0.0)[:, None] * basis.right_values(k)
    return b


def bilinear_form(u: DgField, v: DgField, spec: ProblemSpec) -> float:
    if u.coeffs.shape != v.coeffs.shape:
        raise ValueError("u and v must share degree, mesh and quadrature")
    return float(np.sum(apply_operator(u, spec) * v.coeffs))


def rhs_functional(v: DgField, spec: ProblemSpec) -> float:
    return float(np.sum(rhs_vector(spec, v.quadrature, v.mesh, v.degree) * v.coeffs))


def galerkin_residual(u: DgField, spec: ProblemSpec) -> np.ndarray:
    """a_h(u, phi) - l(phi) for every basis field phi (same layout as u.coeffs)."""
    return apply_operator(u, spec) - rhs_vector(spec, u.quadrature, u.mesh, u.degree)
