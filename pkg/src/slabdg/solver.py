"""Source iteration with diffusion synthetic acceleration (DSA).

The outer unknown is the modal scalar flux ``phi`` of shape (ncells, k+1).
One step sweeps with the lagged source (sigma_t/eps - eps sigma_a) phi + eps f;
DSA adds the solution of a P1 continuous-FEM diffusion problem for the error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from . import basis
from .angular import AngularQuadrature
from .mesh import Mesh1D
from .operators import DgField, ProblemSpec, galerkin_residual, rhs_vector
from .transport import Sweeper

__all__ = [
    "SolveOptions",
    "SolveResult",
    "TransportProblem",
    "source_iteration_step",
    "dsa_correct",
    "solve",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-10
    max_iterations: int = 10000
    acceleration: str = "dsa"
    krylov_wrap: bool = True
    restart: int = 30

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be an integer >= 1")
        if self.acceleration not in ("none", "dsa"):
            raise ValueError(f"acceleration must be 'none' or 'dsa', got {self.acceleration!r}")


@dataclass
class SolveResult:
    field: DgField
    iterations: int
    final_residual: float
    converged: bool
    galerkin_residual: float = np.nan
    history: list | None = None
    cycle_residuals: list | None = None  # true relative residual after each GMRES restart cycle


class TransportProblem:
    """Discrete operators of one (spec, quadrature, mesh, k), built once and reused."""

    def __init__(self, spec: ProblemSpec, quadrature: AngularQuadrature, mesh: Mesh1D, k: int):
        self.spec, self.quadrature, self.mesh, self.k = spec, quadrature, mesh, k
        self.sweeper = Sweeper(spec, quadrature, mesh, k)
        eps = spec.epsilon
        xi, wq = basis.volume_rule(k)
        self._xi, self._wq = xi, wq
        x = mesh.map_points(xi)
        st, sa = spec.coefficients(x)
        p = basis.legendre_values(k, xi)
        self._p = p
        mass = basis.mass_diagonal(k)
        scatter = st / eps - eps * sa
        # modal projection of scatter(x) * phi(x), per cell
        self._scatter = np.einsum("cq,q,qm,qn->cmn", scatter, wq, p, p) / mass[None, :, None]
        # tested absorption eps sigma_a phi, used by the deviation form of I - K
        self._absorb = 0.5 * mesh.h * eps * np.einsum("cq,q,qm,qn->cmn", sa, wq, p, p)
        fx = np.broadcast_to(np.asarray(spec.source(x), dtype=float), x.shape)
        self.fixed_source = eps * np.einsum("cq,q,qm->cm", fx, wq, p) / mass
        self.inflow = spec.inflow_values(quadrature)
        self._st, self._sa = st, sa
        self._dsa = None

    @property
    def flux_shape(self) -> tuple[int, int]:
        return (self.mesh.ncells, self.k + 1)

    def scattering_source(self, phi: np.ndarray) -> np.ndarray:
        return np.einsum("cmn,cn->cm", self._scatter, phi)

    def step(self, phi: np.ndarray, with_data: bool = True) -> np.ndarray:
        """Sweep with lagged flux ``phi``; returns the angular coefficients."""
        src = self.scattering_source(phi)
        if with_data:
            return self.sweeper.sweep(src + self.fixed_source, self.inflow)
        return self.sweeper.sweep(src, np.zeros_like(self.inflow))

    def flux_residual(self, phi: np.ndarray) -> np.ndarray:
        """(I - K) phi without cancellation.

        The swept field is phi + zeta where zeta solves the transport problem with
        source -eps sigma_a phi - mu d/dx phi; then (I - K) phi = -avg(zeta).
        """
        load = -np.einsum("cmn,cn->cm", self._absorb, phi)[None] - self.sweeper.advect(phi)
        zeta = self.sweeper.sweep_load(load, np.zeros_like(self.inflow))
        return -self.flux(zeta)

    def flux(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(self.quadrature.weights, coeffs, axes=(0, 0))

    # --- diffusion correction -------------------------------------------------
    def _build_dsa(self):
        # P1 continuous FEM: -(D u')' + eps sigma_a u = r, Robin term u/2 at both ends
        mesh, eps, h = self.mesh, self.spec.epsilon, self.mesh.h
        nc = mesh.ncells
        wq, xi = self._wq, self._xi
        diff = np.einsum("cq,q->c", eps / (3.0 * self._st), 0.5 * wq)  # cell mean of D
        hat = np.stack([(1 - xi) / 2, (1 + xi) / 2], axis=1)  # (q, 2)
        absm = 0.5 * h * np.einsum("cq,q,qi,qj->cij", eps * self._sa, wq, hat, hat)
        stiff = (diff / h)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
        local = stiff + absm
        # symmetric tridiagonal in banded storage (upper form)
        ab = np.zeros((2, nc + 1))
        np.add.at(ab[1], np.arange(nc), local[:, 0, 0])
        np.add.at(ab[1], np.arange(1, nc + 1), local[:, 1, 1])
        ab[0, 1:] = local[:, 0, 1]
        ab[1, 0] += 0.5
        ab[1, -1] += 0.5
        self._dsa = (ab, 0.5 * h * hat.T @ (self._wq[:, None] * self._p))  # load: (2, k+1)
        self._dsa_chol = scipy.linalg.cholesky_banded(ab)

    def dsa_correct(self, residual: np.ndarray) -> np.ndarray:
        """Diffusion correction for a modal flux residual (ncells, k+1)."""
        if self._dsa is None:
            self._build_dsa()
        _, load = self._dsa
        r = np.asarray(residual, dtype=float)
        cell_load = r @ load.T  # (ncells, 2): int r N_left, int r N_right
        rhs = np.zeros(self.mesh.ncells + 1)
        rhs[:-1] += cell_load[:, 0]
        rhs[1:] += cell_load[:, 1]
        nodal = scipy.linalg.cho_solve_banded((self._dsa_chol, False), rhs)
        out = np.zeros_like(r)
        out[:, 0] = 0.5 * (nodal[:-1] + nodal[1:])
        if self.k >= 1:
            out[:, 1] = 0.5 * (nodal[1:] - nodal[:-1])
        return out

    def precondition(self, phi_delta: np.ndarray) -> np.ndarray:
        """Approximate (I - K)^{-1} by I + D^{-1} C."""
        return phi_delta + self.dsa_correct(self.scattering_source(phi_delta))


def source_iteration_step(spec, quadrature, mesh, k, current_flux) -> DgField:
    """One sweep with the scattering source built from ``current_flux``."""
    prob = TransportProblem(spec, quadrature, mesh, k)
    return DgField(prob.step(np.asarray(current_flux, dtype=float)), mesh, quadrature)


def dsa_correct(spec, mesh, k, flux_residual) -> np.ndarray:
    """Diffusion correction; ``flux_residual`` is the modal scattering-source residual."""
    from .angular import build_quadrature

    prob = TransportProblem(spec, build_quadrature(2), mesh, k)
    return prob.dsa_correct(flux_residual)


def _relative(delta: np.ndarray, ref: np.ndarray, mass: np.ndarray) -> float:
    num = np.sqrt(np.sum(delta**2 * mass))
    den = np.sqrt(np.sum(ref**2 * mass))
    return float(num / den) if den > 0 else float(num)


def _richardson(prob: TransportProblem, opts: SolveOptions):
    mass = basis.mass_diagonal(prob.k)
    phi = np.zeros(prob.flux_shape)
    history = []
    rel = np.inf
    it = 0
    for it in range(1, opts.max_iterations + 1):
        psi = prob.step(phi)
        half = prob.flux(psi)
        delta = half - phi
        if opts.acceleration == "dsa":
            new = half + prob.dsa_correct(prob.scattering_source(delta))
        else:
            new = half
        rel = _relative(new - phi, new, mass)
        history.append(rel)
        phi = new
        if rel <= opts.tolerance:
            break
    return phi, it, rel, history, list(history)


def _krylov(prob: TransportProblem, opts: SolveOptions):
    # right-preconditioned restarted GMRES on (I - K) phi = b, so the monitored
    # residual is the true flux residual
    shape = prob.flux_shape
    n = shape[0] * shape[1]
    mass = basis.mass_diagonal(prob.k)

    def transport(v):
        return prob.flux_residual(v.reshape(shape)).ravel()

    if opts.acceleration == "dsa":
        def precond(v):
            return prob.precondition(v.reshape(shape)).ravel()
    else:
        def precond(v):
            return v

    A = spla.LinearOperator((n, n), matvec=lambda v: transport(precond(v)))
    b = prob.flux(prob.step(np.zeros(shape))).ravel()
    if not np.any(b):
        return np.zeros(shape), 1, 0.0, [0.0], [0.0]
    history = []
    count = [0]

    def callback(res):
        count[0] += 1
        history.append(float(res))

    y = np.zeros(n)
    rel = best = np.inf
    stalls = 0
    cycles = []
    while count[0] < opts.max_iterations:
        budget = opts.max_iterations - count[0]
        before = count[0]
        y, _ = spla.gmres(A, b, x0=y, rtol=0.1 * opts.tolerance, atol=0.0,
                          restart=min(opts.restart, budget), maxiter=1,
                          callback=callback, callback_type="pr_norm")
        phi = precond(y)
        rel = _relative((b - transport(phi)).reshape(shape), b.reshape(shape), mass)
        cycles.append(rel)
        # stop at the tolerance or once several restarts make no progress
        stalls = stalls + 1 if rel >= 0.5 * best else 0
        best = min(best, rel)
        if rel <= opts.tolerance or count[0] == before or stalls >= 3:
            break
    return precond(y).reshape(shape), count[0], rel, history, cycles


def solve(spec: ProblemSpec, quadrature: AngularQuadrature, mesh: Mesh1D, k: int,
          options: SolveOptions | None = None, problem: TransportProblem | None = None) -> SolveResult:
    """Solve the discrete ordinates DG problem a_h(u_h, v) = l(v) for all v."""
    opts = options or SolveOptions()
    prob = problem or TransportProblem(spec, quadrature, mesh, k)
    runner = _krylov if opts.krylov_wrap else _richardson
    phi, iterations, rel, history, cycles = runner(prob, opts)
    field = DgField(prob.step(phi), mesh, quadrature)
    res = galerkin_residual(field, spec)
    scale = np.max(np.abs(rhs_vector(spec, quadrature, mesh, k)))
    gres = float(np.max(np.abs(res)) / scale) if scale > 0 else float(np.max(np.abs(res)))
    converged = bool(rel <= opts.tolerance)
    if not converged:
        log.warning("solve did not converge: residual %.3e after %d iterations", rel, iterations)
    return SolveResult(field, iterations, rel, converged, gres, history, cycles)
