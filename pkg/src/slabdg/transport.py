"""Upwind DG transport sweep for a frozen source.

Solves (mu_l d/dx + sigma_t/eps) u^l = s cell by cell along the wind,
with the inflow trace taken from the upwind neighbour or the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import basis
from .angular import AngularQuadrature
from .mesh import Mesh1D
from .operators import DgField, ProblemSpec

__all__ = ["LocalSystem", "assemble_local", "Sweeper", "sweep", "scalar_flux"]


@dataclass(frozen=True)
class LocalSystem:
    matrix: np.ndarray
    rhs: np.ndarray

    def solve(self) -> np.ndarray:
        return np.linalg.solve(self.matrix, self.rhs)


def _total_mass(spec: ProblemSpec, mesh: Mesh1D, k: int) -> np.ndarray:
    # int_K (sigma_t/eps) P_n P_m dx per cell, shape (ncells, k+1, k+1)
    xi, wq = basis.volume_rule(k)
    x = mesh.map_points(xi)
    st, _ = spec.coefficients(x)
    p = basis.legendre_values(k, xi)
    return 0.5 * mesh.h / spec.epsilon * np.einsum("cq,q,qm,qn->cmn", st, wq, p, p)


def _advection(mu: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Advection block (surface outflow minus volume term) and inflow coupling vector."""
    S = basis.stiffness(k)
    pl, pr = basis.left_values(k), basis.right_values(k)
    if mu > 0:
        return mu * np.outer(pr, pr) - mu * S, mu * pl
    return -mu * np.outer(pl, pl) - mu * S, -mu * pr


def assemble_local(cell: int, mu: float, spec: ProblemSpec, mesh: Mesh1D, k: int,
                   source, inflow_value: float) -> LocalSystem:
    """Local upwind DG system on one cell for ordinate ``mu``.

    ``source`` is either a callable of x or the cell's modal coefficients.
    """
    if mu == 0:
        raise ValueError("ordinate mu = 0 has no upwind direction")
    if not 0 <= cell < mesh.ncells:
        raise IndexError(f"cell {cell} outside mesh with {mesh.ncells} cells")
    adv, coupling = _advection(mu, k)
    matrix = adv + _total_mass(spec, mesh, k)[cell]
    if callable(source):
        xi, wq = basis.volume_rule(k)
        x = mesh.centers[cell] + 0.5 * mesh.h * xi
        sx = np.broadcast_to(np.asarray(source(x), dtype=float), x.shape)
        load = 0.5 * mesh.h * basis.legendre_values(k, xi).T @ (wq * sx)
    else:
        load = 0.5 * mesh.h * basis.mass_diagonal(k) * np.asarray(source, dtype=float)
    return LocalSystem(matrix, load + coupling * inflow_value)


class Sweeper:
    """Precomputed inverse local systems for one (spec, quadrature, mesh, k)."""

    def __init__(self, spec: ProblemSpec, quadrature: AngularQuadrature, mesh: Mesh1D, k: int):
        self.spec, self.quadrature, self.mesh, self.k = spec, quadrature, mesh, k
        mu = quadrature.ordinates
        if np.any(mu == 0):
            raise ValueError("ordinate mu = 0 has no upwind direction")
        mass = _total_mass(spec, mesh, k)
        L, nc, n = mu.size, mesh.ncells, k + 1
        self._inv = np.empty((L, nc, n, n))
        self._gain = np.empty((L, nc, n))
        self._out = np.empty((L, n))
        for l, m in enumerate(mu):
            adv, coupling = _advection(m, k)
            inv = np.linalg.inv(adv[None, :, :] + mass)
            self._inv[l] = inv
            self._gain[l] = inv @ coupling
            self._out[l] = basis.right_values(k) if m > 0 else basis.left_values(k)
        # transmission of the inflow trace to the outflow trace
        self._transmit = np.einsum("lcm,lm->lc", self._gain, self._out)
        self._load_scale = 0.5 * mesh.h * basis.mass_diagonal(k)
        self._pos = mu > 0
        self._adv = np.stack([_advection(m, k)[0] for m in mu])
        self._coupling = np.stack([_advection(m, k)[1] for m in mu])

    def sweep(self, source: np.ndarray, inflow: np.ndarray) -> np.ndarray:
        """Sweep all ordinates; ``source`` is modal, shape (ncells, k+1) or (L, ncells, k+1)."""
        L, nc = self.quadrature.size, self.mesh.ncells
        s = np.asarray(source, dtype=float)
        if s.ndim == 2:
            s = np.broadcast_to(s, (L,) + s.shape)
        if s.shape != (L, nc, self.k + 1):
            raise ValueError(f"source shape {s.shape} incompatible with (L, ncells, k+1)")
        return self.sweep_load(s * self._load_scale, inflow)

    def sweep_load(self, load: np.ndarray, inflow: np.ndarray) -> np.ndarray:
        """Sweep with the tested right-hand side int s P_m dx given directly, shape (L, ncells, k+1)."""
        L, nc = self.quadrature.size, self.mesh.ncells
        local = np.einsum("lcmn,lcn->lcm", self._inv, load)
        base = np.einsum("lcm,lm->lc", local, self._out)
        # inflow trace of every cell via the scalar recurrence t_c = base_c + transmit_c * t_{c-1}
        t_in = np.empty((L, nc))
        inflow = np.asarray(inflow, dtype=float)
        for sel, order in ((self._pos, range(nc)), (~self._pos, range(nc - 1, -1, -1))):
            t = inflow[sel].copy()
            b, tr = base[sel], self._transmit[sel]
            ti = t_in[sel]
            for c in order:
                ti[:, c] = t
                t = b[:, c] + tr[:, c] * t
            t_in[sel] = ti
        return local + self._gain * t_in[:, :, None]

    def advect(self, phi: np.ndarray) -> np.ndarray:
        """Upwind DG advection of the isotropic field ``phi`` for every ordinate, zero inflow.

        Returns the tested residual (L, ncells, k+1) of mu d/dx phi without the mass term.
        """
        out_vals = np.einsum("lm,cm->lc", self._out, phi)
        t_in = np.zeros_like(out_vals)
        t_in[self._pos, 1:] = out_vals[self._pos, :-1]
        t_in[~self._pos, :-1] = out_vals[~self._pos, 1:]
        return np.einsum("lmn,cn->lcm", self._adv, phi) - self._coupling[:, None, :] * t_in[:, :, None]


def sweep(spec: ProblemSpec, quadrature: AngularQuadrature, mesh: Mesh1D, k: int,
          scattering_source: np.ndarray, boundary: np.ndarray | None = None) -> DgField:
    """One transport sweep; ``boundary`` defaults to the spec's inflow samples."""
    if boundary is None:
        boundary = spec.inflow_values(quadrature)
    coeffs = Sweeper(spec, quadrature, mesh, k).sweep(scattering_source, boundary)
    return DgField(coeffs, mesh, quadrature)


def scalar_flux(field: DgField) -> np.ndarray:
    """Per-cell modal coefficients of sum_l w_l u^l (fixed summation order over l)."""
    return field.scalar_flux()
