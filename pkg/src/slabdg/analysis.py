"""Verification and experiment tools: Radau projection, nested-mesh errors, rates and studies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import basis
from .angular import AngularQuadrature
from .boundary import BlendSpec, HFunctionTable, blended_boundary, compute_h_function, lambda_star, make_blend
from .mesh import Mesh1D, mesh_at_level
from .operators import DgField, ProblemSpec, as_function, l2_norm, q_norm, triple_norm
from .solver import SolveOptions, SolveResult, solve

__all__ = [
    "radau_project",
    "radau_field",
    "prolong",
    "error_norm",
    "convergence_rates",
    "ReportRow",
    "ConvergenceReport",
    "StudyError",
    "convergence_study",
    "ScalingStudy",
    "apriori_scaling_study",
    "default_lambda_grid",
    "LambdaSweep",
    "lambda_sweep",
    "boundary_deviation",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("level", "h", "epsilon", "k", "lambda", "norm", "error", "rate")
NORM_KINDS = ("l2", "q", "triple")


class StudyError(RuntimeError):
    """A study could not be completed, for example because a solve did not converge."""


# --- Radau projection ---------------------------------------------------------


def radau_project(f, cell: tuple[float, float], k: int, wind: float) -> np.ndarray:
    """Radau projection of ``f`` onto P^k on ``cell`` in modal Legendre coefficients.

    The result p satisfies (p - f, v) = 0 for all v in P^{k-1} and matches f at
    the outflow end: the right end for wind > 0, the left end for wind < 0.
    """
    if k < 1:
        raise ValueError("the Radau projection needs k >= 1")
    if wind == 0:
        raise ValueError("wind must be nonzero")
    a, b = float(cell[0]), float(cell[1])
    if not a < b:
        raise ValueError("cell must satisfy a < b")
    f = as_function(f)
    xi, w = basis.volume_rule(k, max(2 * k + 2, 24))
    x = 0.5 * (a + b) + 0.5 * (b - a) * xi
    p = basis.legendre_values(k, xi)
    fx = np.asarray(f(x), dtype=float) * np.ones_like(x)
    coeffs = np.zeros(k + 1)
    coeffs[:k] = (w * fx) @ p[:, :k] / basis.mass_diagonal(k)[:k]
    end = basis.right_values(k) if wind > 0 else basis.left_values(k)
    target = float(np.asarray(f(np.array([b if wind > 0 else a])), dtype=float).ravel()[0])
    coeffs[k] = (target - coeffs[:k] @ end[:k]) / end[k]
    return coeffs


def radau_field(func, mesh: Mesh1D, quadrature: AngularQuadrature, k: int) -> DgField:
    """Per-ordinate Radau projection of ``func(x, mu)`` with the wind of each ordinate."""
    edges = mesh.cell_edges
    coeffs = np.empty((quadrature.size, mesh.ncells, k + 1))
    for l, mu in enumerate(quadrature.ordinates):
        g = lambda x, m=mu: func(x, m)
        for c in range(mesh.ncells):
            coeffs[l, c] = radau_project(g, (edges[c], edges[c + 1]), k, mu)
    return DgField(coeffs, mesh, quadrature)


# --- nested-mesh errors -------------------------------------------------------


def prolong(coarse: DgField, fine_mesh: Mesh1D) -> DgField:
    """Exact representation of a coarse field on a nested finer mesh."""
    if not fine_mesh.is_refinement_of(coarse.mesh):
        raise ValueError("meshes are not nested: the fine mesh must refine the coarse mesh")
    k = coarse.degree
    xi, w = basis.volume_rule(k)
    x = fine_mesh.map_points(xi)
    vals = coarse.evaluate(x.ravel()).reshape(coarse.quadrature.size, *x.shape)
    p = basis.legendre_values(k, xi)
    coeffs = np.einsum("lcq,q,qm->lcm", vals, w, p) / basis.mass_diagonal(k)
    return DgField(coeffs, fine_mesh, coarse.quadrature)


def error_norm(coarse: DgField, reference: DgField, norm_kind: str = "l2",
               spec: ProblemSpec | None = None) -> float:
    """Norm of coarse - reference evaluated on the reference mesh.

    ``l2`` is the angular-weighted L2 norm; ``q`` and ``triple`` need ``spec``.
    """
    if norm_kind not in NORM_KINDS:
        raise ValueError(f"norm_kind must be one of {NORM_KINDS}, got {norm_kind!r}")
    if coarse.quadrature.size != reference.quadrature.size or not np.allclose(
        coarse.quadrature.ordinates, reference.quadrature.ordinates, rtol=0, atol=1e-15
    ):
        raise ValueError("fields must share the angular quadrature")
    if coarse.degree != reference.degree:
        raise ValueError("fields must share the polynomial degree")
    diff = prolong(coarse, reference.mesh) - reference
    if norm_kind == "l2":
        return l2_norm(diff)
    if spec is None:
        raise ValueError(f"norm_kind {norm_kind!r} needs the problem spec")
    return q_norm(diff, spec) if norm_kind == "q" else triple_norm(diff, spec)


def convergence_rates(errors, hs) -> list[float]:
    """rate_j = log(e_{j-1}/e_j) / log(h_{j-1}/h_j); nan where an error is not positive."""
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("errors and hs must have equal length >= 2")
    if any(h1 >= h0 for h0, h1 in zip(hs, hs[1:])):
        raise ValueError("hs must be strictly decreasing")
    rates = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if e0 <= 0 or e1 <= 0:
            rates.append(math.nan)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


# --- convergence reports ------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    level: int
    h: float
    epsilon: float
    k: int
    lam: float
    norm: str
    error: float
    rate: float = math.nan
    galerkin_residual: float = field(default=math.nan, compare=False)  # diagnostic, not written to CSV

    def csv_fields(self) -> list[str]:
        return [
            str(self.level), _fmt(self.h), _fmt(self.epsilon), str(self.k),
            _fmt(self.lam), self.norm, _fmt(self.error), _fmt(self.rate),
        ]


def _fmt(value: float) -> str:
    # scientific with 10 significant digits; keeps CSV output byte-deterministic
    return "nan" if math.isnan(value) else f"{value:.9e}"


@dataclass
class ConvergenceReport:
    rows: list[ReportRow] = field(default_factory=list)
    reference_residuals: list[float] = field(default_factory=list)

    @classmethod
    def from_errors(cls, levels, hs, errors, epsilon, k, lams, norm,
                    galerkin_residuals=None) -> "ConvergenceReport":
        rates = [math.nan] + convergence_rates(errors, hs) if len(errors) > 1 else [math.nan]
        lams = list(lams) if np.ndim(lams) else [float(lams)] * len(errors)
        gres = list(galerkin_residuals) if galerkin_residuals is not None else [math.nan] * len(errors)
        return cls([
            ReportRow(int(j), float(h), float(epsilon), int(k), float(lam), norm, float(e), float(r), float(g))
            for j, h, e, lam, r, g in zip(levels, hs, errors, lams, rates, gres)
        ])

    def extend(self, other: "ConvergenceReport") -> None:
        self.rows.extend(other.rows)
        self.reference_residuals.extend(other.reference_residuals)

    @property
    def errors(self) -> list[float]:
        return [r.error for r in self.rows]

    @property
    def rates(self) -> list[float]:
        return [r.rate for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(row.csv_fields())
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _solve_checked(spec, quadrature, mesh, k, options, what: str) -> SolveResult:
    result = solve(spec, quadrature, mesh, k, options)
    if not result.converged:
        raise StudyError(
            f"{what} did not converge on {mesh.ncells} cells: residual {result.final_residual:.3e} "
            f"after {result.iterations} iterations"
        )
    return result


def _blend_for(spec, blend, h, k, q, table):
    """Return (lambda, blended spec) for one study row."""
    if blend is None or blend == "none":
        return 1.0, spec
    if blend == "lambda_star":
        lam = lambda_star(spec.epsilon, h, q if q is not None else k + 1)
    else:
        lam = float(blend)
    return lam, blended_boundary(spec, make_blend(spec, lam, table))


def convergence_study(spec: ProblemSpec, quadrature: AngularQuadrature, base: Mesh1D, levels, k: int,
                      reference_level: int | None = None, norm_kind: str = "l2",
                      options: SolveOptions | None = None, blend=None, q: int | None = None,
                      table: HFunctionTable | None = None, reference: DgField | None = None
                      ) -> ConvergenceReport:
    """Errors of solves on ``levels`` of ``base`` against one fine reference solve.

    The reference uses the unblended boundary data (lambda = 1) at ``reference_level``,
    by default five levels finer than the finest study level. ``blend`` is ``None``,
    a fixed lambda or ``"lambda_star"``.
    """
    levels = sorted(int(j) for j in levels)
    if not levels:
        raise ValueError("levels must not be empty")
    ref_level = levels[-1] + 5 if reference_level is None else int(reference_level)
    if ref_level <= levels[-1]:
        raise ValueError("reference_level must exceed every study level")
    if blend == "lambda_star" or (blend not in (None, "none") and float(blend) != 1.0):
        table = table if table is not None else compute_h_function()
    ref_residuals = []
    if reference is None:
        ref_run = _solve_checked(spec, quadrature, mesh_at_level(base, ref_level), k, options, "reference solve")
        reference = ref_run.field
        ref_residuals.append(ref_run.galerkin_residual)
    hs, errors, lams, gres = [], [], [], []
    for j in levels:
        mesh = mesh_at_level(base, j)
        lam, run_spec = _blend_for(spec, blend, mesh.h, k, q, table)
        run = _solve_checked(run_spec, quadrature, mesh, k, options, f"level {j} solve")
        hs.append(mesh.h)
        errors.append(error_norm(run.field, reference, norm_kind, spec))
        lams.append(lam)
        gres.append(run.galerkin_residual)
    report = ConvergenceReport.from_errors(levels, hs, errors, spec.epsilon, k, lams, norm_kind, gres)
    report.reference_residuals = ref_residuals
    return report


# --- a priori scaling ---------------------------------------------------------


@dataclass
class ScalingStudy:
    epsilons: list[float]
    anisotropic: list[float]  # ||u_h - avg u_h||
    isotropic: list[float]  # ||avg u_h||
    boundary: list[float]  # ||u_h - alpha_0|| on the boundary
    slope: float

    @property
    def isotropic_ratio(self) -> float:
        vals = np.asarray(self.isotropic)
        return float(vals.max() / vals.min()) if np.all(vals > 0) else math.nan


def _isotropic_part(field_: DgField) -> DgField:
    bar = field_.scalar_flux()
    return DgField(np.broadcast_to(bar, field_.coeffs.shape).copy(), field_.mesh, field_.quadrature)


def _inflow_average(alpha, mu, w) -> float:
    vals = np.asarray(alpha(mu), dtype=float) * np.ones_like(mu)
    return float(np.sum(w * vals) / np.sum(w))


def apriori_scaling_study(specs, mesh: Mesh1D, k: int, quadrature: AngularQuadrature,
                          options: SolveOptions | None = None) -> ScalingStudy:
    """Norm diagnostics of u_h over a family of problems that differ in epsilon.

    The boundary diagnostic compares the traces of u_h at both ends with alpha_0,
    the inflow average of the boundary data on each side.
    """
    mu, w = quadrature.ordinates, quadrature.weights
    eps, aniso, iso, bnd = [], [], [], []
    for spec in specs:
        u = _solve_checked(spec, quadrature, mesh, k, options, f"eps={spec.epsilon:g} solve").field
        bar = _isotropic_part(u)
        a0_left = _inflow_average(spec.boundary_left, mu[mu > 0], w[mu > 0])
        a0_right = _inflow_average(spec.boundary_right, mu[mu < 0], w[mu < 0])
        left, right = u.traces()
        at_a, at_b = left[:, 0] - a0_left, right[:, -1] - a0_right
        bnd.append(float(np.sqrt(np.sum(w * np.abs(mu) * (at_a**2 + at_b**2)))))
        eps.append(spec.epsilon)
        aniso.append(l2_norm(u - bar))
        iso.append(l2_norm(bar))
    ok = np.asarray(aniso) > 0
    if ok.sum() >= 2:
        slope = float(np.polyfit(np.log(np.asarray(eps)[ok]), np.log(np.asarray(aniso)[ok]), 1)[0])
    else:
        slope = math.nan
    return ScalingStudy(eps, aniso, iso, bnd, slope)


# --- lambda sweeps ------------------------------------------------------------


def default_lambda_grid(epsilon: float, h: float, q: int) -> list[float]:
    grid = [round(0.05 * i, 2) for i in range(20)] + [0.99, 0.999, lambda_star(epsilon, h, q), 1.0]
    return sorted(set(grid))


@dataclass
class LambdaSweep:
    lambdas: list[float]
    errors: list[float]
    galerkin_residuals: list[float] = field(default_factory=list)

    @property
    def best(self) -> int:
        return int(np.argmin(self.errors))

    @property
    def lambda_min(self) -> float:
        return self.lambdas[self.best]

    @property
    def error_min(self) -> float:
        return self.errors[self.best]


def lambda_sweep(spec: ProblemSpec, grid, mesh: Mesh1D, k: int, quadrature: AngularQuadrature,
                 reference: DgField, options: SolveOptions | None = None, norm_kind: str = "l2",
                 table: HFunctionTable | None = None) -> LambdaSweep:
    """Error against ``reference`` of the blended problem for every lambda in ``grid``."""
    grid = [float(lam) for lam in grid]
    if any(not 0.0 <= lam <= 1.0 for lam in grid):
        raise ValueError("lambda values must lie in [0,1]")
    table = table if table is not None else compute_h_function()
    base_blend = make_blend(spec, 1.0, table)
    errors, gres = [], []
    for lam in grid:
        blend = BlendSpec(lam, base_blend.alpha_b_left, base_blend.alpha_b_right)
        run = _solve_checked(blended_boundary(spec, blend), quadrature, mesh, k, options,
                             f"lambda={lam:g} solve")
        errors.append(error_norm(run.field, reference, norm_kind, spec))
        gres.append(run.galerkin_residual)
    return LambdaSweep(grid, errors, gres)


def boundary_deviation(spec: ProblemSpec, quadrature: AngularQuadrature,
                       table: HFunctionTable | None = None) -> tuple[float, float]:
    """(delta, delta_inf): size of alpha - alpha_b over the inflow ordinates of both ends.

    delta is the |mu|-weighted discrete norm, delta_inf the largest deviation.
    """
    table = table if table is not None else compute_h_function()
    blend = make_blend(spec, 1.0, table)
    mu, w = quadrature.ordinates, quadrature.weights
    alpha = spec.inflow_values(quadrature)
    alpha_b = np.where(mu > 0, blend.alpha_b_left, blend.alpha_b_right)
    dev = alpha - alpha_b
    return float(np.sqrt(np.sum(w * np.abs(mu) * dev**2))), float(np.max(np.abs(dev)))
