"""Command line front end: ``solve``, ``study``, ``sweep-lambda`` and ``verify``.

Exit codes: 0 success, 1 invalid configuration, 2 solver non-convergence,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, boundary
from .angular import AngularQuadrature, build_quadrature
from .config import ConfigError, FunctionSpec, StudyConfig, load_config
from .mesh import build_mesh, mesh_at_level
from .operators import (
    DgField, ProblemSpec, apply_collision, apply_collision_inverse, bilinear_form,
    boundary_norm, jump_norm, q_norm,
)
from .solver import SolveResult, solve

__all__ = ["main", "run_solve", "run_study", "run_sweep", "run_verify", "CheckResult"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3


def _map(func, items, threads: int):
    """Apply ``func`` to ``items`` and return results in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _pieces(config: StudyConfig):
    quad = build_quadrature(config.quadrature_size)
    base = build_mesh(config.a, config.b, config.base_cells)
    return quad, base, config.solver.options()


def _fixed_lambda(config: StudyConfig, spec: ProblemSpec, h: float) -> float:
    blend = config.blend
    if blend.kind == "none":
        return 1.0
    if blend.kind == "fixed":
        return blend.values[0]
    if blend.kind == "lambda_star":
        return boundary.lambda_star(spec.epsilon, h, config.q or config.k + 1)
    if blend.kind == "exponential":
        st = float(np.asarray(spec.sigma_t(np.array([config.a])))[0])
        return boundary.lambda_exponential(spec.epsilon, st)
    raise ConfigError([f"blend {blend.to_text()} is not valid for this command"])


# --- solve --------------------------------------------------------------------


@dataclass
class SolveRecord:
    epsilon: float
    level: int
    lam: float
    result: SolveResult


def run_solve(config: StudyConfig, threads: int = 1) -> list[SolveRecord]:
    """Solve every (epsilon, level) of the configuration with its blend."""
    quad, base, opts = _pieces(config)
    table = boundary.compute_h_function() if config.blend.kind != "none" else None
    if config.blend.kind == "sweep":
        raise ConfigError(["blend sweep(...) is only valid for the study and sweep-lambda commands"])
    tasks = [(eps, j) for eps in config.epsilon_list for j in config.levels]

    def one(task):
        eps, j = task
        spec = config.problem(eps)
        mesh = mesh_at_level(base, j)
        lam = _fixed_lambda(config, spec, mesh.h)
        if lam != 1.0:
            spec = boundary.blended_boundary(spec, boundary.make_blend(spec, lam, table))
        return SolveRecord(eps, j, lam, solve(spec, quad, mesh, config.k, opts))

    return _map(one, tasks, threads)


def write_fields(records: list[SolveRecord], path) -> None:
    """Modal coefficients as CSV plus solve metadata in ``<path>.json``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epsilon", "level", "ordinate", "mu", "weight", "cell",
                         "x_left", "x_right", "mode", "coefficient"])
        for rec in records:
            f = rec.result.field
            edges = f.mesh.cell_edges
            for l, (mu, w) in enumerate(zip(f.quadrature.ordinates, f.quadrature.weights)):
                for c in range(f.mesh.ncells):
                    for m in range(f.degree + 1):
                        writer.writerow([
                            f"{rec.epsilon:.9e}", rec.level, l, f"{mu:.16e}", f"{w:.16e}", c,
                            f"{edges[c]:.16e}", f"{edges[c + 1]:.16e}", m, f"{f.coeffs[l, c, m]:.16e}",
                        ])
    meta = [{
        "epsilon": r.epsilon, "level": r.level, "lambda": r.lam, "cells": r.result.field.mesh.ncells,
        "k": r.result.field.degree, "ordinates": r.result.field.quadrature.size,
        "iterations": r.result.iterations, "final_residual": r.result.final_residual,
        "galerkin_residual": r.result.galerkin_residual, "converged": r.result.converged,
    } for r in records]
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")


def read_fields(path) -> dict:
    """Inverse of :func:`write_fields`: {(epsilon, level): coefficient array (L, ncells, k+1)}."""
    rows = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            key = (float(r["epsilon"]), int(r["level"]))
            rows.setdefault(key, []).append((int(r["ordinate"]), int(r["cell"]), int(r["mode"]),
                                             float(r["coefficient"])))
    out = {}
    for key, entries in rows.items():
        L = 1 + max(e[0] for e in entries)
        nc = 1 + max(e[1] for e in entries)
        nm = 1 + max(e[2] for e in entries)
        arr = np.zeros((L, nc, nm))
        for l, c, m, v in entries:
            arr[l, c, m] = v
        out[key] = arr
    return out


# --- studies ------------------------------------------------------------------


def _series(config: StudyConfig, default_grid: bool):
    """Lambda series of a study: each item maps (spec, h) to a lambda."""
    blend = config.blend
    if blend.kind != "sweep" and not default_grid:
        return [lambda spec, h: _fixed_lambda(config, spec, h)]
    values = blend.values if blend.kind == "sweep" and blend.values else None
    q = config.q or config.k + 1
    if values is None:
        grid = [round(0.05 * i, 2) for i in range(20)] + [0.99, 0.999, 1.0]
        series = [lambda spec, h, v=v: v for v in grid]
        series.append(lambda spec, h: boundary.lambda_star(spec.epsilon, h, q))
        return series
    return [lambda spec, h, v=v: v for v in values]


def _study(config: StudyConfig, threads: int, sweep: bool) -> analysis.ConvergenceReport:
    quad, base, opts = _pieces(config)
    table = boundary.compute_h_function()
    series = _series(config, default_grid=sweep and config.blend.kind != "sweep")
    ref_level = config.effective_reference_level

    def per_epsilon(eps):
        spec = config.problem(eps)
        ref = solve(spec, quad, mesh_at_level(base, ref_level), config.k, opts)
        if not ref.converged:
            raise analysis.StudyError(
                f"reference solve (eps={eps:g}, level {ref_level}) did not converge: "
                f"residual {ref.final_residual:.3e} after {ref.iterations} iterations")
        blend_b = boundary.make_blend(spec, 1.0, table)
        errors = np.zeros((len(series), len(config.levels)))
        lams = np.zeros_like(errors)
        gres = np.zeros_like(errors)
        hs = []
        for jj, j in enumerate(config.levels):
            mesh = mesh_at_level(base, j)
            hs.append(mesh.h)
            for s, lam_of in enumerate(series):
                lam = float(lam_of(spec, mesh.h))
                run_spec = spec if lam == 1.0 else boundary.blended_boundary(
                    spec, boundary.BlendSpec(lam, blend_b.alpha_b_left, blend_b.alpha_b_right))
                res = solve(run_spec, quad, mesh, config.k, opts)
                if not res.converged:
                    raise analysis.StudyError(
                        f"solve (eps={eps:g}, level {j}, lambda={lam:g}) did not converge: "
                        f"residual {res.final_residual:.3e} after {res.iterations} iterations")
                errors[s, jj] = analysis.error_norm(res.field, ref.field, config.norm, spec)
                lams[s, jj] = lam
                gres[s, jj] = res.galerkin_residual
        report = analysis.ConvergenceReport(reference_residuals=[ref.galerkin_residual])
        for s in range(len(series)):
            report.extend(analysis.ConvergenceReport.from_errors(
                config.levels, hs, errors[s], eps, config.k, lams[s], config.norm, gres[s]))
        # rows ordered by level, then lambda
        report.rows.sort(key=lambda r: (r.level, r.lam))
        return report

    full = analysis.ConvergenceReport()
    for rep in _map(per_epsilon, config.epsilon_list, threads):
        full.extend(rep)
    return full


def run_study(config: StudyConfig, threads: int = 1) -> analysis.ConvergenceReport:
    """Convergence study against a lambda = 1 reference, one CSV row per (eps, level, lambda)."""
    return _study(config, threads, sweep=False)


def run_sweep(config: StudyConfig, threads: int = 1) -> analysis.ConvergenceReport:
    """Lambda sweep; uses the default grid plus lambda* unless the config gives sweep(...)."""
    return _study(config, threads, sweep=True)


def sweep_summary(report: analysis.ConvergenceReport, q: int) -> list[str]:
    lines = []
    groups = {}
    for r in report.rows:
        groups.setdefault((r.epsilon, r.level, r.h), []).append(r)
    for (eps, level, h), rows in groups.items():
        best = min(rows, key=lambda r: r.error)
        star = boundary.lambda_star(eps, h, q)
        at_star = [r for r in rows if abs(r.lam - star) <= 1e-15]
        extra = f" lambda*={star:.6g} error*={at_star[0].error:.6e}" if at_star else ""
        lines.append(f"eps={eps:g} level={level} lambda_min={best.lam:g} error_min={best.error:.6e}{extra}")
    return lines


# --- verification -------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _check_quadrature(weight_perturbation: float) -> CheckResult:
    worst = 0.0
    problems = []
    for L in (2, 4, 8, 16, 32):
        q = build_quadrature(L)
        if L == 8 and weight_perturbation:
            w = q.weights.copy()
            w[0] += weight_perturbation
            q = AngularQuadrature(q.ordinates.copy(), w)
        problems += [f"L={L}: {p}" for p in q.check()]
        for p in range(2 * L):
            exact = 1.0 / (p + 1) if p % 2 == 0 else 0.0
            worst = max(worst, abs(float(np.sum(q.weights * q.ordinates**p)) - exact))
    ok = worst <= 1e-12 and not problems
    detail = f"max moment error {worst:.2e}" + (f"; {'; '.join(problems)}" if problems else "")
    return CheckResult("quadrature exactness", ok, detail)


def _random_spec(rng, eps):
    return ProblemSpec(lambda x: 2.0 + 0.5 * np.sin(x), lambda x: 1.0 + 0.25 * np.cos(x), eps)


def _check_stability(rng, samples: int = 20) -> CheckResult:
    worst = 0.0
    for k in (0, 1, 2):
        for eps in (1.0, 1e-3):
            spec = _random_spec(rng, eps)
            quad = build_quadrature(4)
            mesh = build_mesh(-1.0, 1.0, 6)
            for _ in range(samples):
                v = DgField(rng.standard_normal((4, 6, k + 1)), mesh, quad)
                a = bilinear_form(v, v, spec)
                ident = q_norm(v, spec) ** 2 + 0.5 * boundary_norm(v) ** 2 + 0.5 * jump_norm(v) ** 2
                worst = max(worst, abs(a - ident) / a)
    return CheckResult("stability identity", worst <= 1e-12, f"max relative defect {worst:.2e}")


def _check_h_function(n_nodes: int, tolerance: float) -> CheckResult:
    try:
        table = boundary.compute_h_function(n_nodes, tolerance)
    except (boundary.HFunctionError, ValueError) as exc:
        return CheckResult("H-function moments", False, str(exc))
    m0, m1 = table.moments
    corr = boundary.boundary_corrector(lambda mu: 0.1 + mu / 100, table)
    errs = (abs(m0 - 1.0), abs(m1 - boundary.ALBEDO_MOMENT), abs(corr - 0.10710446089598763))
    ok = max(errs) <= tolerance and bool(np.all(table.h_values >= 1.0))
    detail = (f"moment errors {errs[0]:.2e}, {errs[1]:.2e}, corrector error {errs[2]:.2e} "
              f"(nodes {n_nodes}, tolerance {tolerance:.1e})")
    return CheckResult("H-function moments", ok, detail)


def _check_radau(rng) -> CheckResult:
    g = lambda x: np.sin(3 * x)
    worst = 0.0
    from . import basis

    for k in (1, 2, 3):
        for wind in (1.0, -1.0):
            a = rng.uniform(-1, 0.5)
            b = a + rng.uniform(0.1, 0.5)
            c = analysis.radau_project(g, (a, b), k, wind)
            xi, w = basis.volume_rule(k, 24)
            x = 0.5 * (a + b) + 0.5 * (b - a) * xi
            p = basis.legendre_values(k, xi)
            diff = p @ c - g(x)
            worst = max(worst, float(np.max(np.abs((w * diff) @ p[:, :k]))))
            end = 1.0 if wind > 0 else -1.0
            val = basis.legendre_values(k, np.array([end]))[0] @ c
            worst = max(worst, abs(val - g(b if wind > 0 else a)))
    c_pos = analysis.radau_project(lambda x: x**2, (0.0, 1.0), 1, 1.0)
    c_neg = analysis.radau_project(lambda x: x**2, (0.0, 1.0), 1, -1.0)
    # on [0,1] the modal form of alpha + beta x is (alpha + beta/2, beta/2)
    fixtures = max(np.max(np.abs(c_pos - [1 / 3, 2 / 3])), np.max(np.abs(c_neg - [1 / 3, 1 / 3])))
    ok = worst <= 1e-12 and fixtures <= 1e-14
    return CheckResult("Radau projection", ok, f"max condition defect {worst:.2e}, fixture error {fixtures:.2e}")


def _check_collision(rng) -> CheckResult:
    # Q has condition number (sigma_t/eps)/(eps sigma_a), so the defect is judged relative to it
    worst = 0.0
    for eps in (1.0, 1e-3, 1e-5):
        spec = _random_spec(rng, eps)
        quad = build_quadrature(8)
        x = rng.uniform(-1, 1, 5)
        v = rng.standard_normal((8, 5))
        back = apply_collision(spec, quad, apply_collision_inverse(spec, quad, v, x), x)
        st, sa = spec.coefficients(x)
        cond = float(np.max(st / eps) / np.min(eps * sa))
        worst = max(worst, float(np.max(np.abs(back - v)) / np.max(np.abs(v))) / cond)
    return CheckResult("collision inverse", worst <= 1e-14, f"max defect per unit condition {worst:.2e}")


def _check_scaling() -> CheckResult:
    bump = FunctionSpec("bump", (0.125, 1.0)).build()
    specs = [ProblemSpec(2.0, 1.0, eps, bump, 0.1, 0.0) for eps in (1e-1, 1e-2, 1e-3, 1e-4)]
    from .solver import SolveOptions

    try:
        study = analysis.apriori_scaling_study(specs, build_mesh(-1.0, 1.0, 32), 1, build_quadrature(8),
                                               SolveOptions(tolerance=1e-12))
    except analysis.StudyError as exc:
        return CheckResult("a priori scaling", False, str(exc))
    ok = 0.8 <= study.slope <= 1.2 and study.isotropic_ratio < 2.0
    return CheckResult("a priori scaling", ok,
                       f"slope {study.slope:.3f}, isotropic norm ratio {study.isotropic_ratio:.3f}")


def run_verify(seed: int = 0, weight_perturbation: float = 0.0, h_nodes: int = 64,
               h_tolerance: float = 1e-10) -> list[CheckResult]:
    """Run the property checks; ``weight_perturbation`` and the H settings are test hooks."""
    rng = np.random.default_rng(seed)
    return [
        _check_quadrature(weight_perturbation),
        _check_stability(rng),
        _check_h_function(h_nodes, h_tolerance),
        _check_radau(rng),
        _check_collision(rng),
        _check_scaling(),
    ]


# --- entry point --------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (INI sections or JSON)")
    common.add_argument("--output", help="output path, overrides [output] path")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent solves")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    parser = argparse.ArgumentParser(prog="slabdg", description="Discrete ordinates DG slab transport")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve every (epsilon, level) and write the fields")
    sub.add_parser("study", parents=[common], help="convergence study CSV")
    sub.add_parser("sweep-lambda", parents=[common], help="blend parameter sweep CSV")
    ver = sub.add_parser("verify", parents=[common], help="run the property checks")
    ver.add_argument("--perturb-weight", type=float, default=0.0, help=argparse.SUPPRESS)
    ver.add_argument("--h-nodes", type=int, default=64, help=argparse.SUPPRESS)
    ver.add_argument("--h-tolerance", type=float, default=1e-10, help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "verify":
        results = run_verify(args.seed, args.perturb_weight, args.h_nodes, args.h_tolerance)
        for r in results:
            print(r.line())
        failed = [r for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
        return EXIT_VERIFY if failed else EXIT_OK

    if not args.config:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.config)
        if args.output:
            config = replace(config, output=args.output)
        if args.command == "solve":
            records = run_solve(config, args.threads)
            write_fields(records, config.output)
            bad = [r for r in records if not r.result.converged]
            for r in records:
                res = r.result
                print(f"eps={r.epsilon:g} level={r.level} iterations={res.iterations} "
                      f"residual={res.final_residual:.3e} converged={res.converged}")
            if bad:
                print(f"error: {len(bad)} solve(s) did not converge", file=sys.stderr)
                return EXIT_NONCONVERGED
            return EXIT_OK
        report = (run_study if args.command == "study" else run_sweep)(config, args.threads)
        report.write_csv(config.output)
        if args.command == "sweep-lambda":
            for line in sweep_summary(report, config.q or config.k + 1):
                print(line)
        else:
            for row in report.rows:
                rate = "" if math.isnan(row.rate) else f" rate={row.rate:.2f}"
                print(f"eps={row.epsilon:g} h={row.h:.6g} lambda={row.lam:.6g} error={row.error:.4e}{rate}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except analysis.StudyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
