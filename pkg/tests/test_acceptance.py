"""Acceptance suite: each test checks one numbered criterion and records a PASS/FAIL line.

The bump-source slab benchmark uses sigma_t = 2, sigma_a = 1, a unit-mass mollifier
source on |x| < 1/8, isotropic inflow 0.1 at x = -1 and vacuum at x = 1.  The blended
boundary benchmark replaces the left inflow by 0.1 + mu/100.  Tabulated reference values
are listed below.
"""

import math

import numpy as np
import pytest

from conftest import record_criterion
from slabdg import basis
from slabdg.analysis import (
    apriori_scaling_study, convergence_study, default_lambda_grid, lambda_sweep, radau_project,
)
from slabdg.angular import build_quadrature
from slabdg.boundary import ALBEDO_MOMENT, boundary_corrector, compute_h_function, lambda_star
from slabdg.cli import _random_spec
from slabdg.mesh import build_mesh, mesh_at_level
from slabdg.operators import DgField, ProblemSpec, bilinear_form, boundary_norm, jump_norm, q_norm
from slabdg.solver import SolveOptions, solve

ORDINATES = 32
OPTIONS = SolveOptions(tolerance=1e-12)
LEVELS = (0, 1, 2, 3, 4, 5)  # h = 2/2^3 ... 2/2^8 on the 8-cell base mesh
REFERENCE_LEVEL = 10

# tabulated reference errors of the bump benchmark, rows h = 2/2^3 ... 2/2^8
REFERENCE_ERRORS = {
    1: {
        1.0: [1.93e-01, 6.26e-02, 2.08e-02, 6.12e-03, 1.56e-03, 4.02e-04],
        1e-3: [4.00e-02, 9.52e-03, 3.28e-03, 7.44e-04, 1.60e-04, 3.66e-05],
        1e-5: [4.02e-02, 9.65e-03, 3.35e-03, 7.82e-04, 1.76e-04, 4.39e-05],
    },
    2: {
        1.0: [8.52e-02, 3.70e-02, 9.82e-03, 9.75e-04, 1.15e-04, 1.65e-05],
        1e-3: [1.40e-02, 3.44e-03, 5.52e-04, 2.50e-05, 3.15e-06, 5.18e-07],
        1e-5: [1.41e-02, 3.46e-03, 5.55e-04, 2.62e-05, 3.42e-06, 3.82e-07],
    },
}
REFERENCE_RATES = {
    1: {
        1.0: [1.62, 1.59, 1.76, 1.97, 1.96],
        1e-3: [2.07, 1.54, 2.14, 2.22, 2.12],
        1e-5: [2.06, 1.52, 2.10, 2.15, 2.01],
    },
}
# blended benchmark at eps = 1e-3, rows h = 2/2^6 ... 2/2^9
REFERENCE_SWEEP_MIN_ERROR = 7.45808e-04
REFERENCE_LAMBDA_MIN = 0.36


def bump_spec(eps, bump, left=0.1):
    return ProblemSpec(2.0, 1.0, eps, bump, left, 0.0)


@pytest.fixture(scope="module")
def quad():
    return build_quadrature(ORDINATES)


@pytest.fixture(scope="module")
def table():
    return compute_h_function()


def _bump_table(k, quad, bump):
    base = build_mesh(-1.0, 1.0, 8)
    return {
        eps: convergence_study(bump_spec(eps, bump), quad, base, LEVELS, k, reference_level=REFERENCE_LEVEL,
                               options=OPTIONS)
        for eps in (1.0, 1e-3, 1e-5)
    }


@pytest.fixture(scope="module")
def bump_k1(quad, bump):
    return _bump_table(1, quad, bump)


@pytest.fixture(scope="module")
def bump_k2(quad, bump):
    return _bump_table(2, quad, bump)


@pytest.fixture(scope="module")
def blended(quad, bump, table):
    """lambda sweeps of the anisotropic-inflow benchmark at eps = 1e-3, levels 1..4 of a 32-cell base."""
    eps = 1e-3
    spec = bump_spec(eps, bump, left=lambda mu: 0.1 + mu / 100)
    base = build_mesh(-1.0, 1.0, 32)
    ref = solve(spec, quad, mesh_at_level(base, 9), 1, OPTIONS)
    assert ref.converged
    sweeps = {}
    for j in (1, 2, 3, 4):
        mesh = mesh_at_level(base, j)
        sweeps[mesh.h] = lambda_sweep(spec, default_lambda_grid(eps, mesh.h, 2), mesh, 1, quad, ref.field,
                                      OPTIONS, table=table)
    return {"eps": eps, "reference": ref, "sweeps": sweeps}


def fmt(values, spec="{:.3e}"):
    return "[" + ", ".join(spec.format(v) for v in values) + "]"


# --- criteria -------------------------------------------------------------------------


def test_criterion_01_bump_benchmark_k1(bump_k1):
    failures, parts = [], []
    for eps, rep in bump_k1.items():
        table_errors, rates = REFERENCE_ERRORS[1][eps], REFERENCE_RATES[1][eps]
        ratios = [e / p for e, p in zip(rep.errors, table_errors)]
        deltas = [r - p for r, p in zip(rep.rates[1:], rates)]
        if any(not 0.5 <= q <= 2.0 for q in ratios):
            failures.append(f"eps={eps:g} error ratio outside [0.5, 2]")
        if any(abs(d) > 0.3 for d in deltas):
            failures.append(f"eps={eps:g} rate off by more than 0.3")
        parts.append(f"eps={eps:g} ratios {fmt(ratios, '{:.2f}')} rate deltas {fmt(deltas, '{:+.2f}')}")
    passed = not failures
    record_criterion(1, passed, "; ".join(parts + failures))
    assert passed, failures


def test_criterion_02_bump_benchmark_k2_rates(bump_k2):
    failures, parts = [], []
    for eps in (1e-3, 1e-5):
        rep = bump_k2[eps]
        last = rep.rates[-2:]
        ratios = [e / p for e, p in zip(rep.errors, REFERENCE_ERRORS[2][eps])]
        if any(r < 2.5 for r in last):
            failures.append(f"eps={eps:g} last rates {fmt(last, '{:.2f}')} below 2.5")
        parts.append(f"eps={eps:g} rates {fmt(rep.rates[1:], '{:.2f}')} error ratios {fmt(ratios, '{:.2f}')}")
    passed = not failures
    record_criterion(2, passed, "; ".join(parts + failures))
    assert passed, failures


def test_criterion_03_uniform_in_epsilon(bump_k1):
    e3, e5 = bump_k1[1e-3], bump_k1[1e-5]
    diffs = []
    for r3, r5 in zip(e3.rows, e5.rows):
        if r3.h <= 2 / 2**5 * (1 + 1e-12):
            diffs.append((r3.h, abs(r3.error - r5.error) / max(r3.error, r5.error)))
    passed = all(d <= 0.15 for _, d in diffs)
    detail = ", ".join(f"h=2/{round(2 / h)}: {d:.1%}" for h, d in diffs)
    record_criterion(3, passed, f"relative difference of eps=1e-3 and eps=1e-5 errors {detail} (limit 15%)")
    assert passed, detail


def test_criterion_04_h_function(table):
    m0, m1 = table.moments
    corr = boundary_corrector(lambda mu: 0.1 + mu / 100, table)
    errs = (abs(m0 - 1.0), abs(m1 - ALBEDO_MOMENT), abs(corr - 0.10710446089598763))
    passed = max(errs) <= 1e-6
    record_criterion(4, passed, f"moment errors {errs[0]:.1e}, {errs[1]:.1e}; corrector {corr:.17f}")
    assert passed


def test_criterion_05_lambda_star():
    a, b = lambda_star(1e-2, 2 / 2**6, 2), lambda_star(1e-3, 2 / 2**6, 2)
    sig3 = lambda v: float(f"{v:.3g}")
    passed = sig3(a) == 0.991 and sig3(b) == sig3(0.51186)
    record_criterion(5, passed, f"lambda*(1e-2) = {a:.6f}, lambda*(1e-3) = {b:.6f}")
    assert passed


def test_criterion_06_blended_sweep(blended):
    sweeps = blended["sweeps"]
    eps = blended["eps"]
    coarse_h = max(sweeps)
    first = sweeps[coarse_h]
    checks = []
    lam_ok = 0.2 <= first.lambda_min <= 0.6 and 0.0 < first.lambda_min < 1.0
    err_ratio = first.error_min / REFERENCE_SWEEP_MIN_ERROR
    checks.append(lam_ok)
    checks.append(0.5 <= err_ratio <= 2.0)
    excess = []
    for h in sorted(sweeps, reverse=True):
        sw = sweeps[h]
        star = lambda_star(eps, h, 2)
        e_star = sw.errors[sw.lambdas.index(star)]
        excess.append(e_star / sw.error_min - 1.0)
    checks.append(all(x < 0.15 for x in excess))
    passed = all(checks)
    lam_mins = [sweeps[h].lambda_min for h in sorted(sweeps, reverse=True)]
    record_criterion(6, passed,
                     f"lambda_min {lam_mins} (h=2/2^6 reference {REFERENCE_LAMBDA_MIN}); "
                     f"min error {first.error_min:.4e} = {err_ratio:.2f}x reference; "
                     f"lambda* excess {fmt(excess, '{:.1%}')}")
    assert passed


def test_criterion_07_stability_identity():
    rng = np.random.default_rng(7)
    combos = [(k, eps) for k in (0, 1, 2) for eps in (1.0, 1e-3)]
    worst = 0.0
    for i in range(100):
        k, eps = combos[i % len(combos)]
        spec = _random_spec(rng, eps)
        L = int(rng.choice([2, 4, 8]))
        mesh = build_mesh(-1.0, 1.0, int(rng.integers(1, 12)))
        v = DgField(rng.standard_normal((L, mesh.ncells, k + 1)), mesh, build_quadrature(L))
        a = bilinear_form(v, v, spec)
        ident = q_norm(v, spec) ** 2 + 0.5 * boundary_norm(v) ** 2 + 0.5 * jump_norm(v) ** 2
        worst = max(worst, abs(a - ident) / a)
    passed = worst <= 1e-12
    record_criterion(7, passed, f"100 random fields, max relative defect {worst:.2e}")
    assert passed


def test_criterion_08_galerkin_residual(bump_k1, bump_k2, blended):
    residuals = []
    for tables in (bump_k1, bump_k2):
        for rep in tables.values():
            residuals += [r.galerkin_residual for r in rep.rows] + rep.reference_residuals
    residuals.append(blended["reference"].galerkin_residual)
    for sw in blended["sweeps"].values():
        residuals += sw.galerkin_residuals
    worst = max(residuals)
    passed = all(math.isfinite(r) for r in residuals) and worst <= 1e-8
    record_criterion(8, passed, f"{len(residuals)} solves, max |a_h(u_h, phi) - l(phi)| / max|l| = {worst:.2e}")
    assert passed


def test_criterion_09_radau_projection():
    rng = np.random.default_rng(9)
    f = lambda x: np.sin(3 * x)
    worst = 0.0
    for k in (1, 2, 3):
        for wind in (1.0, -1.0):
            for _ in range(5):
                a = rng.uniform(-1.5, 1.0)
                b = a + rng.uniform(0.05, 0.5)
                c = radau_project(f, (a, b), k, wind)
                xi, w = basis.volume_rule(k, 30)
                x = 0.5 * (a + b) + 0.5 * (b - a) * xi
                p = basis.legendre_values(k, xi)
                worst = max(worst, float(np.max(np.abs((w * (p @ c - f(x))) @ p[:, :k]))))
                end = basis.right_values(k) if wind > 0 else basis.left_values(k)
                worst = max(worst, abs(end @ c - f(b if wind > 0 else a)))
    pos = radau_project(lambda x: x**2, (0.0, 1.0), 1, 1.0)
    neg = radau_project(lambda x: x**2, (0.0, 1.0), 1, -1.0)
    # -1/3 + 4x/3 and 2x/3 on [0, 1] in modal form
    fixture = max(np.max(np.abs(pos - [1 / 3, 2 / 3])), np.max(np.abs(neg - [1 / 3, 1 / 3])))
    passed = worst <= 1e-12 and fixture <= 4 * np.finfo(float).eps
    record_criterion(9, passed, f"max condition defect {worst:.2e}, x^2 fixture deviation {fixture:.1e}")
    assert passed


def test_criterion_10_apriori_scaling(quad, bump):
    specs = [bump_spec(eps, bump) for eps in (1e-1, 1e-2, 1e-3, 1e-4)]
    study = apriori_scaling_study(specs, mesh_at_level(build_mesh(-1.0, 1.0, 8), 3), 1, quad, OPTIONS)
    passed = 0.8 <= study.slope <= 1.2 and study.isotropic_ratio < 2.0
    record_criterion(10, passed, f"slope of ||u_h - avg u_h|| vs eps {study.slope:.3f}, "
                                 f"||avg u_h|| max/min {study.isotropic_ratio:.3f}")
    assert passed


def test_criterion_11_worst_case_rate(blended):
    eps = blended["eps"]
    sweeps = blended["sweeps"]
    hs = sorted(sweeps, reverse=True)
    errors = []
    for h in hs:
        sw = sweeps[h]
        errors.append(sw.errors[sw.lambdas.index(lambda_star(eps, h, 2))])
    rates = [math.log(e0 / e1) / math.log(h0 / h1) for e0, e1, h0, h1 in zip(errors, errors[1:], hs, hs[1:])]
    regime = hs[0] ** 4 / eps**2
    passed = all(r >= 0.5 for r in rates) and all(e1 < e0 for e0, e1 in zip(errors, errors[1:]))
    record_criterion(11, passed, f"lambda* errors {fmt(errors)} rates {fmt(rates, '{:.2f}')} "
                                 f"(h^4/eps^2 = {regime:.2f} at h=2/2^6)")
    assert passed
