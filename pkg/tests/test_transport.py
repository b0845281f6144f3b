import numpy as np
import pytest

from slabdg.angular import build_quadrature
from slabdg.mesh import build_mesh
from slabdg.operators import DgField, ProblemSpec, apply_operator, rhs_vector
from slabdg.transport import Sweeper, assemble_local, scalar_flux, sweep


def test_k0_local_system_by_hand():
    mesh = build_mesh(0.0, 0.5, 1)
    spec = ProblemSpec(3.0, 1.0, 1.0)
    ls = assemble_local(0, 1.0, spec, mesh, 0, lambda x: 2.0 + 0 * x, 0.25)
    np.testing.assert_allclose(ls.matrix, [[1.0 + 3.0 * 0.5]], atol=1e-15)
    np.testing.assert_allclose(ls.rhs, [0.5 * 2.0 + 0.25], atol=1e-15)


def test_single_cell_k1_fixture():
    # hand solution of the 2x2 upwind system on [0,1]: mean 7/11, slope -3/11
    mesh = build_mesh(0.0, 1.0, 1)
    spec = ProblemSpec(1.0, 0.5, 1.0)
    ls = assemble_local(0, 1.0, spec, mesh, 1, np.zeros(2), 1.0)
    np.testing.assert_allclose(ls.solve(), [7 / 11, -3 / 11], atol=1e-15)


def test_local_system_rejects_zero_ordinate():
    with pytest.raises(ValueError):
        assemble_local(0, 0.0, ProblemSpec(), build_mesh(0, 1, 1), 1, np.zeros(2), 0.0)


def test_zero_data_gives_zero(mesh8, quad4):
    spec = ProblemSpec(2.0, 1.0, 0.01)
    u = sweep(spec, quad4, mesh8, 2, np.zeros((8, 3)), np.zeros(4))
    assert np.all(u.coeffs == 0.0)


@pytest.mark.parametrize("eps", [1.0, 1e-2, 1e-4])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_constant_reproduced(eps, k):
    c = 0.37
    spec = ProblemSpec(lambda x: 2.0 + 0.5 * np.sin(x), 1.0, eps)
    quad, mesh = build_quadrature(8), build_mesh(-1.0, 1.0, 7)
    # source sigma_t c / eps is not a pure constant for variable sigma_t, so feed it via the local load
    sw = Sweeper(spec, quad, mesh, k)
    from slabdg import basis

    xi, wq = basis.volume_rule(k)
    x = mesh.map_points(xi)
    load = 0.5 * mesh.h * np.einsum("cq,q,qm->cm", spec.sigma_t(x) / eps * c, wq, basis.legendre_values(k, xi))
    u = sw.sweep_load(np.broadcast_to(load, (8,) + load.shape), np.full(8, c))
    expected = np.zeros_like(u)
    expected[:, :, 0] = c
    assert np.max(np.abs(u - expected)) <= 1e-13


@pytest.mark.parametrize("k", [1, 2])
def test_sweep_satisfies_discrete_equations(k, rng):
    # purely absorbing problem: a_h(u, v) with collision sigma_t/eps and no scattering equals l(v)
    eps = 0.05
    spec = ProblemSpec(2.0, 1.0, eps, source=0.0, boundary_left=lambda mu: 1.0 + mu, boundary_right=0.3)
    quad, mesh = build_quadrature(6), build_mesh(-1.0, 1.0, 9)
    s = rng.standard_normal((9, k + 1))
    u = sweep(spec, quad, mesh, k, s)
    # transport-only residual: remove the scattering part of apply_operator by adding it back explicitly
    r = apply_operator(u, spec)
    from slabdg import basis

    xi, wq = basis.volume_rule(k)
    p = basis.legendre_values(k, xi)
    wx = 0.5 * mesh.h * wq
    vals = np.einsum("lcm,qm->lcq", u.coeffs, p)
    ubar = np.tensordot(quad.weights, vals, axes=(0, 0))
    r += np.einsum("l,cq,q,qm->lcm", quad.weights, (2.0 / eps - eps) * ubar, wx, p)
    b = rhs_vector(ProblemSpec(2.0, 1.0, eps, 0.0, spec.boundary_left, 0.3), quad, mesh, k)
    load = np.einsum("l,cm->lcm", quad.weights, 0.5 * mesh.h * basis.mass_diagonal(k) * s)
    assert np.max(np.abs(r - b - load)) <= 1e-11 * np.max(np.abs(b + load))


def test_pure_absorber_matches_exponential():
    # sigma_t/eps = 1, no scattering term, inflow 1: u = exp(-x/mu) for mu > 0
    spec = ProblemSpec(1.0, 0.5, 1.0)
    quad, mesh = build_quadrature(4), build_mesh(0.0, 1.0, 256)
    u = sweep(spec, quad, mesh, 1, np.zeros((256, 2)), np.where(build_quadrature(4).ordinates > 0, 1.0, 0.0))
    x = np.linspace(0.0, 0.999, 11)
    vals = u.evaluate(x)
    for l, mu in enumerate(quad.ordinates):
        exact = np.exp(-x / mu) if mu > 0 else np.zeros_like(x)
        np.testing.assert_allclose(vals[l], exact, atol=2e-4)


def test_ordinate_order_is_irrelevant(rng):
    spec = ProblemSpec(2.0, 1.0, 0.1)
    quad, mesh = build_quadrature(8), build_mesh(-1.0, 1.0, 6)
    s = rng.standard_normal((6, 2))
    inflow = rng.standard_normal(8)
    full = sweep(spec, quad, mesh, 1, s, inflow).coeffs
    from slabdg.angular import AngularQuadrature

    perm = rng.permutation(8)
    # a permuted ordinate list is not sorted, so build the container directly
    pq = AngularQuadrature.__new__(AngularQuadrature)
    object.__setattr__(pq, "ordinates", quad.ordinates[perm])
    object.__setattr__(pq, "weights", quad.weights[perm])
    part = Sweeper(spec, pq, mesh, 1).sweep(s, inflow[perm])
    np.testing.assert_array_equal(part, full[perm])


def test_upwind_causality(rng):
    spec = ProblemSpec(2.0, 1.0, 0.5)
    quad, mesh = build_quadrature(4), build_mesh(-1.0, 1.0, 10)
    s = rng.standard_normal((10, 2))
    base = sweep(spec, quad, mesh, 1, s, np.ones(4)).coeffs
    s2 = s.copy()
    s2[6] += 1.0
    moved = sweep(spec, quad, mesh, 1, s2, np.ones(4)).coeffs
    pos = quad.ordinates > 0
    np.testing.assert_array_equal(moved[pos, :6], base[pos, :6])
    np.testing.assert_array_equal(moved[~pos, 7:], base[~pos, 7:])


def test_scalar_flux_examples(mesh8):
    q = build_quadrature(2)
    c = np.zeros((2, 8, 2))
    c[0, :, 0], c[1, :, 0] = 1.0, 3.0
    np.testing.assert_allclose(scalar_flux(DgField(c, mesh8, q))[:, 0], 2.0, atol=1e-15)
    q8 = build_quadrature(8)
    odd = np.einsum("l,cm->lcm", q8.ordinates, np.ones((8, 2)))
    assert np.max(np.abs(scalar_flux(DgField(odd, mesh8, q8)))) <= 1e-15
    iso = np.broadcast_to(np.arange(16.0).reshape(8, 2), (8, 8, 2))
    np.testing.assert_allclose(scalar_flux(DgField(iso, mesh8, q8)), np.arange(16.0).reshape(8, 2), atol=1e-13)


def test_source_shape_checked(mesh8, quad4):
    with pytest.raises(ValueError):
        Sweeper(ProblemSpec(), quad4, mesh8, 1).sweep(np.zeros((3, 2)), np.zeros(4))
