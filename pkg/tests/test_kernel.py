import math

import numpy as np
import pytest
from scipy import integrate

from conftest import diagonal_extrapolation, solved_kernel
from scatlab import _accel, catalog, kernel, radial, specfun
from scatlab.errors import DomainError, NonConvergenceError
from scatlab.potentials import Potential

SMALL = dict(n_xi=201, n_eta=151, eta_max=3.0, check=False)


# -- Goursat data -------------------------------------------------------------

def test_goursat_zero_potential():
    gd = kernel.goursat_data(Potential.zero())
    x = np.linspace(-6, 0, 13)
    e = np.linspace(0, 3, 13)
    assert np.all(gd.g(np.exp(x / 2)) == 0) and np.all(gd.b(x) == 0)
    assert np.allclose(gd.Q(x, e), 0.25 * (np.exp(x + e) - np.exp(x - e)), rtol=1e-14, atol=0)
    assert np.allclose(gd.mu1(x), 0.5 * np.exp(x), rtol=1e-14)


@pytest.mark.parametrize("q0, a", [(-1.0, 1.0), (0.5, 2.0), (3.0, 0.7)])
def test_goursat_constant_potential(q0, a):
    gd = kernel.goursat_data(Potential.constant(q0, a))
    r = np.linspace(0.01, a, 50)
    assert np.allclose(gd.g(r), q0 * r ** 3 / 4, rtol=1e-13)
    # b(xi) = e^{-xi/2} g(e^{xi/2})
    xi = 2 * np.log(r)
    assert np.allclose(gd.b(xi), np.exp(-xi / 2) * gd.g(r), rtol=1e-13)


@pytest.mark.parametrize("name", catalog.NAMES)
def test_mu1_nondecreasing_and_q_at_zero_eta(name):
    q = catalog.get(name)
    gd = kernel.goursat_data(q)
    xi = np.linspace(-20, 2 * math.log(q.a) + 3, 400)
    m = gd.mu1(xi)
    assert np.all(np.isfinite(m)) and np.all(np.diff(m) >= 0)
    # mu1 is the integral of mu
    edges = [-60.0] + [2 * math.log(j) for j in q.breakpoints if 2 * math.log(j) < 0.3] + [0.3]
    ref = sum(integrate.quad(lambda s: float(gd.mu(s)), lo, hi, epsabs=0, epsrel=1e-12)[0]
              for lo, hi in zip(edges[:-1], edges[1:]))
    assert gd.mu1(0.3) == pytest.approx(ref, rel=1e-8)
    x = np.linspace(-5, 0, 11)
    assert np.allclose(gd.Q(x, 0.0), -0.25 * np.exp(x) * q.evaluate(np.exp(x / 2)), atol=1e-15)


# -- solving --------------------------------------------------------------------

def test_zero_potential_kernel_vanishes():
    kg = solved_kernel("zero")
    assert np.nanmax(np.abs(kg.L)) <= 1e-12
    r = np.linspace(0.05, 1, 9)
    assert np.all(kernel.kernel_K(kg, r, 0.5 * r) == 0)
    assert kernel.weighted_l1_norm(kg, 0.7)[0] == 0
    for ell in (0, 3):
        assert kernel.apply_transform(kg, ell, 0.6) == specfun.riccati_bessel(ell, 0.6)
    assert np.all(kernel.recover_potential(kg, np.array([0.3, 0.6])) == 0)


@pytest.mark.parametrize("name", [n for n in catalog.NAMES if n != "zero"])
def test_solved_grid_properties(name):
    kg = solved_kernel(name)
    assert kernel.boundary_row_error(kg) <= 1e-12
    assert kg.convergence_delta < kernel.TOL
    assert kg.truncation_ratio <= kg.trunc_tol
    assert kernel.check_majorant(kg) <= 1 + 1e-12
    w = np.exp(-kg.gamma * kg.eta)[None, :] * np.abs(kg.L)
    assert np.isfinite(np.nanmax(w))


@pytest.mark.parametrize("name", ["square_well", "two_step", "bump", "smooth_table", "ramp_table"])
def test_diagonal_matches_g(name):
    kg = solved_kernel(name)
    r, ext, g = diagonal_extrapolation(kg)
    assert r.min() < 0.11 * kg.q.a and r.max() > 0.9 * kg.q.a
    gd = kernel.goursat_data(kg.q)
    assert np.allclose(kernel.kernel_K(kg, r, r), gd.g(r), rtol=1e-13, atol=0)
    nz = g != 0
    assert np.max(np.abs(ext[nz] - g[nz]) / np.abs(g[nz])) <= 1e-6
    assert np.max(np.abs(ext[~nz]), initial=0.0) <= 1e-9


@pytest.mark.parametrize("name", ["square_well", "two_step", "smooth_table"])
def test_boundary_at_small_rho(name):
    kg = solved_kernel(name)
    r = np.linspace(0.1, 1.0, 10) * kg.q.a
    assert np.max(np.abs(kernel.kernel_K(kg, r, r * math.exp(-kg.eta_max)))) <= kg.trunc_tol


@pytest.mark.parametrize("name", ["square_well", "smooth_table"])
def test_pde_residual(name):
    assert kernel.pde_residual(solved_kernel(name)) < 1e-4


def test_nonconvergence_reported():
    with pytest.raises(NonConvergenceError) as ei:
        kernel.solve_kernel(catalog.get("square_well"), n_xi=51, n_eta=41)
    assert ei.value.achieved is not None


def test_domain_errors():
    q = catalog.get("square_well")
    with pytest.raises(DomainError):
        kernel.solve_kernel(q, n_xi=2)
    with pytest.raises(DomainError):
        kernel.solve_kernel(q, xi_max=-1.0)
    kg = solved_kernel("square_well")
    with pytest.raises(DomainError):
        kernel.kernel_K(kg, 0.5, 0.6)
    with pytest.raises(DomainError):
        kernel.kernel_K(kg, 1.5, 0.6)
    with pytest.raises(DomainError):
        kernel.apply_transform(kg, 0, 2.0)
    with pytest.raises(DomainError):
        kernel.recover_potential(kg, 1e-4)
    with pytest.raises(DomainError):
        kernel.picard_majorant(kernel.goursat_data(q), 0.0, 1.0, 0)


# -- the transformation operator --------------------------------------------------

@pytest.mark.parametrize("ell", list(range(6)) + [40])
def test_transform_matches_regular_solution(ell):
    kg = solved_kernel("square_well")
    radii = np.array([0.25, 0.5, 1.0])
    sol = radial.regular_solution(kg.q, ell, grid=radii)
    t = np.array([kernel.apply_transform(kg, ell, r) for r in radii])
    assert np.max(np.abs(t - sol.phi) / np.abs(sol.phi)) <= 1e-4


def test_transform_tail_bound_is_finite():
    # the majorant tail is a loose bound (~1e2 |value|); the actual truncation
    # is checked by doubling eta_max in test_weighted_l1_norm
    kg = solved_kernel("two_step")
    val, tail = kernel.apply_transform(kg, 2, 0.8, with_tail=True)
    assert val == kernel.apply_transform(kg, 2, 0.8)
    assert 0 < tail < math.inf


@pytest.mark.parametrize("q0", [-1.0, 0.5, -0.01])
def test_recover_constant(q0):
    q = Potential.constant(q0, 1.0)
    kg = kernel.solve_kernel(q)
    r = np.linspace(0.1, 0.95, 12)
    assert np.max(np.abs(kernel.recover_potential(kg, r) - q0)) <= 1e-4


@pytest.mark.parametrize("name", ["ramp_table", "smooth_table"])
def test_recover_table(name):
    kg = solved_kernel(name)
    r = np.linspace(0.1, 0.95, 30)
    assert np.max(np.abs(kernel.recover_potential(kg, r) - kg.q.evaluate(r))) <= 1e-3


def test_recover_next_to_jump_uses_one_sided_differences():
    kg = solved_kernel("two_step")
    step = kg.h / 2
    r = np.array([0.6 - step, 0.6 + step, 0.3, 0.8])
    assert np.allclose(kernel.recover_potential(kg, r), [-2.0, 0.7, -2.0, 0.7], atol=1e-3)


@pytest.mark.parametrize("name", ["square_well", "two_step", "smooth_table", "bump"])
def test_weighted_l1_norm(name):
    kg = solved_kernel(name)
    kg2 = solved_kernel(name, eta_max=2 * kernel.ETA_MAX, n_eta=2 * (kernel.N_ETA - 1) + 1)
    for r in (0.3, 0.7, 1.0):
        v1, _ = kernel.weighted_l1_norm(kg, r)
        v2, _ = kernel.weighted_l1_norm(kg2, r)
        assert np.isfinite(v1) and abs(v1 - v2) <= 1e-6
        assert v1 <= kernel.weighted_l1_bound(kg, r)


# -- the Volterra operator -------------------------------------------------------

@pytest.mark.parametrize("name", ["square_well", "two_step", "smooth_table", "barrier"])
def test_contraction_and_fixed_point(name):
    kg = solved_kernel(name)
    assert kg.gamma == 2 * kg.c
    assert kernel.operator_norm_estimate(kg) <= 0.5
    assert kernel.fixed_point_residual(kg) <= 1e-8


def test_picard_agrees_with_march():
    q = catalog.get("two_step")
    a = kernel.solve_kernel(q, method="picard", **SMALL)
    b = kernel.solve_kernel(q, method="march", **SMALL)
    assert np.nanmax(np.abs(a.L - b.L)) < 1e-13


@pytest.mark.skipif(not _accel.numba_enabled(), reason="numba backend unavailable")
def test_backends_agree():
    q = catalog.get("two_step")
    a = kernel.solve_kernel(q, backend="numba", **SMALL)
    b = kernel.solve_kernel(q, backend="numpy", **SMALL)
    assert np.nanmax(np.abs(a.L - b.L)) <= 1e-14
    f = np.where(a.mask, a.L, np.nan)
    assert np.nanmax(np.abs(kernel.apply_V(a, f, backend="numba")
                            - kernel.apply_V(a, f, backend="numpy"))) <= 1e-14


def test_richardson_order():
    # level-1 errors fall like h^2: the three levels are consistent with that
    q = catalog.get("two_step")
    l1 = kernel.solve_kernel(q, levels=1, **SMALL)
    l2 = kernel.solve_kernel(q, levels=2, **SMALL)
    l3 = kernel.solve_kernel(q, levels=3, **SMALL)
    e1 = np.nanmax(np.abs(l1.L - l3.L))
    e2 = np.nanmax(np.abs(l2.L - l3.L))
    assert e2 < e1 / 10


def test_picard_majorant_values():
    gd = kernel.goursat_data(catalog.get("square_well"))
    assert kernel.picard_majorant(gd, -1.0, 0.0, 10) == 1.0
    z = 0.7 * gd.mu1(-1.0 + 0.7)
    want = sum(z ** n / math.factorial(n) ** 2 for n in range(11))
    assert kernel.picard_majorant(gd, -1.0, 0.7, 10) == pytest.approx(want, rel=1e-14)
    zz = np.linspace(0, 50, 200)
    series = np.array([sum(x ** n / math.factorial(n) ** 2 for n in range(80)) for x in zz])
    assert np.all(kernel.majorant_bound(1.0, zz) >= series)


@pytest.mark.parametrize("name", ["two_step", "square_well", "smooth_table"])
def test_w_iterates_below_bound(name):
    xi, eta, its, bounds = kernel.w_iterates(catalog.get(name))
    for it, b in zip(its, bounds):
        pos = b > 0
        assert np.all(it[pos] <= b[pos])
        assert np.all(it[~pos] == 0)


def test_w_iterates_exact_for_zero_potential():
    # mu = e^s / 2 and W 1 has a closed form
    xi, eta, its, _ = kernel.w_iterates(Potential.zero(), n_max=1)
    X, E = np.meshgrid(xi, eta, indexing="ij")
    exact = 0.5 * np.exp(X) * (np.exp(E) - 1.0)
    assert np.allclose(its[0], exact, rtol=1e-4, atol=1e-12)


def test_entire_order_type():
    ot = kernel.entire_order_type(400)
    assert abs(ot.order - 0.5) <= 0.01 * 0.5
    assert abs(ot.type - 2.0) <= 0.02 * 2.0
    assert abs(ot.type_at_half - 2.0) <= 0.02 * 2.0
    # the raw limsup formulas converge only like 1/ln n
    assert ot.order_raw > ot.order and ot.type_raw < ot.type
    assert abs(kernel.entire_order_type(800).order_raw - 0.5) < abs(ot.order_raw - 0.5)


def test_legendre_completeness_examples():
    r = 1.0
    rho = np.linspace(0, r, 2001)
    v = kernel.legendre_completeness_check((rho, 0 * rho), 0.0, r)
    assert np.all(v.projections == 0) and v.verdict == "consistent with zero"
    v = kernel.legendre_completeness_check((rho, 0 * rho), 1.0, r)
    assert v.projections[0] == pytest.approx(2 * math.sin(1.0), abs=1e-13)
    assert v.verdict == "nonzero"
    # f(rho) = rho with A cancelling the P0 projection
    m0 = integrate.quad(lambda x: x * x * 2 * math.sin(x) / x, 0, r)[0]
    A = -m0 / (r * 2 * math.sin(r))
    v = kernel.legendre_completeness_check((rho, rho), A, r)
    assert abs(v.projections[0]) < 1e-6
    assert np.max(np.abs(v.projections[1:])) > v.tolerance
    assert v.verdict == "nonzero"


def test_kernel_csv():
    kg = kernel.solve_kernel(catalog.get("two_step"), **SMALL)
    text = kernel.kernel_csv(kg)
    lines = text.splitlines()
    header = [l for l in lines if l.startswith("#")]
    assert any(l.startswith("# gamma: ") for l in header)
    body = lines[len(header):]
    assert body[0] == "xi,eta,L"
    assert len(body) - 1 == int(kg.mask.sum())
    xi, eta, L = map(float, body[1].split(","))
    assert L == kg.L[0, 0]
