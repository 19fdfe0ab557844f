import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scatlab import analysis, catalog, radial
from scatlab.errors import DomainError
from scatlab.potentials import Potential, difference

SQ_TWO = difference(catalog.get("square_well"), catalog.get("two_step"))

# first run of discrimination_experiment(square_well, deep_well, evens, 20)
SUP_DELTA_WELLS = 0.04431104553714105


def half_plane_points(n, seed=3):
    """n points of Re l > 0: a few near the imaginary axis, the rest spread out."""
    rng = np.random.default_rng(seed)
    re = np.concatenate([rng.uniform(0.05, 0.5, n // 5), rng.uniform(0.5, 8.0, n - n // 5)])
    im = rng.uniform(-8.0, 8.0, n)
    return re + 1j * im


# -- H and h0 ------------------------------------------------------------------

def test_H_against_frozen_values(oracles):
    for re, im, hre, him in oracles["H_square_minus_two_step"]:
        got = complex(analysis.H_ell(SQ_TWO, complex(re, im)).value)
        assert abs(got - complex(hre, him)) <= 1e-12 * abs(complex(hre, him))


def test_H_matches_h0_times_gamma_factor():
    for ell in half_plane_points(20, seed=11):
        s = analysis.functional_sample(SQ_TWO, ell)
        assert s.consistency <= 1e-8, ell


def test_zero_difference_gives_zero():
    q = catalog.get("two_step")
    p = difference(q, q)
    assert analysis.H_ell(p, 1.5 + 2j).value == 0
    assert analysis.h0_ell(p, 3).value == 0
    assert analysis.h_ell(p, 3).value == 0
    assert analysis.nevanlinna_integral(p, 0.5) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 6.0), st.floats(0.1, 6.0))
def test_h0_conjugate_symmetry(x, y):
    a = complex(analysis.h0_ell(SQ_TWO, complex(x, y)).value)
    b = complex(analysis.h0_ell(SQ_TWO, complex(x, -y)).value)
    assert abs(a - b.conjugate()) <= 1e-10 * abs(a)


@pytest.mark.parametrize("ell", [1, 2, 3, 5, 7])
def test_h0_paths_agree_at_integer_l(ell):
    bes = analysis.h0_ell(SQ_TWO, ell).value
    rep = complex(analysis.h0_ell(SQ_TWO, ell, method="representation").value)
    ser = complex(analysis.h0_ell(SQ_TWO, ell, method="series").value)
    assert abs(rep - bes) <= 1e-8 * abs(bes) and abs(rep.imag) <= 1e-12 * abs(bes)
    assert abs(ser - bes) <= 1e-8 * abs(bes)


def test_h0_for_constant_potential_closed_form():
    # int_0^1 sin^2 r dr = 1/2 - sin 2 / 4
    p = Potential.constant(1.0)
    assert analysis.h0_ell(p, 0).value == pytest.approx(0.5 - math.sin(2.0) / 4, rel=1e-12)


def test_h0_bump_log_against_oracle(oracles):
    bump = catalog.get("bump")
    for ell, want in oracles["h0_bump_log"].items():
        m = analysis.moment_heuristic(bump, int(ell), free=True)
        assert m.log_h == pytest.approx(want, abs=1e-10)


def test_complex_l_domain():
    for bad in (-0.5, 1j, complex("nan")):
        with pytest.raises(DomainError):
            analysis.H_ell(SQ_TWO, bad)
    with pytest.raises(DomainError):
        analysis.h0_ell(SQ_TWO, 1.5, method="bessel")


def test_gamma_factor_at_integers():
    for ell in range(6):
        assert analysis.gamma_factor(ell).real == pytest.approx(2 ** (ell + 1) * math.factorial(ell),
                                                                 rel=1e-13)


# -- h at integer l and the Lagrange identity -----------------------------------

def test_h_requires_difference_potential():
    with pytest.raises(TypeError):
        analysis.h_ell(catalog.get("square_well"), 0)


@pytest.mark.parametrize("name", ["square_well", "two_step", "bump", "smooth_table"])
@pytest.mark.parametrize("ell", [0, 3])
def test_h_against_free_partner(name, ell):
    # with q2 = 0: h = -|F| sin(delta)
    q = catalog.get(name)
    p = difference(q, Potential.zero())
    d, f = radial.phase_shift(q, ell)
    assert analysis.h_ell(p, ell).value == pytest.approx(-f * math.sin(d), rel=1e-6, abs=1e-14)


@pytest.mark.parametrize("pair", [("square_well", "deep_well"), ("two_step", "bump"),
                                  ("smooth_table", "ramp_table"), ("barrier", "weak_well")])
@pytest.mark.parametrize("ell", [0, 4])
def test_lagrange_identity(pair, ell):
    p = difference(*map(catalog.get, pair))
    t = analysis.lagrange_terms(p, ell)
    assert abs(t.integral - t.boundary) <= 1e-8 * max(abs(t.boundary), t.scale * 1e-6)
    assert abs(t.boundary - t.phase_form) <= 1e-8 * t.scale


def test_h_is_antisymmetric():
    a, b = catalog.get("two_step"), catalog.get("barrier")
    h12 = analysis.h_ell(difference(a, b), 2).value
    h21 = analysis.h_ell(difference(b, a), 2).value
    assert h12 == pytest.approx(-h21, rel=1e-10)


def test_h_is_real_and_h1_scaling():
    p = difference(catalog.get("square_well"), catalog.get("deep_well"))
    s = analysis.functional_sample(p, 2)
    assert isinstance(s.h, float) and isinstance(s.h1, float)
    assert s.h1 == pytest.approx(s.h * (2 ** 3 * 2) ** 2, rel=1e-13)


def test_h1_normalizations():
    h = 0.37
    for ell in (0, 2, 5):
        g1 = analysis.h1_from_h(h, ell).real
        gh = analysis.h1_from_h(h, ell, gamma_shift=0.5).real
        assert g1 == pytest.approx(h * (2 ** (ell + 1) * math.factorial(ell)) ** 2, rel=1e-13)
        assert gh / g1 == pytest.approx((math.gamma(ell + 0.5) / math.gamma(ell + 1)) ** 2, rel=1e-13)
    with pytest.raises(ValueError):
        analysis.h1_from_h(h, 1, gamma_shift=2)


def test_log_h_at_large_l():
    p = difference(catalog.get("square_well"), catalog.get("deep_well"))
    lh, sign = analysis.log_h(p, 80)
    # q1 - q2 = 0.1 > 0 and both regular solutions are positive: h > 0
    assert sign == 1.0 and lh < -700 * 0.9  # far below the double range
    want = analysis.log_moment_prefactor(80) + math.log(0.1 / 163)
    assert abs(lh - want) < 0.05
    assert analysis.h_ell(p, 20).value == pytest.approx(math.exp(analysis.log_h(p, 20)[0]), rel=1e-8)


# -- growth, Nevanlinna, Poisson, Cauchy -----------------------------------------

def test_growth_bound_at_sample_points():
    ells = half_plane_points(50)
    hv = np.abs(np.asarray(analysis.H_ell(SQ_TWO, ells).value))
    assert np.all(hv <= analysis.growth_bound(SQ_TWO, ells))
    assert np.all(analysis.growth_bound(SQ_TWO, ells) <= 4 * analysis.growth_bound_without_j(SQ_TWO, ells))


def test_growth_without_j_fails_near_axis():
    # |J(r, l)| can exceed 1 for small Re l, so the J factor cannot be dropped
    ell = np.array([0.05, 0.5])
    hv = np.abs(np.asarray(analysis.H_ell(SQ_TWO, ell).value))
    assert hv[0] > analysis.growth_bound_without_j(SQ_TWO, ell)[0]


@pytest.mark.parametrize("q1, q2", [(Potential.constant(-5.0, 2.0), Potential.zero(2.0)),
                                    (catalog.get("square_well"), catalog.get("two_step"))])
def test_nevanlinna_bound(q1, q2):
    p = difference(q1, q2)
    bound = analysis.nevanlinna_bound(p)
    vals = [analysis.nevanlinna_integral(p, r) for r in (0.3, 0.5, 0.7, 0.9)]
    assert all(0 <= v <= bound for v in vals)


def test_nevanlinna_edge_guard():
    with pytest.raises(DomainError):
        analysis.nevanlinna_integral(SQ_TWO, 0.97)
    with pytest.raises(DomainError):
        analysis.nevanlinna_integral(SQ_TWO, 1.0)
    assert np.isfinite(analysis.nevanlinna_integral(SQ_TWO, 0.97, allow_edge=True))


@pytest.mark.parametrize("r", [0.3, 0.6, 0.9])
def test_poisson_identity(r):
    assert analysis.poisson_integral(r) == pytest.approx(2 * math.pi / (1 - r * r), rel=1e-10)


def test_disc_map():
    assert analysis.disc_to_half_plane(0) == 1
    w = 0.9 * np.exp(1j * np.linspace(-3, 3, 20))
    assert np.all(analysis.disc_to_half_plane(w).real > 0)


def test_cauchy_contour():
    integral, hmax = analysis.cauchy_contour(SQ_TWO)
    assert integral <= 1e-6 * hmax


# -- index sets -------------------------------------------------------------------

@pytest.mark.parametrize("spec, verdict", [
    ("arithmetic:0:2", analysis.DIVERGENT), ("arithmetic:1:3", analysis.DIVERGENT),
    ("primes", analysis.DIVERGENT), ("geometric:2", analysis.CONVERGENT),
    ("list:1,4,9", analysis.UNKNOWN)])
def test_muntz_classification(spec, verdict):
    s = analysis.parse_index_set(spec)
    assert s.classification == verdict
    assert s.spec() == spec


def test_index_set_members():
    assert analysis.parse_index_set("arithmetic:0:2").members(8) == [0, 2, 4, 6, 8]
    assert analysis.parse_index_set("primes").members(20) == [2, 3, 5, 7, 11, 13, 17, 19]
    assert analysis.parse_index_set("geometric:3").members(30) == [1, 3, 9, 27]
    assert analysis.parse_index_set("list:9,1,4,4").members() == [1, 4, 9]
    # partial sums grow for the divergent families and level off for the geometric one
    primes = analysis.parse_index_set("primes")
    assert primes.reciprocal_sum(10000) > primes.reciprocal_sum(100) + 0.4
    geo = analysis.parse_index_set("geometric:2")
    assert geo.reciprocal_sum(10 ** 6) < 2.0


@pytest.mark.parametrize("bad", ["", "evens", "arithmetic:1", "arithmetic:-1:2", "arithmetic:0:0",
                                 "geometric:1", "list:", "list:-3", "primes:5"])
def test_parse_index_set_errors(bad):
    with pytest.raises(ValueError, match="index-set"):
        analysis.parse_index_set(bad)


# -- moment heuristic ----------------------------------------------------------------

def test_moment_heuristic_zero():
    m = analysis.moment_heuristic(Potential.zero(), 10)
    assert (m.h_value, m.moment_value, m.ratio, m.defined) == (0.0, 0.0, 1.0, False)


def test_moment_heuristic_bump():
    bump = catalog.get("bump")
    r = {l: analysis.moment_heuristic(bump, l).ratio for l in (30, 40, 60)}
    assert abs(r[40] - 1) <= 0.05
    assert abs(r[60] - 1) < abs(r[40] - 1) < abs(r[30] - 1)


def test_moment_heuristic_with_regular_solutions():
    p = difference(catalog.get("square_well"), catalog.get("deep_well"))
    m40, m60 = analysis.moment_heuristic(p, 40), analysis.moment_heuristic(p, 60)
    assert m40.defined and abs(m40.ratio - 1) <= 0.05
    assert abs(m60.ratio - 1) < abs(m40.ratio - 1)


def test_log_moment_exact():
    # int_0^1 r^{2l+2} dr = 1 / (2l+3)
    lm, s = analysis._log_abs_moment(Potential.constant(2.0), 5)
    assert s == 1.0 and lm == pytest.approx(math.log(2.0 / 13), abs=1e-14)


# -- discrimination ----------------------------------------------------------------------

def test_discrimination_identical_potentials():
    q = catalog.get("two_step")
    rep = analysis.discrimination_experiment(q, q, analysis.parse_index_set("arithmetic:0:2"), 10)
    assert rep.sup_delta == 0 and rep.sup_h == 0 and all(h == 0 for h in rep.h)
    assert math.isnan(rep.correlation)


def test_discrimination_regression():
    rep = analysis.discrimination_experiment(catalog.get("square_well"), catalog.get("deep_well"),
                                             analysis.parse_index_set("arithmetic:0:2"), 20)
    assert rep.ells == tuple(range(0, 21, 2))
    assert rep.sup_delta == pytest.approx(SUP_DELTA_WELLS, rel=1e-9)
    assert rep.identity_residual <= 1e-8 * rep.sup_h
    assert rep.correlation > 0.99
    assert rep.to_csv().splitlines()[0] == "ell,delta1,delta2,h"


def test_discrimination_lmax_range():
    s = analysis.parse_index_set("primes")
    with pytest.raises(DomainError):
        analysis.discrimination_experiment(catalog.get("square_well"), catalog.get("deep_well"), s, 101)


def test_functional_csv():
    samples = analysis.functional_scan(SQ_TWO, [1, 1.5 + 1j])
    lines = analysis.functional_csv(samples).splitlines()
    assert lines[0] == "ell_re,ell_im,h0_re,h0_im,H_re,H_im,quadrature_error"
    assert len(lines) == 3
    assert [float(x) for x in lines[2].split(",")[:2]] == [1.5, 1.0]
