"""Orthogonality functionals, analytic-class checks and index sets.

For two potentials with difference ``p = q1 - q2`` the central quantity is

    h(l) = int_0^a p phi_1l phi_2l dr,

which the Wronskian identity turns into a boundary term at ``r = a``:

    h(l) = [phi_1' phi_2 - phi_1 phi_2'](a) = |F_1| |F_2| sin(delta_2 - delta_1).

With the regular solutions replaced by ``u_l`` one gets ``h0(l) = int p u_l^2``
and its entire extension ``H(l) = G(l)^2 h0(l)``, where

    G(l) = sqrt(2/pi) Gamma(1/2) 2^{l+1/2} Gamma(l+1) = 2^{l+1} Gamma(l+1).

For complex ``l`` everything goes through the integral representation
``G(l) u_l(r) = r^{l+1} J(r, l)`` with ``J(r, l) = int_{-1}^1 (1-t^2)^l e^{irt} dt``.
"""
import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

from . import radial, specfun
from .errors import DomainError, NonConvergenceError
from .potentials import DifferencePotential

R_NODES = 32
T_NODES = 96
QUAD_TOL = 1e-11
MAX_DOUBLINGS = 4
LOG_PLUS_FLOOR = 1e-300


class Quad(NamedTuple):
    """A quadrature value with its estimated absolute error."""

    value: complex
    error: float


# -- quadrature helpers ---------------------------------------------------

def _segments(p):
    """(lo, hi) of the pieces where p is not identically zero."""
    lo, hi, vlo, vhi = p.segments
    keep = (vlo != 0) | (vhi != 0)
    return lo[keep], hi[keep]


def _r_nodes(p, n):
    """Gauss-Legendre nodes and weights on every non-zero piece of p.

    Pieces that start at r = 0 use r = hi * y^2 so that the r^{2l+2}
    factor of complex ``l`` is smooth in the quadrature variable.  Finely
    tabulated potentials have many short pieces; those share the budget
    (still doubling with ``n``).
    """
    los, his = _segments(p)
    x, w = np.polynomial.legendre.leggauss(max(2, n // min(max(len(los), 1), 8)))
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    rs, ws = [], []
    for lo, hi in zip(los, his):
        if lo == 0.0:
            rs.append(hi * x * x)
            ws.append(w * 2.0 * hi * x)
        else:
            rs.append(lo + (hi - lo) * x)
            ws.append(w * (hi - lo))
    if not rs:
        return np.zeros(0), np.zeros(0)
    r = np.concatenate(rs)
    wt = np.concatenate(ws)
    order = np.argsort(r, kind="stable")
    return r[order], wt[order]


def _t_rule(n):
    """Nodes in theta for J = 2 int_0^{pi/2} cos^{2l+1}(th) cos(r sin th) dth.

    theta = (pi/2)(1 - (1-x)^2) makes the endpoint zero of cos^{2l+1} of
    order 4 Re l + 3 in x, so Gauss-Legendre converges fast even for small
    Re l.  Returns (log cos theta, sin theta, weights).
    """
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    th = 0.5 * math.pi * (1.0 - (1.0 - x) ** 2)
    jac = math.pi * (1.0 - x)
    return np.log(np.cos(th)), np.sin(th), 2.0 * w * jac


def j_integral(r, ell, n_t=T_NODES):
    """J(r, l) = int_{-1}^1 (1-t^2)^l e^{irt} dt, shape (len(ell), len(r))."""
    ell = np.atleast_1d(np.asarray(ell, dtype=complex))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    _check_half_plane(ell)
    lc, st, w = _t_rule(n_t)
    e = np.exp((2.0 * ell[:, None] + 1.0) * lc[None, :]) * w[None, :]
    return e @ np.cos(st[:, None] * r[None, :])


def _check_half_plane(ell):
    ell = np.asarray(ell, dtype=complex)
    if np.any(ell.real < 0) or np.any((ell.real == 0) & (ell.imag != 0)) or np.any(~np.isfinite(ell)):
        raise DomainError("complex angular index needs Re l > 0")


def log_gamma_factor(ell):
    """log of sqrt(2/pi) Gamma(1/2) 2^{l+1/2} Gamma(l+1), principal branch."""
    ell = np.asarray(ell, dtype=complex)
    return (0.5 * math.log(2.0 / math.pi) + 0.5 * math.log(math.pi)
            + (ell + 0.5) * math.log(2.0) + specfun.log_gamma_complex(ell + 1.0))


def gamma_factor(ell):
    return np.exp(log_gamma_factor(ell))


def _refine(fun, n0, tol, what):
    """Evaluate ``fun(n)`` and ``fun(2n)`` until they agree; returns (value, err)."""
    prev = fun(n0)
    n = n0
    for _ in range(MAX_DOUBLINGS):
        n *= 2
        cur = fun(n)
        err = np.abs(cur - prev)
        scale = np.maximum(np.abs(cur), 1e-300)
        if np.all(err <= tol * scale):
            return cur, err
        prev = cur
    raise NonConvergenceError(f"{what}: quadrature did not settle", achieved=float(np.max(err / scale)))


# -- H and h0 at complex l -------------------------------------------------

def _H_raw(p, ell, n_r, n_t):
    r, w = _r_nodes(p, n_r)
    if r.size == 0:
        return np.zeros(len(ell), dtype=complex)
    pv = p.evaluate(r)
    j = j_integral(r, ell, n_t)
    rp = np.exp((2.0 * ell[:, None] + 2.0) * np.log(r)[None, :])
    return (rp * j * j) @ (w * pv)


def H_ell(p, ell, tol=QUAD_TOL, n_r=R_NODES, n_t=T_NODES):
    """H(l) = int_0^a p r^{2l+2} J(r, l)^2 dr for Re l > 0 (vectorized in l).

    Returns a :class:`Quad`; ``value`` has the shape of ``ell``.
    """
    shape = np.shape(ell)
    ells = np.atleast_1d(np.asarray(ell, dtype=complex)).ravel()
    _check_half_plane(ells)
    if p.is_zero():
        z = np.zeros(ells.shape, dtype=complex)
        return Quad(z.reshape(shape)[()], 0.0)
    val, err = _refine(lambda n: _H_raw(p, ells, n, n_t * n // n_r), n_r, tol, "H(l)")
    return Quad(val.reshape(shape)[()], float(np.max(err)))


def _u_series(r, ell):
    """u_l(r) for complex l from the power series of J_{l+1/2}, r <= 30."""
    ell = complex(ell)
    r = np.asarray(r, dtype=float)
    if np.any(r > 30.0):
        raise DomainError("series path for u_l limited to r <= 30")
    x = -r * r / 4.0
    term = np.ones_like(r, dtype=complex)
    s = term.copy()
    k = 0
    while True:
        k += 1
        term = term * x / (k * (ell + 0.5 + k))
        s = s + term
        if k > 4 and np.all(np.abs(term) <= 1e-17 * np.abs(s)):
            break
        if k > 400:
            raise NonConvergenceError("u_l series did not converge", achieved=float(np.max(np.abs(term))))
    pref = (0.5 * math.log(math.pi) - (ell + 1.0) * math.log(2.0)
            - specfun.log_gamma_complex(ell + 1.5))
    return np.exp(pref + (ell + 1.0) * np.log(r)) * s


def _h0_bessel_scaled(p, ell, n_r):
    """(S, M) with int p u_l^2 = S e^M, for integer l; safe far below 1e-308."""
    r, w = _r_nodes(p, n_r)
    if r.size == 0:
        return 0.0, 0.0
    u = specfun.riccati_log(ell, r).u
    lg = 2.0 * u.log
    m = float(np.max(lg))
    return float(np.sum(w * p.evaluate(r) * np.exp(lg - m))), m


def _is_integer(ell):
    ell = complex(ell)
    return ell.imag == 0 and ell.real >= 0 and float(ell.real).is_integer()


def h0_ell(p, ell, method=None, tol=QUAD_TOL, n_r=R_NODES, n_t=T_NODES):
    """h0(l) = int_0^a p u_l^2 dr.

    ``method``: ``"bessel"`` (integer l, Riccati-Bessel values),
    ``"representation"`` (complex l via J(r, l)) or ``"series"`` (complex l
    via the power series of J_{l+1/2}).  The default picks ``"bessel"`` for
    non-negative integers and ``"representation"`` otherwise.
    """
    if method is None:
        method = "bessel" if _is_integer(ell) else "representation"
    if p.is_zero():
        return Quad(0.0 if method == "bessel" else 0j, 0.0)
    if method == "bessel":
        if not _is_integer(ell):
            raise DomainError("Bessel path needs a non-negative integer l")
        ell = int(complex(ell).real)

        def f(n):
            s, m = _h0_bessel_scaled(p, ell, n)
            return s * math.exp(m) if m > -700 else 0.0
        val, err = _refine(f, n_r, tol, "h0(l)")
        return Quad(float(val), float(err))
    ell = complex(ell)
    _check_half_plane(np.array([ell]))
    if method == "representation":
        hq = H_ell(p, ell, tol=tol, n_r=n_r, n_t=n_t)
        g2 = np.exp(-2.0 * log_gamma_factor(ell))
        return Quad(complex(hq.value * g2), float(hq.error * abs(g2)))
    if method == "series":
        def f(n):
            r, w = _r_nodes(p, n)
            u = _u_series(r, ell)
            return complex(np.sum(w * p.evaluate(r) * u * u))
        val, err = _refine(f, n_r, tol, "h0(l)")
        return Quad(complex(val), float(err))
    raise ValueError(f"unknown method {method!r}")


def h1_from_h(h, ell, gamma_shift=1.0):
    """h1 = [sqrt(2/pi) Gamma(1/2) Gamma(l+1) 2^{l+1/2}]^2 h.

    Two normalizations of h1 are in circulation, with Gamma(l+1) and with
    Gamma(l+1/2).  ``gamma_shift=0.5`` selects the second.  Only the
    Gamma(l+1) form matches the factor G(l) of H, and only it enters the
    identities checked here; the two differ by the zero-free factor
    [Gamma(l+1/2)/Gamma(l+1)]^2, so both vanish at the same l.
    """
    if gamma_shift not in (1.0, 0.5):
        raise ValueError("gamma_shift must be 1 or 0.5")
    lg = log_gamma_factor(ell)
    if gamma_shift == 0.5:
        ell = np.asarray(ell, dtype=complex)
        lg = lg - specfun.log_gamma_complex(ell + 1.0) + specfun.log_gamma_complex(ell + 0.5)
    return h * np.exp(2.0 * lg)


# -- h at integer l ---------------------------------------------------------

def _scaled_solution(q, ell, r):
    """(w, w', log f) with phi = e^{log f} w and phi' = e^{log f} w' at radii r.

    Inside the support the regular solution is integrated; beyond it the
    free continuation |F|(cos(delta) u - sin(delta) v) is used.
    """
    logf = (ell + 1) * np.log(r) - specfun.log_double_factorial(2 * ell + 1)
    w = np.empty_like(r)
    wp = np.empty_like(r)
    inside = r <= q.a
    if np.any(inside):
        sol = radial.regular_solution(q, ell, grid=r[inside])
        w[inside] = sol.w
        wp[inside] = sol.w_prime_scaled
        delta, jost = sol.delta, sol.jost_magnitude
    else:
        delta, jost = radial.phase_shift(q, ell)
    if np.any(~inside):
        ro = r[~inside]
        lf = logf[~inside]
        rl = specfun.riccati_log(ell, ro)
        c, s = jost * math.cos(delta), jost * math.sin(delta)
        w[~inside] = (c * rl.u.sign * np.exp(rl.u.log - lf) - s * rl.v.sign * np.exp(rl.v.log - lf))
        wp[~inside] = (c * rl.du.sign * np.exp(rl.du.log - lf) - s * rl.dv.sign * np.exp(rl.dv.log - lf))
    return w, wp, logf


def _require_difference(p):
    if not isinstance(p, DifferencePotential):
        raise TypeError("expected a DifferencePotential (scatlab.potentials.difference(q1, q2))")


def _h_scaled(p, ell, n):
    """(S, M) with h = S e^M using n nodes per piece."""
    r, w = _r_nodes(p, n)
    if r.size == 0:
        return 0.0, 0.0
    w1, _, logf = _scaled_solution(p.q1, ell, r)
    w2, _, _ = _scaled_solution(p.q2, ell, r)
    lg = 2.0 * logf
    m = float(np.max(lg))
    return float(np.sum(w * p.evaluate(r) * w1 * w2 * np.exp(lg - m))), m


def h_ell(p, ell, tol=1e-9, n_r=R_NODES):
    """h(l) = int_0^a p phi_1l phi_2l dr for the two potentials behind ``p``.

    ``p`` is a :class:`~scatlab.potentials.DifferencePotential`; its ``q1``
    and ``q2`` supply the regular solutions.  Returns a :class:`Quad`.
    """
    _require_difference(p)
    ell = radial._check_ell(ell)
    if p.is_zero():
        return Quad(0.0, 0.0)

    def f(n):
        s, m = _h_scaled(p, ell, n)
        with np.errstate(under="ignore"):
            return s * math.exp(m) if m > -745 else 0.0
    val, err = _refine(f, n_r, tol, "h(l)")
    return Quad(float(val), float(err))


def log_h(p, ell, n_r=2 * R_NODES):
    """(log|h|, sign) for large l where h itself underflows."""
    _require_difference(p)
    ell = radial._check_ell(ell)
    s, m = _h_scaled(p, ell, n_r)
    if s == 0.0:
        return -math.inf, 0.0
    return math.log(abs(s)) + m, math.copysign(1.0, s)


class LagrangeTerms(NamedTuple):
    integral: float      # h(l) by quadrature
    boundary: float      # phi_1' phi_2 - phi_1 phi_2' at r = a
    phase_form: float    # |F_1| |F_2| sin(delta_2 - delta_1)
    scale: float         # |phi_1' phi_2| + |phi_1 phi_2'| at r = a
    error: float         # quadrature error estimate of ``integral``


def lagrange_boundary(p, ell):
    """phi_1' phi_2 - phi_1 phi_2' at r = a and the size of its two terms."""
    _require_difference(p)
    r = np.array([p.a])
    w1, wp1, lf = _scaled_solution(p.q1, ell, r)
    w2, wp2, _ = _scaled_solution(p.q2, ell, r)
    f2 = math.exp(2.0 * lf[0]) if 2.0 * lf[0] > -745 else 0.0
    return f2 * float(wp1[0] * w2[0] - w1[0] * wp2[0]), f2 * float(abs(wp1[0] * w2[0]) + abs(w1[0] * wp2[0]))


def lagrange_terms(p, ell):
    """Both sides of the Wronskian identity for h(l)."""
    _require_difference(p)
    hq = h_ell(p, ell)
    bnd, scale = lagrange_boundary(p, ell)
    d1, f1 = radial.phase_shift(p.q1, ell)
    d2, f2 = radial.phase_shift(p.q2, ell)
    return LagrangeTerms(hq.value, bnd, f1 * f2 * math.sin(d2 - d1), scale, hq.error)


# -- functional samples -----------------------------------------------------

@dataclass(frozen=True)
class FunctionalSample:
    ell: complex
    h0: complex
    H: complex
    quadrature_error: float
    h: float = None      # only at integer l with a DifferencePotential
    h1: float = None
    consistency: float = field(default=math.nan)  # |H - h0 G^2| / |H|


def functional_sample(p, ell, tol=QUAD_TOL):
    """h0, H (and h, h1 at integer l) at one l, with the H-vs-h0 cross-check.

    h0 is computed independently of H: from Riccati-Bessel values at
    integer l and from the power series of J_{l+1/2} otherwise.
    """
    integer = _is_integer(ell)
    h0 = h0_ell(p, ell, method="bessel" if integer else "series", tol=tol)
    hq = H_ell(p, ell, tol=tol)
    hv = complex(hq.value)
    g2 = complex(np.exp(2.0 * log_gamma_factor(ell)))
    prod = h0.value * g2
    cons = abs(hv - prod) / abs(hv) if hv != 0 else abs(prod)
    err = max(hq.error, h0.error * abs(g2))
    h = h1 = None
    if integer and isinstance(p, DifferencePotential):
        hh = h_ell(p, int(complex(ell).real))
        h = hh.value
        h1 = float(h1_from_h(h, int(complex(ell).real)).real)
    return FunctionalSample(complex(ell), complex(h0.value), hv, err, h, h1, cons)


def functional_scan(p, ells, executor=None):
    fn = lambda l: functional_sample(p, l)
    if executor is None:
        return [fn(l) for l in ells]
    return list(executor.map(fn, ells))


def functional_csv(samples):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["ell_re", "ell_im", "h0_re", "h0_im", "H_re", "H_im", "quadrature_error"])
    for s in samples:
        wr.writerow([f"{x:.17g}" for x in (s.ell.real, s.ell.imag, s.h0.real, s.h0.imag,
                                          s.H.real, s.H.imag, s.quadrature_error)])
    return buf.getvalue()


# -- growth and Nevanlinna-class checks -------------------------------------

def growth_constant(p):
    """c with |H(l)| <= c a'^{2 Re l} on Re l >= 0, a' = max(a, 1)."""
    return 4.0 * max(p.a, 1.0) * p.first_moment()


def growth_bound(p, ell):
    """B(1/2, s+1)^2 a^{2s+1} int r|p|, s = Re l: a bound on |H(l)|.

    |J(r, l)| <= int (1-t^2)^s dt = B(1/2, s+1) <= 2, and r^{2s+2} <= r a^{2s+1}.
    """
    s = np.asarray(ell, dtype=complex).real
    return special.beta(0.5, s + 1.0) ** 2 * p.a ** (2 * s + 1) * p.first_moment()


def growth_bound_without_j(p, ell):
    """a^{2s+1} int r|p|: the bound with the J factor dropped (not valid for small s)."""
    s = np.asarray(ell, dtype=complex).real
    return p.a ** (2 * s + 1) * p.first_moment()


def disc_to_half_plane(w):
    """l = (1 - w) / (1 + w): unit disc onto Re l > 0."""
    w = np.asarray(w, dtype=complex)
    return (1.0 - w) / (1.0 + w)


def nevanlinna_integral(p, r_disc, n_phi=256, allow_edge=False):
    """int_{-pi}^{pi} ln+ |H((1 - r e^{i phi}) / (1 + r e^{i phi}))| d phi (trapezoid)."""
    r_disc = float(r_disc)
    if not 0.0 < r_disc < 1.0:
        raise DomainError("disc radius must lie in (0, 1)")
    if r_disc > 0.95 and not allow_edge:
        raise DomainError("disc radius above 0.95; pass allow_edge=True to proceed")
    if p.is_zero():
        return 0.0
    phi = -math.pi + 2.0 * math.pi * np.arange(n_phi) / n_phi
    ell = disc_to_half_plane(r_disc * np.exp(1j * phi))
    hv = np.abs(np.asarray(H_ell(p, ell).value))
    lp = np.where(hv <= LOG_PLUS_FLOOR, 0.0, np.maximum(np.log(np.maximum(hv, LOG_PLUS_FLOOR)), 0.0))
    return float(2.0 * math.pi * np.mean(lp))


def nevanlinna_bound(p):
    """c1 + 4 pi ln a' with c1 = 2 pi ln+ c and c from :func:`growth_constant`."""
    c = growth_constant(p)
    c1 = 2.0 * math.pi * max(math.log(c), 0.0) if c > 0 else 0.0
    return c1 + 4.0 * math.pi * math.log(max(p.a, 1.0))


def poisson_integral(r, n_phi=512):
    """Trapezoid value of int_{-pi}^{pi} d phi / (1 + r^2 + 2 r cos phi)."""
    phi = -math.pi + 2.0 * math.pi * np.arange(n_phi) / n_phi
    return float(2.0 * math.pi * np.mean(1.0 / (1.0 + r * r + 2.0 * r * np.cos(phi))))


def cauchy_contour(p, center=2.0, radius=0.25, n=64):
    """(|closed integral of H over |l - center| = radius|, max |H| on it)."""
    th = 2.0 * math.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * th)
    hv = np.asarray(H_ell(p, z).value)
    integral = np.sum(hv * 1j * radius * np.exp(1j * th)) * (2.0 * math.pi / n)
    return float(abs(integral)), float(np.max(np.abs(hv))) if hv.size else 0.0


# -- index sets ---------------------------------------------------------------

DIVERGENT = "divergent"
CONVERGENT = "convergent"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class IndexSet:
    family: str          # arithmetic | primes | geometric | explicit
    params: tuple = ()
    l_max: int = 100

    @property
    def classification(self):
        return muntz_classify(self)

    def members(self, l_max=None):
        """Elements not exceeding ``l_max`` (default: the set's own truncation)."""
        n = self.l_max if l_max is None else int(l_max)
        if self.family == "arithmetic":
            c, d = self.params
            return list(range(c, n + 1, d))
        if self.family == "primes":
            return _primes_upto(n)
        if self.family == "geometric":
            (b,) = self.params
            out, x = [], 1
            while x <= n:
                out.append(x)
                x *= b
            return out
        if self.family == "explicit":
            return [x for x in self.params if x <= n]
        raise ValueError(f"unknown family {self.family!r}")

    def reciprocal_sum(self, l_max=None):
        """Partial sum of 1/l over the non-zero members up to ``l_max``."""
        return float(sum(1.0 / x for x in self.members(l_max) if x > 0))

    def spec(self):
        if self.family == "arithmetic":
            return "arithmetic:%d:%d" % self.params
        if self.family == "primes":
            return "primes"
        if self.family == "geometric":
            return "geometric:%d" % self.params
        return "list:" + ",".join(str(x) for x in self.params)


def _primes_upto(n):
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for k in range(2, int(n ** 0.5) + 1):
        if sieve[k]:
            sieve[k * k::k] = False
    return np.nonzero(sieve)[0].tolist()


def parse_index_set(text, l_max=100):
    """Parse "arithmetic:c:d", "primes", "geometric:b" or "list:1,4,9"."""
    if not isinstance(text, str) or not text.strip():
        raise ValueError("empty index-set spec")
    kind, _, rest = text.strip().partition(":")
    try:
        if kind == "arithmetic":
            c, d = (int(x) for x in rest.split(":"))
            if c < 0 or d < 1:
                raise ValueError
            return IndexSet("arithmetic", (c, d), l_max)
        if kind == "primes" and not rest:
            return IndexSet("primes", (), l_max)
        if kind == "geometric":
            b = int(rest)
            if b < 2:
                raise ValueError
            return IndexSet("geometric", (b,), l_max)
        if kind == "list":
            vals = sorted(set(int(x) for x in rest.split(",") if x.strip()))
            if not vals or vals[0] < 0:
                raise ValueError
            return IndexSet("explicit", tuple(vals), l_max)
    except ValueError:
        pass
    raise ValueError(f"bad index-set spec {text!r}; expected arithmetic:c:d (c>=0, d>=1), "
                     "primes, geometric:b (b>=2) or list:n1,n2,...")


def muntz_classify(s):
    """Whether sum 1/l over the defining family diverges."""
    if s.family in ("arithmetic", "primes"):
        return DIVERGENT
    if s.family == "geometric":
        return CONVERGENT if s.params[0] >= 2 else UNKNOWN
    return UNKNOWN


# -- large-l heuristic --------------------------------------------------------

class MomentHeuristic(NamedTuple):
    h_value: float
    moment_value: float
    ratio: float
    defined: bool
    log_h: float
    log_moment: float


def log_moment_prefactor(ell):
    """log of (1/2)(e/(2l+1))^{2l+1}/(2l+1): u_l(r)^2 ~ this * r^{2l+2}."""
    m = 2.0 * ell + 1.0
    return -math.log(2.0) + m * (1.0 - math.log(m)) - math.log(m)


def _log_abs_moment(p, ell):
    """(log|int_0^a p r^{2l+2} dr|, sign), exact for piecewise-linear p."""
    lo, hi, vlo, vhi = p.segments
    terms, signs = [], []
    n = 2 * ell + 2
    for a, b, va, vb in zip(lo, hi, vlo, vhi):
        if va == 0 and vb == 0:
            continue
        beta = (vb - va) / (b - a)
        alpha = va - beta * a
        # alpha int r^n + beta int r^{n+1}, each as b^k (1 - (a/b)^k) / k
        for coef, k in ((alpha, n + 1), (beta, n + 2)):
            if coef == 0:
                continue
            frac = 1.0 - (a / b) ** k
            if frac <= 0:
                continue
            terms.append(math.log(abs(coef)) + k * math.log(b) + math.log(frac) - math.log(k))
            signs.append(math.copysign(1.0, coef))
    if not terms:
        return -math.inf, 0.0
    m = max(terms)
    s = sum(sg * math.exp(t - m) for t, sg in zip(terms, signs))
    if s == 0:
        return -math.inf, 0.0
    return m + math.log(abs(s)), math.copysign(1.0, s)


def moment_heuristic(p, ell, free=None):
    """h(l) against C_l int_0^a r^2 p r^{2l} dr with u_l^2 ~ C_l r^{2l+2}.

    ``free=True`` uses u_l in place of the regular solutions (this is
    h0(l)); the default uses the regular solutions when ``p`` is a
    :class:`DifferencePotential` and u_l otherwise.  The comparison runs in
    log space, so it works where both numbers underflow.
    """
    ell = radial._check_ell(ell)
    if free is None:
        free = not isinstance(p, DifferencePotential)
    if p.is_zero():
        return MomentHeuristic(0.0, 0.0, 1.0, False, -math.inf, -math.inf)
    if free:
        s, m = _h0_bessel_scaled(p, ell, 2 * R_NODES)
        lh = math.log(abs(s)) + m if s != 0 else -math.inf
        sh = math.copysign(1.0, s)
    else:
        lh, sh = log_h(p, ell)
    lm, sm = _log_abs_moment(p, ell)
    lm += log_moment_prefactor(ell)
    with np.errstate(under="ignore", over="ignore"):
        hv = sh * math.exp(lh) if lh > -745 else 0.0
        mv = sm * math.exp(lm) if lm > -745 else 0.0
    if sm == 0 or sh == 0:
        return MomentHeuristic(hv, mv, math.nan, False, lh, lm)
    return MomentHeuristic(hv, mv, sh * sm * math.exp(lh - lm), True, lh, lm)


# -- discrimination -----------------------------------------------------------

@dataclass(frozen=True)
class DiscriminationReport:
    ells: tuple
    delta1: tuple
    delta2: tuple
    h: tuple
    h_error: tuple
    sup_delta: float
    sup_h: float
    correlation: float        # Pearson, log Delta against log|h|
    identity_residual: float  # max |h - |F1||F2| sin(delta2 - delta1)|

    @property
    def deltas(self):
        return tuple(abs(a - b) for a, b in zip(self.delta1, self.delta2))

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["ell", "delta1", "delta2", "h"])
        for row in zip(self.ells, self.delta1, self.delta2, self.h):
            wr.writerow([row[0]] + [f"{x:.17g}" for x in row[1:]])
        return buf.getvalue()


def discrimination_experiment(q1, q2, s, l_max, executor=None):
    """Phase-shift differences and h(l) for l in s, 0 <= l <= l_max."""
    if not 0 <= int(l_max) <= 100:
        raise DomainError("l_max must lie in [0, 100]")
    ells = s.members(int(l_max))
    p = DifferencePotential(q1, q2)

    def one(ell):
        d1, f1 = radial.phase_shift(q1, ell)
        d2, f2 = radial.phase_shift(q2, ell)
        hq = h_ell(p, ell)
        return d1, d2, hq.value, hq.error, f1 * f2 * math.sin(d2 - d1)

    rows = list(executor.map(one, ells)) if executor is not None else [one(l) for l in ells]
    d1 = tuple(r[0] for r in rows)
    d2 = tuple(r[1] for r in rows)
    h = tuple(r[2] for r in rows)
    herr = tuple(r[3] for r in rows)
    dd = np.abs(np.array(d1) - np.array(d2))
    ha = np.abs(np.array(h))
    resid = max((abs(r[2] - r[4]) for r in rows), default=0.0)
    ok = (dd > 0) & (ha > 0)
    corr = float(np.corrcoef(np.log(dd[ok]), np.log(ha[ok]))[0, 1]) if ok.sum() >= 3 else math.nan
    return DiscriminationReport(tuple(ells), d1, d2, h, herr,
                                float(dd.max()) if dd.size else 0.0,
                                float(ha.max()) if ha.size else 0.0, corr, float(resid))
