"""The angular-momentum-independent transformation kernel K(r, rho).

``phi_l(r) = u_l(r) + int_0^r K(r, rho) u_l(rho) rho^{-2} d rho`` holds for
every l with one kernel.  In the variables ``xi = ln r + ln rho`` and
``eta = ln r - ln rho`` with ``K = e^{xi/2} L`` the kernel solves the Volterra
equation

    L(xi, eta) = b(xi) - int_{-inf}^{xi} ds int_0^{eta} dt Q(s, t) L(s, t),

    b(xi) = (1/2) int_0^{e^{xi/2}} s q(s) ds,
    Q(xi, eta) = (1/4) [e^{xi+eta} (1 - q(e^{(xi+eta)/2})) - e^{xi-eta}].

The equation is marched on a uniform grid (equal steps in xi and eta) over
the causal triangle ``xi + eta <= 2 ln a`` (plus a two-step band).  Cells
cut by a jump of q get split-cell weights, so the product trapezoid rule
keeps its h^2 error expansion.  Three step sizes h, h/2, h/4 are marched and
combined by Richardson extrapolation; the difference between the two
extrapolants is the reported convergence delta.
"""
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import _march, specfun
from .errors import DomainError, NonConvergenceError

ETA_MAX = 12.0
XI_MARGIN = 2.0
N_ETA = 601
N_XI = 701
TOL = 1e-8
TRUNC_TOL = 1e-6
BAND = 2
EPS1 = 0.1
EPS2 = 0.1


# -- Goursat data ----------------------------------------------------------

@dataclass(frozen=True)
class GoursatData:
    """Evaluators for g, b, Q, mu and mu1 built from a potential."""

    q: object

    def g(self, r):
        """K(r, r) = (r/2) int_0^r s q(s) ds."""
        r = np.asarray(r, dtype=float)
        return 0.5 * r * self.q.moment(r)

    def b(self, xi):
        return 0.5 * self.q.moment(np.exp(np.asarray(xi, dtype=float) / 2.0))

    def Q(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        s = xi + eta
        return 0.25 * (np.exp(s) * (1.0 - self.q.evaluate(np.exp(s / 2.0))) - np.exp(xi - eta))

    def mu(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * np.exp(s) * (1.0 + np.abs(self.q.evaluate(np.exp(s / 2.0))))

    def mu1(self, xi):
        """int_{-inf}^{xi} mu(s) ds = e^xi / 2 + int_0^{e^{xi/2}} s |q(s)| ds."""
        xi = np.asarray(xi, dtype=float)
        return 0.5 * np.exp(xi) + self.q.abs_moment(np.exp(xi / 2.0))

    def sup_abs_b(self):
        """sup over xi of |b(xi)|, exact (extrema sit at segment ends)."""
        lo, hi, _, _ = self.q.segments
        pts = np.concatenate([[self.q.a], lo, hi])
        pts = pts[pts > 0]
        if pts.size == 0:
            return 0.0
        return float(0.5 * np.max(np.abs(self.q.moment(pts))))


def goursat_data(q):
    return GoursatData(q)


def picard_majorant(gd, xi, eta, n_terms):
    """1 + sum_{n=1}^{N} (eta mu1(xi+eta))^n / (n!)^2."""
    if n_terms < 1:
        raise DomainError("n_terms must be >= 1")
    z = np.asarray(eta, dtype=float) * gd.mu1(np.asarray(xi, dtype=float) + eta)
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(1, int(n_terms) + 1):
        term = term * z / (n * n)
        total = total + term
    return total[()] if total.ndim == 0 else total


def majorant_bound(c0, z, eps1=EPS1, eps2=EPS2):
    """c0 exp((2+eps1) z^{1/2+eps2}), which dominates c0 sum z^n/(n!)^2."""
    with np.errstate(over="ignore"):  # +inf is still a valid upper bound
        return c0 * np.exp((2.0 + eps1) * np.power(np.maximum(z, 0.0), 0.5 + eps2))


# -- per-diagonal coefficients with split-cell weights --------------------

def _jump_radii(q):
    j = list(q.jumps)
    if q.a not in j and float(q.evaluate(q.a)) != 0.0:
        j.append(q.a)
    return sorted(j)


def _side_function(q, rstar, side):
    """Linear function continuing q from the given side of a jump at rstar."""
    lo, hi, vlo, vhi = q.segments
    if side == "left":
        k = np.nonzero(hi == rstar)[0]
    else:
        k = np.nonzero(lo == rstar)[0]
    if k.size == 0:
        return lambda r: 0.0 * r
    k = int(k[0])
    l0, h0, a0, b0 = lo[k], hi[k], vlo[k], vhi[k]
    return lambda r: a0 + (b0 - a0) * (r - l0) / (h0 - l0)


def diagonal_coefficients(q, xi_max, d_top, h, ndiag, absolute=False):
    """Effective potential values (top, mid, bottom) for cells by top diagonal.

    Diagonal ``d`` carries ``s_d = xi_max + (d - d_top) h``.  In a cell
    crossed by a jump the value at each corner is the split-weighted
    combination of the two one-sided continuations of q.
    """
    d = np.arange(ndiag)
    ra = math.exp(xi_max / 2.0)
    if abs(ra - q.a) <= 1e-13 * q.a:
        ra = q.a
    r = ra * np.exp((d - d_top) * h / 2.0)
    r[d == d_top] = ra
    s = xi_max + (d - d_top) * h
    left = np.asarray(q.evaluate(r, side="left"), dtype=float)
    right = np.asarray(q.evaluate(r, side="right"), dtype=float)
    qt = left.copy()
    qm = np.empty(ndiag)
    qb = np.empty(ndiag)
    qm[1:] = left[:-1]
    qm[0] = left[0]
    qb[2:] = right[:-2]
    qb[:2] = right[:2]
    if absolute:
        qt, qm, qb = np.abs(qt), np.abs(qm), np.abs(qb)
    for rstar in _jump_radii(q):
        sstar = 2.0 * math.log(rstar)
        fl = _side_function(q, rstar, "left")
        fr = _side_function(q, rstar, "right")
        if absolute:
            fl0, fr0 = fl, fr
            fl = lambda x, f=fl0: abs(f(x))
            fr = lambda x, f=fr0: abs(f(x))
        k0 = int(math.floor((sstar - s[0]) / h))
        for dd in range(max(k0, 2), min(k0 + 3, ndiag)):
            u = (sstar - s[dd - 2]) / h
            if not 0.0 < u < 2.0:
                continue
            wb, wm, wt = _march.split_weights(u)
            rt, rm, rb = r[dd], r[dd - 1], r[dd - 2]
            qt[dd] = 4.0 * (wt * fl(rt) + (0.25 - wt) * fr(rt))
            qm[dd] = 4.0 * (wm * fl(rm) + (0.25 - wm) * fr(rm))
            qb[dd] = 4.0 * (wb * fl(rb) + (0.25 - wb) * fr(rb))
    return s, qt, qm, qb


def _volterra_coefficients(q, xi_max, d_top, h, ndiag):
    """(At, Am, Ab, bscale) for the kernel Q = (1/4)(e^s (1 - q) - e^{xi-eta})."""
    s, qt, qm, qb = diagonal_coefficients(q, xi_max, d_top, h, ndiag)
    es = np.exp(s)
    At = 0.25 * es * (1.0 - qt)
    Am = np.empty(ndiag)
    Ab = np.empty(ndiag)
    Am[1:] = 0.25 * es[:-1] * (1.0 - qm[1:])
    Am[0] = At[0]
    Ab[2:] = 0.25 * es[:-2] * (1.0 - qb[2:])
    Ab[:2] = At[:2]
    return At, Am, Ab, -0.25


def _mu_coefficients(q, xi_max, d_top, h, ndiag):
    """(At, Am, Ab, 0) for the kernel mu(s+t) = (1/2) e^{s+t} (1 + |q|)."""
    s, qt, qm, qb = diagonal_coefficients(q, xi_max, d_top, h, ndiag, absolute=True)
    es = np.exp(s)
    At = 0.5 * es * (1.0 + qt)
    Am = np.empty(ndiag)
    Ab = np.empty(ndiag)
    Am[1:] = 0.5 * es[:-1] * (1.0 + qm[1:])
    Am[0] = At[0]
    Ab[2:] = 0.5 * es[:-2] * (1.0 + qb[2:])
    Ab[:2] = At[:2]
    return At, Am, Ab, 0.0


def kink_correction(gd, xi, eta, h, nodes=12):
    """Column corrections for the kinks of b(xi) at the jumps of q.

    Returns ``(cols, corr)`` for :func:`scatlab._march.march`: for a jump at
    ``s*`` strictly inside ``(xi_{i-1}, xi_i)``, ``corr[k, j]`` approximates
    ``int_0^{eta_j} dt int_{xi_{i-1}}^{xi_i} ds Q(s, t) (b(s) - b_linear(s))``
    with Q frozen at the cell midpoint in xi.
    """
    cols, corr = [], []
    x, w = np.polynomial.legendre.leggauss(nodes)
    for rstar in _jump_radii(gd.q):
        sstar = 2.0 * math.log(rstar)
        i = int(math.ceil((sstar - xi[0]) / h - 1e-12))
        if i < 1 or i >= len(xi):
            continue
        x0, x1 = xi[i - 1], xi[i]
        if not x0 + 1e-12 * h < sstar < x1 - 1e-12 * h:
            continue
        b0, b1 = float(gd.b(x0)), float(gd.b(x1))
        err = 0.0
        for lo, hi in ((x0, sstar), (sstar, x1)):
            s = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            lin = b0 + (b1 - b0) * (s - x0) / (x1 - x0)
            err += 0.5 * (hi - lo) * float(np.sum(w * (gd.b(s) - lin)))
        mid = 0.5 * (x0 + x1)
        tc = np.concatenate([[0.0], 0.5 * (eta[1:] + eta[:-1])])
        qc = gd.Q(mid, tc)
        qc[0] = 0.0
        cols.append(i)
        corr.append(np.cumsum(h * err * qc))
    if not cols:
        return None
    return np.array(cols), np.array(corr)


# -- the kernel grid -------------------------------------------------------

@dataclass(frozen=True)
class KernelGrid:
    q: object
    xi: np.ndarray
    eta: np.ndarray
    L: np.ndarray
    h: float
    dmax: int
    d_top: int
    gamma: float
    c: float
    b: np.ndarray
    convergence_delta: float
    truncation_ratio: float
    trunc_tol: float
    c0: float
    levels: int
    meta: dict = field(default_factory=dict)

    @property
    def xi_grid(self):
        return self.xi

    @property
    def eta_grid(self):
        return self.eta

    @property
    def L_values(self):
        return self.L

    @property
    def xi_min(self):
        return float(self.xi[0])

    @property
    def xi_max(self):
        return float(self.xi[self.d_top])

    @property
    def eta_max(self):
        return float(self.eta[-1])

    @property
    def mask(self):
        i = np.arange(len(self.xi))[:, None]
        j = np.arange(len(self.eta))[None, :]
        return i + j <= self.dmax

    @property
    def D(self):
        """L - b(xi), the part carried by interpolation."""
        return self.L - self.b[:, None]


def contraction_constant(q, s_max):
    """c = 2 e^{s_max} + 2 int_0^a r|q| dr on a domain with xi + eta <= s_max."""
    return 2.0 * math.exp(s_max) + 2.0 * q.first_moment()


def solve_kernel(q, n_xi=N_XI, n_eta=N_ETA, eta_max=ETA_MAX, xi_max=None, tol=TOL,
                 trunc_tol=TRUNC_TOL, levels=3, backend=None, method="march",
                 check=True):
    """Solve the Volterra equation for L on a uniform grid.

    ``n_eta`` points span ``[0, eta_max]``; the xi step equals the eta step
    and ``n_xi`` points end at ``xi_max`` (default ``2 ln a``).  With
    ``levels = 3`` the grid is marched at h, h/2, h/4 and L is the
    Richardson extrapolant of the two finer levels; the convergence delta is
    the sup difference between the two extrapolants.
    """
    if n_eta < 3 or n_xi < 3:
        raise DomainError("grids need at least three points")
    if not eta_max > 0:
        raise DomainError("eta_max must be positive")
    if xi_max is None:
        xi_max = 2.0 * math.log(q.a)
    if xi_max < 2.0 * math.log(q.a) - 1e-12:
        raise DomainError("xi_max must be at least 2 ln a")
    if levels not in (1, 2, 3):
        raise DomainError("levels must be 1, 2 or 3")
    h = eta_max / (n_eta - 1)
    N = n_xi - 1
    M = n_eta - 1
    dmax = min(N + BAND, N + M)
    xi = xi_max - (N - np.arange(N + 1)) * h
    eta = h * np.arange(M + 1)
    gd = GoursatData(q)
    b = gd.b(xi)

    sols = []
    for k in range(levels):
        f = 2 ** k
        hk = h / f
        Nk, Mk = N * f, M * f
        ndiag = Nk + Mk + 1
        At, Am, Ab, bscale = _volterra_coefficients(q, xi_max, Nk, hk, ndiag)
        xik = xi_max - (Nk - np.arange(Nk + 1)) * hk
        etak = hk * np.arange(Mk + 1)
        args = (gd.b(xik), np.exp(xik), np.exp(-etak),
                At, Am, Ab, bscale, hk * hk / 4.0, dmax * f)
        kink = kink_correction(gd, xik, etak, hk)
        if method == "march":
            sols.append(_march.march(*args, stride=f, backend=backend, kink=kink))
        elif method == "picard":
            sols.append(_picard(*args, backend=backend, kink=kink)[::f, ::f])
        else:
            raise DomainError(f"unknown method {method!r}")

    if levels == 1:
        L = sols[0]
        delta = math.nan
    elif levels == 2:
        L = (4.0 * sols[1] - sols[0]) / 3.0
        delta = float(np.nanmax(np.abs(sols[1] - sols[0])))
    else:
        r1 = (4.0 * sols[1] - sols[0]) / 3.0
        r2 = (4.0 * sols[2] - sols[1]) / 3.0
        L = r2
        delta = float(np.nanmax(np.abs(r2 - r1)))
    L[:, 0] = b  # exact boundary row
    s_max = xi_max + (dmax - N) * h
    c = contraction_constant(q, s_max)
    c0 = gd.sup_abs_b()
    edge = float(np.nanmax(np.abs(L[0])))
    kg = KernelGrid(q=q, xi=xi, eta=eta, L=L, h=h, dmax=dmax, d_top=N, gamma=2.0 * c,
                    c=c, b=b, convergence_delta=delta,
                    truncation_ratio=edge / max(1.0, c0), trunc_tol=trunc_tol, c0=c0,
                    levels=levels,
                    meta={"potential": getattr(q, "name", None) or "potential",
                          "method": method})
    if check:
        if levels > 1 and not delta < tol:
            raise NonConvergenceError(
                f"kernel grid refinement changed L by {delta:.3e} >= tol {tol:.1e}",
                achieved=delta)
        if not kg.truncation_ratio <= trunc_tol:
            raise NonConvergenceError(
                f"|L| at xi_min is {kg.truncation_ratio:.3e} (relative), above the "
                f"truncation tolerance {trunc_tol:.1e}; lower xi_min (more xi points)",
                achieved=kg.truncation_ratio)
    return kg


def _picard(b, exi, emeta, At, Am, Ab, bscale, c, dmax, backend=None, kink=None,
            maxiter=500):
    """Successive approximations L <- b - I[L] with the same quadrature."""
    L = np.repeat(b[:, None], len(emeta), axis=1)
    for _ in range(maxiter):
        new = b[:, None] - _march.apply(L, exi, emeta, At, Am, Ab, bscale, c, dmax,
                                        backend=backend, kink=kink)
        change = np.nanmax(np.abs(new - L))
        L = new
        if change <= 1e-15 * max(1.0, np.nanmax(np.abs(L))):
            return L
    raise NonConvergenceError("Picard iteration did not settle", achieved=float(change))


# -- interpolation ----------------------------------------------------------

def _interp_D(kg, xi, eta):
    """Bilinear interpolation of D = L - b; zero below xi_min."""
    D = kg.D
    x = (np.asarray(xi, dtype=float) - kg.xi_min) / kg.h
    y = np.asarray(eta, dtype=float) / kg.h
    i0 = np.floor(x).astype(int)
    j0 = np.clip(np.floor(y).astype(int), 0, len(kg.eta) - 2)
    fx = x - i0
    fy = y - j0
    below = i0 < 0
    i0c = np.clip(i0, 0, len(kg.xi) - 2)
    d00 = D[i0c, j0]
    d10 = D[i0c + 1, j0]
    d01 = D[i0c, j0 + 1]
    d11 = D[i0c + 1, j0 + 1]
    # a node outside the band can only appear with zero weight
    d00, d10, d01, d11 = (np.nan_to_num(v) for v in (d00, d10, d01, d11))
    val = ((1 - fx) * (1 - fy) * d00 + fx * (1 - fy) * d10
           + (1 - fx) * fy * d01 + fx * fy * d11)
    # rows below xi_min: D there is taken as zero, the ξ_min row also has D = 0
    val = np.where(below, np.where(i0 == -1, fx * ((1 - fy) * d00 + fy * d01), 0.0), val)
    return val


def L_at(kg, xi, eta):
    """L(xi, eta) = b(xi) + interpolated (L - b)."""
    gd = GoursatData(kg.q)
    return gd.b(xi) + _interp_D(kg, xi, eta)


def kernel_K(kg, r, rho):
    """K(r, rho) for 0 < rho <= r <= a; 0 where eta exceeds eta_max."""
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0) or np.any(rho > r * (1 + 1e-14)):
        raise DomainError("kernel_K needs 0 < rho <= r")
    if np.any(r > kg.q.a * (1 + 1e-14)):
        raise DomainError("kernel_K needs r <= a")
    xi = np.log(r) + np.log(rho)
    eta = np.maximum(np.log(r) - np.log(rho), 0.0)
    inside = eta <= kg.eta_max * (1 + 1e-14)
    val = np.exp(xi / 2.0) * L_at(kg, xi, np.minimum(eta, kg.eta_max))
    out = np.where(inside, val, 0.0)
    return out[()] if out.ndim == 0 else out


def _majorant_line_integral(kg, r, lo):
    """r int_lo^inf c0 exp((2+eps1)(eta mu1(2 ln r))^{1/2+eps2}) e^{-eta/2} d eta."""
    if kg.c0 == 0.0:
        return 0.0
    m1 = float(GoursatData(kg.q).mu1(2.0 * math.log(r)))
    lc = math.log(kg.c0)

    def f(e):
        return math.exp(lc + (2.0 + EPS1) * (e * m1) ** (0.5 + EPS2) - e / 2.0)

    # split at the peak of the exponent so quad sees the bulk
    peak = max(lo, ((2.0 + EPS1) * (0.5 + EPS2) * 2.0 * m1 ** (0.5 + EPS2)) ** (1.0 / (0.5 - EPS2)))
    val = 0.0
    if peak > lo:
        val += integrate.quad(f, lo, peak, limit=200)[0]
    val += integrate.quad(f, peak, np.inf, limit=200)[0]
    return r * val


def tail_bound(kg, r):
    """Majorant bound of r int_{eta_max}^inf |L| e^{-eta/2} d eta along the line through r."""
    return _majorant_line_integral(kg, r, kg.eta_max)


def weighted_l1_norm(kg, r, nodes=10):
    """(int_0^r |K(r,rho)| rho^{-1} d rho on the grid, majorant tail bound)."""
    if not 0 < r <= kg.q.a * (1 + 1e-14):
        raise DomainError("weighted_l1_norm needs 0 < r <= a")
    eta, w = _gl_nodes(kg, nodes)
    vals = np.abs(L_at(kg, 2.0 * math.log(r) - eta, eta)) * np.exp(-eta / 2.0)
    return float(r * np.sum(w * vals)), tail_bound(kg, r)


def weighted_l1_bound(kg, r):
    """r int_0^inf c0 exp(2.1 (eta mu1(2 ln r))^{0.6}) e^{-eta/2} d eta."""
    return _majorant_line_integral(kg, r, 0.0)


def _gl_nodes(kg, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    starts = kg.eta[:-1]
    eta = (starts[:, None] + kg.h * x[None, :]).ravel()
    ww = np.tile(kg.h * w, len(starts))
    return eta, ww


def apply_transform(kg, ell, r, nodes=10, with_tail=False):
    """u_l(r) + int_0^r K(r, rho) u_l(rho) rho^{-2} d rho.

    With rho = r e^{-eta} the integral becomes
    ``int_0^{eta_max} L(2 ln r - eta, eta) u_l(r e^{-eta}) e^{eta/2} d eta``.
    L is split into the exact b(xi) and the interpolated remainder; both are
    integrated against the exact u_l factor with ``nodes`` Gauss-Legendre
    points per eta cell.
    """
    if int(ell) != ell or ell < 0:
        raise DomainError("angular index must be a non-negative integer")
    r = float(r)
    if not 0 < r <= kg.q.a * (1 + 1e-14):
        raise DomainError("apply_transform needs 0 < r <= a")
    r = min(r, kg.q.a)
    eta, w = _gl_nodes(kg, nodes)
    lu = specfun.riccati_log(int(ell), r * np.exp(-eta)).u
    with np.errstate(under="ignore"):
        fac = lu.sign * np.exp(lu.log + eta / 2.0)
    Lv = L_at(kg, 2.0 * math.log(r) - eta, eta)
    val = float(specfun.riccati_log(int(ell), r).u.value()[0] + np.sum(w * Lv * fac))
    if with_tail:
        return val, tail_bound(kg, r)
    return val


def recover_potential(kg, r, step=None):
    """q(r) = (2/r) d/dr [K(r,r)/r] by finite differences on the diagonal.

    The default step is the diagonal grid spacing at r = a.  Near a jump of q
    the difference is taken one-sided, away from the jump.
    """
    a = kg.q.a
    if step is None:
        step = a * kg.h / 2.0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 2 * step) or np.any(r > a * (1 + 1e-14)):
        raise DomainError("recover_potential needs 2 steps < r <= a")
    diag = lambda x: kernel_K(kg, x, x) / x
    jumps = np.array(_jump_radii(kg.q))
    out = np.empty_like(r)
    for k, x in enumerate(r):
        near = jumps[np.abs(jumps - x) <= 2 * step]
        if x + step > a or (near.size and np.any(near > x)):
            d = (3 * diag(x) - 4 * diag(x - step) + diag(x - 2 * step)) / (2 * step)
        elif near.size and np.any(near <= x):
            d = (-3 * diag(x) + 4 * diag(x + step) - diag(x + 2 * step)) / (2 * step)
        else:
            d = (diag(x + step) - diag(x - step)) / (2 * step)
        out[k] = 2.0 / x * d
    return out[0] if out.size == 1 else out


# -- verification ----------------------------------------------------------

def _weighted_sup(kg_eta, f, gamma):
    return float(np.nanmax(np.exp(-gamma * kg_eta)[None, :] * np.abs(f)))


def _coarse_ops(kg, stride):
    """Coefficients for applying V on the stride-subsampled grid."""
    h = kg.h * stride
    xi = kg.xi[::stride]
    eta = kg.eta[::stride]
    # subgrid diagonal k has s = xi_min + k h; its index relative to xi_max
    d_top = (kg.xi_max - kg.xi_min) / h
    ndiag = len(xi) + len(eta) - 1
    s0 = kg.xi_min
    # diagonal_coefficients takes xi_max and its diagonal index; emulate via s0
    At, Am, Ab, bs = _volterra_coefficients_at(kg.q, s0, h, ndiag)
    dmax = kg.dmax // stride
    return xi, eta, At, Am, Ab, bs, h, dmax, d_top


def _volterra_coefficients_at(q, s0, h, ndiag):
    """As _volterra_coefficients, for diagonals s_d = s0 + d h."""
    # express through an anchor diagonal placed at xi_max = 2 ln a if it is a node
    xi_a = 2.0 * math.log(q.a)
    k = (xi_a - s0) / h
    kr = round(k)
    if abs(k - kr) < 1e-9:
        return _volterra_coefficients(q, xi_a, int(kr), h, ndiag)
    return _volterra_coefficients(q, s0, 0, h, ndiag)


def apply_V(kg, f, stride=1, backend=None, contains_b=False):
    """(V f)(xi, eta) = -int int Q f on the (subsampled) kernel grid.

    Set ``contains_b`` when ``f`` includes b(xi) (for instance f = L), so the
    kink columns of b are integrated with their correction.
    """
    xi, eta, At, Am, Ab, bs, h, dmax, _ = _coarse_ops(kg, stride)
    kink = kink_correction(GoursatData(kg.q), xi, eta, h) if contains_b else None
    return -_march.apply(f, np.exp(xi), np.exp(-eta), At, Am, Ab, bs, h * h / 4.0, dmax,
                         backend=backend, kink=kink)


def fixed_point_residual(kg, backend=None):
    """Weighted sup of L - b - V L, with V Richardson-extrapolated (h, 2h)."""
    v1 = apply_V(kg, kg.L, 1, backend=backend, contains_b=True)[::2, ::2]
    v2 = apply_V(kg, kg.L[::2, ::2], 2, backend=backend, contains_b=True)
    vr = (4.0 * v1 - v2) / 3.0
    res = kg.L[::2, ::2] - kg.b[::2, None] - vr
    return _weighted_sup(kg.eta[::2], res, kg.gamma)


def operator_norm_estimate(kg, n_trials=20, seed=0, backend=None):
    """Largest ||V f|| / ||f|| (weighted norm) over random bounded grid functions.

    One extra trial uses the extremal sign pattern e^{gamma eta} sign(Q).
    """
    rng = np.random.default_rng(seed)
    w = np.exp(kg.gamma * kg.eta)[None, :]
    mask = kg.mask
    best = 0.0
    trials = [rng.uniform(-1.0, 1.0, size=kg.L.shape) for _ in range(n_trials)]
    gd = GoursatData(kg.q)
    X, E = np.meshgrid(kg.xi, kg.eta, indexing="ij")
    trials.append(np.sign(gd.Q(X, E)))
    for t in trials:
        f = np.where(mask, t * w, np.nan)
        vf = apply_V(kg, f, 1, backend=backend)
        ratio = _weighted_sup(kg.eta, vf, kg.gamma) / _weighted_sup(kg.eta, f, kg.gamma)
        best = max(best, ratio)
    return best


def check_majorant(kg, eps1=EPS1, eps2=EPS2):
    """max over the grid of |L| / (c0 exp((2+eps1)[eta mu1(xi+eta)]^{1/2+eps2}))."""
    gd = GoursatData(kg.q)
    if kg.c0 == 0.0:
        return 0.0 if np.nanmax(np.abs(kg.L)) == 0.0 else math.inf
    X, E = np.meshgrid(kg.xi, kg.eta, indexing="ij")
    bound = majorant_bound(kg.c0, E * gd.mu1(X + E), eps1, eps2)
    return float(np.nanmax(np.abs(kg.L) / bound))


def boundary_row_error(kg):
    return float(np.max(np.abs(kg.L[:, 0] - kg.b)))


def pde_residual(kg, margin=2):
    """sup |L_{xi eta} + Q L| by finite differences, away from r = a.

    Only meaningful for potentials that are continuous inside (0, a).
    """
    L = kg.L
    h = kg.h
    Lxe = (L[1:, 1:] - L[1:, :-1] - L[:-1, 1:] + L[:-1, :-1]) / (h * h)
    xc = 0.5 * (kg.xi[1:] + kg.xi[:-1])
    ec = 0.5 * (kg.eta[1:] + kg.eta[:-1])
    gd = GoursatData(kg.q)
    X, E = np.meshgrid(xc, ec, indexing="ij")
    Lc = 0.25 * (L[1:, 1:] + L[1:, :-1] + L[:-1, 1:] + L[:-1, :-1])
    res = Lxe + gd.Q(X, E) * Lc
    i = np.arange(len(xc))[:, None]
    j = np.arange(len(ec))[None, :]
    keep = (i + j + 1 <= kg.d_top - margin)
    return float(np.nanmax(np.abs(np.where(keep, res, np.nan))))


def w_iterates(q, n_max=3, h=0.01, coarse=25, xi_range=(-8.0, 0.0), eta_max=4.0,
               pad=12.0, backend=None):
    """W^n 1 for n = 1..n_max by nested quadrature, with their bounds.

    W f = int_{-inf}^{xi} ds int_0^{eta} dt mu(s+t) f(s,t).  The iterates
    are built with the split-cell product rule on a fine grid of step ``h``
    whose lower xi limit sits ``pad`` below the window, and reported on the
    coarse grid made of every ``coarse``-th node.  Near eta = 0 the iterates
    vanish like eta^n, so the first fine cells carry O(1) relative error; on
    the coarse grid their weight is negligible.

    Returns (xi, eta, [W^n 1], [eta^n mu1^n / (n!)^2]) on the coarse window.
    """
    xi_lo = xi_range[0] - pad
    N = int(round((xi_range[1] - xi_lo) / h))
    M = int(round(eta_max / h))
    xi = xi_range[1] - (N - np.arange(N + 1)) * h
    eta = h * np.arange(M + 1)
    ndiag = N + M + 1
    xi_a = 2.0 * math.log(q.a)
    k = (xi_a - xi[0]) / h
    if abs(k - round(k)) < 1e-9:
        At, Am, Ab, bs = _mu_coefficients(q, xi_a, int(round(k)), h, ndiag)
    else:
        At, Am, Ab, bs = _mu_coefficients(q, xi[0], 0, h, ndiag)
    f = np.ones((N + 1, M + 1))
    gd = GoursatData(q)
    rows = np.nonzero(xi >= xi_range[0] - 1e-9)[0]
    rows = rows[(rows - rows[-1]) % coarse == 0]
    cols = np.arange(0, M + 1, coarse)
    X, E = np.meshgrid(xi[rows], eta[cols], indexing="ij")
    z = E * gd.mu1(X + E)
    iterates, bounds = [], []
    for n in range(1, n_max + 1):
        f = _march.apply(f, np.exp(xi), np.exp(-eta), At, Am, Ab, bs, h * h / 4.0, ndiag,
                         backend=backend)
        iterates.append(f[np.ix_(rows, cols)])
        bounds.append(z ** n / math.factorial(n) ** 2)
    return xi[rows], eta[cols], iterates, bounds


# -- entire function 1 + sum z^n/(n!)^2 -------------------------------------

@dataclass(frozen=True)
class OrderType:
    order_raw: float
    type_raw: float
    order: float
    type: float
    type_at_half: float
    n_max: int


def entire_order_type(n_max=400, fit_from=None):
    """Order and type of F(z) = 1 + sum z^n/(n!)^2 from its coefficients.

    ``order_raw`` and ``type_raw`` are the limsup formulas
    ``n ln n / ln(1/|c_n|)`` and ``(e rho)^{-1} n |c_n|^{rho/n}`` at n = n_max;
    they approach their limits only like 1/ln n.  ``order`` and ``type``
    come from fitting ``ln(1/|c_n|)/(n ln n) = A + B/ln n + C/n`` over
    ``[fit_from, n_max]``, which removes those slow terms: order = 1/A and
    type = exp(-B order)/(e order).  ``type_at_half`` evaluates the type
    formula at order exactly 1/2.
    """
    if fit_from is None:
        fit_from = n_max // 2
    n = np.arange(2, n_max + 1, dtype=float)
    log_inv = 2.0 * special.gammaln(n + 1.0)  # ln(1/c_n)
    order_raw = float(n[-1] * math.log(n[-1]) / log_inv[-1])
    type_raw = float(n[-1] * math.exp(-order_raw * log_inv[-1] / n[-1]) / (math.e * order_raw))
    sel = n >= fit_from
    y = log_inv[sel] / (n[sel] * np.log(n[sel]))
    X = np.column_stack([np.ones(sel.sum()), 1.0 / np.log(n[sel]), 1.0 / n[sel]])
    A, B, _ = np.linalg.lstsq(X, y, rcond=None)[0]
    order = 1.0 / A
    typ = math.exp(-B * order) / (math.e * order)
    type_half = float(n[-1] * math.exp(-0.5 * log_inv[-1] / n[-1]) / (math.e * 0.5))
    return OrderType(order_raw, type_raw, float(order), float(typ), type_half, int(n_max))


# -- completeness of Legendre projections ---------------------------------

@dataclass(frozen=True)
class CompletenessVerdict:
    projections: np.ndarray
    tolerance: float

    @property
    def consistent_with_zero(self):
        return bool(np.all(np.abs(self.projections) < self.tolerance))

    @property
    def verdict(self):
        return "consistent with zero" if self.consistent_with_zero else "nonzero"


def legendre_completeness_check(f_samples, A_value, r, degree=12, tol=1e-8, nodes=64):
    """Project M(t) = int_0^r rho f(rho) e^{i rho t} d rho + r A e^{i r t} onto P_0..P_degree.

    ``f_samples`` is a pair (rho, f) sampled on (0, r]; the rho integral uses
    the trapezoid rule on the samples, the t integral Gauss-Legendre.
    Projections are int_{-1}^{1} M(t) P_n(t) dt.
    """
    rho, f = (np.asarray(x, dtype=float) for x in f_samples)
    t, w = np.polynomial.legendre.leggauss(nodes)
    if rho.size:
        integrand = (rho * f)[None, :] * np.exp(1j * rho[None, :] * t[:, None])
        m = integrate.trapezoid(integrand, rho, axis=1) if rho.size > 1 else np.zeros(len(t), complex)
    else:
        m = np.zeros(len(t), complex)
    m = m + r * A_value * np.exp(1j * r * t)
    P = specfun.legendre_table(degree, t)
    proj = P @ (w * m)
    return CompletenessVerdict(proj, tol)


# -- export ------------------------------------------------------------------

def kernel_csv(kg):
    """CSV text with columns xi, eta, L and '#' metadata lines."""
    buf = io.StringIO()
    meta = {
        "potential": kg.meta.get("potential"),
        "xi_min": kg.xi_min, "xi_max": kg.xi_max, "eta_max": kg.eta_max,
        "h_xi": kg.h, "h_eta": kg.h, "n_xi": len(kg.xi), "n_eta": len(kg.eta),
        "gamma": kg.gamma, "c": kg.c, "convergence_delta": kg.convergence_delta,
    }
    for k, v in meta.items():
        buf.write(f"# {k}: {v:.17g}\n" if isinstance(v, float) else f"# {k}: {v}\n")
    buf.write("xi,eta,L\n")
    mask = kg.mask
    for i in range(len(kg.xi)):
        for j in range(len(kg.eta)):
            if mask[i, j]:
                buf.write(f"{kg.xi[i]:.17g},{kg.eta[j]:.17g},{kg.L[i, j]:.17g}\n")
    return buf.getvalue()
