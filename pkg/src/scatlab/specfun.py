"""Special functions at wavenumber k = 1.

Riccati-Bessel functions ``u_l(r) = sqrt(pi r / 2) J_{l+1/2}(r)`` and their
irregular companions ``v_l(r) = sqrt(pi r / 2) Y_{l+1/2}(r)``, complex
log-Gamma, Legendre polynomials and the large-l form of ``u_l``.

Large angular momenta push ``u_l`` below the smallest double and ``v_l``
above the largest one, so the workhorse routines return values in log form:
a pair ``(log|x|, sign(x))``.  The plain-float wrappers exponentiate and
report underflow through :class:`~scatlab.errors.UnderflowWarning`.
"""
import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import DomainError, UnderflowWarning

LOG_TINY = math.log(np.finfo(float).tiny)
_RESCALE = 1e200
_LOG_RESCALE = math.log(_RESCALE)


class LogValue(NamedTuple):
    """A real number (or array) stored as ``sign * exp(log)``."""

    log: np.ndarray
    sign: np.ndarray

    def value(self):
        return _exp_checked(self.log, self.sign)


class RiccatiLog(NamedTuple):
    """u_l, u_l', v_l, v_l' at the same radii, each in log form."""

    u: LogValue
    du: LogValue
    v: LogValue
    dv: LogValue


def _exp_checked(log, sign):
    log = np.asarray(log, dtype=float)
    sign = np.asarray(sign, dtype=float)
    under = (log < LOG_TINY) & (sign != 0)
    if np.any(under):
        warnings.warn("value underflows double precision; returned as 0",
                      UnderflowWarning, stacklevel=3)
    with np.errstate(under="ignore", over="ignore"):
        out = sign * np.exp(np.where(under, -np.inf, log))
    return out[()] if out.ndim == 0 else out


def _as_radii(r):
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise DomainError("radius must be finite and positive")
    return r


def _check_ell(ell):
    if int(ell) != ell or ell < 0:
        raise DomainError(f"angular index must be a non-negative integer, got {ell!r}")
    return int(ell)


def log_double_factorial(n):
    """log(n!!) for odd n >= -1."""
    n = int(n)
    if n < -1 or n % 2 == 0:
        raise DomainError("log_double_factorial expects an odd integer >= -1")
    if n <= 1:
        return 0.0
    m = (n - 1) // 2  # n = 2m + 1
    return math.lgamma(2 * m + 2) - m * math.log(2.0) - math.lgamma(m + 1)


def _log_combine(la, sa, lb, sb):
    """log form of sa*exp(la) + sb*exp(lb), elementwise."""
    m = np.maximum(la, lb)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(under="ignore"):
        s = sa * np.exp(la - m) + sb * np.exp(lb - m)
    with np.errstate(divide="ignore"):
        return m + np.log(np.abs(s)), np.sign(s)


def _series_u(ell, r):
    """Power series of u_l and u_l' (log form); accurate while r*r <= 2l+3."""
    x = -0.5 * r * r
    term = np.ones_like(r)
    s = np.ones_like(r)
    ds = np.full_like(r, ell + 1.0)
    for k in range(1, 80):
        term = term * x / (k * (2 * ell + 2 * k + 1))
        s = s + term
        ds = ds + (ell + 1 + 2 * k) * term
        if np.all(np.abs(term) <= 1e-18 * np.abs(s)):
            break
    ldf = log_double_factorial(2 * ell + 1)
    lr = np.log(r)
    lu = (ell + 1) * lr - ldf + np.log(np.abs(s))
    ldu = ell * lr - ldf + np.log(np.abs(ds))
    return LogValue(lu, np.sign(s)), LogValue(ldu, np.sign(ds))


def _miller_u(ell, r):
    """u_l and u_l' by backward recursion, normalised to u_0 or u_1."""
    rmax = float(np.max(r))
    start = int(max(ell, rmax) + 30 + 6 * rmax ** (1.0 / 3.0))
    nxt = np.zeros_like(r)
    cur = np.full_like(r, 1e-30)
    scale = np.zeros_like(r)
    keep_u = keep_um1 = keep_scale = None
    u0 = u1 = None
    for k in range(start, 0, -1):
        prev = (2 * k + 1) / r * cur - nxt  # u_{k-1}
        nxt, cur = cur, prev
        # cur = u_{k-1}, nxt = u_k
        if k == ell:
            keep_u = nxt.copy()
            keep_um1 = cur.copy()
            keep_scale = scale.copy()
        if k == 1:
            u1 = nxt.copy()
            u0 = cur.copy()
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            cur = np.where(big, cur / _RESCALE, cur)
            nxt = np.where(big, nxt / _RESCALE, nxt)
            scale = scale + np.where(big, _LOG_RESCALE, 0.0)
    if ell == 0:
        keep_u = u0
        keep_um1 = None
        keep_scale = scale.copy()
    # normalise against whichever of u_0 = sin r, u_1 = sin r / r - cos r is larger
    t0 = np.sin(r)
    t1 = np.sin(r) / r - np.cos(r)
    use0 = np.abs(t0) >= np.abs(t1)
    ref_true = np.where(use0, t0, t1)
    ref_comp = np.where(use0, u0, u1)
    lnorm = np.log(np.abs(ref_true)) - np.log(np.abs(ref_comp)) - scale
    snorm = np.sign(ref_true) * np.sign(ref_comp)
    lu = np.log(np.abs(keep_u)) + keep_scale + lnorm
    su = np.sign(keep_u) * snorm
    if ell == 0:
        return LogValue(lu, su), LogValue(np.log(np.abs(np.cos(r))), np.sign(np.cos(r)))
    d = keep_um1 - ell / r * keep_u
    ldu = np.log(np.abs(d)) + keep_scale + lnorm
    return LogValue(lu, su), LogValue(ldu, np.sign(d) * snorm)


def _forward_v(ell, r):
    """v_l and v_l' by upward recursion (stable for the irregular solution)."""
    vm1 = -np.cos(r)  # v_0
    v = -np.cos(r) / r - np.sin(r)  # v_1
    scale = np.zeros_like(r)
    if ell == 0:
        return (LogValue(np.log(np.abs(vm1)), np.sign(vm1)),
                LogValue(np.log(np.abs(np.sin(r))), np.sign(np.sin(r))))
    for k in range(1, ell):
        vm1, v = v, (2 * k + 1) / r * v - vm1
        big = np.abs(v) > _RESCALE
        if np.any(big):
            v = np.where(big, v / _RESCALE, v)
            vm1 = np.where(big, vm1 / _RESCALE, vm1)
            scale = scale + np.where(big, _LOG_RESCALE, 0.0)
    d = vm1 - ell / r * v
    with np.errstate(divide="ignore"):
        return (LogValue(np.log(np.abs(v)) + scale, np.sign(v)),
                LogValue(np.log(np.abs(d)) + scale, np.sign(d)))


def riccati_log(ell, r):
    """u_l, u_l', v_l, v_l' at radii ``r`` in log form.

    Series for ``r*r <= 2l+3`` (no cancellation there), Miller's backward
    recursion otherwise, upward recursion for the irregular pair.
    """
    ell = _check_ell(ell)
    r = np.atleast_1d(_as_radii(r)).astype(float)
    lu = np.empty_like(r)
    su = np.empty_like(r)
    ldu = np.empty_like(r)
    sdu = np.empty_like(r)
    small = r * r <= 2 * ell + 3
    if np.any(small):
        u, du = _series_u(ell, r[small])
        lu[small], su[small] = u
        ldu[small], sdu[small] = du
    if np.any(~small):
        u, du = _miller_u(ell, r[~small])
        lu[~small], su[~small] = u
        ldu[~small], sdu[~small] = du
    v, dv = _forward_v(ell, r)
    return RiccatiLog(LogValue(lu, su), LogValue(ldu, sdu), v, dv)


def _squeeze(x, like):
    return x[0] if np.ndim(like) == 0 else x


def riccati_bessel(ell, r):
    """u_l(r) = sqrt(pi r/2) J_{l+1/2}(r) for integer l >= 0 and r > 0."""
    u = riccati_log(ell, r).u
    return _squeeze(np.atleast_1d(u.value()), r)


def riccati_bessel_prime(ell, r):
    """Derivative u_l'(r)."""
    du = riccati_log(ell, r).du
    return _squeeze(np.atleast_1d(du.value()), r)


def riccati_neumann(ell, r):
    """v_l(r) = sqrt(pi r/2) Y_{l+1/2}(r); v_0 = -cos r."""
    v = riccati_log(ell, r).v
    return _squeeze(np.atleast_1d(v.value()), r)


def riccati_neumann_prime(ell, r):
    """Derivative v_l'(r)."""
    dv = riccati_log(ell, r).dv
    return _squeeze(np.atleast_1d(dv.value()), r)


def riccati_bessel_log(ell, r):
    """log|u_l(r)| and its sign."""
    return riccati_log(ell, r).u


def log_gamma_complex(z):
    """Principal branch of log Gamma(z) for Re z > 0 (scipy's loggamma)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0) or np.any(~np.isfinite(z)):
        raise DomainError("log_gamma_complex requires Re z > 0")
    out = special.loggamma(z)
    return out[()] if out.ndim == 0 else out


def legendre_table(lmax, t):
    """P_0..P_lmax at points ``t`` (shape (lmax+1,) + t.shape)."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise DomainError("Legendre argument must satisfy |t| <= 1")
    out = np.empty((lmax + 1,) + t.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = t
    for n in range(1, lmax):
        out[n + 1] = ((2 * n + 1) * t * out[n] - n * out[n - 1]) / (n + 1)
    return out


def legendre_poly(ell, t):
    """P_l(t) by the three-term recurrence."""
    ell = _check_ell(ell)
    return legendre_table(ell, t)[ell][()]


def u_asymptotic_log(ell, r):
    """log of sqrt(r/2) (e r/(2l+1))^{(2l+1)/2} / sqrt(2l+1)."""
    r = _as_radii(r)
    m = 2.0 * ell + 1.0
    return 0.5 * np.log(r / 2.0) + 0.5 * m * (1.0 + np.log(r) - math.log(m)) - 0.5 * math.log(m)


def u_asymptotic(ell, r):
    """Leading large-l form of u_l(r); 0 (with a warning) if it underflows."""
    ell = _check_ell(ell)
    if ell < 1:
        raise DomainError("u_asymptotic is defined for l >= 1")
    lg = u_asymptotic_log(ell, r)
    return _exp_checked(lg, np.ones_like(lg))
