"""Regular radial solutions, phase shifts and partial-wave amplitudes (k = 1).

The regular solution of ``phi'' + phi - l(l+1) phi / r^2 - q phi = 0`` with
``phi ~ r^{l+1} / (2l+1)!!`` is integrated through the scaled variable
``w = phi / f`` with ``f = r^{l+1} / (2l+1)!!`` and ``t = ln r``:

    w_tt + (2l+1) w_t = r^2 (q - 1) w.

``w`` stays of order one even when ``phi`` itself is far below the
smallest double, so large angular momenta need no special handling.  The
phase shift comes from matching to the free pair ``(u_l, v_l)`` at
``r = a``, where the potential has already ended; with the Wronskian
``u v' - u' v = 1`` this gives

    |F| sin(delta) = phi u' - phi' u,     |F| cos(delta) = phi v' - phi' v.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import specfun
from .errors import DomainError, NonConvergenceError

RTOL = 1e-12
ATOL = 1e-14
MAX_ELL = 200


@dataclass(frozen=True)
class RadialSolution:
    ell: int
    grid: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    delta: float
    jost_magnitude: float
    # log|F sin(delta)| and its sign; survives when delta underflows.
    log_f_sin: float = field(default=-math.inf, repr=False)
    sign_f_sin: float = field(default=0.0, repr=False)
    # phi = exp(log_f) * w and phi' = exp(log_f) * w_prime_scaled: usable
    # when phi itself under- or overflows
    w: np.ndarray = field(default=None, repr=False)
    w_prime_scaled: np.ndarray = field(default=None, repr=False)
    log_f: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class PhaseShiftTable:
    potential_id: str
    entries: tuple  # ((ell, delta, jost_magnitude), ...)

    def __post_init__(self):
        ells = [e[0] for e in self.entries]
        if ells != sorted(set(ells)):
            raise ValueError("phase-shift entries must be sorted with one entry per ell")

    @property
    def ells(self):
        return np.array([e[0] for e in self.entries], dtype=int)

    @property
    def deltas(self):
        return np.array([e[1] for e in self.entries], dtype=float)

    def delta(self, ell):
        for e in self.entries:
            if e[0] == ell:
                return e[1]
        raise KeyError(ell)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ell", "delta", "jost_magnitude"])
        for ell, d, f in self.entries:
            w.writerow([ell, f"{d:.17g}", f"{f:.17g}"])
        return buf.getvalue()


def _first_piece(q):
    """(alpha, beta, end) with q = alpha + beta r on [0, end)."""
    lo, hi, vlo, vhi = q.segments
    if len(lo) == 0:
        return 0.0, 0.0, q.a
    if lo[0] > 0:
        return 0.0, 0.0, float(lo[0])
    beta = (vhi[0] - vlo[0]) / (hi[0] - lo[0])
    return float(vlo[0]), float(beta), float(hi[0])


def _frobenius(ell, alpha, beta, r, nterms=60):
    """w(r) and r w'(r) from the series w = sum c_n r^n, c_0 = 1."""
    c = [1.0, 0.0, 0.0]
    w = 1.0
    wt = 0.0
    rn = 1.0
    for n in range(1, nterms):
        cm2 = c[n - 2] if n >= 2 else 0.0
        cm3 = c[n - 3] if n >= 3 else 0.0
        cn = ((alpha - 1.0) * cm2 + beta * cm3) / (n * (n + 2 * ell + 1))
        if n < len(c):
            c[n] = cn
        else:
            c.append(cn)
        rn *= r
        term = cn * rn
        w += term
        wt += n * term
        if n > 4 and abs(term) < 1e-18 * abs(w) and abs(c[n - 1] * rn / r) < 1e-18 * abs(w):
            break
    return w, wt


def start_radius(q, ell):
    """Where integration begins; the series is used below it.

    Chosen so the first correction of the series, (1 - q) r^2 / (2(2l+3)),
    stays below 1e-7 there.
    """
    _, _, end = _first_piece(q)
    r0 = math.sqrt(2e-7 * (2 * ell + 3) / (1.0 + q.sup_abs()))
    return min(r0, 0.5 * end, 0.5 * q.a)


def _integrate(q, ell, r_eval, rtol, atol, scale):
    """w, w_t at the radii ``r_eval`` (sorted, >= start radius)."""
    alpha, beta, _ = _first_piece(q)
    r0 = start_radius(q, ell)
    w0, wt0 = _frobenius(ell, alpha, beta, r0)
    y = np.array([w0, wt0]) * scale
    m = 2 * ell + 1
    cuts = [c for c in q.breakpoints if c > r0]
    stops = sorted(set([r0] + cuts + [q.a]))
    t_eval = np.log(r_eval)
    out = np.empty((2, len(r_eval)))
    filled = np.zeros(len(r_eval), dtype=bool)

    for lo, hi in zip(stops[:-1], stops[1:]):
        # q is linear between consecutive stops
        q_lo = float(q.evaluate(lo, side="right"))
        q_hi = float(q.evaluate(hi, side="left"))
        slope = (q_hi - q_lo) / (hi - lo)

        def rhs(t, yy, lo=lo, hi=hi, q_lo=q_lo, slope=slope):
            r = math.exp(t)
            qq = q_lo + slope * (min(max(r, lo), hi) - lo)
            return (yy[1], r * r * (qq - 1.0) * yy[0] - m * yy[1])

        t0, t1 = math.log(lo), math.log(hi)
        sol = solve_ivp(rhs, (t0, t1), y, method="DOP853", rtol=rtol, atol=atol * abs(scale),
                        dense_output=True)
        if not sol.success:
            raise NonConvergenceError(f"radial integration failed for l={ell}: {sol.message}")
        y = sol.y[:, -1]
        if not np.all(np.isfinite(y)):
            raise NonConvergenceError(f"radial integration overflowed for l={ell}")
        sel = (t_eval >= t0 - 1e-15) & (t_eval <= t1 + 1e-15) & ~filled
        if np.any(sel):
            out[:, sel] = sol.sol(np.clip(t_eval[sel], t0, t1))
            filled |= sel
    return out / scale, y / scale, r0, (w0, wt0)


def _default_grid(q, r0, n):
    g = np.linspace(r0, q.a, n)
    return np.unique(np.concatenate([g, q.breakpoints[q.breakpoints > r0]]))


def _check_ell(ell):
    if int(ell) != ell or ell < 0:
        raise DomainError(f"angular index must be a non-negative integer, got {ell!r}")
    if ell > MAX_ELL:
        raise DomainError(f"angular index {ell} exceeds the supported maximum {MAX_ELL}")
    return int(ell)


def regular_solution(q, ell, grid=None, npoints=401, rtol=RTOL, atol=ATOL, scale=1.0):
    """phi_l and phi_l' on ``grid`` (default: ``npoints`` radii from the start radius to a).

    ``scale`` multiplies the internal variable; results do not depend on it
    beyond rounding.
    """
    ell = _check_ell(ell)
    r0 = start_radius(q, ell)
    if grid is None:
        grid = _default_grid(q, r0, npoints)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] <= 0 or grid[-1] > q.a * (1 + 1e-15):
        raise DomainError("grid must be strictly increasing radii in (0, a]")
    if q.is_zero():
        return _free_solution(q, ell, grid)
    alpha, beta, _ = _first_piece(q)
    below = grid < r0
    vals = np.empty((2, len(grid)))
    inner, end = _integrate(q, ell, grid[~below], rtol, atol, scale)[:2]
    vals[:, ~below] = inner
    for i in np.nonzero(below)[0]:
        vals[:, i] = _frobenius(ell, alpha, beta, grid[i])
    w, wt = vals
    logf = (ell + 1) * np.log(grid) - specfun.log_double_factorial(2 * ell + 1)
    with np.errstate(under="ignore"):
        f = np.exp(logf)
    phi = f * w
    dphi = f * ((ell + 1) * w + wt) / grid
    delta, jost, lfs, sfs = match_free(ell, q.a, *end)
    return RadialSolution(ell, grid, phi, dphi, delta, jost, lfs, sfs,
                          w=w, w_prime_scaled=((ell + 1) * w + wt) / grid, log_f=logf)


def _free_solution(q, ell, grid):
    """phi = u_l exactly, delta = 0, |F| = 1."""
    logf = (ell + 1) * np.log(grid) - specfun.log_double_factorial(2 * ell + 1)
    rl = specfun.riccati_log(ell, grid)
    with np.errstate(under="ignore", over="ignore"):
        w = rl.u.sign * np.exp(rl.u.log - logf)
        wp = rl.du.sign * np.exp(rl.du.log - logf)
        f = np.exp(logf)
    return RadialSolution(ell, grid, f * w, f * wp, 0.0, 1.0, -math.inf, 0.0,
                          w=w, w_prime_scaled=wp, log_f=logf)


def _match(q, ell, rtol, atol, scale):
    if q.is_zero():
        return 0.0, 1.0, -math.inf, 0.0
    a = q.a
    (w, wt), = [_integrate(q, ell, np.array([a]), rtol, atol, scale)[1]]
    return match_free(ell, a, w, wt)


def match_free(ell, a, w, wt):
    """Phase shift and |F| from the scaled values w(a), w_t(a)."""
    logf = (ell + 1) * math.log(a) - specfun.log_double_factorial(2 * ell + 1)
    fr = specfun.riccati_log(ell, a)
    w2 = ((ell + 1) * w + wt) / a  # phi' / f

    def combo(val, dval):
        # w * d - w2 * val with d, val in log form; result in log form
        lv, sv = float(val.log[0]), float(val.sign[0])
        ld, sd = float(dval.log[0]), float(dval.sign[0])
        m = max(lv, ld)
        s = w * sd * math.exp(ld - m) - w2 * sv * math.exp(lv - m)
        if s == 0.0:
            return -math.inf, 0.0
        return m + math.log(abs(s)), math.copysign(1.0, s)

    ls, ss = combo(fr.u, fr.du)
    lc, sc = combo(fr.v, fr.dv)
    m = max(ls, lc)
    ys = ss * math.exp(ls - m) if ss else 0.0
    xc = sc * math.exp(lc - m) if sc else 0.0
    delta = math.atan2(ys, xc)
    if delta >= math.pi:
        delta = -math.pi
    jost = math.exp(m + logf + 0.5 * math.log(ys * ys + xc * xc))
    if not math.isfinite(jost) or jost <= 0:
        raise NonConvergenceError(f"Jost magnitude not representable for l={ell}")
    return delta, jost, ls + logf, ss


def phase_shift(q, ell, rtol=RTOL, atol=ATOL):
    """(delta_l in [-pi, pi), |F_l|) from matching at r = a."""
    ell = _check_ell(ell)
    delta, jost, _, _ = _match(q, ell, rtol, atol, 1.0)
    return delta, jost


def phase_shift_table(q, lmax, potential_id=None, rtol=RTOL, atol=ATOL, executor=None):
    """Phase shifts for l = 0..lmax; ``executor`` (if given) maps over l."""
    ells = list(range(int(lmax) + 1))
    fn = lambda ell: phase_shift(q, ell, rtol, atol)
    results = list(executor.map(fn, ells)) if executor is not None else [fn(e) for e in ells]
    pid = potential_id or getattr(q, "name", None) or "potential"
    return PhaseShiftTable(pid, tuple((e, d, f) for e, (d, f) in zip(ells, results)))


def amplitude_coefficient(delta):
    """A_l = 4 pi e^{i delta} sin(delta)."""
    delta = np.asarray(delta, dtype=float)
    out = 4.0 * np.pi * np.exp(1j * delta) * np.sin(delta)
    return out[()] if out.ndim == 0 else out


def amplitude_coefficient_alt(delta):
    """The same coefficient written as 2 pi i (1 - e^{2 i delta})."""
    delta = np.asarray(delta, dtype=float)
    out = 2j * np.pi * (1.0 - np.exp(2j * delta))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Amplitude:
    value: complex
    tail_estimate: float


def partial_wave_amplitude(table, cos_theta, lmax):
    """Truncated sum of A_l (2l+1)/(4 pi) P_l(cos theta) over l <= lmax.

    The tail estimate extrapolates the last two term bounds
    ``(2l+1)|A_l|/(4 pi)`` geometrically (|P_l| <= 1).
    """
    lmax = int(lmax)
    have = set(int(e) for e in table.ells)
    missing = [l for l in range(lmax + 1) if l not in have]
    if missing:
        raise DomainError(f"phase-shift table incomplete below L_max: missing l = {missing[:5]}")
    deltas = np.array([table.delta(l) for l in range(lmax + 1)])
    coef = amplitude_coefficient(deltas) * (2 * np.arange(lmax + 1) + 1) / (4.0 * np.pi)
    p = specfun.legendre_table(lmax, float(cos_theta))
    value = complex(np.sum(coef * p))
    bounds = np.abs(coef)
    if lmax >= 1 and bounds[-2] > 0:
        rho = bounds[-1] / bounds[-2]
        tail = bounds[-1] * rho / (1 - rho) if rho < 1 else math.inf
    else:
        tail = float(bounds[-1])
    return Amplitude(value, float(tail))
