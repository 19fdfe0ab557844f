"""Regenerate tests/oracles/oracles.json from independent high-precision formulas.

Nothing here imports scatlab: every value comes from mpmath (Bessel
functions, quadrature, closed-form matching) at 40 significant digits.

    python tests/oracles/make_oracles.py
"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40
HERE = Path(__file__).resolve().parent


def _series_int_u_squared(ell, lo, hi, terms):
    a = [1 / (mp.factorial(k) * mp.gamma(k + ell + mp.mpf(3) / 2)) for k in range(terms)]
    tot = 0
    for n in range(terms):
        c = sum(a[j] * a[n - j] for j in range(n + 1)) * (-mp.mpf(1) / 4) ** n
        m = 2 * ell + 3 + 2 * n
        tot += c * (mp.power(hi, m) - (mp.power(lo, m) if lo > 0 else 0)) / m
    return mp.pi / 4 ** (ell + 1) * tot


def int_u_squared(ell, lo, hi, terms=80):
    """int_lo^hi u_l(r)^2 dr, term by term from the power series of J_{l+1/2}.

    u_l(r) = sqrt(pi) (r/2)^{l+1} sum_k (-r^2/4)^k / (k! Gamma(k + l + 3/2)),
    so u_l^2 is a power series in r whose integral is exact; valid for
    complex l with Re l > -1.  Truncation is checked by comparing with a
    60-term sum (1e-30 relative), and the whole value against subdivided
    Gauss-Legendre quadrature of the Bessel form (1e-11 relative; plain
    quadrature of u_l^2 is the less accurate side at large l).
    """
    ell = mp.mpmathify(ell)
    val = _series_int_u_squared(ell, lo, hi, terms)
    short = _series_int_u_squared(ell, lo, hi, 60)
    assert abs(val - short) <= mp.mpf("1e-30") * abs(val), (val, short)
    check = mp.quad(lambda r: (mp.sqrt(mp.pi * r / 2) * mp.besselj(ell + mp.mpf(1) / 2, r)) ** 2,
                    mp.linspace(lo, hi, 33), method="gauss-legendre", maxdegree=10)
    assert abs(val - check) <= 1e-11 * abs(val), (val, check)
    return val


def u(ell, r):
    r = mp.mpf(r)
    return mp.sqrt(mp.pi * r / 2) * mp.besselj(ell + mp.mpf(1) / 2, r)


def v(ell, r):
    r = mp.mpf(r)
    return mp.sqrt(mp.pi * r / 2) * mp.bessely(ell + mp.mpf(1) / 2, r)


def du(ell, r):
    return mp.diff(lambda x: u(ell, x), r)


def dv(ell, r):
    return mp.diff(lambda x: v(ell, x), r)


def square_well_delta(q0, ell, a=1):
    """Exact phase shift of q0 on [0, a] at k = 1, reduced to [-pi, pi).

    Inside phi is proportional to u_l(kappa r), kappa = sqrt(1 - q0); with
    beta its logarithmic derivative at a, phi = cos(d) u - sin(d) v outside
    gives tan(d) = (u' - beta u) / (v' - beta v) at a.  The branch is fixed
    by continuity in the depth from the free case (delta = 0).
    """
    a = mp.mpf(a)

    def raw(qq):
        kappa = mp.sqrt(1 - mp.mpf(qq))
        beta = kappa * mp.diff(lambda x: u(ell, x), kappa * a) / u(ell, kappa * a)
        return mp.atan((du(ell, a) - beta * u(ell, a)) / (dv(ell, a) - beta * v(ell, a)))

    # follow the branch from qq = 0 to q0 in small steps
    steps = 200
    d = mp.mpf(0)
    for k in range(1, steps + 1):
        t = raw(mp.mpf(q0) * k / steps)
        t += mp.pi * mp.nint((d - t) / mp.pi)
        d = t
    d = (d + mp.pi) % (2 * mp.pi) - mp.pi
    return d


def born(q0, ell, a=1):
    return -mp.mpf(q0) * int_u_squared(ell, 0, mp.mpf(a))


def H_exact(pieces, ell):
    """H(l) = G(l)^2 int p u_l^2 for piecewise-constant p, complex l."""
    ell = mp.mpc(ell)
    G = 2 ** (ell + 1) * mp.gamma(ell + 1)

    tot = 0
    for lo, hi, val in pieces:
        tot += val * int_u_squared(ell, lo, hi)
    return G ** 2 * tot


def h0_bump_log(ell):
    """log of int_{0.5}^{1} u_l^2 dr for the unit bump."""
    return mp.log(int_u_squared(ell, mp.mpf(0.5), mp.mpf(1)))


def main():
    out = {}
    out["u2_at_0.01"] = float(u(2, mp.mpf("0.01")))
    out["u_asym_1_1"] = float(mp.sqrt(mp.mpf(1) / 2) * (mp.e / 3) ** mp.mpf(1.5) / mp.sqrt(3))
    out["v1_at_20"] = float(v(1, 20))
    out["square_well_delta0"] = {str(q0): float(square_well_delta(q0, 0)) for q0 in (-1, -0.5, 0.5)}
    out["square_well_minus1"] = {str(l): float(square_well_delta(-1, l)) for l in range(0, 6)}
    out["weak"] = {}
    for q0 in (0.01, -0.01):
        out["weak"][str(q0)] = {str(l): {"exact": float(square_well_delta(q0, l)),
                                        "born": float(born(q0, l))} for l in range(3)}
    # p = square_well - two_step: -1 - (-2) on [0, 0.6), -1 - 0.7 on [0.6, 1]
    pieces = [(0, mp.mpf("0.6"), 1), (mp.mpf("0.6"), 1, mp.mpf("-1.7"))]
    pts = [0.5, 1 + 2j, 3 - 4j, 2.5 + 0.5j, 5 + 5j]
    out["H_square_minus_two_step"] = [[p.real, p.imag, float(mp.re(H_exact(pieces, p))),
                                       float(mp.im(H_exact(pieces, p)))] for p in map(complex, pts)]
    out["h0_bump_log"] = {str(l): float(h0_bump_log(l)) for l in (30, 40, 60)}
    (HERE / "oracles.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
