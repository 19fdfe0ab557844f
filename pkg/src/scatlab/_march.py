"""Hot loops for the Volterra equation on the (xi, eta) grid.

Grid conventions shared by every routine here:

* nodes ``(i, j)`` with ``xi_i = xi_min + i h`` and ``eta_j = j h``;
* node ``(i, j)`` belongs to the domain iff ``i + j <= dmax``;
* the kernel at a node is ``A[d] + bscale * exi[i] * emeta[j]`` where
  ``d = i + j``; the part that depends on ``xi + eta`` only (``A``) is
  supplied per diagonal and per corner role, so cells crossed by a jump of
  the potential can carry split-cell weights.  ``At[d]``, ``Am[d]`` and
  ``Ab[d]`` are the values for the top, the two middle and the bottom
  corner of a cell whose top corner lies on diagonal ``d``.

The cumulative integral ``I(i, j) = int_{xi_min}^{xi_i} int_0^{eta_j} K f``
is assembled cell by cell with the product trapezoid rule (weight
``c = h^2 / 4`` per corner).  ``march`` solves ``L = b - I[L]`` node by node;
``apply`` evaluates ``I[f]`` for a given ``f``.

Where q jumps, ``b`` has a kink across a whole column of cells.  Linear
interpolation of ``b`` there is off by O(h) on an O(1)-long line, which
would leave an irregular O(h^2) error that extrapolation cannot remove.
The caller therefore supplies, for each kink column ``k``, the correction
``corr_k(j) = int int_{cells (ik, 1..j)} Q (b - b_linear)``; it enters as
``I(i, j) += sum_{ik <= i} corr_k(j)``.

Each routine has a numba kernel and a pure-numpy twin.  The numpy march
sweeps anti-diagonals, since every node on diagonal ``d`` depends only on
diagonals ``d-1`` and ``d-2``.
"""
import numpy as np

from ._accel import njit, numba_enabled


@njit
def _march_nb(b, exi, emeta, At, Am, Ab, bscale, c, dmax, stride, kcol, kcorr):
    n = b.shape[0]
    m = emeta.shape[0]
    nc = (n - 1) // stride + 1
    mc = (m - 1) // stride + 1
    out = np.full((nc, mc), np.nan)
    i_prev = np.zeros(m)
    l_prev = np.zeros(m)
    i_cur = np.zeros(m)
    l_cur = np.zeros(m)
    for i in range(n):
        jmax = min(m - 1, dmax - i)
        for j in range(jmax + 1):
            if i == 0 or j == 0:
                l_cur[j] = b[i]
                i_cur[j] = 0.0
                continue
            d = i + j
            kt = At[d] + bscale * exi[i] * emeta[j]
            kmu = Am[d] + bscale * exi[i - 1] * emeta[j]
            kml = Am[d] + bscale * exi[i] * emeta[j - 1]
            kb = Ab[d] + bscale * exi[i - 1] * emeta[j - 1]
            known = (i_prev[j] + i_cur[j - 1] - i_prev[j - 1]
                     + c * (kb * l_prev[j - 1] + kmu * l_prev[j] + kml * l_cur[j - 1]))
            src = b[i]
            for k in range(kcol.shape[0]):
                if kcol[k] <= i:
                    src -= kcorr[k, j]
            lv = (src - known) / (1.0 + c * kt)
            l_cur[j] = lv
            i_cur[j] = known + c * kt * lv
        if i % stride == 0:
            ic = i // stride
            for jc in range(mc):
                j = jc * stride
                if j <= jmax:
                    out[ic, jc] = l_cur[j]
        for j in range(m):
            i_prev[j] = i_cur[j]
            l_prev[j] = l_cur[j]
            i_cur[j] = 0.0
            l_cur[j] = 0.0
    return out


def _march_np(b, exi, emeta, At, Am, Ab, bscale, c, dmax, stride, kcol, kcorr):
    n = b.shape[0]
    m = emeta.shape[0]
    out = np.full(((n - 1) // stride + 1, (m - 1) // stride + 1), np.nan)
    # diagonal buffers indexed by i; entries outside a diagonal stay 0
    l2 = np.zeros(n)
    i2 = np.zeros(n)
    l1 = np.zeros(n)
    i1 = np.zeros(n)
    for d in range(min(dmax, n - 1 + m - 1) + 1):
        lo = max(0, d - (m - 1))
        hi = min(n - 1, d)
        idx = np.arange(lo, hi + 1)
        j = d - idx
        l0 = np.zeros(n)
        i0 = np.zeros(n)
        edge = (idx == 0) | (j == 0)
        l0[idx[edge]] = b[idx[edge]]
        ii = idx[~edge]
        if ii.size:
            jj = d - ii
            kt = At[d] + bscale * exi[ii] * emeta[jj]
            kmu = Am[d] + bscale * exi[ii - 1] * emeta[jj]
            kml = Am[d] + bscale * exi[ii] * emeta[jj - 1]
            kb = Ab[d] + bscale * exi[ii - 1] * emeta[jj - 1]
            # (i-1, j) and (i, j-1) lie on d-1; (i-1, j-1) on d-2
            known = (i1[ii - 1] + i1[ii] - i2[ii - 1]
                     + c * (kb * l2[ii - 1] + kmu * l1[ii - 1] + kml * l1[ii]))
            src = b[ii].copy()
            for k in range(kcol.shape[0]):
                src -= np.where(kcol[k] <= ii, kcorr[k, jj], 0.0)
            lv = (src - known) / (1.0 + c * kt)
            l0[ii] = lv
            i0[ii] = known + c * kt * lv
        keep = (idx % stride == 0) & (j % stride == 0)
        out[idx[keep] // stride, j[keep] // stride] = l0[idx[keep]]
        l2, i2, l1, i1 = l1, i1, l0, i0
    return out


@njit
def _apply_nb(f, exi, emeta, At, Am, Ab, bscale, c, dmax):
    n, m = f.shape
    out = np.full((n, m), np.nan)
    for i in range(n):
        jmax = min(m - 1, dmax - i)
        for j in range(jmax + 1):
            if i == 0 or j == 0:
                out[i, j] = 0.0
                continue
            d = i + j
            kt = At[d] + bscale * exi[i] * emeta[j]
            kmu = Am[d] + bscale * exi[i - 1] * emeta[j]
            kml = Am[d] + bscale * exi[i] * emeta[j - 1]
            kb = Ab[d] + bscale * exi[i - 1] * emeta[j - 1]
            out[i, j] = (out[i - 1, j] + out[i, j - 1] - out[i - 1, j - 1]
                         + c * (kb * f[i - 1, j - 1] + kmu * f[i - 1, j]
                                + kml * f[i, j - 1] + kt * f[i, j]))
    return out


def _apply_np(f, exi, emeta, At, Am, Ab, bscale, c, dmax):
    n, m = f.shape
    ii = np.arange(1, n)[:, None]
    jj = np.arange(1, m)[None, :]
    d = ii + jj
    dd = np.minimum(d, len(At) - 1)
    fz = np.nan_to_num(f)
    cell = c * ((Ab[dd] + bscale * exi[ii - 1] * emeta[jj - 1]) * fz[:-1, :-1]
                + (Am[dd] + bscale * exi[ii - 1] * emeta[jj]) * fz[:-1, 1:]
                + (Am[dd] + bscale * exi[ii] * emeta[jj - 1]) * fz[1:, :-1]
                + (At[dd] + bscale * exi[ii] * emeta[jj]) * fz[1:, 1:])
    cell = np.where(d <= dmax, cell, 0.0)
    out = np.zeros((n, m))
    out[1:, 1:] = np.cumsum(np.cumsum(cell, axis=0), axis=1)
    i_all = np.arange(n)[:, None]
    j_all = np.arange(m)[None, :]
    return np.where(i_all + j_all <= dmax, out, np.nan)


def _kinks(kink, m):
    if kink is None:
        return np.zeros(0, dtype=np.int64), np.zeros((0, m))
    kcol, kcorr = kink
    return (np.ascontiguousarray(kcol, dtype=np.int64),
            np.ascontiguousarray(np.reshape(kcorr, (len(kcol), m)), dtype=float))


def march(b, exi, emeta, At, Am, Ab, bscale, c, dmax, stride=1, backend=None, kink=None):
    """Solve L = b - I[L]; returns L on every ``stride``-th row and column."""
    kcol, kcorr = _kinks(kink, len(emeta))
    args = (np.ascontiguousarray(b, float), np.ascontiguousarray(exi, float),
            np.ascontiguousarray(emeta, float), np.ascontiguousarray(At, float),
            np.ascontiguousarray(Am, float), np.ascontiguousarray(Ab, float),
            float(bscale), float(c), int(dmax), int(stride), kcol, kcorr)
    if _use_numba(backend):
        return _march_nb(*args)
    return _march_np(*args)


def apply(f, exi, emeta, At, Am, Ab, bscale, c, dmax, backend=None, kink=None):
    """Cumulative product-trapezoid integral I[f] on the full grid.

    ``kink`` adds the column corrections described in the module docstring
    (valid when ``f`` contains ``b`` with coefficient one).
    """
    out = _apply_raw(f, exi, emeta, At, Am, Ab, bscale, c, dmax, backend)
    kcol, kcorr = _kinks(kink, len(emeta))
    for k in range(len(kcol)):
        out[kcol[k]:, :] += kcorr[k][None, :]
    return out


def _apply_raw(f, exi, emeta, At, Am, Ab, bscale, c, dmax, backend):
    args = (np.ascontiguousarray(f, float), np.ascontiguousarray(exi, float),
            np.ascontiguousarray(emeta, float), np.ascontiguousarray(At, float),
            np.ascontiguousarray(Am, float), np.ascontiguousarray(Ab, float),
            float(bscale), float(c), int(dmax))
    if _use_numba(backend):
        return _apply_nb(*args)
    return _apply_np(*args)


def _use_numba(backend):
    if backend is None:
        return numba_enabled()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend == "numba" and numba_enabled()


# -- split-cell weights ---------------------------------------------------
#
# For a cell with local coordinates x, y in [0, 1] and a jump of the
# potential along x + y = u, these are the integrals over the part x + y < u
# of the bilinear corner functions (1-x)(1-y), x(1-y) and xy.  The part on
# the other side gets 1/4 minus these.

def split_weights(u):
    """(bottom, middle, top) weights of the region x + y < u, 0 <= u <= 2."""
    u = float(u)
    if u <= 0.0:
        return 0.0, 0.0, 0.0
    if u >= 2.0:
        return 0.25, 0.25, 0.25
    if u <= 1.0:
        return (u * u * (u - 6.0) * (u - 2.0) / 24.0,
                -u ** 3 * (u - 4.0) / 24.0,
                u ** 4 / 24.0)
    return (-u ** 4 / 24.0 + u ** 3 / 3.0 - u * u + 4.0 * u / 3.0 - 5.0 / 12.0,
            u ** 4 / 24.0 - u ** 3 / 6.0 + 2.0 * u / 3.0 - 5.0 / 12.0,
            -u ** 4 / 24.0 + u * u / 2.0 - 2.0 * u / 3.0 + 0.25)
