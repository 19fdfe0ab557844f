"""Compactly supported radial potentials and their differences.

Every potential is stored internally as a list of linear segments
``(lo, hi, v_lo, v_hi)`` covering ``[0, a]``; jumps sit between segments.
Piecewise-constant and sampled-table potentials are both special cases, and
so is the difference of two of them.  Segments are split at sign changes so
that ``|q|`` is linear on each one as well, which makes the moments
``int_0^r s q(s) ds`` and ``int_0^r s |q(s)| ds`` exact closed forms.

At a jump, point evaluation returns the left limit.  Integrals never see
the convention because they are taken segment by segment.
"""
import json
import math

import numpy as np

from .errors import DomainError, PotentialParseError, PotentialValidationError

KINDS = ("zero", "piecewise", "table")


def _split_at_roots(segs):
    out = []
    for lo, hi, vlo, vhi in segs:
        m = lo + (hi - lo) * vlo / (vlo - vhi) if vlo * vhi < 0 else lo
        if lo < m < hi:
            out.append((lo, m, vlo, 0.0))
            out.append((m, hi, 0.0, vhi))
        else:
            out.append((lo, hi, vlo, vhi))
    return out


def _seg_moment(lo, vlo, hi, vhi, x0, x1):
    """int_{x0}^{x1} s q(s) ds with q linear through (lo,vlo), (hi,vhi)."""
    beta = (vhi - vlo) / (hi - lo)
    alpha = vlo - beta * lo
    return alpha * (x1 * x1 - x0 * x0) / 2.0 + beta * (x1 ** 3 - x0 ** 3) / 3.0


class _Segmented:
    """Shared machinery; subclasses fill ``self.a`` and call ``_build``."""

    def _build(self, segs):
        segs = [s for s in segs if s[1] > s[0]]
        segs = _split_at_roots(segs)
        arr = np.array(segs, dtype=float).reshape(-1, 4)
        self._lo, self._hi, self._vlo, self._vhi = arr.T.copy()
        for x in (self._lo, self._hi, self._vlo, self._vhi):
            x.setflags(write=False)
        m = np.array([_seg_moment(*s[[0, 2, 1, 3]], s[0], s[1]) for s in arr]) if len(arr) else np.zeros(0)
        self._cum = np.concatenate([[0.0], np.cumsum(m)])
        self._cum_abs = np.concatenate([[0.0], np.cumsum(np.abs(m))])

    # -- evaluation -----------------------------------------------------
    def evaluate(self, r, side="left"):
        """q(r); exactly 0 beyond ``a``.  ``side`` picks the limit at jumps."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(np.isnan(r)):
            raise DomainError("potential evaluated at a negative radius")
        hi = self._hi
        if len(hi) == 0:
            out = np.zeros_like(r)
            return out[()] if out.ndim == 0 else out
        k = np.searchsorted(hi, r, "left" if side == "left" else "right")
        if side != "left":
            # right limit: segment whose lo <= r < hi
            k = np.searchsorted(self._lo, r, "right") - 1
            k = np.clip(k, 0, len(hi) - 1)
            inside = (r >= self._lo[k]) & (r < hi[k])
        else:
            k = np.clip(k, 0, len(hi) - 1)
            # at the start of a piece preceded by a gap the left limit is 0
            inside = (r <= hi[k]) & ((r > self._lo[k]) | (r == 0.0)) & (r <= self.a)
        lo, h, vl, vh = self._lo[k], hi[k], self._vlo[k], self._vhi[k]
        val = vl + (vh - vl) * (r - lo) / (h - lo)
        out = np.where(inside, val, 0.0)
        return out[()] if out.ndim == 0 else out

    __call__ = evaluate

    @property
    def segments(self):
        """(lo, hi, v_lo, v_hi) arrays describing q on [0, a]."""
        return self._lo, self._hi, self._vlo, self._vhi

    @property
    def breakpoints(self):
        """Interior radii where q or q' may jump (sorted, excluding 0 and a)."""
        pts = np.unique(np.concatenate([self._lo, self._hi]))
        return pts[(pts > 0) & (pts < self.a)]

    @property
    def jumps(self):
        """Interior radii where q itself is discontinuous."""
        lo, hi, vlo, vhi = self.segments
        out = [hi[i] for i in range(len(hi) - 1)
               if hi[i] != lo[i + 1] or vhi[i] != vlo[i + 1]]
        if len(hi) and hi[-1] < self.a:
            out.append(hi[-1])
        if len(lo) and lo[0] > 0:
            out.append(lo[0])
        return np.array(sorted(set(out)), dtype=float)

    def is_zero(self):
        return not np.any(self._vlo) and not np.any(self._vhi)

    # -- moments --------------------------------------------------------
    def _moment(self, r, cum, absolute):
        r = np.clip(np.asarray(r, dtype=float), 0.0, self.a)
        if len(self._hi) == 0:
            out = np.zeros_like(r)
            return out[()] if out.ndim == 0 else out
        k = np.searchsorted(self._hi, r, "left")
        k = np.clip(k, 0, len(self._hi) - 1)
        lo, hi, vl, vh = self._lo[k], self._hi[k], self._vlo[k], self._vhi[k]
        x1 = np.clip(r, lo, hi)
        part = _seg_moment(lo, vl, hi, vh, lo, x1)
        if absolute:
            part = np.abs(part)
        out = cum[k] + np.where(r > lo, part, 0.0)
        return out[()] if out.ndim == 0 else out

    def moment(self, r):
        """int_0^r s q(s) ds (exact)."""
        return self._moment(r, self._cum, False)

    def abs_moment(self, r):
        """int_0^r s |q(s)| ds (exact)."""
        return self._moment(r, self._cum_abs, True)

    def first_moment(self):
        """int_0^a r |q(r)| dr."""
        return float(self._cum_abs[-1])

    def sup_abs(self):
        if len(self._vlo) == 0:
            return 0.0
        return float(max(np.max(np.abs(self._vlo)), np.max(np.abs(self._vhi))))


class Potential(_Segmented):
    """A real radial potential vanishing for r > a.

    Build with :meth:`zero`, :meth:`piecewise` or :meth:`table`, or from a
    JSON document with :func:`load_potential`.
    """

    def __init__(self, kind, a, pieces=None, samples=None, name=None):
        if kind not in KINDS:
            raise PotentialValidationError(f"unknown kind {kind!r}; expected one of {KINDS}")
        a = _positive(a, "a")
        self.kind = kind
        self.a = a
        self.name = name
        self.pieces = None
        self.samples = None
        if kind == "zero":
            segs = []
        elif kind == "piecewise":
            self.pieces = _check_pieces(pieces, a)
            segs = [(lo, hi, v, v) for lo, hi, v in self.pieces]
        else:
            self.samples = _check_samples(samples, a)
            segs = [(self.samples[i][0], self.samples[i + 1][0],
                     self.samples[i][1], self.samples[i + 1][1])
                    for i in range(len(self.samples) - 1)]
        self._build(segs)

    @classmethod
    def zero(cls, a=1.0, name=None):
        return cls("zero", a, name=name)

    @classmethod
    def piecewise(cls, a, pieces, name=None):
        return cls("piecewise", a, pieces=pieces, name=name)

    @classmethod
    def constant(cls, value, a=1.0, name=None):
        """Square well (value < 0) or barrier (value > 0) on [0, a]."""
        return cls("piecewise", a, pieces=[(0.0, a, value)], name=name)

    @classmethod
    def table(cls, a, samples, name=None):
        return cls("table", a, samples=samples, name=name)

    def scaled(self, c):
        """The potential c*q of the same kind."""
        c = float(c)
        if self.kind == "zero":
            return Potential.zero(self.a)
        if self.kind == "piecewise":
            return Potential.piecewise(self.a, [(lo, hi, c * v) for lo, hi, v in self.pieces])
        return Potential.table(self.a, [(r, c * v) for r, v in self.samples])

    def to_dict(self):
        d = {"kind": self.kind, "a": self.a}
        if self.kind == "piecewise":
            d["pieces"] = [list(p) for p in self.pieces]
        elif self.kind == "table":
            d["samples"] = [list(s) for s in self.samples]
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    def __eq__(self, other):
        return isinstance(other, Potential) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.to_json())

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Potential{label} kind={self.kind} a={self.a:g}>"


class DifferencePotential(_Segmented):
    """p = q1 - q2 on [0, max(a1, a2)], breakpoints merged."""

    def __init__(self, q1, q2):
        self.q1 = q1
        self.q2 = q2
        self.a = max(q1.a, q2.a)
        cuts = np.unique(np.concatenate([[0.0, self.a], q1.breakpoints, q2.breakpoints,
                                         [q1.a, q2.a]]))
        cuts = cuts[cuts <= self.a]
        segs = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            vlo = float(q1.evaluate(lo, side="right") - q2.evaluate(lo, side="right"))
            vhi = float(q1.evaluate(hi, side="left") - q2.evaluate(hi, side="left"))
            segs.append((lo, hi, vlo, vhi))
        self._build(segs)

    def __repr__(self):
        return f"<DifferencePotential a={self.a:g} zero={self.is_zero()}>"


def difference(q1, q2):
    return DifferencePotential(q1, q2)


def evaluate(q, r):
    """q(r) for r >= 0; 0 beyond the support radius."""
    return q.evaluate(r)


def first_moment(q):
    """int_0^a r |q(r)| dr."""
    return q.first_moment()


# -- validation and ingestion ---------------------------------------------

def _finite(x, what):
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise PotentialValidationError(f"{what}: expected a number, got {x!r}") from None
    if isinstance(x, bool) or not math.isfinite(v):
        raise PotentialValidationError(f"non-finite value in {what}: {x!r}")
    return v


def _positive(x, what):
    v = _finite(x, what)
    if v <= 0:
        raise PotentialValidationError(f"{what} must be positive, got {v!r}")
    return v


def _check_pieces(pieces, a):
    if pieces is None or len(pieces) == 0:
        raise PotentialValidationError("piecewise potential needs at least one piece")
    out = []
    prev_hi = 0.0
    for i, p in enumerate(pieces):
        if len(p) != 3:
            raise PotentialValidationError(f"pieces[{i}]: expected [lo, hi, value]")
        lo = _finite(p[0], f"pieces[{i}][0]")
        hi = _finite(p[1], f"pieces[{i}][1]")
        v = _finite(p[2], f"pieces[{i}][2]")
        if lo < 0 or hi < 0:
            raise PotentialValidationError(f"negative radius in pieces[{i}]")
        if hi > a:
            raise PotentialValidationError(f"support exceeds a: pieces[{i}] ends at {hi} > a = {a}")
        if hi <= lo:
            raise PotentialValidationError(f"pieces[{i}]: empty interval [{lo}, {hi}]")
        if lo < prev_hi:
            raise PotentialValidationError(f"pieces not sorted/disjoint at pieces[{i}]")
        prev_hi = hi
        out.append((lo, hi, v))
    return tuple(out)


def _check_samples(samples, a):
    if samples is None or len(samples) < 2:
        raise PotentialValidationError("table potential needs at least two samples")
    out = []
    for i, s in enumerate(samples):
        if len(s) != 2:
            raise PotentialValidationError(f"samples[{i}]: expected [r, value]")
        r = _finite(s[0], f"samples[{i}][0]")
        v = _finite(s[1], f"samples[{i}][1]")
        if r < 0:
            raise PotentialValidationError(f"negative radius in samples[{i}]")
        if out and r <= out[-1][0]:
            raise PotentialValidationError(f"samples not strictly increasing at samples[{i}]")
        out.append((r, v))
    if out[-1][0] > a:
        raise PotentialValidationError(f"support exceeds a: last sample at {out[-1][0]} > a = {a}")
    if out[0][0] != 0.0 or out[-1][0] != a:
        raise PotentialValidationError("table samples must span [0, a] (first r = 0, last r = a)")
    return tuple(out)


def from_dict(d):
    """Validated :class:`Potential` from a parsed JSON object."""
    if not isinstance(d, dict):
        raise PotentialValidationError("potential document must be a JSON object")
    if "kind" not in d:
        raise PotentialValidationError("missing field 'kind'")
    if "a" not in d:
        raise PotentialValidationError("missing field 'a'")
    kind = d["kind"]
    allowed = {"zero": {"kind", "a", "name"},
               "piecewise": {"kind", "a", "pieces", "name"},
               "table": {"kind", "a", "samples", "name"}}
    if kind not in allowed:
        raise PotentialValidationError(f"field 'kind': unknown kind {kind!r}")
    extra = set(d) - allowed[kind]
    if extra:
        raise PotentialValidationError(f"unexpected field(s) for kind {kind!r}: {sorted(extra)}")
    if kind == "piecewise" and "pieces" not in d:
        raise PotentialValidationError("missing field 'pieces'")
    if kind == "table" and "samples" not in d:
        raise PotentialValidationError("missing field 'samples'")
    return Potential(kind, d["a"], pieces=d.get("pieces"), samples=d.get("samples"),
                     name=d.get("name"))


def load_potential(text):
    """Parse and validate a JSON potential document."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PotentialParseError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(d)


def serialize(q):
    return q.to_json()
