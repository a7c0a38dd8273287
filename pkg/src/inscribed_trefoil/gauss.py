"""
Gauss diagrams of smooth curves and the quadratic Conway coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .curve import Ambient, CurveError
from .hexknot import NonGeneric, _frame, fibonacci_directions

GENERIC_TOL = 1e-7
MIN_SAMPLES = 2**12


@dataclass(frozen=True)
class Endpoint:
    param: float
    crossing: int
    over: bool
    sign: int


@dataclass(frozen=True)
class GaussDiagram:
    """Based signed Gauss diagram; endpoints sorted by parameter from the basepoint."""

    endpoints: tuple

    def __post_init__(self):
        seen = {}
        for e in self.endpoints:
            seen.setdefault(e.crossing, []).append(e)
        for cid, es in seen.items():
            if len(es) != 2 or {e.over for e in es} != {True, False} or es[0].sign != es[1].sign:
                raise ValueError(f"crossing {cid} must appear once over, once under, with one sign")
        params = [e.param for e in self.endpoints]
        if any(b <= a for a, b in zip(params, params[1:])):
            raise ValueError("endpoint parameters must be strictly increasing")

    @classmethod
    def from_code(cls, code):
        """Build from a sequence of (crossing, is_over, sign) in base order."""
        n = len(code)
        return cls(tuple(Endpoint(k / max(n, 1), c, o, s) for k, (c, o, s) in enumerate(code)))

    @property
    def n_crossings(self):
        return len(self.endpoints) // 2

    @property
    def signs(self):
        return {e.crossing: e.sign for e in self.endpoints}

    @property
    def passages(self):
        return [(e.crossing, e.over) for e in self.endpoints]

    @property
    def writhe(self):
        return sum(self.signs.values())

    def rotated(self, k):
        """Same diagram with the basepoint moved past the first ``k`` endpoints."""
        n = len(self.endpoints)
        if n == 0:
            return self
        k %= n
        order = self.endpoints[k:] + self.endpoints[:k]
        return GaussDiagram.from_code([(e.crossing, e.over, e.sign) for e in order])

    def text(self):
        """Canonical one-line form, e.g. ``O1+ U2+ O3+ U1+ O2+ U3+``."""
        ids = {}
        out = []
        for e in self.endpoints:
            i = ids.setdefault(e.crossing, len(ids) + 1)
            out.append(f"{'O' if e.over else 'U'}{i}{'+' if e.sign > 0 else '-'}")
        return " ".join(out)

    @classmethod
    def parse(cls, line):
        code = []
        for tok in line.split():
            code.append((int(tok[1:-1]), tok[0] == "O", 1 if tok[-1] == "+" else -1))
        return cls.from_code(code)


def a2(diagram):
    """Quadratic Conway coefficient by the based Gauss-diagram pairing count.

    Sums sign(i) * sign(j) over crossing pairs met in the order
    under(i), over(j), over(i), under(j) starting from the basepoint.
    """
    pos = {}
    for k, e in enumerate(diagram.endpoints):
        pos.setdefault(e.crossing, {})["o" if e.over else "u"] = k
    signs = diagram.signs
    total = 0
    ids = list(pos)
    for i in ids:
        for j in ids:
            if i == j:
                continue
            if pos[i]["u"] < pos[j]["o"] < pos[i]["o"] < pos[j]["u"]:
                total += signs[i] * signs[j]
    return total


def _refine(curve, u, v, a, b, iters=30):
    """Newton on planar coincidence of the projections of curve(a), curve(b)."""
    for _ in range(iters):
        xa, xb = curve.eval(a), curve.eval(b)
        f = np.array([(xa - xb) @ u, (xa - xb) @ v])
        da, db = curve.deriv(a, 1), curve.deriv(b, 1)
        jac = np.array([[da @ u, -(db @ u)], [da @ v, -(db @ v)]])
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        a, b = a + step[0], b + step[1]
        if np.max(np.abs(step)) < 1e-15:
            break
    xa, xb = curve.eval(a), curve.eval(b)
    if np.hypot((xa - xb) @ u, (xa - xb) @ v) > 1e-10 * max(1.0, float(np.linalg.norm(xa))):
        return None
    return a % 1.0, b % 1.0


def gauss_diagram(curve, direction, samples=MIN_SAMPLES, tol=GENERIC_TOL):
    """Gauss diagram of the projection of an R^3 curve seen from +direction.

    Raises :class:`NonGeneric` on near-tangential crossings, near-triple
    points, cusps of the projection or strands that meet in space.
    """
    if curve.ambient != Ambient.R3:
        raise CurveError("Gauss diagrams need an R3 curve")
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples")
    u, v, d = _frame(direction)
    t = np.arange(samples) / samples
    x = curve.eval(t)
    p2 = np.column_stack([x @ u, x @ v])
    dx = curve.deriv(t, 1)
    speed = np.hypot(dx @ u, dx @ v)
    if np.min(speed) < 1e-3 * np.max(np.linalg.norm(dx, axis=1)):
        raise NonGeneric("projection has a cusp")
    seg = np.roll(p2, -1, axis=0) - p2
    lens = np.linalg.norm(seg, axis=1)
    mids = p2 + 0.5 * seg
    tree = cKDTree(mids)
    pairs = tree.query_pairs(float(np.max(lens)) * 1.5, output_type="ndarray")
    if len(pairs):
        gap = np.abs(pairs[:, 0] - pairs[:, 1])
        pairs = pairs[np.minimum(gap, samples - gap) > 2]
    found = []
    for i, j in pairs:
        a, b = seg[i], seg[j]
        den = a[0] * b[1] - a[1] * b[0]
        if abs(den) < 1e-300:
            continue
        r = p2[j] - p2[i]
        s = (r[0] * b[1] - r[1] * b[0]) / den
        w = (r[0] * a[1] - r[1] * a[0]) / den
        if not (-0.5 <= s <= 1.5 and -0.5 <= w <= 1.5):
            continue
        got = _refine(curve, u, v, (i + s) / samples, (j + w) / samples)
        if got is None:
            continue
        ta, tb = sorted(got)
        if min(tb - ta, 1 - tb + ta) < 1e-9:
            continue
        if all(abs(ta - fa) > 1e-9 or abs(tb - fb) > 1e-9 for fa, fb in found):
            found.append((ta, tb))
    found.sort()
    scale = float(np.max(np.linalg.norm(x, axis=1)))
    endpoints = []
    for cid, (ta, tb) in enumerate(found):
        xa, xb = curve.eval(ta), curve.eval(tb)
        da, db = curve.deriv(ta, 1), curve.deriv(tb, 1)
        pa = np.array([da @ u, da @ v])
        pb = np.array([db @ u, db @ v])
        cr = (pa[0] * pb[1] - pa[1] * pb[0]) / (np.linalg.norm(pa) * np.linalg.norm(pb))
        if abs(cr) < tol:
            raise NonGeneric("near-tangential crossing")
        za, zb = xa @ d, xb @ d
        if abs(za - zb) < tol * scale:
            raise NonGeneric("strands meet in space")
        a_over = za > zb
        o, w = (pa, pb) if a_over else (pb, pa)
        sign = 1 if (o[0] * w[1] - o[1] * w[0]) > 0 else -1
        endpoints.append(Endpoint(ta, cid, a_over, sign))
        endpoints.append(Endpoint(tb, cid, not a_over, sign))
    endpoints.sort(key=lambda e: e.param)
    params = [e.param for e in endpoints]
    if any(b - a < tol for a, b in zip(params, params[1:])):
        raise NonGeneric("near-triple point")
    return GaussDiagram(tuple(endpoints))


_DIRS = fibonacci_directions(64)


class DirectionDisagreement(RuntimeError):
    pass


def a2_of_curve(curve, n_directions=5, samples=MIN_SAMPLES):
    """a2 of an R^3 curve; the value must agree across generic directions."""
    values = []
    for d in _DIRS:
        try:
            values.append(a2(gauss_diagram(curve, d, samples)))
        except NonGeneric:
            continue
        if len(values) == n_directions:
            break
    if len(values) < n_directions:
        raise DirectionDisagreement("too few generic directions")
    if len(set(values)) != 1:
        raise DirectionDisagreement(f"directions disagree: {values}")
    return values[0]
