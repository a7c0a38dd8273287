"""
Hexagon knot classification
===========================

A closed hexagon in R^3 is an unknot or a trefoil (six sticks cannot make
anything else). We project along a generic direction, read off the
crossings, and evaluate the writhe-normalized Kauffman bracket exactly as an
integer Laurent polynomial in A.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from itertools import product

import numpy as np

from .curve import project_from_s3, rotation_to_north
from .projgeom import hyperplane_through

GENERIC_TOL = 1e-9
DEGENERATE_TOL = 1e-9
N_DIRECTIONS = 32
AGREE_DIRECTIONS = 3


class HexKind(str, Enum):
    UNKNOT = "Unknot"
    TREFOIL_LEFT = "TrefoilLeft"
    TREFOIL_RIGHT = "TrefoilRight"
    DEGENERATE = "Degenerate"

    @property
    def is_trefoil(self):
        return self in (HexKind.TREFOIL_LEFT, HexKind.TREFOIL_RIGHT)

    def mirror(self):
        return {
            HexKind.TREFOIL_LEFT: HexKind.TREFOIL_RIGHT,
            HexKind.TREFOIL_RIGHT: HexKind.TREFOIL_LEFT,
        }.get(self, self)


@dataclass(frozen=True)
class HexClass:
    kind: HexKind
    margin: float
    jones: dict = field(default_factory=dict, compare=False)

    @property
    def is_trefoil(self):
        return self.kind.is_trefoil


# ---------------------------------------------------------------------------
# Laurent polynomials in A, stored as {exponent: integer coefficient}


def lp_mul(p, q):
    out = defaultdict(int)
    for a, x in p.items():
        for b, y in q.items():
            out[a + b] += x * y
    return {k: v for k, v in out.items() if v}


def lp_add(p, q):
    out = defaultdict(int, p)
    for k, v in q.items():
        out[k] += v
    return {k: v for k, v in out.items() if v}


def lp_pow(p, n):
    out = {0: 1}
    for _ in range(n):
        out = lp_mul(out, p)
    return out


DELTA = {2: -1, -2: -1}  # -A^2 - A^-2

UNKNOT_POLY = {0: 1}
# positive (all crossings +1) trefoil
RIGHT_TREFOIL_POLY = {-4: 1, -12: 1, -16: -1}
LEFT_TREFOIL_POLY = {-k: v for k, v in RIGHT_TREFOIL_POLY.items()}


# ---------------------------------------------------------------------------
# diagrams given as passages along the knot


def pd_from_passages(passages):
    """Oriented PD code from the passage sequence of a knot diagram.

    ``passages`` lists (crossing_id, is_over) in order along the knot; each
    crossing id appears once over and once under. Arc k runs from passage k
    to passage k+1. Returns {crossing_id: (in_under, out_under, in_over,
    out_over)}.
    """
    n = len(passages)
    slots = defaultdict(dict)
    for k, (cid, over) in enumerate(passages):
        slots[cid]["over" if over else "under"] = ((k - 1) % n, k)
    pd = {}
    for cid, s in slots.items():
        if set(s) != {"over", "under"}:
            raise ValueError(f"crossing {cid} is not visited once over and once under")
        pd[cid] = s["under"] + s["over"]
    return pd


def kauffman_bracket(pd, signs):
    """Bracket <D> normalized so that the round circle gives 1.

    At a crossing with incoming under arc a, the counterclockwise arcs are
    (a, b, c, d) where the over strand runs d -> b for a positive crossing
    and b -> d for a negative one. The A-smoothing joins (a, b) and (c, d).
    """
    if not pd:
        return dict(UNKNOT_POLY)
    cross = []
    arcs = set()
    for cid, (iu, ou, io, oo) in pd.items():
        if signs[cid] > 0:
            a, b, c, d = iu, oo, ou, io
        else:
            a, b, c, d = iu, io, ou, oo
        cross.append((a, b, c, d))
        arcs.update((a, b, c, d))
    arcs = sorted(arcs)
    index = {a: i for i, a in enumerate(arcs)}
    total = {}
    for state in product((0, 1), repeat=len(cross)):
        parent = list(range(len(arcs)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i, j):
            ri, rj = find(index[i]), find(index[j])
            if ri != rj:
                parent[ri] = rj

        for (a, b, c, d), s in zip(cross, state):
            if s == 0:
                union(a, b)
                union(c, d)
            else:
                union(a, d)
                union(b, c)
        loops = len({find(i) for i in range(len(arcs))})
        n_a = state.count(0)
        term = lp_mul({n_a - (len(cross) - n_a): 1}, lp_pow(DELTA, loops - 1))
        total = lp_add(total, term)
    return total


def jones_in_a(pd, signs):
    """Writhe-normalized bracket (-A^3)^(-w) <D>; a Laurent polynomial in A^4."""
    writhe = sum(signs[c] for c in pd)
    factor = {-3 * writhe: (-1) ** (writhe % 2)}
    poly = lp_mul(factor, kauffman_bracket(pd, signs))
    if any(k % 4 for k in poly):
        raise ValueError("normalized bracket is not a polynomial in A^4; inconsistent diagram")
    return poly


def kind_from_jones(poly):
    if poly == UNKNOT_POLY:
        return HexKind.UNKNOT
    if poly == RIGHT_TREFOIL_POLY:
        return HexKind.TREFOIL_RIGHT
    if poly == LEFT_TREFOIL_POLY:
        return HexKind.TREFOIL_LEFT
    raise ValueError(f"polynomial {poly} is neither unknot nor trefoil")


# ---------------------------------------------------------------------------
# projection


@dataclass(frozen=True)
class Crossing:
    seg_i: int
    seg_j: int
    over: int  # segment index of the over strand
    sign: int
    s_i: float
    s_j: float
    det: float  # normalized 2D intersection determinant


class NonGeneric(Exception):
    """The projection direction is not generic for this polygon."""


def _frame(direction):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(helper, d)
    u /= np.linalg.norm(u)
    v = np.cross(d, u)
    return u, v, d


def project_polygon(points, direction, tol=GENERIC_TOL):
    """Crossings of the closed polygon ``points`` seen from +direction.

    Raises :class:`NonGeneric` for degenerate projections.
    """
    x = np.asarray(points, dtype=float)
    n = len(x)
    u, v, d = _frame(direction)
    diam = float(np.max(np.linalg.norm(x[:, None] - x[None], axis=-1)))
    p2 = np.column_stack([x @ u, x @ v])
    depth = x @ d
    seg = np.roll(p2, -1, axis=0) - p2
    lens = np.linalg.norm(seg, axis=1)
    if np.min(lens) < tol * diam:
        raise NonGeneric("a segment projects to a point")
    for i in range(n):
        for j in range(n):
            if i != j and np.linalg.norm(p2[i] - p2[j]) < tol * diam:
                raise NonGeneric("two vertices project to the same point")
    crossings = []
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            a, b = seg[i], seg[j]
            den = a[0] * b[1] - a[1] * b[0]
            nd = den / (lens[i] * lens[j])
            r = p2[j] - p2[i]
            if abs(nd) < tol:
                # parallel in projection; only a problem if they overlap
                off = abs(r[0] * a[1] - r[1] * a[0]) / lens[i]
                if off < tol * diam:
                    t0 = (r @ a) / lens[i] ** 2
                    t1 = ((r + b) @ a) / lens[i] ** 2
                    if max(t0, t1) > -tol and min(t0, t1) < 1 + tol:
                        raise NonGeneric("collinear overlapping segments in projection")
                continue
            s = (r[0] * b[1] - r[1] * b[0]) / den
            t = (r[0] * a[1] - r[1] * a[0]) / den
            lo, hi = -tol, 1 + tol
            if s < lo or s > hi or t < lo or t > hi:
                continue
            if min(s, 1 - s, t, 1 - t) < tol:
                raise NonGeneric("crossing at a vertex")
            zi = depth[i] + s * (depth[(i + 1) % n] - depth[i])
            zj = depth[j] + t * (depth[(j + 1) % n] - depth[j])
            if abs(zi - zj) < tol * diam:
                raise NonGeneric("segments meet in space")
            over_i = zi > zj
            o, w = (a, b) if over_i else (b, a)
            sign = 1 if (o[0] * w[1] - o[1] * w[0]) > 0 else -1
            crossings.append(Crossing(i, j, i if over_i else j, sign, float(s), float(t), float(nd)))
    return crossings


def project_hexagon(points, direction, tol=GENERIC_TOL):
    x = np.asarray(points, dtype=float)
    if x.shape != (6, 3):
        raise ValueError("hexagon needs six points of R^3")
    return project_polygon(x, direction, tol)


def passages_from_crossings(crossings, n_segments):
    """Passage sequence along the polygon for :func:`pd_from_passages`."""
    events = []
    for cid, c in enumerate(crossings):
        events.append((c.seg_i + c.s_i, cid, c.over == c.seg_i))
        events.append((c.seg_j + c.s_j, cid, c.over == c.seg_j))
    events.sort()
    return [(cid, over) for _, cid, over in events]


def polygon_jones(crossings, n_segments):
    if not crossings:
        return dict(UNKNOT_POLY)
    pd = pd_from_passages(passages_from_crossings(crossings, n_segments))
    signs = {cid: c.sign for cid, c in enumerate(crossings)}
    return jones_in_a(pd, signs)


# ---------------------------------------------------------------------------
# distances and classification


def segment_distance(p0, p1, q0, q1):
    """Minimum distance between segments [p0, p1] and [q0, q1]."""
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c = d1 @ r
    b = d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-300 else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p0 + d1 * s - (q0 + d2 * t)))


def embedding_margin(points):
    """Smallest distance between non-adjacent edges, relative to the diameter.

    Zero when the polygon is not embedded (edges touch, vertices coincide,
    or adjacent edges fold back onto each other).
    """
    x = np.asarray(points, dtype=float)
    n = len(x)
    diam = float(np.max(np.linalg.norm(x[:, None] - x[None], axis=-1)))
    if diam == 0.0:
        return 0.0
    best = np.inf
    for i in range(n):
        a, b, c = x[i - 1], x[i], x[(i + 1) % n]
        u, w = a - b, c - b
        nu, nw = np.linalg.norm(u), np.linalg.norm(w)
        if nu < 1e-300 or nw < 1e-300:
            return 0.0
        # fold-back: angle at the vertex near zero
        best = min(best, float(np.linalg.norm(np.cross(u / nu, w / nw))) if u @ w > 0 else best)
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            best = min(best, segment_distance(x[i], x[(i + 1) % n], x[j], x[(j + 1) % n]) / diam)
    return float(best)


def fibonacci_directions(n=N_DIRECTIONS):
    """Quasi-random unit vectors on the upper hemisphere, away from the axes."""
    k = np.arange(n) + 0.5
    z = 1.0 - k / n
    phi = k * np.pi * (3.0 - np.sqrt(5.0)) + 0.3711
    r = np.sqrt(1.0 - z * z)
    dirs = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    # fixed tilt so no direction lines up with a coordinate axis
    c, s = np.cos(0.2137), np.sin(0.2137)
    tilt = np.array([[1, 0, 0], [0, c, -s], [0, s, c]]) @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return dirs @ tilt.T


_DIRECTIONS = fibonacci_directions()


def classify_polygon(points, tol=DEGENERATE_TOL, agree=AGREE_DIRECTIONS):
    x = np.asarray(points, dtype=float)
    margin = embedding_margin(x)
    if margin < tol:
        return HexClass(HexKind.DEGENERATE, margin)
    results = []
    for d in _DIRECTIONS:
        try:
            cr = project_polygon(x, d)
        except NonGeneric:
            continue
        results.append(polygon_jones(cr, len(x)))
        if len(results) == agree:
            break
    if not results:
        return HexClass(HexKind.DEGENERATE, margin)
    if any(r != results[0] for r in results):
        raise RuntimeError("projection directions disagree on an embedded polygon")
    return HexClass(kind_from_jones(results[0]), margin, results[0])


def classify_hexagon(points, tol=DEGENERATE_TOL):
    """Unknot / TrefoilLeft / TrefoilRight / Degenerate for a closed hexagon.

    TrefoilRight is the trefoil whose minimal diagram has three positive
    crossings. ``margin`` is :func:`embedding_margin`.
    """
    x = np.asarray(points, dtype=float)
    if x.shape != (6, 3):
        raise ValueError("hexagon needs six points of R^3")
    return classify_polygon(x, tol)


# ---------------------------------------------------------------------------
# stereographic trefoils


class StereoKind(str, Enum):
    YES = "Yes"
    COPLANAR = "Coplanar"
    NO = "No"


@dataclass(frozen=True)
class StereoResult:
    kind: StereoKind
    hexclass: HexClass | None = None
    pole: np.ndarray | None = None


class NotCospherical(ValueError):
    pass


def canonical_pole(points):
    """Point of S^3 farthest from the 2-sphere through ``points``."""
    nu, c, _ = hyperplane_through(points)
    return -nu if c > 0 else nu


def is_stereographic_trefoil(points, pole=None, tol=1e-8):
    """Decide whether six co-spherical points of S^3 form a stereographic trefoil."""
    x = np.asarray(points, dtype=float)
    nu, c, res = hyperplane_through(x)
    if res > tol:
        raise NotCospherical(f"points do not lie on a 2-sphere (residual {res:.2e})")
    m = np.column_stack([x, np.ones(6)])
    s = np.linalg.svd(m, compute_uv=False)
    if s[3] < tol * s[0]:
        return StereoResult(StereoKind.COPLANAR, HexClass(HexKind.DEGENERATE, 0.0))
    if pole is None:
        pole = canonical_pole(x)
    pole = np.asarray(pole, dtype=float)
    if abs(pole @ nu - c) < 1e-9:
        raise ValueError("pole lies on the 2-sphere of the points")
    y = project_from_s3(x @ rotation_to_north(pole).T)
    cls = classify_hexagon(y)
    if cls.is_trefoil:
        return StereoResult(StereoKind.YES, cls, pole)
    return StereoResult(StereoKind.NO, cls, pole)
