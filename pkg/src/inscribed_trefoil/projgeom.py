"""
Projective and metric geometry kernels
======================================

S^3 is the unit sphere of the affine chart w = 1 of RP^4; a point y of S^3
is homogenized as (y, 1). Lines of RP^4 are 2-dimensional subspaces of R^5.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .curve import PlaneR3, PoleError, lift_to_s3, project_from_s3

CONCURRENCY_TOL = 1e-8
BOUNDARY_TOL = 1e-9
SIDE_TOL = 1e-10


class GeometryError(ValueError):
    pass


def homogenize(y):
    y = np.asarray(y, dtype=float)
    h = np.concatenate([y, np.ones(y.shape[:-1] + (1,))], axis=-1)
    return h / np.linalg.norm(h, axis=-1, keepdims=True)


def canonical_sign(v, tol=1e-9):
    """Flip ``v`` so that its first non-negligible coordinate is positive."""
    v = np.asarray(v, dtype=float)
    for x in v:
        if abs(x) > tol:
            return v if x > 0 else -v
    return v


@dataclass(frozen=True)
class HomPoint:
    """Point of RP^4 as a unit 5-vector (x1..x4, w) with canonical sign."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        n = np.linalg.norm(c)
        if c.shape != (5,) or n < 1e-300:
            raise GeometryError("homogeneous point needs 5 coordinates, not all zero")
        object.__setattr__(self, "coords", canonical_sign(c / n))

    @property
    def spatial(self):
        return self.coords[:4]

    @property
    def w(self):
        return float(self.coords[4])

    @property
    def at_infinity(self):
        return abs(self.w) < 1e-12

    def affine(self):
        if self.at_infinity:
            raise GeometryError("point at infinity has no affine representative")
        return self.spatial / self.w

    def ball_excess(self):
        """|x| - |w|: positive outside the closed unit ball, negative inside."""
        return float(np.linalg.norm(self.spatial) - abs(self.w))

    def close_to(self, other, tol=1e-9):
        return float(np.linalg.norm(self.coords - other.coords)) < tol


@dataclass(frozen=True)
class ChordLine:
    """Projective line through two points of S^3."""

    a: np.ndarray
    b: np.ndarray
    frame: np.ndarray  # (5, 2), orthonormal columns

    def contains(self, v, tol=1e-10):
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return float(np.linalg.norm(v - self.frame @ (self.frame.T @ v))) < tol


def chord_line(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(a - b) <= 1e-9:
        raise GeometryError("chord endpoints coincide")
    m = np.stack([homogenize(a), homogenize(b)], axis=1)
    q, _ = np.linalg.qr(m)
    return ChordLine(a, b, q)


class NotConcurrent(GeometryError):
    pass


def concurrency_point(l1, l2, l3, tol=CONCURRENCY_TOL):
    """Common projective point of three lines, or raise :class:`NotConcurrent`."""
    frames = [l.frame for l in (l1, l2, l3)]
    for i in range(3):
        for j in range(i + 1, 3):
            s = np.linalg.svd(frames[i].T @ frames[j], compute_uv=False)
            if s[-1] > 1.0 - 1e-12:
                raise GeometryError("two of the lines coincide")
    # minimize sum of squared distances from v to each plane over unit v
    acc = np.zeros((5, 5))
    for f in frames:
        acc += np.eye(5) - f @ f.T
    w, vecs = np.linalg.eigh(acc)
    v = vecs[:, 0]
    worst = max(float(np.linalg.norm(v - f @ (f.T @ v))) for f in frames)
    if worst > tol:
        raise NotConcurrent(f"lines miss a common point (principal sine {worst:.3e})")
    return HomPoint(v)


def _complement_basis(q):
    """Orthonormal basis (5, 3) of the orthogonal complement of span(q).

    Oriented so that det[q, basis] > 0.
    """
    u, _, _ = np.linalg.svd(q, full_matrices=True)
    basis = u[:, 2:]
    if np.linalg.det(np.concatenate([q, basis], axis=1)) < 0:
        basis = basis.copy()
        basis[:, 0] *= -1.0
    return basis


def _gram_schmidt2(x, y):
    e1 = x / np.linalg.norm(x)
    y = y - e1 * (e1 @ y)
    return np.stack([e1, y / np.linalg.norm(y)], axis=1)


def _residual_from(h, base, others):
    """Residual of the chord ``base`` against the complements of the ``others``."""
    i, j = base
    blocks = [_complement_basis(_gram_schmidt2(h[a], h[b])) for a, b in others]
    proj = np.concatenate(blocks, axis=1).T  # (6, 5)
    u = proj @ h[i]
    v = proj @ h[j]
    gram = np.array([[u @ u, u @ v], [u @ v, v @ v]])
    _, vecs = np.linalg.eigh(gram)
    c, s = vecs[:, 0]
    return c * u + s * v, c * h[i] + s * h[j]


_CHORDS = ((0, 3), (1, 4), (2, 5))


def concurrency_residual(points):
    """Residual of the concurrency condition for chords (1,4), (2,5), (3,6).

    For a base chord with endpoints X, Y the residual holds the 6 components
    of p(phi) = cos(phi) X + sin(phi) Y orthogonal to the other two chords,
    at the phi minimizing its norm. The base chord is the one giving the
    smallest norm, so the result does not depend on how the chords are
    labelled. Returns ``(residual, p_hat)``; the norm is zero exactly when the
    three chords are concurrent.
    """
    x = np.asarray(points, dtype=float)
    if x.shape != (6, 4):
        raise GeometryError("need six points of R^4")
    d = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    if np.min(d + np.eye(6) * 10) <= 1e-12:
        raise GeometryError("coincident points")
    h = homogenize(x)
    best = None
    for k in range(3):
        others = [_CHORDS[m] for m in range(3) if m != k]
        res, p = _residual_from(h, _CHORDS[k], others)
        nr = float(np.linalg.norm(res))
        if best is None or nr < best[0]:
            best = (nr, res, p)
    return best[1], HomPoint(best[2])


def side_of_tangency_locus(p, y, tol=SIDE_TOL):
    """Side of T_p on which the point y of S^3 lies: sign(<p_x, y> - w)."""
    if not isinstance(p, HomPoint):
        p = HomPoint(p)
    if p.ball_excess() < -BOUNDARY_TOL:
        raise GeometryError("p lies inside the ball")
    val = float(p.spatial @ np.asarray(y, dtype=float) - p.w)
    if abs(val) <= tol:
        return 0
    return 1 if val > 0 else -1


class RejectReason(str, Enum):
    NOT_CONCURRENT = "NotConcurrent"
    P_INSIDE_BALL = "PInsideBall"
    BAD_SIDE_PATTERN = "BadSidePattern"
    TANGENT_CHORD = "TangentChord"


@dataclass(frozen=True)
class Reject:
    reason: RejectReason
    detail: str = ""

    def __bool__(self):
        return False


@dataclass(frozen=True)
class PrismConfig:
    points: np.ndarray  # (6, 4)
    p: HomPoint
    lines: tuple
    sides: tuple
    is_m0: bool
    residual: float


def affine_rank(points, tol):
    x = np.asarray(points, dtype=float)
    s = np.linalg.svd(x - x.mean(axis=0), compute_uv=False)
    return int(np.sum(s > tol))


def make_prism_config(points, tol=CONCURRENCY_TOL):
    """Validate six labelled points of S^3 as a point of the prism manifold."""
    x = np.asarray(points, dtype=float)
    try:
        lines = tuple(chord_line(x[i], x[i + 3]) for i in range(3))
    except GeometryError as exc:
        return Reject(RejectReason.NOT_CONCURRENT, str(exc))
    res, _ = concurrency_residual(x)
    try:
        p = concurrency_point(*lines, tol=tol)
    except NotConcurrent as exc:
        return Reject(RejectReason.NOT_CONCURRENT, str(exc))
    except GeometryError as exc:
        return Reject(RejectReason.NOT_CONCURRENT, str(exc))
    excess = p.ball_excess()
    if abs(excess) <= BOUNDARY_TOL:
        return Reject(RejectReason.TANGENT_CHORD, "concurrency point on the sphere")
    if excess < 0:
        return Reject(RejectReason.P_INSIDE_BALL, f"ball excess {excess:.3e}")
    sides = tuple(side_of_tangency_locus(p, xi) for xi in x)
    if 0 in sides:
        return Reject(RejectReason.TANGENT_CHORD, "point on the tangency locus")
    odd, even = sides[0::2], sides[1::2]
    if len(set(odd)) != 1 or len(set(even)) != 1 or odd[0] == even[0]:
        return Reject(RejectReason.BAD_SIDE_PATTERN, f"sides {sides}")
    is_m0 = affine_rank(x, 1e-8) <= 2
    return PrismConfig(x, p, lines, sides, is_m0, float(np.linalg.norm(res)))


# ---------------------------------------------------------------------------
# metric kernels


def circumradius_many(a, b, c):
    """Circumradius |a - c| / (2 sin B) over arrays of shape (N, d); inf if collinear.

    For unit edge vectors u, v at ``b``, sin B = |u - v| |u + v| / 2, which
    stays accurate for nearly collinear triples.
    """
    a, b, c = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (a, b, c))
    u, v = a - b, c - b
    with np.errstate(divide="ignore", invalid="ignore"):
        u = u / np.linalg.norm(u, axis=-1, keepdims=True)
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        sin_b = 0.5 * np.linalg.norm(u - v, axis=-1) * np.linalg.norm(u + v, axis=-1)
        r = np.linalg.norm(a - c, axis=-1) / (2.0 * sin_b)
    r[~np.isfinite(r) | (r < 0)] = np.inf
    return r


def circumradius(a, b, c):
    """Radius of the circle through three points (inf if collinear)."""
    return float(circumradius_many(a, b, c)[0])


def incircle_radius(a, b, c):
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    la, lb, lc = np.linalg.norm(b - c), np.linalg.norm(c - a), np.linalg.norm(a - b)
    s = 0.5 * (la + lb + lc)
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
    if area <= 1e-14 * max(s * s, 1e-300):
        raise GeometryError("degenerate triangle")
    return float(area / s)


def plane_angle(p1, p2):
    """Angle in [0, pi/2] between two planes of R^3."""
    c = abs(float(p1.normal @ p2.normal))
    return float(np.arccos(min(1.0, c)))


def triangle_plane(a, b, c):
    n = np.cross(np.asarray(b) - a, np.asarray(c) - a)
    return PlaneR3.through(a, n)


def fit_circle(points):
    """Least-squares circle through points of R^d: (center, radius, plane residual).

    The plane is fitted by SVD; the circle by the algebraic (Kasa) fit inside it.
    """
    x = np.asarray(points, dtype=float)
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean)
    basis = vt[:2]
    plane_res = float(np.sqrt(np.sum(s[2:] ** 2))) if len(s) > 2 else 0.0
    uv = (x - mean) @ basis.T
    a = np.column_stack([2 * uv, np.ones(len(uv))])
    rhs = np.sum(uv * uv, axis=1)
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    c2 = sol[:2]
    r = float(np.sqrt(sol[2] + c2 @ c2))
    center = mean + c2 @ basis
    radial = np.linalg.norm(x - center, axis=1) - r
    return center, r, max(plane_res, float(np.max(np.abs(radial))))


def fit_sphere(points):
    """Least-squares sphere in R^3: (center, radius, max radial residual)."""
    x = np.asarray(points, dtype=float)
    a = np.column_stack([2 * x, np.ones(len(x))])
    rhs = np.sum(x * x, axis=1)
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    c = sol[:3]
    r = float(np.sqrt(sol[3] + c @ c))
    return c, r, float(np.max(np.abs(np.linalg.norm(x - c, axis=1) - r)))


# ---------------------------------------------------------------------------
# Mobius transformations


@dataclass(frozen=True)
class MobiusTransform:
    """Word in the generators, applied left to right.

    Each letter is ``("translate", v)``, ``("scale", s)`` or
    ``("rotate", R)`` with R an orthogonal 4x4 matrix acting on the lifted
    point.
    """

    word: tuple = ()

    def __post_init__(self):
        word = []
        for kind, val in self.word:
            if kind == "translate":
                val = np.asarray(val, dtype=float).reshape(3)
            elif kind == "scale":
                val = float(val)
                if val == 0.0:
                    raise GeometryError("scaling factor must be nonzero")
            elif kind == "rotate":
                val = np.asarray(val, dtype=float).reshape(4, 4)
                if np.max(np.abs(val @ val.T - np.eye(4))) > 1e-12:
                    raise GeometryError("rotation factor is not orthogonal")
            else:
                raise GeometryError(f"unknown generator {kind!r}")
            word.append((kind, val))
        object.__setattr__(self, "word", tuple(word))

    def then(self, other):
        return MobiusTransform(self.word + other.word)

    def inverse(self):
        inv = []
        for kind, val in reversed(self.word):
            if kind == "translate":
                inv.append((kind, -val))
            elif kind == "scale":
                inv.append((kind, 1.0 / val))
            else:
                inv.append((kind, val.T))
        return MobiusTransform(tuple(inv))


class PoleHit(GeometryError):
    """The transformation sends the point to infinity."""


def mobius_apply(m, x):
    x = np.array(x, dtype=float)
    for kind, val in m.word:
        if kind == "translate":
            x = x + val
        elif kind == "scale":
            x = x * val
        else:
            y = lift_to_s3(x) @ val.T
            try:
                x = project_from_s3(y)
            except PoleError as exc:
                raise PoleHit(str(exc)) from exc
    return x


def random_rotation(rng, dim=4):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1.0
    return q


def random_mobius(rng, letters=3):
    word = []
    for _ in range(letters):
        k = rng.integers(3)
        if k == 0:
            word.append(("translate", rng.standard_normal(3)))
        elif k == 1:
            word.append(("scale", float(rng.uniform(0.3, 3.0) * rng.choice([-1, 1]))))
        else:
            word.append(("rotate", random_rotation(rng)))
    return MobiusTransform(tuple(word))


# ---------------------------------------------------------------------------
# sphere through a prism configuration and cap rotation


def hyperplane_through(points):
    """Affine hyperplane <nu, x> = c of R^4 through the points (|nu| = 1).

    Returns (nu, c, residual) where residual is the smallest singular value
    of the homogenized point matrix.
    """
    x = np.asarray(points, dtype=float)
    m = np.column_stack([x, -np.ones(len(x))])
    _, s, vt = np.linalg.svd(m)
    v = vt[-1]
    nrm = np.linalg.norm(v[:4])
    nu, c = v[:4] / nrm, v[4] / nrm
    if c < 0:
        nu, c = -nu, -c
    return nu, float(c), float(s[-1] / nrm) if len(s) == 5 else 0.0


def cap_rotation(config, epsilon):
    """Rotate the odd-labelled side of a prism configuration by ``epsilon``.

    The six points lie on the 2-sphere P cut out of S^3 by their affine
    3-space; T_p meets P in a circle C. The points on the side of T_p
    holding x1 are rotated by ``epsilon`` about the axis of C inside P.
    """
    if config.is_m0:
        raise GeometryError("configuration lies on a circle; cap rotation undefined")
    if abs(epsilon) > 0.3:
        raise GeometryError("rotation angle must satisfy |epsilon| <= 0.3")
    x = np.asarray(config.points, dtype=float)
    if epsilon == 0.0:
        return x.copy()
    nu, c, res = hyperplane_through(x)
    if res > 1e-7:
        raise GeometryError(f"points are not co-spherical (residual {res:.2e})")
    if c > 1.0 - 1e-9:
        raise GeometryError("sphere fit ill-conditioned")
    center = c * nu
    axis = config.p.spatial - (config.p.spatial @ nu) * nu
    if np.linalg.norm(axis) < 1e-12:
        raise GeometryError("tangency locus parallel to the sphere's hyperplane")
    axis = axis / np.linalg.norm(axis)
    if axis @ (x[0] - center) < 0:
        axis = -axis
    # orthonormal basis (e1, e2) of the rotation plane, oriented by det[nu, axis, e1, e2] > 0
    u, _, _ = np.linalg.svd(np.column_stack([nu, axis]), full_matrices=True)
    e1, e2 = u[:, 2], u[:, 3]
    if np.linalg.det(np.column_stack([nu, axis, e1, e2])) < 0:
        e2 = -e2
    ce, se = np.cos(epsilon), np.sin(epsilon)
    out = x.copy()
    for i in range(0, 6, 2):
        d = x[i] - center
        a1, a2 = d @ e1, d @ e2
        rest = d - a1 * e1 - a2 * e2
        out[i] = center + rest + (ce * a1 - se * a2) * e1 + (se * a1 + ce * a2) * e2
    return out
