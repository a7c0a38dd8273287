"""
Search for inscribed prism configurations
=========================================

Based search: t1 is fixed and Newton runs on the square system in
(t2, ..., t6, phi), where p(phi) = cos(phi) X1 + sin(phi) X4 is a point of
the first chord and the six residuals are the components of p(phi)
orthogonal to the chords (2,5) and (3,6). Roots that pass
:func:`~inscribed_trefoil.projgeom.make_prism_config` are solutions.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np

from .curve import Ambient, CurveError
from .projgeom import (
    PrismConfig,
    _complement_basis,
    _gram_schmidt2,
    affine_rank,
    homogenize,
    make_prism_config,
)

log = logging.getLogger(__name__)

MAX_ITER = 50
CONVERGED = 1e-12
ACCEPT = 1e-8
DEDUP_RADIUS = 1e-6
COND_LIMIT = 1e12
FD_STEP = 1e-7


class NonTransverse(RuntimeError):
    pass


@dataclass
class ConfigTuple:
    t: np.ndarray
    points: np.ndarray
    phi: float
    residual: float
    prism: PrismConfig | None = None
    sign: int = 0
    transverse: bool = False
    cond: float = float("nan")
    jacobian: np.ndarray | None = field(default=None, repr=False)

    @property
    def basepoint(self):
        return float(self.t[0])

    def min_distance(self):
        d = np.linalg.norm(self.points[:, None] - self.points[None], axis=-1)
        return float(np.min(d[np.triu_indices(6, 1)]))

    def to_dict(self):
        return {
            "t": [float(v) for v in self.t],
            "phi": float(self.phi),
            "residual": float(self.residual),
            "sign": int(self.sign),
            "transverse": bool(self.transverse),
            "condition": float(self.cond) if np.isfinite(self.cond) else None,
            "concurrency_point": [float(v) for v in self.prism.p.coords] if self.prism else None,
            "sides": list(self.prism.sides) if self.prism else None,
            "is_m0": bool(self.prism.is_m0) if self.prism else None,
        }


# ---------------------------------------------------------------------------
# residual system


def _smooth_complement(q, ref):
    """Orthonormalize the projection of ``ref`` onto the complement of span(q).

    Batched over the leading axis: q (m, 5, 2), ref (5, 3) -> (m, 5, 3).
    Smooth in q as long as the projection keeps full rank.
    """
    c = ref[None] - q @ (np.swapaxes(q, 1, 2) @ ref[None])
    g = np.swapaxes(c, 1, 2) @ c
    w, v = np.linalg.eigh(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_sqrt = v @ (v.transpose(0, 2, 1) / np.sqrt(w)[:, :, None])
        return c @ inv_sqrt


def _gs_batch(x, y):
    e1 = x / np.linalg.norm(x, axis=-1, keepdims=True)
    y = y - e1 * np.sum(e1 * y, axis=-1, keepdims=True)
    e2 = y / np.linalg.norm(y, axis=-1, keepdims=True)
    return np.stack([e1, e2], axis=-1)


class PrismSystem:
    """Residual map (t2..t6, phi) -> R^6 for a fixed basepoint t1."""

    def __init__(self, curve, t1, ref2, ref3):
        self.curve = curve
        self.t1 = float(t1)
        self.ref2 = ref2
        self.ref3 = ref3

    @classmethod
    def at(cls, curve, t):
        """System with complement references taken at the full tuple ``t``."""
        h = homogenize(curve.eval(np.asarray(t, dtype=float)))
        ref2 = _complement_basis(_gram_schmidt2(h[1], h[4]))
        ref3 = _complement_basis(_gram_schmidt2(h[2], h[5]))
        return cls(curve, t[0], ref2, ref3)

    def parts(self, z):
        z = np.atleast_2d(z)
        m = len(z)
        ts = np.concatenate([np.full((m, 1), self.t1), z[:, :5]], axis=1)
        h = homogenize(self.curve.eval(ts))  # (m, 6, 5)
        q2 = _gs_batch(h[:, 1], h[:, 4])
        q3 = _gs_batch(h[:, 2], h[:, 5])
        b2 = _smooth_complement(q2, self.ref2)
        b3 = _smooth_complement(q3, self.ref3)
        p = np.cos(z[:, 5])[:, None] * h[:, 0] + np.sin(z[:, 5])[:, None] * h[:, 3]
        r = np.concatenate(
            [np.einsum("mkj,mk->mj", b2, p), np.einsum("mkj,mk->mj", b3, p)], axis=1
        )
        return r, q2, b2, q3, b3

    def residual(self, z):
        return self.parts(z)[0]

    def jacobian(self, z, step=FD_STEP):
        z = np.asarray(z, dtype=float)
        pert = np.concatenate([z + step * np.eye(6), z - step * np.eye(6)])
        r = self.residual(pert)
        return ((r[:6] - r[6:]) / (2 * step)).T

    def orientation(self, z):
        """Product of orientation signs of the two complement frames."""
        _, q2, b2, q3, b3 = self.parts(z)
        s2 = np.sign(np.linalg.det(np.concatenate([q2[0], b2[0]], axis=1)))
        s3 = np.sign(np.linalg.det(np.concatenate([q3[0], b3[0]], axis=1)))
        return int(s2 * s3)

    def best_phi(self, t_rest):
        z = np.concatenate([t_rest, [0.0]])
        r0 = self.residual(z)[0]
        r1 = self.residual(np.concatenate([t_rest, [np.pi / 2]]))[0]
        gram = np.array([[r0 @ r0, r0 @ r1], [r0 @ r1, r1 @ r1]])
        _, vecs = np.linalg.eigh(gram)
        c, s = vecs[:, 0]
        return float(np.arctan2(s, c))


def newton(system, z0, max_iter=MAX_ITER, tol=CONVERGED):
    """Damped Newton with backtracking on the residual norm.

    Returns (z, residual_norm, iterations).
    """
    z = np.array(z0, dtype=float)
    r = system.residual(z)[0]
    nr = float(np.linalg.norm(r))
    if not np.isfinite(nr):
        return z, np.inf, 0
    it = 0
    for it in range(1, max_iter + 1):
        if nr < tol:
            break
        jac = system.jacobian(z)
        if not np.all(np.isfinite(jac)):
            break
        dz, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        if not np.all(np.isfinite(dz)):
            break
        # keep parameter steps bounded
        big = np.max(np.abs(dz[:5]))
        if big > 0.05:
            dz = dz * (0.05 / big)
        alpha = 1.0
        for _ in range(12):
            zn = z + alpha * dz
            rn = system.residual(zn)[0]
            nrn = float(np.linalg.norm(rn))
            if np.isfinite(nrn) and nrn < nr * (1 - 1e-4 * alpha):
                break
            alpha *= 0.5
        else:
            break
        z, r, nr = zn, rn, nrn
    return z, nr, it


# ---------------------------------------------------------------------------
# seeding


def simplex_seeds(grid):
    """Interior lattice points s1..s6 > 0 with sum 1, as gap vectors (k_i / grid)."""
    if grid < 6:
        raise ValueError("grid_per_axis must be at least 6")
    out = []
    for cuts in combinations(range(1, grid), 5):
        ks = np.diff((0,) + cuts + (grid,))
        out.append(ks / grid)
    return np.array(out)


def _normalize_ts(t):
    t = np.asarray(t, dtype=float)
    rel = (t - t[0]) % 1.0
    rel[0] = 0.0
    return t[0] % 1.0 + rel


def _ordered(t, gap=1e-9):
    rel = t - t[0]
    return bool(np.all(np.diff(rel) > gap) and rel[-1] < 1.0 - gap)


def _refine_seed(args):
    curve, t1, gaps = args
    t = t1 + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    try:
        system = PrismSystem.at(curve, t)
        phi = system.best_phi(t[1:])
        z, nr, _ = newton(system, np.concatenate([t[1:], [phi]]))
    except (np.linalg.LinAlgError, FloatingPointError, ValueError):
        return None
    if not np.isfinite(nr) or nr > ACCEPT:
        return None
    return z, nr


def _torus_dist(a, b):
    d = np.abs((np.asarray(a) - np.asarray(b) + 0.5) % 1.0 - 0.5)
    return float(np.max(d))


def finalize(curve, t, phi):
    """Polish a root, validate it, and attach sign and conditioning."""
    t = _normalize_ts(t)
    system = PrismSystem.at(curve, t)
    z, nr, _ = newton(system, np.concatenate([t[1:], [phi]]), max_iter=10)
    t = _normalize_ts(np.concatenate([[t[0]], z[:5]]))
    pts = curve.eval(t)
    sol = ConfigTuple(t=t, points=pts, phi=float(z[5]), residual=nr)
    if nr > ACCEPT or not _ordered(t):
        return sol
    cfg = make_prism_config(pts)
    if not cfg:
        return sol
    sol.prism = cfg
    jac = system.jacobian(z)
    sol.jacobian = jac
    sv = np.linalg.svd(jac, compute_uv=False)
    sol.cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    sol.transverse = sol.cond <= COND_LIMIT
    if sol.transverse:
        sol.sign = int(np.sign(np.linalg.det(jac))) * system.orientation(z)
    return sol


def find_inscribed_prisms(curve, basepoint=0.0, grid_per_axis=12, tol=ACCEPT, workers=1):
    """Solutions of the based prism search on an S^3 curve.

    Every interior simplex lattice point at resolution ``grid_per_axis``
    seeds a Newton run; converged roots are validated, deduplicated in the
    flat torus metric and sorted by t2.
    """
    if curve.ambient != Ambient.S3:
        raise CurveError("prism search needs an S3 curve")
    seeds = simplex_seeds(grid_per_axis)
    jobs = [(curve, float(basepoint), g) for g in seeds]
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            roots = list(pool.map(_refine_seed, jobs, chunksize=16))
    else:
        roots = [_refine_seed(j) for j in jobs]
    found = []
    for got in roots:
        if got is None:
            continue
        z, nr = got
        t = _normalize_ts(np.concatenate([[basepoint], z[:5]]))
        if not _ordered(t):
            continue
        if any(_torus_dist(t[1:], s.t[1:]) < DEDUP_RADIUS for s in found):
            continue
        sol = finalize(curve, t, z[5])
        if sol.prism is None or sol.residual > tol:
            continue
        if any(_torus_dist(sol.t[1:], s.t[1:]) < DEDUP_RADIUS for s in found):
            continue
        found.append(sol)
    found.sort(key=lambda s: tuple(s.t[1:]))
    for s in found:
        if not s.transverse:
            warnings.warn(f"non-transverse solution at t={s.t.round(6).tolist()}", stacklevel=2)
    return found


def intersection_sign(sol):
    if not sol.transverse:
        raise NonTransverse(f"solution at t={sol.t.tolist()} is not transverse")
    return sol.sign


# ---------------------------------------------------------------------------
# thickness


class ThicknessKind(str, Enum):
    THREE_POINT = "ThreePoint"
    TANGENT_POINT = "TangentPoint"
    OSCULATING = "Osculating"


@dataclass(frozen=True)
class ThicknessReport:
    tau: float
    triple: tuple
    kind: ThicknessKind

    @property
    def is_diagonal(self):
        return self.kind != ThicknessKind.THREE_POINT

    def to_dict(self):
        return {"tau": self.tau, "triple": list(self.triple), "kind": self.kind.value}


def _tangent_point_radius(x, tx, y):
    """Radius of the circle tangent to ``tx`` at ``x`` and passing through ``y``."""
    d = y - x
    along = np.sum(d * tx, axis=-1, keepdims=True)
    perp = np.linalg.norm(d - along * tx, axis=-1)
    with np.errstate(divide="ignore"):
        return np.sum(d * d, axis=-1) / (2.0 * perp)


def osculating_radius(curve, t):
    """Curvature radius |g'|^2 / |g''_perp| of the ambient curve."""
    d1 = curve.deriv(t, 1)
    d2 = curve.deriv(t, 2)
    sp2 = np.sum(d1 * d1, axis=-1, keepdims=True)
    perp = d2 - np.sum(d2 * d1, axis=-1, keepdims=True) / sp2 * d1
    with np.errstate(divide="ignore"):
        return sp2[..., 0] / np.linalg.norm(perp, axis=-1)


def _unit_tangents(curve, t, min_speed=1e-10):
    d1 = curve.deriv(t, 1)
    sp = np.linalg.norm(d1, axis=-1, keepdims=True)
    if np.any(sp < min_speed):
        raise CurveError("degenerate derivative sample")
    return d1 / sp


MERGE_GAP = 1e-3


def _three_point(curve, s):
    from .projgeom import circumradius_many

    s = np.sort(np.asarray(s) % 1.0)
    gaps = np.diff(np.append(s, s[0] + 1.0))
    # merged pairs are the tangent-point limit, handled separately
    if np.min(gaps) < MERGE_GAP:
        return np.inf
    x = curve.eval(s)
    r = circumradius_many(x[0:1], x[1:2], x[2:3])[0]
    return float(r) if np.isfinite(r) else np.inf


def _tangent_point(curve, s):
    a, b = np.asarray(s) % 1.0
    if min(abs(a - b), 1 - abs(a - b)) < MERGE_GAP:
        return np.inf
    x = curve.eval(np.array([a, b]))
    tx = _unit_tangents(curve, np.array([a]))[0]
    return float(_tangent_point_radius(x[0], tx, x[1]))


def thickness(curve, grid=64, fine=4096, starts=4):
    """Infimum radius of circles through three points of the curve.

    The three-point, tangent-point and osculating limits are each sampled on
    a grid and the best samples polished by Nelder-Mead.
    """
    from scipy.optimize import minimize, minimize_scalar

    from .projgeom import circumradius_many

    t = np.arange(grid) / grid
    x = curve.eval(t)
    tx = _unit_tangents(curve, t)
    i, j, k = np.array(list(combinations(range(grid), 3))).T
    r3 = circumradius_many(x[i], x[j], x[k])
    r3 = np.where(np.isfinite(r3), r3, np.inf)

    d = x[None] - x[:, None]
    along = np.einsum("ijk,ik->ij", d, tx)[..., None] * tx[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.sum(d * d, -1) / (2.0 * np.linalg.norm(d - along, axis=-1))
    np.fill_diagonal(r2, np.inf)
    gap = np.abs(t[:, None] - t[None])
    r2[np.minimum(gap, 1 - gap) < MERGE_GAP] = np.inf

    tf = np.arange(fine) / fine
    _unit_tangents(curve, tf)
    r1 = osculating_radius(curve, tf)

    opts = {"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000}
    best = (np.inf, (), ThicknessKind.THREE_POINT)
    for a in np.argsort(r3)[:starts]:
        s0 = t[[i[a], j[a], k[a]]]
        res = minimize(lambda s: _three_point(curve, s), s0, method="Nelder-Mead", options=opts)
        val = min(float(res.fun), float(r3[a]))
        s = res.x if res.fun <= r3[a] else s0
        if val < best[0]:
            best = (val, tuple(sorted(float(v) % 1.0 for v in s)), ThicknessKind.THREE_POINT)
    flat = np.argsort(r2, axis=None)[:starts]
    for a in flat:
        p, q = np.unravel_index(a, r2.shape)
        s0 = np.array([t[p], t[q]])
        res = minimize(lambda s: _tangent_point(curve, s), s0, method="Nelder-Mead", options=opts)
        val = min(float(res.fun), float(r2[p, q]))
        s = res.x if res.fun <= r2[p, q] else s0
        if val < best[0]:
            a_, b_ = (float(v) % 1.0 for v in s)
            best = (val, (a_, a_, b_), ThicknessKind.TANGENT_POINT)
    a = int(np.argmin(r1))
    h = 1.0 / fine
    res = minimize_scalar(
        lambda s: float(osculating_radius(curve, s % 1.0)),
        bounds=(tf[a] - h, tf[a] + h),
        method="bounded",
        options={"xatol": 1e-12},
    )
    val = min(float(res.fun), float(r1[a]))
    if val < best[0]:
        s = float(res.x) % 1.0 if res.fun <= r1[a] else float(tf[a])
        best = (val, (s, s, s), ThicknessKind.OSCULATING)
    tau, triple, kind = best
    if not tau > 0:
        raise CurveError("thickness is not positive; curve is not embedded")
    return ThicknessReport(float(tau), triple, kind)


# ---------------------------------------------------------------------------
# separation


class SeparationViolation(AssertionError):
    pass


@dataclass(frozen=True)
class SeparationReport:
    tau: float
    min_distances: tuple
    random_sets: int
    random_close: int

    def to_dict(self):
        return {
            "tau": self.tau,
            "min_distances": list(self.min_distances),
            "random_sets": self.random_sets,
            "random_close": self.random_close,
        }


def minimal_pair(points):
    """Indices (i, j), i < j, of the closest pair."""
    x = np.asarray(points, dtype=float)
    d = np.linalg.norm(x[:, None] - x[None], axis=-1)
    iu = np.triu_indices(len(x), 1)
    a = int(np.argmin(d[iu]))
    return int(iu[0][a]), int(iu[1][a]), float(d[iu][a])


def cyclically_adjacent(i, j, n):
    return (j - i) % n in (1, n - 1)


def check_separation(curve, sols, tau=None, n_random=500, rng=None, tol=1e-6):
    """Assert the 2 tau separation bound on solutions and the adjacency of close pairs.

    Random parameter-sorted 6-point sets with a pair closer than 2 tau must
    have that minimal pair cyclically adjacent.
    """
    if tau is None:
        tau = thickness(curve).tau
    mins = []
    for s in sols:
        _, _, dmin = minimal_pair(s.points)
        if dmin < 2 * tau - tol:
            raise SeparationViolation(
                f"solution at t={np.round(s.t, 6).tolist()} has a pair at {dmin:.6g} < 2 tau = {2 * tau:.6g}"
            )
        mins.append(dmin)
    rng = np.random.default_rng(0) if rng is None else rng
    close = 0
    for _ in range(n_random):
        ts = np.sort(rng.random(6))
        # bias half the draws towards a near pair
        if rng.random() < 0.5:
            k = rng.integers(6)
            ts[k] = (ts[(k + 1) % 6] - rng.random() * 0.05) % 1.0
            ts = np.sort(ts)
        x = curve.eval(ts)
        i, j, dmin = minimal_pair(x)
        if dmin < 2 * tau - tol:
            close += 1
            if not cyclically_adjacent(i, j, 6):
                raise SeparationViolation(f"close pair ({i}, {j}) not adjacent at t={ts.tolist()}")
    return SeparationReport(float(tau), tuple(mins), n_random, close)


# ---------------------------------------------------------------------------
# invariant


@dataclass
class InvariantReport:
    solutions: list
    kappa: int | None
    count: int
    parity: int
    a2: int | None
    transverse: bool

    @property
    def matches_a2(self):
        if self.a2 is None or self.kappa is None:
            return None
        return abs(self.kappa) == abs(self.a2)

    def to_dict(self):
        return {
            "solutions": [s.to_dict() for s in self.solutions],
            "kappa": self.kappa,
            "count": self.count,
            "parity": self.parity,
            "a2": self.a2,
            "transverse": self.transverse,
            "matches_a2": self.matches_a2,
        }


def s3_model(curve):
    """The S^3 curve searched for a given input curve.

    R^3 curves are centred and scaled to unit RMS radius before lifting.
    """
    if curve.ambient == Ambient.S3:
        return curve
    x = curve.sample(4096)[1]
    center = x.mean(axis=0)
    rms = float(np.sqrt(np.mean(np.sum((x - center) ** 2, axis=1))))
    return curve.lift(scale=1.0 / rms, center=center)


def avoiding_pole(curve, n=4096):
    """A pole of S^3 far from an S^3 curve, chosen deterministically."""
    x = curve.sample(n)[1]
    cands = np.vstack([np.eye(4), -np.eye(4), np.random.default_rng(7).normal(size=(64, 4))])
    cands /= np.linalg.norm(cands, axis=1, keepdims=True)
    far = [float(np.min(np.linalg.norm(x - c, axis=1))) for c in cands]
    return cands[int(np.argmax(far))]


def r3_model(curve):
    """The R^3 curve on which hexagons are classified."""
    if curve.ambient == Ambient.R3:
        return curve
    pole = avoiding_pole(curve)
    if np.allclose(pole, [0, 0, 0, 1]):
        return curve.project()
    return curve.project(pole)


def kappa(curve, basepoint=0.0, grid_per_axis=12, workers=1, with_a2=True):
    """Signed count of based prism solutions, compared with a2 of the knot."""
    from .gauss import DirectionDisagreement, a2_of_curve

    sols = find_inscribed_prisms(s3_model(curve), basepoint, grid_per_axis, workers=workers)
    transverse = all(s.transverse for s in sols)
    k = sum(s.sign for s in sols) if transverse else None
    if not transverse:
        warnings.warn("non-transverse solutions present; reporting parity only", stacklevel=2)
    a2v = None
    if with_a2:
        try:
            a2v = a2_of_curve(r3_model(curve))
        except DirectionDisagreement as exc:
            log.warning("a2 unavailable: %s", exc)
    return InvariantReport(sols, k, len(sols), len(sols) % 2, a2v, transverse)


# ---------------------------------------------------------------------------
# certification

CERTIFY_BUDGET = 10_000
MIN_MARGIN = 1e-6
_ETAS = (3e-2, 1e-2, 3e-3, 1e-3)
# segment pairs (a, a+1) and (a+3, a+4) that touch on a prism configuration
_TOUCHING = ((0, 1, 3, 4), (1, 2, 4, 5), (2, 3, 5, 0))


class Branch(str, Enum):
    SPATIAL = "NonCoplanar"
    COPLANAR = "Coplanar"
    COCIRCULAR = "Cocircular"


@dataclass
class CertifiedTrefoil:
    t: np.ndarray
    points: np.ndarray
    hexclass: object
    branch: Branch
    classifier_calls: int

    def to_dict(self):
        return {
            "status": "Certified",
            "t": [float(v) for v in self.t],
            "points": self.points.tolist(),
            "kind": self.hexclass.kind.value,
            "margin": float(self.hexclass.margin),
            "branch": self.branch.value,
            "classifier_calls": self.classifier_calls,
        }


@dataclass
class Unresolved:
    branch: Branch | None
    classifier_calls: int
    reason: str

    def __bool__(self):
        return False

    def to_dict(self):
        return {
            "status": "Unresolved",
            "branch": self.branch.value if self.branch else None,
            "classifier_calls": self.classifier_calls,
            "reason": self.reason,
        }


def twist_volumes(x):
    """Signed volumes of the three touching segment pairs, scaled by diam^3."""
    x = np.asarray(x, dtype=float)
    diam = np.max(np.linalg.norm(x[:, None] - x[None], axis=-1))
    out = []
    for a, b, c, d in _TOUCHING:
        out.append(np.linalg.det(np.stack([x[b] - x[a], x[c] - x[a], x[d] - x[a]])))
    return np.array(out) / diam**3


def _solve_targets(f, t0, target, iters=30, step=1e-7):
    """Minimum-norm Gauss-Newton for f(t) = target starting at t0."""
    t = np.array(t0, dtype=float)
    for _ in range(iters):
        r = f(t) - target
        if np.max(np.abs(r)) < 1e-3 * np.max(np.abs(target)):
            return t
        jac = np.empty((len(r), len(t)))
        for k in range(len(t)):
            e = np.zeros(len(t))
            e[k] = step
            jac[:, k] = (f(t + e) - f(t - e)) / (2 * step)
        dt, *_ = np.linalg.lstsq(jac, -r, rcond=1e-10)
        big = np.max(np.abs(dt))
        if not np.isfinite(big):
            return None
        if big > 0.02:
            dt *= 0.02 / big
        t = t + dt
    r = f(t) - target
    return t if np.max(np.abs(r)) < 0.1 * np.max(np.abs(target)) else None


def _branch(x, tol=1e-8):
    from .projgeom import fit_circle

    if affine_rank(x, tol * max(1.0, float(np.max(np.abs(x))))) > 2:
        return Branch.SPATIAL
    center, radius, _ = fit_circle(x)
    if np.max(np.abs(np.linalg.norm(x - center, axis=1) - radius)) < tol * max(radius, 1.0):
        return Branch.COCIRCULAR
    return Branch.COPLANAR


def _height_patterns(curve, t, x):
    """Sign patterns of heights above the plane of ``x`` that respect sidedness."""
    from .curve import IndeterminateContact, NoContact, PlaneR3, SideClass, plane_contact

    center = x.mean(axis=0)
    normal = np.linalg.svd(x - center)[2][-1]
    plane = PlaneR3.through(center, normal)
    choices = []
    for ti in t:
        try:
            side = plane_contact(curve, plane, ti, at_tol=1e-7).side_class
        except (NoContact, IndeterminateContact):
            side = SideClass.TWO_SIDED
        if side == SideClass.ONE_SIDED_POSITIVE:
            choices.append((1,))
        elif side == SideClass.ONE_SIDED_NEGATIVE:
            choices.append((-1,))
        else:
            choices.append((1, -1))
    from itertools import product

    return plane, [np.array(p, dtype=float) for p in product(*choices)]


def certify_trefoil(curve, sol, budget=CERTIFY_BUDGET, rng=None, min_margin=MIN_MARGIN):
    """Move a prism solution along the curve onto an inscribed trefoil hexagon.

    ``curve`` is the R^3 or S^3 curve the solution parameters refer to; S^3
    curves are classified after stereographic projection from a pole far
    from the curve.
    """
    from .hexknot import classify_hexagon

    r3 = r3_model(curve)
    t = np.asarray(sol.t, dtype=float)
    x = r3.eval(t)
    branch = _branch(x)
    calls = 0
    best = None

    def consider(tc):
        nonlocal calls, best
        if tc is None or not _ordered(tc):
            return
        calls += 1
        cls = classify_hexagon(r3.eval(tc))
        if cls.is_trefoil and (best is None or cls.margin > best[1].margin):
            best = (np.array(tc), cls)

    targets = []
    if branch != Branch.SPATIAL:
        plane, patterns = _height_patterns(r3, t, x)
        diam = float(np.max(np.linalg.norm(x[:, None] - x[None], axis=-1)))
        for eta in _ETAS:
            for pat in patterns:
                targets.append((lambda tt: plane.height(r3.eval(tt)) / diam, eta * pat))
    signs = [np.array(s, dtype=float) for s in ((1, 1, 1), (-1, -1, -1))]
    signs += [np.array(s, dtype=float) for s in ((1, 1, -1), (1, -1, 1), (-1, 1, 1), (-1, -1, 1), (-1, 1, -1), (1, -1, -1))]
    for eta in _ETAS:
        for s in signs[:2]:
            targets.append((lambda tt: twist_volumes(r3.eval(tt)), eta * s))
    for f, target in targets:
        if calls >= budget:
            break
        consider(_solve_targets(f, t, target))
    if best is None:
        for eta in _ETAS:
            for s in signs[2:]:
                if calls >= budget:
                    break
                consider(_solve_targets(lambda tt: twist_volumes(r3.eval(tt)), t, eta * s))
    rng = np.random.default_rng(0) if rng is None else rng
    # bounded local search: explore around t until a trefoil appears, then climb the margin
    scale = 1e-2
    stall = 0
    while calls < budget and stall < 200:
        centre = best[0] if best is not None else t
        before = None if best is None else best[1].margin
        consider(centre + scale * rng.normal(size=6))
        if best is not None and (before is None or best[1].margin > before):
            stall = 0
        else:
            stall += 1
            if best is None and stall % 50 == 0:
                scale *= 2.0
    if best is None or best[1].margin <= min_margin:
        return Unresolved(branch, calls, "no trefoil hexagon found within the search budget")
    tc, cls = best
    return CertifiedTrefoil(_normalize_ts(tc), r3.eval(tc), cls, branch, calls)


# ---------------------------------------------------------------------------
# symmetries of the standard S^3 trefoil

_TAU1_PERM = (0, 5, 4, 3, 2, 1)
_TAU2_PERM = (3, 4, 5, 0, 1, 2)


def tau1(points):
    """Negate coordinates 2 and 4, then relabel (x1, x6, x5, x4, x3, x2)."""
    x = np.array(points, dtype=float) * np.array([1, -1, 1, -1])
    return x[list(_TAU1_PERM)]


def tau2(points):
    """Negate coordinates 3 and 4, then relabel (x4, x5, x6, x1, x2, x3)."""
    x = np.array(points, dtype=float) * np.array([1, 1, -1, -1])
    return x[list(_TAU2_PERM)]


def tau1_params(t):
    """Parameter form of :func:`tau1` on the curve (cos 4 pi t, sin 4 pi t, cos 6 pi t, sin 6 pi t) / sqrt 2."""
    t = -np.asarray(t, dtype=float)
    return _normalize_ts(t[list(_TAU1_PERM)])


def tau2_params(t):
    """Parameter form of :func:`tau2`: every point moves by half a period."""
    t = np.asarray(t, dtype=float) + 0.5
    return _normalize_ts(t[list(_TAU2_PERM)])


# ---------------------------------------------------------------------------
# quadrisecants

LINE_TOL = 1e-8


def _alternating_orders():
    """Orders along the line equivalent to (1, 3, 2, 4) under relabelling the start and reversal."""
    base = (0, 2, 1, 3)
    out = set()
    for k in range(4):
        o = tuple((v + k) % 4 for v in base)
        out.add(o)
        out.add(o[::-1])
    return frozenset(out)


@dataclass(frozen=True)
class QuadrisecantConfig:
    s: tuple
    point: np.ndarray
    direction: np.ndarray
    order: tuple
    alternating: bool
    residual: float

    def to_dict(self):
        return {
            "s": list(self.s),
            "point": [float(v) for v in self.point],
            "direction": [float(v) for v in self.direction],
            "order": list(self.order),
            "alternating": self.alternating,
            "residual": self.residual,
        }


def _perp_frame(d):
    d = d / np.linalg.norm(d)
    a = np.eye(3)[int(np.argmin(np.abs(d)))]
    u = np.cross(d, a)
    u /= np.linalg.norm(u)
    return d, u, np.cross(d, u)


def _quad_residual(curve, z, frame):
    d0, u0, v0 = frame
    d = d0 + z[4] * u0 + z[5] * v0
    d, u, v = _perp_frame(d)
    x = curve.eval(z[:4] % 1.0)
    w = x[1:] - x[0]
    return np.concatenate([w @ u, w @ v])


def line_fit(points):
    """Least-squares line: (point, unit direction, max distance of the points)."""
    x = np.asarray(points, dtype=float)
    c = x.mean(axis=0)
    d = np.linalg.svd(x - c)[2][0]
    r = (x - c) - np.outer((x - c) @ d, d)
    return c, d, float(np.max(np.linalg.norm(r, axis=1)))


def _polish_quad(curve, s0, iters=40, step=1e-8):
    x = curve.eval(np.asarray(s0) % 1.0)
    _, d0, _ = line_fit(x)
    frame = _perp_frame(d0)
    z = np.concatenate([s0, [0.0, 0.0]])
    for _ in range(iters):
        r = _quad_residual(curve, z, frame)
        if np.max(np.abs(r)) < 1e-14:
            break
        jac = np.empty((6, 6))
        for k in range(6):
            e = np.zeros(6)
            e[k] = step
            jac[:, k] = (_quad_residual(curve, z + e, frame) - _quad_residual(curve, z - e, frame)) / (2 * step)
        dz, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        if not np.all(np.isfinite(dz)):
            return None
        big = np.max(np.abs(dz[:4]))
        if big > 0.02:
            dz *= 0.02 / big
        z = z + dz
    return z[:4]


def _quad_seeds(curve, grid, chunk=64):
    """Secant pairs on a grid whose line passes near two more sample points."""
    n_line = 4 * grid
    tl = np.arange(n_line) / n_line
    xl = curve.eval(tl)
    ts = np.arange(grid) / grid
    xs = curve.eval(ts)
    scale = float(np.max(np.linalg.norm(xl - xl.mean(axis=0), axis=1)))
    thresh = 4.0 * scale / grid
    seeds = []
    pairs = [(i, j) for i in range(grid) for j in range(i + 2, grid) if j - i < grid - 1]
    for c0 in range(0, len(pairs), chunk):
        ij = np.array(pairs[c0 : c0 + chunk])
        a, b = xs[ij[:, 0]], xs[ij[:, 1]]
        d = (b - a) / np.linalg.norm(b - a, axis=1, keepdims=True)
        w = xl[None] - a[:, None]
        dist = np.linalg.norm(w - np.einsum("mnk,mk->mn", w, d)[..., None] * d[:, None], axis=-1)
        left = np.roll(dist, 1, axis=1)
        right = np.roll(dist, -1, axis=1)
        is_min = (dist <= left) & (dist < right) & (dist < thresh)
        for m in range(len(ij)):
            ta, tb = ts[ij[m]]
            mins = [tl[k] for k in np.flatnonzero(is_min[m]) if min(abs(tl[k] - ta), abs(tl[k] - tb)) > 1.5 / grid]
            for p, q in combinations(mins, 2):
                seeds.append(np.sort([ta, tb, p, q]))
    return seeds


def find_quadrisecants(curve, grid=96, min_gap=1e-4):
    """Lines meeting an R^3 curve in four points, found by seeded Newton on collinearity."""
    if curve.ambient != Ambient.R3:
        raise CurveError("quadrisecants need an R3 curve")
    alternating = _alternating_orders()
    found = []
    for s0 in _quad_seeds(curve, grid):
        try:
            s = _polish_quad(curve, s0)
        except np.linalg.LinAlgError:
            continue
        if s is None:
            continue
        s = np.sort(s % 1.0)
        gaps = np.diff(np.append(s, s[0] + 1.0))
        if np.min(gaps) < min_gap:
            continue
        x = curve.eval(s)
        c, d, res = line_fit(x)
        if res > LINE_TOL:
            continue
        if any(_torus_dist(s, q.s) < DEDUP_RADIUS for q in found):
            continue
        order = tuple(int(k) for k in np.argsort((x - c) @ d))
        if order[0] > order[-1]:
            order = order[::-1]
            d = -d
        found.append(
            QuadrisecantConfig(tuple(float(v) for v in s), c, d, order, order in alternating, res)
        )
    found.sort(key=lambda q: q.s)
    return found


def conjecture1_experiment(curve, trefoils, quadrisecants):
    """Proximity of certified trefoil vertices to alternating quadrisecant points.

    One row per (trefoil, alternating quadrisecant) pair with the value
    max_i min_j |g(t_i) - g(s_j)|.
    """
    r3 = r3_model(curve)
    rows = []
    for a, tre in enumerate(trefoils):
        xt = r3.eval(np.asarray(tre.t) % 1.0)
        for b, q in enumerate(quadrisecants):
            if not q.alternating:
                continue
            xq = r3.eval(np.asarray(q.s))
            dist = np.linalg.norm(xt[:, None] - xq[None], axis=-1)
            rows.append({"trefoil": a, "quadrisecant": b, "proximity": float(np.max(np.min(dist, axis=1)))})
    return rows
