"""
Analytic knot models
====================

Closed curves with period 1 given as truncated Fourier series, in R^3 or
natively on the unit 3-sphere in R^4. Curves obtained by stereographic
lifting/projection of such a series are represented by :class:`MappedCurve`,
whose derivatives are computed exactly with truncated power series.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * np.pi
MAX_DERIV_ORDER = 6
DEFAULT_DEGREE = 8
NORTH_POLE = np.array([0.0, 0.0, 0.0, 1.0])


class CurveError(ValueError):
    pass


class PoleError(ValueError):
    """Raised when a point to be projected sits at the projection pole."""


# ---------------------------------------------------------------------------
# truncated power series helpers
#
# A series is an array of shape (m+1, ...) holding Taylor coefficients
# c_k = f^(k)(t0) / k!, k = 0..m.


def _series_mul(a, b):
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    m = out.shape[0]
    for k in range(m):
        for j in range(k + 1):
            out[k] += a[j] * b[k - j]
    return out


def _series_recip(d):
    if np.any(np.abs(d[0]) < 1e-300):
        raise PoleError("reciprocal of a series with vanishing constant term")
    q = np.zeros_like(d)
    q[0] = 1.0 / d[0]
    for k in range(1, d.shape[0]):
        acc = np.zeros_like(d[0])
        for j in range(1, k + 1):
            acc = acc + d[j] * q[k - j]
        q[k] = -acc / d[0]
    return q


def _factorials(m):
    return np.array([float(np.prod(np.arange(1, k + 1))) for k in range(m + 1)])


# ---------------------------------------------------------------------------
# stereographic projection, pole (0, 0, 0, 1)


def lift_to_s3(x):
    """Inverse stereographic projection R^3 -> S^3 (pole at (0,0,0,1)).

    ``lift(x) = (2x, |x|^2 - 1) / (|x|^2 + 1)``. Works on arrays of shape
    (..., 3).
    """
    x = np.asarray(x, dtype=float)
    n2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2.0 * x, n2 - 1.0], axis=-1) / (n2 + 1.0)


def project_from_s3(y, pole=None):
    """Stereographic projection S^3 -> R^3.

    With ``pole`` given, S^3 is first rotated so that the pole goes to
    (0, 0, 0, 1). Raises :class:`PoleError` for points at the pole.
    """
    y = np.asarray(y, dtype=float)
    if pole is not None:
        y = y @ rotation_to_north(pole).T
    denom = 1.0 - y[..., 3:]
    if np.any(np.abs(denom) < 1e-14):
        raise PoleError("point coincides with the projection pole")
    return y[..., :3] / denom


def rotation_to_north(pole):
    """Orthogonal 4x4 matrix with determinant +1 sending ``pole`` to (0,0,0,1)."""
    q = np.asarray(pole, dtype=float)
    q = q / np.linalg.norm(q)
    v = q - NORTH_POLE
    if np.linalg.norm(v) < 1e-15:
        return np.eye(4)
    v = v / np.linalg.norm(v)
    h = np.eye(4) - 2.0 * np.outer(v, v)
    # Householder has det -1; flip a coordinate orthogonal to the target.
    h[0] *= -1.0
    return h


# ---------------------------------------------------------------------------
# curves


class Ambient(str, Enum):
    R3 = "R3"
    S3 = "S3"


class _CurveOps:
    """Shared evaluation surface; subclasses implement :meth:`taylor`."""

    ambient: Ambient
    dim: int

    def taylor(self, t, order):
        raise NotImplementedError

    def eval(self, t):
        return self.taylor(t, 0)[0]

    def __call__(self, t):
        return self.eval(t)

    def deriv(self, t, order=1):
        if not 1 <= order <= MAX_DERIV_ORDER:
            raise CurveError(f"derivative order must be in 1..{MAX_DERIV_ORDER}, got {order}")
        c = self.taylor(t, order)
        return c[order] * _factorials(order)[order]

    def sample(self, n):
        t = np.arange(n) / n
        return t, self.eval(t)

    def lift(self, scale=1.0, center=None):
        if self.ambient != Ambient.R3:
            raise CurveError("lift requires an R3 curve")
        return MappedCurve(self, "lift", scale=scale, center=center)

    def project(self, pole=None):
        if self.ambient != Ambient.S3:
            raise CurveError("project requires an S3 curve")
        return MappedCurve(self, "project", pole=pole)


@dataclass(frozen=True, eq=False)
class KnotCurve(_CurveOps):
    """Trigonometric polynomial curve with period 1.

    ``coefficients`` has shape (dim, degree+1, 2); entry ``[c, k]`` holds
    the pair (a_k, b_k) multiplying cos(2 pi k t) and sin(2 pi k t) in
    coordinate ``c``.
    """

    ambient: Ambient
    coefficients: np.ndarray
    name: str = ""

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        amb = Ambient(self.ambient)
        if coef.ndim != 3 or coef.shape[2] != 2:
            raise CurveError("coefficients must have shape (dim, degree+1, 2)")
        want = 3 if amb == Ambient.R3 else 4
        if coef.shape[0] != want:
            raise CurveError(f"{amb.value} curve needs {want} coordinates, got {coef.shape[0]}")
        if not np.all(np.isfinite(coef)):
            raise CurveError("non-finite coefficient")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "ambient", amb)

    @property
    def dim(self):
        return self.coefficients.shape[0]

    @property
    def degree(self):
        return self.coefficients.shape[1] - 1

    def taylor(self, t, order):
        t = np.asarray(t, dtype=float)
        omega = TWO_PI * np.arange(self.degree + 1)
        phase = np.multiply.outer(t, omega)  # (..., K)
        a = self.coefficients[:, :, 0]  # (dim, K)
        b = self.coefficients[:, :, 1]
        fact = _factorials(order)
        out = np.empty((order + 1,) + t.shape + (self.dim,))
        for m in range(order + 1):
            shifted = phase + m * np.pi / 2.0
            w = omega**m
            val = np.cos(shifted) @ (a * w).T + np.sin(shifted) @ (b * w).T
            out[m] = val / fact[m]
        return out

    def to_spec(self):
        return {
            "ambient": self.ambient.value,
            "degree": self.degree,
            "coefficients": self.coefficients.tolist(),
        }

    def reversed(self):
        """Same curve traversed backwards, t -> -t."""
        coef = self.coefficients.copy()
        coef[:, :, 1] *= -1.0
        return KnotCurve(self.ambient, coef, name=self.name + "-reversed" if self.name else "")


@dataclass(frozen=True, eq=False)
class MappedCurve(_CurveOps):
    """Stereographic image of another curve.

    ``kind == "lift"``: R^3 -> S^3 of ``(base - center) * scale``.
    ``kind == "project"``: S^3 -> R^3 from ``pole`` (default (0,0,0,1)).
    """

    base: _CurveOps
    kind: str
    scale: float = 1.0
    center: np.ndarray | None = None
    pole: np.ndarray | None = None
    name: str = field(default="")

    def __post_init__(self):
        if self.kind not in ("lift", "project"):
            raise CurveError(f"unknown mapping {self.kind!r}")
        if self.kind == "lift" and self.scale <= 0:
            raise CurveError("scale must be positive")
        if not self.name:
            object.__setattr__(self, "name", f"{self.kind}({getattr(self.base, 'name', '')})")

    @property
    def ambient(self):
        return Ambient.S3 if self.kind == "lift" else Ambient.R3

    @property
    def dim(self):
        return 4 if self.kind == "lift" else 3

    def taylor(self, t, order):
        x = self.base.taylor(t, order)
        if self.kind == "lift":
            if self.center is not None:
                x = x.copy()
                x[0] = x[0] - np.asarray(self.center)
            x = x * self.scale
            n2 = _series_mul(x[..., 0], x[..., 0])
            for c in range(1, 3):
                n2 = n2 + _series_mul(x[..., c], x[..., c])
            one = np.zeros_like(n2)
            one[0] = 1.0
            q = _series_recip(n2 + one)
            top = np.stack([_series_mul(2.0 * x[..., c], q) for c in range(3)], axis=-1)
            last = _series_mul(n2 - one, q)
            return np.concatenate([top, last[..., None]], axis=-1)
        if self.pole is not None:
            x = x @ rotation_to_north(self.pole).T
        one = np.zeros_like(x[..., 3])
        one[0] = 1.0
        q = _series_recip(one - x[..., 3])
        return np.stack([_series_mul(x[..., c], q) for c in range(3)], axis=-1)


# ---------------------------------------------------------------------------
# presets


def _from_terms(dim, terms, degree=DEFAULT_DEGREE):
    """Build a coefficient array from (coord, k, a, b) terms."""
    need = max([degree] + [k for _, k, _, _ in terms])
    coef = np.zeros((dim, need + 1, 2))
    for c, k, a, b in terms:
        coef[c, k, 0] += a
        coef[c, k, 1] += b
    return coef


def _torus_terms(p, q, big_r=2.0, small_r=1.0):
    # ((R + r cos qu) cos pu, (R + r cos qu) sin pu, r sin qu), u = 2 pi t
    h = small_r / 2.0
    terms = [
        (0, p, big_r, 0.0),
        (1, p, 0.0, big_r),
        (2, q, 0.0, small_r),
    ]
    # cos qu cos pu = (cos (p+q)u + cos (p-q)u) / 2
    # cos qu sin pu = (sin (p+q)u + sin (p-q)u) / 2
    terms += [(0, p + q, h, 0.0), (1, p + q, 0.0, h)]
    d = p - q
    if d >= 0:
        terms += [(0, d, h, 0.0), (1, d, 0.0, h)]
    else:
        terms += [(0, -d, h, 0.0), (1, -d, 0.0, -h)]
    return terms


PRESET_NAMES = (
    "paper-trefoil-s3",
    "great-circle-s3",
    "trefoil-r3",
    "figure-eight-r3",
    "torus(p,q)-r3",
)

_TORUS_RE = re.compile(r"^torus\((\d+),(\d+)\)-r3$")


def preset(name):
    """Named example curves.

    ``torus(p,q)-r3`` accepts any coprime positive p, q, e.g. ``torus(2,5)-r3``.
    """
    s = 1.0 / np.sqrt(2.0)
    if name == "paper-trefoil-s3":
        coef = _from_terms(4, [(0, 2, s, 0), (1, 2, 0, s), (2, 3, s, 0), (3, 3, 0, s)])
        return KnotCurve(Ambient.S3, coef, name=name)
    if name == "great-circle-s3":
        coef = _from_terms(4, [(0, 1, 1, 0), (1, 1, 0, 1)])
        return KnotCurve(Ambient.S3, coef, name=name)
    if name == "trefoil-r3":
        # (sin u + 2 sin 2u, cos u - 2 cos 2u, -sin 3u)
        coef = _from_terms(3, [(0, 1, 0, 1), (0, 2, 0, 2), (1, 1, 1, 0), (1, 2, -2, 0), (2, 3, 0, -1)])
        return KnotCurve(Ambient.R3, coef, name=name)
    if name == "figure-eight-r3":
        # ((2 + cos 2u) cos 3u, (2 + cos 2u) sin 3u, sin 4u)
        coef = _from_terms(
            3,
            [
                (0, 3, 2, 0), (0, 5, 0.5, 0), (0, 1, 0.5, 0),
                (1, 3, 0, 2), (1, 5, 0, 0.5), (1, 1, 0, 0.5),
                (2, 4, 0, 1),
            ],
        )
        return KnotCurve(Ambient.R3, coef, name=name)
    m = _TORUS_RE.match(name.replace(" ", ""))
    if m:
        p, q = int(m.group(1)), int(m.group(2))
        if p < 1 or q < 1 or np.gcd(p, q) != 1:
            raise CurveError(f"torus knot needs coprime positive p, q; got {p}, {q}")
        return KnotCurve(Ambient.R3, _from_terms(3, _torus_terms(p, q)), name=name)
    raise CurveError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


def circle_r3(radius=1.0, plane="xy", name=None):
    """Round circle in a coordinate plane of R^3 (used as planar test input)."""
    idx = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}[plane]
    coef = _from_terms(3, [(idx[0], 1, radius, 0), (idx[1], 1, 0, radius)])
    return KnotCurve(Ambient.R3, coef, name=name or f"circle-{plane}")


def ellipse_r3(a=2.0, b=1.0, name="ellipse"):
    coef = _from_terms(3, [(0, 1, a, 0), (1, 1, 0, b)])
    return KnotCurve(Ambient.R3, coef, name=name)


def curve_from_spec(spec):
    """Build a :class:`KnotCurve` from the JSON curve-spec dictionary."""
    try:
        amb = Ambient(spec["ambient"])
        coef = np.asarray(spec["coefficients"], dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise CurveError(f"malformed curve spec: {exc}") from exc
    if "degree" in spec and coef.ndim == 3 and coef.shape[1] != int(spec["degree"]) + 1:
        raise CurveError("degree does not match number of coefficient pairs")
    return KnotCurve(amb, coef, name=spec.get("name", "spec"))


def load_curve(path):
    with open(Path(path)) as fh:
        return curve_from_spec(json.load(fh))


def check_curve(curve, n=10_000, min_speed=1e-8):
    """Assert the sampled invariants: periodic, regular, on S^3 when native."""
    t = np.arange(n) / n
    x0 = curve.eval(t)
    x1 = curve.eval(t + 1.0)
    scale = max(1.0, float(np.max(np.abs(x0))))
    if np.max(np.abs(x0 - x1)) > 1e-12 * scale * 10:
        raise CurveError("curve is not 1-periodic")
    speed = np.linalg.norm(curve.deriv(t, 1), axis=-1)
    if np.min(speed) < min_speed:
        raise CurveError("derivative vanishes on the sample")
    if curve.ambient == Ambient.S3:
        if np.max(np.abs(np.linalg.norm(x0, axis=-1) - 1.0)) > 1e-12:
            raise CurveError("S3 curve leaves the unit sphere")
    return True


# ---------------------------------------------------------------------------
# planes and contact analysis


@dataclass(frozen=True)
class PlaneR3:
    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm < 1e-15:
            raise CurveError("plane normal must be nonzero")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @classmethod
    def through(cls, point, normal):
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(n, float(np.dot(n, point)))

    def height(self, x):
        return np.asarray(x) @ self.normal - self.offset


class SideClass(str, Enum):
    TWO_SIDED = "TwoSided"
    ONE_SIDED_POSITIVE = "OneSidedPositive"
    ONE_SIDED_NEGATIVE = "OneSidedNegative"


@dataclass(frozen=True)
class ContactReport:
    t0: float
    contact_order: int
    side_class: SideClass
    leading_coefficient: float


class NoContact(CurveError):
    pass


class IndeterminateContact(CurveError):
    """Contact order above the supported cap; reported rather than guessed."""


class DegeneratePlane(CurveError):
    pass


def plane_contact(curve, plane, t0, tol=1e-9, at_tol=1e-10):
    """Order and sidedness of the contact between ``curve`` and ``plane`` at t0.

    The n-th Taylor coefficient of the height function is compared against
    ``tol`` relative to the size of the n-th Taylor coefficient of the curve.
    """
    c = curve.taylor(float(t0), MAX_DERIV_ORDER)
    h0 = float(c[0] @ plane.normal - plane.offset)
    if abs(h0) > at_tol * max(1.0, float(np.linalg.norm(c[0]))):
        raise NoContact(f"curve is not on the plane at t0={t0} (height {h0:.3e})")
    for n in range(1, MAX_DERIV_ORDER + 1):
        hn = float(c[n] @ plane.normal)
        scale = max(1.0, float(np.linalg.norm(c[n])))
        if abs(hn) > tol * scale:
            if n % 2 == 1:
                side = SideClass.TWO_SIDED
            elif hn > 0:
                side = SideClass.ONE_SIDED_POSITIVE
            else:
                side = SideClass.ONE_SIDED_NEGATIVE
            return ContactReport(float(t0), n, side, hn)
    raise IndeterminateContact(f"contact order exceeds {MAX_DERIV_ORDER} at t0={t0}")


def _height_roots(curve, plane, n):
    t = np.arange(n + 1) / n
    x = curve.eval(t)
    h = plane.height(x)
    dh = curve.deriv(t, 1) @ plane.normal
    scale = max(1.0, float(np.max(np.abs(x))))
    if np.max(np.abs(h)) < 1e-10 * scale:
        raise DegeneratePlane("curve lies in the plane")

    def hf(s):
        return float(plane.height(curve.eval(s)))

    def dhf(s):
        return float(curve.deriv(s, 1) @ plane.normal)

    roots = []
    for i in range(n):
        a, b = t[i], t[i + 1]
        if h[i] == 0.0:
            roots.append(a)
            continue
        if h[i] * h[i + 1] < 0:
            roots.append(brentq(hf, a, b, xtol=1e-15, rtol=1e-15))
        elif dh[i] * dh[i + 1] < 0:
            # extremum of h in the cell: touching root if the extremum is on the plane
            s = brentq(dhf, a, b, xtol=1e-15, rtol=1e-15)
            if abs(hf(s)) < 1e-10 * scale:
                roots.append(s)
    # Newton polish
    out = []
    for r in roots:
        for _ in range(3):
            d = dhf(r)
            if abs(d) < 1e-8:
                break
            step = hf(r) / d
            if abs(step) > 1e-9:
                break
            r -= step
        out.append(r % 1.0)
    out.sort()
    dedup = []
    for r in out:
        if not dedup or min(abs(r - dedup[-1]), 1 - abs(r - dedup[-1])) > 1e-9:
            dedup.append(r)
    if len(dedup) > 1 and (1.0 - dedup[-1] + dedup[0]) < 1e-9:
        dedup.pop()
    return dedup


def plane_intersections(curve, plane, samples=2**14):
    """All points where ``curve`` meets ``plane``, each classified.

    Raises :class:`DegeneratePlane` if the curve lies in the plane or if the
    root count changes between ``samples`` and ``2 * samples``.
    """
    if curve.ambient != Ambient.R3:
        raise CurveError("plane intersections need an R3 curve")
    roots = _height_roots(curve, plane, samples)
    check = _height_roots(curve, plane, 2 * samples)
    if len(roots) != len(check):
        raise DegeneratePlane(
            f"root count unstable under refinement ({len(roots)} vs {len(check)})"
        )
    return [plane_contact(curve, plane, r) for r in roots]


def tangent_plane_angle(curve, plane, t):
    """Angle between ``plane`` and the tangent line of ``curve`` at t."""
    d = curve.deriv(t, 1)
    s = np.abs(d @ plane.normal) / np.linalg.norm(d, axis=-1)
    return np.arcsin(np.clip(s, 0.0, 1.0))


def bigangle_check(curve, plane, contact, delta=2e-3, samples=200, safety=0.5):
    """Check theta(t) >= C h(t)^(1 - 1/n) near a tangential contact.

    C is fitted from the sample closest to t0 (scaled by ``safety``) and the
    inequality is verified on the remaining samples with 0 < |t - t0| < delta.
    Returns (C, holds).
    """
    n = contact.contact_order
    if n < 2:
        raise CurveError("bigangle check needs a tangential contact (order >= 2)")
    offs = np.linspace(-delta, delta, 2 * samples + 1)
    offs = offs[offs != 0.0]
    offs = offs[np.argsort(np.abs(offs), kind="stable")]
    t = (contact.t0 + offs) % 1.0
    h = np.abs(plane.height(curve.eval(t)))
    theta = tangent_plane_angle(curve, plane, t)
    expo = 1.0 - 1.0 / n
    c = safety * theta[0] / h[0] ** expo
    return float(c), bool(np.all(theta >= c * h**expo))
