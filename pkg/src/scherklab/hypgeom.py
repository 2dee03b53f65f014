"""Hyperbolic plane kernel in the Poincare unit-disk model.

Distances, constant-curvature arcs (geodesics, hypercycles), horocycles and
horodisks, truncation of complete arcs, hyperbolic lengths and areas of
arc-bounded regions, plus a finite-difference curvature oracle that the test
suite uses to cross-check every constructed curve.

The metric is lambda(z)^2 (dx^2 + dy^2) with lambda = 2/(1-|z|^2), curvature
-1.  Every curve of constant geodesic curvature is a Euclidean circle or line
in this model, so constructions and intersections are closed form; lengths
and areas are evaluated by adaptive quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.integrate
from scipy.integrate import IntegrationWarning


def quad(f, a, b, **kw):
    """scipy quad with the roundoff warning silenced; the tail integrands hit
    the double-precision floor well below the tolerances used here."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return scipy.integrate.quad(f, a, b, **kw)

TAU = 2.0 * math.pi

__all__ = [
    "DiskPoint",
    "IdealPoint",
    "Horodisk",
    "ConstantCurvatureArc",
    "Circle",
    "QuadratureSpec",
    "BoundaryChain",
    "ChainPiece",
    "TruncatedRegion",
    "dist",
    "arc_between",
    "geodesic_curvature_oracle",
    "truncate",
    "horocycle_arc_length",
    "area",
    "gauss_bonnet_residual",
    "truncated_region",
    "disk_automorphism",
    "conformal_factor",
    "geodesic_direction",
    "arc_polyline_rows",
]


# ---------------------------------------------------------------------------
# points and basic metric quantities


def _canonical_angle(theta: float) -> float:
    t = math.fmod(theta, TAU)
    if t < 0.0:
        t += TAU
    if t >= TAU:  # fmod roundoff
        t -= TAU
    return t


@dataclass(frozen=True)
class DiskPoint:
    """Point of the hyperbolic plane in unit-disk coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (self.x * self.x + self.y * self.y < 1.0):
            raise ValueError(f"point ({self.x}, {self.y}) not inside the unit disk")

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class IdealPoint:
    """Point of the circle at infinity, stored as an angle in [0, 2*pi)."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _canonical_angle(float(self.theta)))

    @property
    def vec(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])


def _as_vec(p) -> np.ndarray:
    return p.vec if isinstance(p, (DiskPoint, IdealPoint)) else np.asarray(p, dtype=float)


def _is_ideal(p) -> bool:
    return isinstance(p, IdealPoint)


def conformal_factor(pts: np.ndarray) -> np.ndarray:
    """lambda(z) = 2 / (1 - |z|^2) for an (n,2) array of disk points."""
    pts = np.asarray(pts, dtype=float)
    r2 = np.sum(pts * pts, axis=-1)
    return 2.0 / (1.0 - r2)


def dist(p, q) -> float:
    """Hyperbolic distance between two interior points."""
    pv, qv = _as_vec(p), _as_vec(q)
    d2 = float(np.sum((pv - qv) ** 2))
    a = 1.0 - float(np.sum(pv * pv))
    b = 1.0 - float(np.sum(qv * qv))
    return math.acosh(1.0 + 2.0 * d2 / (a * b))


@dataclass(frozen=True)
class Horodisk:
    """Horodisk tangent to the unit circle at ``base``.

    ``size`` is the Euclidean diameter of the disk-model circle, which fixes
    the horodisk uniquely among the horocycles at the base point.
    """

    base: IdealPoint
    size: float

    def __post_init__(self):
        if not 0.0 < self.size < 1.0:
            raise ValueError(f"horodisk size {self.size} outside (0, 1)")

    @property
    def radius(self) -> float:
        return 0.5 * self.size

    @property
    def center(self) -> np.ndarray:
        return (1.0 - self.radius) * self.base.vec

    def contains(self, pts: np.ndarray, slack: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.hypot(*(pts - self.center).T) < self.radius - slack

    def disjoint_from(self, other: "Horodisk") -> bool:
        gap = np.hypot(*(self.center - other.center)) - self.radius - other.radius
        return bool(gap > -1e-14)


# ---------------------------------------------------------------------------
# circles, curvature bookkeeping, intersections
#
# Convention used throughout: an arc is oriented from endpoint a to endpoint
# b, and ``kappa`` is its hyperbolic geodesic curvature measured against the
# LEFT normal of that traversal (rotate the tangent by +90 degrees).  For a
# Euclidean circle the curvature toward its own center is
# (1 - |c|^2 + r^2) / (2r), constant along the circle.


def toward_center_curvature(center: np.ndarray, radius: float) -> float:
    c2 = float(np.sum(np.asarray(center, float) ** 2))
    return (1.0 - c2 + radius * radius) / (2.0 * radius)


def line_left_curvature(p0: np.ndarray, p1: np.ndarray) -> float:
    """Curvature of the straight chord p0 -> p1 w.r.t. its left normal."""
    d = np.asarray(p1, float) - np.asarray(p0, float)
    d = d / np.hypot(*d)
    n_left = np.array([-d[1], d[0]])
    return -float(np.dot(n_left, np.asarray(p0, float)))


@dataclass(frozen=True)
class Circle:
    """Full Euclidean circle inside the closed disk, as a sampleable curve.

    Used for geodesic circles and horocycles in curvature checks; traversal
    is counterclockwise, so the left normal points toward the center and the
    hyperbolic curvature w.r.t. it is ``toward_center_curvature``.
    """

    center: np.ndarray
    radius: float

    def point(self, tau) -> np.ndarray:
        t = TAU * np.asarray(tau, dtype=float)
        return np.stack(
            [self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)],
            axis=-1,
        )

    def velocity(self, tau) -> np.ndarray:
        t = TAU * np.asarray(tau, dtype=float)
        return TAU * self.radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    @property
    def kappa(self) -> float:
        return toward_center_curvature(self.center, self.radius)

    @staticmethod
    def geodesic_circle(hyp_radius: float) -> "Circle":
        return Circle(np.zeros(2), math.tanh(0.5 * hyp_radius))

    @staticmethod
    def horocycle(h: Horodisk) -> "Circle":
        return Circle(h.center, h.radius)


def circle_circle_intersections(c1, r1, c2, r2) -> list[np.ndarray]:
    """Intersection points of two Euclidean circles (0, 1 or 2 points)."""
    c1 = np.asarray(c1, float)
    c2 = np.asarray(c2, float)
    d = c2 - c1
    L = float(np.hypot(*d))
    if L < 1e-300:
        return []
    a = (L * L + r1 * r1 - r2 * r2) / (2.0 * L)
    h2 = r1 * r1 - a * a
    if h2 < -1e-13 * max(r1, r2) ** 2:
        return []
    h = math.sqrt(max(h2, 0.0))
    u = d / L
    v = np.array([-u[1], u[0]])
    base = c1 + a * u
    if h == 0.0:
        return [base]
    return [base + h * v, base - h * v]


def line_circle_intersections(p0, p1, c, r) -> list[np.ndarray]:
    """Intersections of the infinite line through p0, p1 with a circle."""
    p0 = np.asarray(p0, float)
    d = np.asarray(p1, float) - p0
    f = p0 - np.asarray(c, float)
    A = float(np.dot(d, d))
    B = 2.0 * float(np.dot(f, d))
    C = float(np.dot(f, f)) - r * r
    disc = B * B - 4.0 * A * C
    if disc < -1e-13 * max(1.0, A):
        return []
    disc = max(disc, 0.0)
    sq = math.sqrt(disc)
    return [p0 + ((-B + s * sq) / (2.0 * A)) * d for s in ((1.0, -1.0) if sq > 0 else (1.0,))]


# ---------------------------------------------------------------------------
# constant-curvature arcs


@dataclass(frozen=True)
class ConstantCurvatureArc:
    """Oriented arc of constant hyperbolic geodesic curvature |kappa| < 1.

    ``kappa`` is signed with respect to the left normal of the traversal from
    ``start`` to ``end``.  The arc is stored as a Euclidean circular arc
    (kind="circle": ``center``, ``radius``, angles ``t0`` -> ``t0 + sweep``)
    or a straight segment (kind="segment").
    """

    start: object  # DiskPoint | IdealPoint
    end: object
    kappa: float
    kind: str
    center: np.ndarray | None = None
    radius: float = 0.0
    t0: float = 0.0
    sweep: float = 0.0
    label: str = "generic"

    # -- sampling ---------------------------------------------------------

    def point(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.kind == "segment":
            p0, p1 = _as_vec(self.start), _as_vec(self.end)
            return p0 + np.multiply.outer(tau, p1 - p0)
        t = self.t0 + tau * self.sweep
        return np.stack(
            [self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)],
            axis=-1,
        )

    def velocity(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.kind == "segment":
            d = _as_vec(self.end) - _as_vec(self.start)
            return np.broadcast_to(d, tau.shape + (2,)).copy()
        t = self.t0 + tau * self.sweep
        return self.radius * self.sweep * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def sample(self, n: int, trim: float = 1e-7) -> np.ndarray:
        """n points along the arc, trimmed away from ideal endpoints."""
        lo = trim if _is_ideal(self.start) else 0.0
        hi = 1.0 - trim if _is_ideal(self.end) else 1.0
        return self.point(np.linspace(lo, hi, n))

    # -- derived quantities -------------------------------------------------

    def length(self, tol: float = 1e-10) -> float:
        """Hyperbolic length; finite only if both endpoints are interior."""
        if _is_ideal(self.start) or _is_ideal(self.end):
            return math.inf

        def f(t):
            z = self.point(t)
            v = self.velocity(t)
            return conformal_factor(z) * np.hypot(*v)

        val, _ = quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
        return val

    def reversed(self) -> "ConstantCurvatureArc":
        if self.kind == "segment":
            return replace(self, start=self.end, end=self.start, kappa=-self.kappa)
        return replace(
            self,
            start=self.end,
            end=self.start,
            kappa=-self.kappa,
            t0=self.t0 + self.sweep,
            sweep=-self.sweep,
        )

    def subarc(self, tau_a: float, tau_b: float) -> "ConstantCurvatureArc":
        """Compact subarc between parameters; endpoints become interior points."""
        if not 0.0 <= tau_a < tau_b <= 1.0:
            raise ValueError("subarc parameters must satisfy 0 <= a < b <= 1")
        pa, pb = self.point(tau_a), self.point(tau_b)
        if self.kind == "segment":
            return replace(self, start=DiskPoint(*pa), end=DiskPoint(*pb))
        return replace(
            self,
            start=DiskPoint(*pa),
            end=DiskPoint(*pb),
            t0=self.t0 + tau_a * self.sweep,
            sweep=(tau_b - tau_a) * self.sweep,
        )

    def param_of_point(self, p: np.ndarray) -> float:
        """Parameter tau of a point assumed to lie on the supporting curve."""
        p = np.asarray(p, float)
        if self.kind == "segment":
            p0, p1 = _as_vec(self.start), _as_vec(self.end)
            d = p1 - p0
            return float(np.dot(p - p0, d) / np.dot(d, d))
        ang = math.atan2(p[1] - self.center[1], p[0] - self.center[0])
        rel = math.fmod(ang - self.t0, TAU)
        if self.sweep >= 0:
            if rel < -1e-9:
                rel += TAU
        else:
            if rel > 1e-9:
                rel -= TAU
        return rel / self.sweep


def _circle_arc_between(a_vec, b_vec, center, radius, inside_test) -> tuple[float, float] | None:
    """(t0, sweep) for the arc of the circle from a to b passing inside_test."""
    ta = math.atan2(a_vec[1] - center[1], a_vec[0] - center[0])
    tb = math.atan2(b_vec[1] - center[1], b_vec[0] - center[0])
    sweep_ccw = math.fmod(tb - ta, TAU)
    if sweep_ccw <= 0:
        sweep_ccw += TAU
    for sweep in (sweep_ccw, sweep_ccw - TAU):
        mid = np.array(
            [
                center[0] + radius * math.cos(ta + 0.5 * sweep),
                center[1] + radius * math.sin(ta + 0.5 * sweep),
            ]
        )
        if inside_test(mid, abs(sweep)):
            return ta, sweep
    return None


def arc_between(a, b, kappa: float, side: int = +1, label: str = "generic") -> ConstantCurvatureArc:
    """Arc of constant curvature through two points of the closed disk.

    Parameters
    ----------
    a, b : IdealPoint or DiskPoint
        Endpoints; the arc is oriented from ``a`` to ``b``.
    kappa : float
        Requested signed geodesic curvature w.r.t. the left normal of the
        traversal, |kappa| < 1.
    side : {+1, -1}
        ``-1`` returns the mirror arc, whose measured signed curvature is
        ``-kappa``.

    The arc through two ideal endpoints is complete; the one through interior
    endpoints is the minor (embedded) arc.
    """
    if abs(kappa) >= 1.0:
        raise ValueError(f"|kappa| = {abs(kappa)} must be < 1")
    if side not in (+1, -1):
        raise ValueError("side must be +1 or -1")
    av, bv = _as_vec(a), _as_vec(b)
    if np.hypot(*(av - bv)) < 1e-12:
        raise ValueError("degenerate arc: endpoints coincide")
    keff = side * kappa

    both_ideal = _is_ideal(a) and _is_ideal(b)
    if both_ideal:
        def inside(mid, _sweep):
            return np.hypot(*mid) < 1.0
    else:
        def inside(mid, sweep):
            return np.hypot(*mid) < 1.0 and sweep <= math.pi + 1e-12

    # Candidate supporting circles: centers lie on the perpendicular bisector
    # of [a, b]; curvature toward center is (1 - |c|^2 + r^2) / (2r), which
    # squared gives a quadratic in the bisector parameter.
    m = 0.5 * (av + bv)
    chord = bv - av
    h = 0.5 * float(np.hypot(*chord))
    u = np.array([-chord[1], chord[0]]) / (2.0 * h)
    A = 1.0 - float(np.dot(m, m)) + h * h
    B = 2.0 * float(np.dot(m, u))
    k2 = keff * keff

    candidates: list[ConstantCurvatureArc] = []

    # straight chord: left curvature is -<n_left, p> for any p on the line
    chord_kappa = line_left_curvature(av, bv)
    if abs(chord_kappa - keff) < 1e-12:
        candidates.append(
            ConstantCurvatureArc(start=a, end=b, kappa=keff, kind="segment", label=label)
        )

    qa = B * B - 4.0 * k2
    qb = -2.0 * A * B
    qc = A * A - 4.0 * k2 * h * h
    roots: list[float] = []
    if keff == 0.0:
        # geodesic: orthogonality to the unit circle is linear in t
        if abs(B) > 1e-12:
            roots = [A / B]
    elif abs(qa) < 1e-14 * max(1.0, abs(qb), abs(qc)):
        if abs(qb) > 1e-300:
            roots = [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        scale = qb * qb + abs(4.0 * qa * qc)
        if disc < 0.0 and disc > -1e-10 * scale:
            disc = 0.0
        if disc >= 0.0:
            sq = math.sqrt(disc)
            roots = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)]
    seen: list[float] = []
    for t in roots:
        if any(abs(t - s) < 1e-7 * (1.0 + abs(t)) for s in seen):
            continue
        seen.append(t)
        span = _circle_arc_between(av, bv, m + t * u, math.sqrt(h * h + t * t), inside)
        if span is None:
            continue
        orient = 1.0 if span[1] > 0 else -1.0

        def kappa_left_of(tt):
            return orient * toward_center_curvature(m + tt * u, math.sqrt(h * h + tt * tt))

        if abs(kappa_left_of(t) - keff) > 1e-6:
            continue
        # polish the root: near kappa ~ 0 the quadratic has a double root and
        # sqrt noise leaves the curvature off by ~1e-8
        t = _secant(lambda tt: kappa_left_of(tt) - keff, t, t + 1e-6 * (1.0 + abs(t)))
        c = m + t * u
        r = math.sqrt(h * h + t * t)
        span = _circle_arc_between(av, bv, c, r, inside)
        if span is None or abs(kappa_left_of(t) - keff) > 1e-12:
            continue
        t0, sweep = span
        candidates.append(
            ConstantCurvatureArc(
                start=a, end=b, kappa=keff, kind="circle",
                center=c, radius=r, t0=t0, sweep=sweep, label=label,
            )
        )

    if not candidates:
        raise ValueError(
            f"no arc with curvature {keff} through the given endpoints"
        )
    if len(candidates) > 1:
        # interior near-degenerate ties: prefer the flatter (larger-radius) arc
        candidates.sort(key=lambda arc: 0.0 if arc.kind == "segment" else 1.0 / arc.radius)
    return candidates[0]


# ---------------------------------------------------------------------------
# geodesic directions and the curvature oracle


def _secant(f, x0: float, x1: float, iters: int = 40, tol: float = 1e-15) -> float:
    f0, f1 = f(x0), f(x1)
    for _ in range(iters):
        if abs(f1 - f0) < 1e-300:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        x0, f0, x1, f1 = x1, f1, x2, f(x2)
        if abs(f1) < tol:
            break
    return x1


def geodesic_direction(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Unit initial tangent at p of the geodesic from p to q (interior points)."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    # center of the circle through p, q orthogonal to the unit circle solves
    #   2 w.(q - p) = |q|^2 - |p|^2   and   2 w.p = 1 + |p|^2
    M = np.array([2.0 * (q - p), 2.0 * p])
    rhs = np.array([float(np.dot(q, q) - np.dot(p, p)), 1.0 + float(np.dot(p, p))])
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) < 1e-12 * max(1.0, float(np.hypot(*(q - p)))):
        d = q - p
        return d / np.hypot(*d)
    w = np.linalg.solve(M, rhs)
    radial = p - w
    tangent = np.array([-radial[1], radial[0]])
    tangent /= np.hypot(*tangent)
    if np.dot(tangent, q - p) < 0:
        tangent = -tangent
    return tangent


def geodesic_curvature_oracle(curve, n_samples: int = 20, step: float = 1e-3) -> np.ndarray:
    """Signed geodesic curvature along a curve by finite-difference turning.

    Independent of the curve's stored circle data: it uses only point samples
    and hyperbolic distances.  At each sample the curve is replaced by two
    short geodesic segments; the signed turning angle between them divided by
    the mean hyperbolic step estimates the curvature w.r.t. the left normal.
    """
    if n_samples < 3:
        raise ValueError("need at least 3 samples")
    if isinstance(curve, ConstantCurvatureArc):
        lo = 0.05 if _is_ideal(curve.start) else 0.0
        hi = 0.95 if _is_ideal(curve.end) else 1.0
        taus = np.linspace(lo, hi, n_samples)
    else:
        taus = np.linspace(0.0, 1.0, n_samples, endpoint=False)
    # samples too close to the ideal boundary cannot be resolved by finite
    # differences in double precision; skip them
    pts = np.atleast_2d(curve.point(taus))
    ok = 1.0 - np.sum(pts * pts, axis=-1) > 5e-2
    if not np.any(ok):
        raise ValueError("all samples too close to the ideal boundary")
    taus = taus[ok]
    out = np.empty(len(taus))
    for i, t in enumerate(taus):
        z = curve.point(t)
        v = curve.velocity(t)
        speed_hyp = conformal_factor(z) * np.hypot(*v)
        dt = step / float(speed_hyp)
        p1 = curve.point(t - dt)
        p3 = curve.point(t + dt)
        d_in = -geodesic_direction(z, p1)
        d_out = geodesic_direction(z, p3)
        turn = math.atan2(
            d_in[0] * d_out[1] - d_in[1] * d_out[0], float(np.dot(d_in, d_out))
        )
        ds = 0.5 * (dist(z, p1) + dist(z, p3))
        out[i] = turn / (2.0 * ds) * 2.0  # turn spans two half-steps
    return out


# ---------------------------------------------------------------------------
# truncation by horodisks


def _arc_horocycle_cut(arc: ConstantCurvatureArc, h: Horodisk) -> np.ndarray:
    """Intersection of the arc with the horocycle based at one of its ideal
    endpoints.  Both supporting curves pass through the base point, so the
    second intersection is the reflection of the base across their common
    symmetry axis; this stays well conditioned for tiny horodisks.
    """
    base = h.base.vec
    if arc.kind == "segment":
        p0 = _as_vec(arc.start)
        d = _as_vec(arc.end) - p0
        d = d / np.hypot(*d)
        foot = p0 + float(np.dot(h.center - p0, d)) * d
        q = 2.0 * foot - base
    else:
        axis = h.center - arc.center
        nrm = float(np.hypot(*axis))
        if nrm < 1e-300:
            raise ValueError("degenerate horodisk/arc configuration")
        axis = axis / nrm
        v = base - arc.center
        q = arc.center + 2.0 * float(np.dot(v, axis)) * axis - v
    if np.hypot(*(q - base)) < 0.2 * h.size:
        raise ValueError("horodisk is tangent to the arc; no clean cut")
    return q


def truncate(arc: ConstantCurvatureArc, h1: Horodisk, h2: Horodisk, tol: float = 1e-10):
    """Compact part of a complete arc outside the horodisks at its endpoints.

    Returns ``(subarc, hyperbolic_length)``.
    """
    if not (_is_ideal(arc.start) and _is_ideal(arc.end)):
        raise ValueError("truncate expects an arc with two ideal endpoints")
    ends = {
        "start": (arc.start.theta, h1),
        "end": (arc.end.theta, h2),
    }
    for name, (theta, h) in ends.items():
        if abs(_canonical_angle(theta - h.base.theta) % TAU) > 1e-9 and abs(
            _canonical_angle(theta - h.base.theta) - TAU
        ) > 1e-9:
            raise ValueError(f"horodisk at the {name} is not based at the arc endpoint")
    if not h1.disjoint_from(h2):
        raise ValueError("horodisks overlap")
    q1 = _arc_horocycle_cut(arc, h1)
    q2 = _arc_horocycle_cut(arc, h2)
    tau1 = arc.param_of_point(q1)
    tau2 = arc.param_of_point(q2)
    if not (0.0 < tau1 < tau2 < 1.0):
        raise ValueError("horodisks swallow the arc; no compact part remains")
    sub = arc.subarc(tau1, tau2)
    return sub, sub.length(tol=tol)


def horocycle_arc_length(
    h: Horodisk, region_boundary: list[ConstantCurvatureArc], tol: float = 1e-10
) -> float:
    """Hyperbolic length of the part of the horocycle inside a region.

    The region is given by its (closed, counterclockwise) boundary chain.
    """
    angles: list[float] = []
    for arc in region_boundary:
        based_here = any(
            _is_ideal(e) and _endpoints_match(e, h.base) for e in (arc.start, arc.end)
        )
        if based_here:
            pts = [_arc_horocycle_cut(arc, h)]
        elif arc.kind == "segment":
            pts = line_circle_intersections(_as_vec(arc.start), _as_vec(arc.end), h.center, h.radius)
        else:
            pts = circle_circle_intersections(arc.center, arc.radius, h.center, h.radius)
        for p in pts:
            tau = arc.param_of_point(p)
            if -1e-9 <= tau <= 1.0 + 1e-9:
                # skip the tangency with the unit circle at the base point
                if np.hypot(*(p - h.base.vec)) < 1e-9:
                    continue
                angles.append(math.atan2(p[1] - h.center[1], p[0] - h.center[0]))
    poly = chain_polyline(region_boundary, per_arc=600)
    if not angles:
        mid = h.center  # whole horocycle either inside or outside
        return _horo_len(h, 0.0, TAU, tol) if _winding_inside(mid, poly) else 0.0
    angles = sorted(_canonical_angle(t) for t in angles)
    total = 0.0
    for i, t_lo in enumerate(angles):
        t_hi = angles[(i + 1) % len(angles)]
        if t_hi <= t_lo:
            t_hi += TAU
        t_mid = 0.5 * (t_lo + t_hi)
        mid = h.center + h.radius * np.array([math.cos(t_mid), math.sin(t_mid)])
        if np.hypot(*mid) < 1.0 and _winding_inside(mid, poly):
            total += _horo_len(h, t_lo, t_hi, tol)
    return total


def _horo_len(h: Horodisk, t_lo: float, t_hi: float, tol: float) -> float:
    def f(t):
        z = h.center + h.radius * np.array([math.cos(t), math.sin(t)])
        return conformal_factor(z) * h.radius

    val, _ = quad(f, t_lo, t_hi, epsabs=tol, epsrel=tol, limit=200)
    return val


# ---------------------------------------------------------------------------
# boundary chains, winding numbers, areas


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for adaptive quadrature of lengths and areas."""

    length_tol: float = 1e-10
    area_tol: float = 1e-8
    cusp_size: float = 4e-5  # horodisk truncation scale at ideal vertices
    limit: int = 400


@dataclass(frozen=True)
class BoundaryChain:
    """Closed counterclockwise chain of arcs bounding a region."""

    arcs: tuple

    def __post_init__(self):
        arcs = tuple(self.arcs)
        object.__setattr__(self, "arcs", arcs)
        for cur, nxt in zip(arcs, arcs[1:] + arcs[:1]):
            if not _endpoints_match(cur.end, nxt.start):
                raise ValueError("boundary chain does not close")


def _endpoints_match(p, q) -> bool:
    if _is_ideal(p) != _is_ideal(q):
        return False
    if _is_ideal(p):
        d = abs(_canonical_angle(p.theta - q.theta))
        return d < 1e-9 or abs(d - TAU) < 1e-9
    return float(np.hypot(*(p.vec - q.vec))) < 1e-9


def chain_polyline(arcs, per_arc: int = 400, trim: float = 1e-6) -> np.ndarray:
    pieces = [a.sample(per_arc, trim=trim) for a in arcs]
    return np.vstack(pieces)


def _winding_inside(point: np.ndarray, polyline: np.ndarray) -> bool:
    d = polyline - np.asarray(point, float)
    ang = np.arctan2(d[:, 1], d[:, 0])
    dd = np.diff(ang, append=ang[:1])
    dd = (dd + math.pi) % TAU - math.pi
    return abs(float(np.sum(dd))) > math.pi


def winding_inside(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, float))
    return np.array([_winding_inside(p, polyline) for p in pts])


def _green_integrand(curve, lo: float, hi: float, spec: QuadratureSpec, ideal_tails: bool = False) -> float:
    """Integral of the area form's primitive 2 (x dy - y dx) / (1 - |z|^2).

    With ``ideal_tails`` the parameter interval is assumed to approach ideal
    endpoints at 0 and 1, where the integrand grows like 1/tau; those tails
    are integrated in a log-substituted variable where they are smooth.
    """

    def f(t):
        z = curve.point(t)
        v = curve.velocity(t)
        return 2.0 * (z[..., 0] * v[..., 1] - z[..., 1] * v[..., 0]) / (1.0 - np.sum(z * z, axis=-1))

    eps = spec.area_tol * 1e-2
    if not ideal_tails:
        val, _ = quad(f, lo, hi, epsabs=eps, epsrel=1e-12, limit=spec.limit)
        return val
    a_mid, b_mid = 0.25, 0.75
    total = 0.0
    if lo < a_mid:
        v1, _ = quad(lambda u: f(math.exp(u)) * math.exp(u), math.log(lo), math.log(a_mid),
                     epsabs=eps, epsrel=1e-12, limit=spec.limit)
        total += v1
        lo = a_mid
    if hi > b_mid:
        v2, _ = quad(lambda u: f(1.0 - math.exp(u)) * math.exp(u), math.log(1.0 - hi), math.log(1.0 - b_mid),
                     epsabs=eps, epsrel=1e-12, limit=spec.limit)
        total += v2  # tau = 1 - e^u swaps the endpoints and flips d tau
        hi = b_mid
    v0, _ = quad(f, lo, hi, epsabs=eps, epsrel=1e-12, limit=spec.limit)
    return total + v0


def _is_retrace(arcs) -> bool:
    if len(arcs) != 2:
        return False
    a, b = arcs
    ra = a.reversed()
    if ra.kind != b.kind:
        return False
    pa, pb = ra.sample(7), b.sample(7)
    return bool(np.max(np.hypot(*(pa - pb).T)) < 1e-9)


def _check_simple(arcs, context: str):
    from shapely.geometry import LineString

    poly = chain_polyline(arcs, per_arc=250, trim=1e-4)
    ring = LineString(np.vstack([poly, poly[:1]]))
    if not ring.is_simple:
        raise ValueError(f"{context}: self-intersecting boundary")


def area(region, quadrature_spec: QuadratureSpec | None = None) -> float:
    """Hyperbolic area of a region bounded by a closed ccw chain of arcs.

    Evaluates ``integral of lambda^2 dx dy`` through its boundary primitive.
    Ideal vertices where curved edges meet are handled by truncating with tiny
    horodisks and extrapolating the truncation scale to zero (the cusp areas
    vanish linearly in the scale).
    """
    spec = quadrature_spec or QuadratureSpec()
    arcs = list(region.arcs if isinstance(region, BoundaryChain) else region)
    if not arcs:
        return 0.0
    if _is_retrace(arcs):
        return 0.0
    _check_simple(arcs, "area")

    curved_ideal = any(
        (_is_ideal(a.start) or _is_ideal(a.end)) and abs(a.kappa) > 1e-13 for a in arcs
    )
    if not curved_ideal:
        return sum(_green_integrand(a, 0.0, 1.0, spec) for a in arcs)

    s = spec.cusp_size
    a1 = _truncated_green_total(arcs, s, spec)
    a2 = _truncated_green_total(arcs, 0.5 * s, spec)
    return 2.0 * a2 - a1


def _chain_truncation(arcs, horo_fn):
    """Cut parameters and horocycle connectors for a closed ccw chain.

    ``horo_fn(vertex_index, ideal_point)`` supplies the horodisk truncating the
    vertex at the *end* of arc ``vertex_index``.  Returns ``(cut_lo, cut_hi,
    connectors)`` with connectors as ``(horodisk, t_in, sweep)``; a positive
    sweep is counterclockwise on the horocycle circle.
    """
    n = len(arcs)
    cut_lo = [0.0] * n
    cut_hi = [1.0] * n
    connectors: list[tuple[Horodisk, float, float]] = []
    for i in range(n):
        a_in = arcs[i]
        a_out = arcs[(i + 1) % n]
        if not _is_ideal(a_in.end):
            connectors.append(None)
            continue
        h = horo_fn(i, a_in.end)
        q_in = _arc_horocycle_cut(a_in, h)
        q_out = _arc_horocycle_cut(a_out, h)
        cut_hi[i] = a_in.param_of_point(q_in)
        cut_lo[(i + 1) % n] = a_out.param_of_point(q_out)
        t_in = math.atan2(q_in[1] - h.center[1], q_in[0] - h.center[0])
        t_out = math.atan2(q_out[1] - h.center[1], q_out[0] - h.center[0])
        t_base = math.atan2(h.base.vec[1] - h.center[1], h.base.vec[0] - h.center[0])
        # the correct connector is the one avoiding the base tangency point
        sweep = math.fmod(t_out - t_in, TAU)
        if sweep <= 0:
            sweep += TAU
        rel_base = math.fmod(t_base - t_in, TAU)
        if rel_base <= 0:
            rel_base += TAU
        if rel_base < sweep:  # base inside ccw span: use the other arc
            sweep -= TAU
        connectors.append((h, t_in, sweep))
    return cut_lo, cut_hi, connectors


def _truncated_green_total(arcs, s: float, spec: QuadratureSpec) -> float:
    """Green integral over the chain truncated by size-s horodisks at ideal
    vertices, horocycle connectors included."""
    cut_lo, cut_hi, connectors = _chain_truncation(arcs, lambda i, p: Horodisk(p, s))
    total = 0.0
    for i, a in enumerate(arcs):
        tails = _is_ideal(a.start) or _is_ideal(a.end)
        total += _green_integrand(a, cut_lo[i], cut_hi[i], spec, ideal_tails=tails)
    for conn in connectors:
        if conn is None:
            continue
        h, t_in, sweep = conn
        arc = _ArcOnCircle(h.center, h.radius, t_in, sweep)
        total += _green_integrand(arc, 0.0, 1.0, spec)
    return total


def truncated_region(arcs, horodisks) -> "TruncatedRegion":
    """Compact region obtained by cutting the cusps of a closed ccw chain.

    ``horodisks`` is either a uniform size or a mapping from vertex index
    (the vertex at the end of arc i) to a Horodisk.  The returned region's
    pieces carry the curvature signs needed by ``gauss_bonnet_residual``.
    """
    if isinstance(horodisks, (int, float)):
        horo_fn = lambda i, p: Horodisk(p, float(horodisks))
    else:
        horo_fn = lambda i, p: horodisks[i]
    cut_lo, cut_hi, connectors = _chain_truncation(list(arcs), horo_fn)
    pieces = []
    for i, a in enumerate(arcs):
        sub = a.subarc(max(cut_lo[i], 0.0), min(cut_hi[i], 1.0)) if (cut_lo[i] > 0 or cut_hi[i] < 1) else a
        pieces.append(ChainPiece(curve=sub, kappa_left=a.kappa))
        conn = connectors[i]
        if conn is not None:
            h, t_in, sweep = conn
            pieces.append(
                ChainPiece(
                    curve=_ArcOnCircle(h.center, h.radius, t_in, sweep),
                    kappa_left=math.copysign(1.0, sweep),
                )
            )
    return TruncatedRegion(pieces)


# ---------------------------------------------------------------------------
# Gauss-Bonnet residual for compact, piecewise constant-curvature regions


@dataclass(frozen=True)
class ChainPiece:
    """Compact boundary piece with its constant curvature w.r.t. the region's
    inward (left) normal."""

    curve: object  # sampleable: point(tau), velocity(tau) over [0, 1]
    kappa_left: float

    def length(self, tol: float = 1e-10) -> float:
        def f(t):
            z = self.curve.point(t)
            v = self.curve.velocity(t)
            return conformal_factor(z) * np.hypot(*v)

        val, _ = quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
        return val


@dataclass(frozen=True)
class TruncatedRegion:
    """Compact region bounded by a ccw chain of constant-curvature pieces."""

    pieces: tuple

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))


@dataclass(frozen=True)
class _ArcOnCircle:
    """Arc of a raw Euclidean circle over a fixed angular range."""

    center: np.ndarray
    radius: float
    t0: float
    sweep: float

    def point(self, tau):
        t = self.t0 + np.asarray(tau, float) * self.sweep
        return np.stack(
            [self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)],
            axis=-1,
        )

    def velocity(self, tau):
        t = self.t0 + np.asarray(tau, float) * self.sweep
        return self.radius * self.sweep * np.stack([-np.sin(t), np.cos(t)], axis=-1)


def gauss_bonnet_residual(region: TruncatedRegion, tol: float = 1e-10) -> float:
    """-Area + sum of kappa_g * length + sum of exterior angles - 2*pi.

    Should vanish for any compact region; an independent consistency check
    linking the area quadrature, edge curvatures, and corner turning.
    """
    pieces = region.pieces
    spec = QuadratureSpec(length_tol=tol)
    total_area = sum(_green_integrand(p.curve, 0.0, 1.0, spec) for p in pieces)
    curv_term = sum(p.kappa_left * p.length(tol=tol) for p in pieces)
    turn = 0.0
    n = len(pieces)
    for i in range(n):
        v_in = pieces[i].curve.velocity(1.0)
        v_out = pieces[(i + 1) % n].curve.velocity(0.0)
        turn += math.atan2(
            v_in[0] * v_out[1] - v_in[1] * v_out[0], float(np.dot(v_in, v_out))
        )
    return -total_area + curv_term + turn - TAU


# ---------------------------------------------------------------------------
# disk isometries (used by the invariance checks and off-center meshes)


@dataclass(frozen=True)
class DiskAutomorphism:
    """Orientation-preserving isometry z -> e^{i phi} (z - a) / (1 - conj(a) z)."""

    a: complex
    phi: float

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, float)
        z = pts[..., 0] + 1j * pts[..., 1]
        w = np.exp(1j * self.phi) * (z - self.a) / (1.0 - np.conj(self.a) * z)
        return np.stack([w.real, w.imag], axis=-1)

    def apply_point(self, p):
        if _is_ideal(p):
            w = self.apply(p.vec.reshape(1, 2))[0]
            return IdealPoint(math.atan2(w[1], w[0]))
        w = self.apply(_as_vec(p).reshape(1, 2))[0]
        return DiskPoint(w[0], w[1])

    def apply_circle(self, center: np.ndarray, radius: float) -> tuple[np.ndarray, float]:
        """Image circle via three mapped points (Mobius maps circles to circles)."""
        t = np.array([0.1, 2.3, 4.1])
        pts = np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=-1)
        img = self.apply(pts)
        return circumcircle(img[0], img[1], img[2])

    def apply_horodisk(self, h: Horodisk) -> Horodisk:
        c, r = self.apply_circle(h.center, h.radius)
        base = self.apply_point(h.base)
        return Horodisk(base, 2.0 * r)

    def inverse(self) -> "DiskAutomorphism":
        return DiskAutomorphism(-self.a * np.exp(1j * self.phi), -self.phi)


def disk_automorphism(a: complex, phi: float = 0.0) -> DiskAutomorphism:
    if abs(a) >= 1.0:
        raise ValueError("automorphism parameter must lie inside the disk")
    return DiskAutomorphism(complex(a), float(phi))


def circumcircle(p1, p2, p3) -> tuple[np.ndarray, float]:
    p1, p2, p3 = (np.asarray(p, float) for p in (p1, p2, p3))
    ax, ay = p1
    bx, by = p2
    cx, cy = p3
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-300:
        raise ValueError("collinear points have no circumcircle")
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    c = np.array([ux, uy])
    return c, float(np.hypot(*(p1 - c)))


# ---------------------------------------------------------------------------
# debug dump


def arc_polyline_rows(arcs, samples_per_arc: int = 200):
    """Rows (arc_id, s, x, y) with s the cumulative hyperbolic arclength."""
    rows = []
    for k, arc in enumerate(arcs):
        pts = arc.sample(samples_per_arc, trim=1e-6)
        lam = conformal_factor(pts)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        ds = 0.5 * (lam[:-1] + lam[1:]) * seg
        s = np.concatenate([[0.0], np.cumsum(ds)])
        for i in range(len(pts)):
            rows.append((k, float(s[i]), float(pts[i, 0]), float(pts[i, 1])))
    return rows
