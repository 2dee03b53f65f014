"""Ideal polygonal domains with alternating constant-curvature edges.

Builds and validates the domains over which the graph equation is posed,
computes their horodisk-truncated boundary lengths and areas, enumerates the
admissible inscribed polygons, and checks / calibrates the solvability
conditions (the truncated-length equality and per-polygon strict
inequalities).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import hypgeom as hg
from .hypgeom import (
    ConstantCurvatureArc,
    Horodisk,
    IdealPoint,
    QuadratureSpec,
    arc_between,
    dist,
    truncate,
)

TAU = 2.0 * math.pi

__all__ = [
    "ScherkDomain",
    "HorodiskFamily",
    "InscribedPolygon",
    "SolvabilityReport",
    "Diagnostics",
    "build_domain",
    "domain_from_dict",
    "domain_to_dict",
    "validate",
    "default_horodisks",
    "truncated_sums",
    "enumerate_inscribed",
    "check_solvability",
    "calibrate",
    "CalibrationError",
    "symmetric_quadrilateral",
    "interior_point",
]


# ---------------------------------------------------------------------------
# domain construction


@dataclass(frozen=True)
class ScherkDomain:
    """Ideal polygon with edges of alternating signed curvature +/-2H.

    Vertices are cyclically ordered ideal points; edge i runs counterclockwise
    from vertex i to vertex i+1, so its left normal points into the domain and
    its ``kappa`` is the curvature with respect to the inward normal.
    """

    H: float
    vertices: tuple
    labels: tuple
    edges: tuple = field(default=None)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge_tag(self, i: int) -> str:
        lab = self.labels[i]
        return f"{lab}{sum(1 for j in range(i) if self.labels[j] == lab)}"

    def edge_tags(self) -> list:
        return [self.edge_tag(i) for i in range(self.n)]

    def signed_margins(self, pts: np.ndarray) -> np.ndarray:
        """Per-edge signed Euclidean margins; all positive inside the domain."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((len(self.edges), len(pts)))
        for i, e in enumerate(self.edges):
            if e.kind == "segment":
                p0 = e.start.vec
                d = e.end.vec - p0
                d = d / np.hypot(*d)
                out[i] = d[0] * (pts[:, 1] - p0[1]) - d[1] * (pts[:, 0] - p0[0])
            else:
                r = np.hypot(pts[:, 0] - e.center[0], pts[:, 1] - e.center[1])
                out[i] = (e.radius - r) if e.sweep > 0 else (r - e.radius)
        return out

    def contains(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return np.all(self.signed_margins(pts) > -tol, axis=0)


def build_domain(H: float, vertex_angles, edge_labels) -> ScherkDomain:
    """Assemble a domain from vertex angles (ccw) and "A"/"B" edge labels."""
    angles = [float(a) for a in vertex_angles]
    labels = tuple(str(l) for l in edge_labels)
    if len(labels) != len(angles):
        raise ValueError("need one edge label per vertex")
    verts = tuple(IdealPoint(a) for a in angles)
    edges = []
    for i in range(len(verts)):
        lab = labels[i]
        if lab not in ("A", "B"):
            raise ValueError(f"edge label {lab!r} must be 'A' or 'B'")
        kap = 2.0 * H if lab == "A" else -2.0 * H
        edges.append(arc_between(verts[i], verts[(i + 1) % len(verts)], kap, label=lab))
    return ScherkDomain(H=float(H), vertices=verts, labels=labels, edges=tuple(edges))


def symmetric_quadrilateral(t: float, H: float) -> ScherkDomain:
    """One-parameter family: vertices at angles (0, t, pi, pi + t)."""
    if not 0.0 < t < math.pi:
        raise ValueError("family parameter must lie in (0, pi)")
    return build_domain(H, [0.0, t, math.pi, math.pi + t], ["A", "B", "A", "B"])


def domain_from_dict(spec: dict) -> ScherkDomain:
    return build_domain(spec["H"], spec["vertices"], spec["edge_labels"])


def domain_to_dict(domain: ScherkDomain, horodisk_size: float | None = None) -> dict:
    out = {
        "H": domain.H,
        "vertices": [v.theta for v in domain.vertices],
        "edge_labels": list(domain.labels),
    }
    if horodisk_size is not None:
        out["horodisk_size"] = horodisk_size
    return out


# ---------------------------------------------------------------------------
# validation


@dataclass
class Diagnostics:
    issues: list

    @property
    def ok(self) -> bool:
        return not self.issues

    def __iter__(self):
        return iter(self.issues)


def validate(domain: ScherkDomain, allow_minimal: bool = False) -> Diagnostics:
    """Check all domain invariants, collecting structured diagnostics.

    Never raises.  With ``allow_minimal`` the H = 0 (geodesic-edge) case is
    accepted; by default H must lie strictly inside (0, 1/2).
    """
    issues = []
    h_lo_ok = domain.H > 0.0 or (allow_minimal and domain.H == 0.0)
    if not (h_lo_ok and domain.H < 0.5):
        issues.append(("H_range", f"H = {domain.H} outside (0, 1/2)", None))
    n = domain.n
    if n < 4 or n % 2 != 0:
        issues.append(("vertex_count", f"{n} ideal vertices; need an even count >= 4", None))
    # strictly increasing angles (one wrap allowed)
    angs = [v.theta for v in domain.vertices]
    wraps = sum(1 for i in range(n) if angs[(i + 1) % n] <= angs[i])
    if wraps != 1:
        issues.append(("vertex_order", "vertex angles are not cyclically increasing", None))
    for i in range(n):
        if domain.labels[i] == domain.labels[(i + 1) % n]:
            issues.append(
                ("alternation", f"alternation violated at vertex {(i + 1) % n}", (i + 1) % n)
            )
    for i, e in enumerate(domain.edges):
        want = 2.0 * domain.H if domain.labels[i] == "A" else -2.0 * domain.H
        if abs(e.kappa - want) > 1e-9:
            issues.append(
                ("edge_curvature", f"edge {i} has curvature {e.kappa}, expected {want}", i)
            )
    if _boundary_crosses(domain.edges):
        issues.append(("boundary_simple", "boundary not simple: edges cross", None))
    return Diagnostics(issues)


def _boundary_crosses(edges) -> bool:
    from shapely.geometry import LineString

    lines = [LineString(e.sample(200, trim=1e-4)) for e in edges]
    m = len(lines)
    for i in range(m):
        for j in range(i + 1, m):
            if lines[i].intersects(lines[j]):
                return True
    return False


# ---------------------------------------------------------------------------
# horodisk families


@dataclass(frozen=True)
class HorodiskFamily:
    """One horodisk per vertex, pairwise disjoint."""

    disks: tuple

    def __getitem__(self, i: int) -> Horodisk:
        return self.disks[i]

    def __len__(self) -> int:
        return len(self.disks)

    def halved(self) -> "HorodiskFamily":
        return HorodiskFamily(tuple(Horodisk(h.base, 0.5 * h.size) for h in self.disks))

    def max_size(self) -> float:
        return max(h.size for h in self.disks)


def _family_clean(domain: ScherkDomain, fam: HorodiskFamily) -> bool:
    disks = fam.disks
    n = len(disks)
    for i in range(n):
        for j in range(i + 1, n):
            if not disks[i].disjoint_from(disks[j]):
                return False
    # every edge must meet exactly the horodisks at its endpoints
    for i, e in enumerate(domain.edges):
        pts = e.sample(400, trim=1e-6)
        for j, h in enumerate(disks):
            if j in (i, (i + 1) % n):
                continue
            if np.any(h.contains(pts)):
                return False
    return True


def default_horodisks(domain: ScherkDomain, size: float = 0.2) -> HorodiskFamily:
    """Pairwise-disjoint family with one horodisk per vertex.

    Starts from a uniform size and shrinks it geometrically until the family
    is disjoint and no edge meets a horodisk away from its endpoints; the size
    actually used can be read back from the returned disks.
    """
    s = float(size)
    for _ in range(200):
        fam = HorodiskFamily(tuple(Horodisk(v, s) for v in domain.vertices))
        if _family_clean(domain, fam):
            return fam
        s *= 0.8
    raise ValueError("could not find a disjoint horodisk family")


def truncated_sums(domain: ScherkDomain, family: HorodiskFamily, tol: float = 1e-12):
    """Total truncated lengths (alpha over A-edges, beta over B-edges).

    Returns ``(alpha, beta, per_edge)`` with ``per_edge`` keyed by edge tag.
    """
    if len(family) != domain.n:
        raise ValueError("family size does not match the domain")
    alpha = beta = 0.0
    per_edge = {}
    for i, e in enumerate(domain.edges):
        _, L = truncate(e, family[i], family[(i + 1) % domain.n], tol=tol)
        per_edge[domain.edge_tag(i)] = L
        if domain.labels[i] == "A":
            alpha += L
        else:
            beta += L
    return alpha, beta, per_edge


def domain_area(domain: ScherkDomain, spec: QuadratureSpec | None = None) -> float:
    return hg.area(list(domain.edges), spec)


def interior_point(domain: ScherkDomain, grid: int = 120) -> np.ndarray:
    """Point well inside the domain (largest minimum edge margin on a grid)."""
    xs = np.linspace(-0.95, 0.95, grid)
    X, Y = np.meshgrid(xs, xs)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) < 0.97]
    margins = domain.signed_margins(pts).min(axis=0)
    return pts[int(np.argmax(margins))]


# ---------------------------------------------------------------------------
# inscribed polygons
#
# An inscribed polygon is admissible when its boundary consists of curvature
# +/-2H arcs between domain vertices, is simple, stays inside the closed
# domain, and has finite area.  Finiteness forces the signed curvatures of
# the two edges at each vertex to cancel, i.e. the edge signs alternate around
# the polygon, which also forces an even number of edges; candidates failing
# that test (such as two-vertex lenses) are rejected.


@dataclass(frozen=True)
class InscribedPolygon:
    vertex_subset: tuple  # indices into the domain's vertex list
    edges: tuple  # ccw arcs
    on_boundary: tuple  # per edge: the domain edge tag it lies on, or None

    @property
    def key(self):
        kaps = tuple(round(e.kappa, 12) for e in self.edges)
        return (self.vertex_subset, kaps)


def _candidate_patterns(k: int, H: float):
    if H == 0.0:
        yield tuple(0.0 for _ in range(k))
        return
    if k % 2 != 0:
        return
    for start in (+1.0, -1.0):
        yield tuple(start * (2.0 * H) * (-1.0) ** j for j in range(k))


def _polygon_from_subset(domain: ScherkDomain, subset, kappas):
    n = domain.n
    verts = [domain.vertices[i] for i in subset]
    k = len(subset)
    arcs = []
    on_boundary = []
    for j in range(k):
        a, b = verts[j], verts[(j + 1) % k]
        kap = kappas[j]
        i, i_next = subset[j], subset[(j + 1) % k]
        if (i + 1) % n == i_next and abs(domain.edges[i].kappa - kap) < 1e-12:
            arcs.append(domain.edges[i])
            on_boundary.append(domain.edge_tag(i))
        else:
            try:
                arcs.append(arc_between(a, b, kap))
            except ValueError:
                return None
            on_boundary.append(None)
    return InscribedPolygon(tuple(subset), tuple(arcs), tuple(on_boundary))


def _polygon_admissible(domain: ScherkDomain, poly: InscribedPolygon, samples: int = 1000) -> bool:
    # containment: dense sampling of every edge against the domain boundary
    for arc, tag in zip(poly.edges, poly.on_boundary):
        if tag is not None:
            continue
        pts = arc.sample(samples, trim=1e-6)
        if not np.all(domain.contains(pts, tol=1e-9)):
            return False
    # degenerate retrace (zero extent) and self-crossing chains
    if hg._is_retrace(list(poly.edges)):
        return False
    from shapely.geometry import LineString

    lines = [LineString(e.sample(200, trim=1e-4)) for e in poly.edges]
    m = len(lines)
    for i in range(m):
        for j in range(i + 1, m):
            if lines[i].intersects(lines[j]):
                return False
    return True


def enumerate_inscribed(domain: ScherkDomain, edge_budget: int = 4096):
    """All admissible inscribed polygons over proper vertex subsets.

    Returns ``(polygons, complete)``; ``complete`` is False when the subset
    enumeration was cut short by ``edge_budget``.
    """
    n = domain.n
    out = []
    seen = set()
    budget = int(edge_budget)
    complete = True
    for k in range(2, n):
        for subset in itertools.combinations(range(n), k):
            if budget <= 0:
                complete = False
                return sorted(out, key=lambda p: p.key), complete
            budget -= 1
            for kappas in _candidate_patterns(k, domain.H):
                poly = _polygon_from_subset(domain, subset, kappas)
                if poly is None or poly.key in seen:
                    continue
                if _polygon_admissible(domain, poly):
                    seen.add(poly.key)
                    out.append(poly)
    return sorted(out, key=lambda p: p.key), complete


# ---------------------------------------------------------------------------
# solvability


@dataclass
class PolygonCheck:
    vertex_subset: tuple
    alpha: float
    beta: float
    length: float
    area: float
    check_a: float  # 2*alpha - l - 2H*Area(P): must be strictly negative
    check_b: float  # 2*beta - l + 2H*Area(P): must be strictly negative

    def row(self):
        return {
            "vertices": list(self.vertex_subset),
            "alpha": self.alpha,
            "beta": self.beta,
            "length": self.length,
            "area": self.area,
            "check_a": self.check_a,
            "check_b": self.check_b,
        }


@dataclass
class SolvabilityReport:
    """Equality and inequality checks for a domain and horodisk family.

    The per-polygon inequalities are evaluated with the area of the inscribed
    polygon itself (convention flagged in ``area_convention``).
    """

    H: float
    alphaD: float
    betaD: float
    per_edge: dict
    areaD: float
    equality_residual: float
    polygon_checks: list
    verdict: bool
    tol: float
    margin_tol: float
    area_convention: str = "area(P) of the inscribed polygon"
    horodisk_sizes: list = field(default_factory=list)
    enumeration_complete: bool = True
    halved_verdict: bool | None = None
    halving_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "area_convention": self.area_convention,
            "alphaD": self.alphaD,
            "betaD": self.betaD,
            "areaD": self.areaD,
            "per_edge": self.per_edge,
            "equality_residual": self.equality_residual,
            "polygon_checks": [c.row() for c in self.polygon_checks],
            "verdict": self.verdict,
            "tol": self.tol,
            "margin_tol": self.margin_tol,
            "horodisk_sizes": self.horodisk_sizes,
            "enumeration_complete": self.enumeration_complete,
            "halved_verdict": self.halved_verdict,
            "halving_warning": self.halving_warning,
        }

    def csv_rows(self):
        rows = []
        for c in self.polygon_checks:
            r = c.row()
            r["vertices"] = " ".join(str(v) for v in r["vertices"])
            rows.append(r)
        return rows


def _polygon_sums(domain, family, poly: InscribedPolygon, spec: QuadratureSpec):
    k = len(poly.vertex_subset)
    alpha = beta = total = 0.0
    for j, arc in enumerate(poly.edges):
        i0 = poly.vertex_subset[j]
        i1 = poly.vertex_subset[(j + 1) % k]
        _, L = truncate(arc, family[i0], family[i1], tol=spec.length_tol)
        total += L
        tag = poly.on_boundary[j]
        if tag is not None and tag.startswith("A"):
            alpha += L
        elif tag is not None:
            beta += L
    area_p = hg.area(list(poly.edges), spec)
    return alpha, beta, total, area_p


def _evaluate(domain, family, polygons, complete, tol, margin_tol, spec):
    alpha, beta, per_edge = truncated_sums(domain, family, tol=spec.length_tol)
    area_d = domain_area(domain, spec)
    eq = alpha - beta - 2.0 * domain.H * area_d
    checks = []
    ok = abs(eq) <= tol
    for poly in polygons:
        a_p, b_p, l_p, area_p = _polygon_sums(domain, family, poly, spec)
        ca = 2.0 * a_p - l_p - 2.0 * domain.H * area_p
        cb = 2.0 * b_p - l_p + 2.0 * domain.H * area_p
        checks.append(PolygonCheck(poly.vertex_subset, a_p, b_p, l_p, area_p, ca, cb))
        if not (ca < -margin_tol and cb < -margin_tol):
            ok = False
    return SolvabilityReport(
        H=domain.H,
        alphaD=alpha,
        betaD=beta,
        per_edge=per_edge,
        areaD=area_d,
        equality_residual=eq,
        polygon_checks=checks,
        verdict=ok,
        tol=tol,
        margin_tol=margin_tol,
        horodisk_sizes=[h.size for h in family.disks],
        enumeration_complete=complete,
    )


def check_solvability(
    domain: ScherkDomain,
    family: HorodiskFamily,
    tol: float = 1e-8,
    margin_tol: float = 1e-6,
    quadrature_spec: QuadratureSpec | None = None,
    edge_budget: int = 4096,
    check_halving: bool = True,
) -> SolvabilityReport:
    """Evaluate the truncated-length equality and inscribed-polygon
    inequalities; the verdict requires the equality within ``tol`` and every
    inequality negative by at least ``margin_tol``.

    The verdict is re-evaluated with all horodisk sizes halved and a warning
    flag is raised when it flips (the conditions should not depend on the
    family once the horodisks are small enough).
    """
    spec = quadrature_spec or QuadratureSpec()
    polygons, complete = enumerate_inscribed(domain, edge_budget)
    report = _evaluate(domain, family, polygons, complete, tol, margin_tol, spec)
    if check_halving:
        half = _evaluate(domain, family.halved(), polygons, complete, tol, margin_tol, spec)
        report.halved_verdict = half.verdict
        report.halving_warning = half.verdict != report.verdict
    return report


# ---------------------------------------------------------------------------
# calibration


class CalibrationError(RuntimeError):
    pass


def calibrate(
    domain_builder,
    param_range,
    family_rule=None,
    tol: float = 1e-8,
    margin_tol: float = 1e-6,
    quadrature_spec: QuadratureSpec | None = None,
    scan_points: int = 17,
):
    """Root-find the equality residual over a one-parameter domain family.

    ``domain_builder(t)`` returns a domain; ``family_rule(domain)`` its
    horodisk family (defaults to ``default_horodisks`` at size 0.08).  Solves
    ``alpha - beta - 2H*area = 0`` by Brent's method on a sign-changing
    bracket, then verifies the full solvability report.  Raises
    ``CalibrationError`` when no sign change exists in the range.
    """
    from scipy.optimize import brentq

    spec = quadrature_spec or QuadratureSpec()
    if family_rule is None:
        family_rule = lambda dom: default_horodisks(dom, 0.08)

    def residual(t):
        dom = domain_builder(t)
        fam = family_rule(dom)
        alpha, beta, _ = truncated_sums(dom, fam, tol=spec.length_tol)
        return alpha - beta - 2.0 * dom.H * domain_area(dom, spec)

    lo, hi = float(param_range[0]), float(param_range[1])
    ts = np.linspace(lo, hi, scan_points)
    vals = [residual(t) for t in ts]
    brackets = [
        (ts[i], ts[i + 1]) for i in range(len(ts) - 1) if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0.0
    ]
    if not brackets:
        raise CalibrationError(
            f"equality residual has no sign change on [{lo}, {hi}]: "
            f"endpoints {vals[0]:.3e}, {vals[-1]:.3e}"
        )
    last_report = None
    for a, b in brackets:
        t_star = brentq(residual, a, b, xtol=1e-13, rtol=8.9e-16)
        dom = domain_builder(t_star)
        fam = family_rule(dom)
        report = check_solvability(dom, fam, tol, margin_tol, spec)
        if report.verdict:
            return t_star, report
        last_report = report
    raise CalibrationError(
        "equality root found but inequality checks failed; "
        f"last residual {last_report.equality_residual:.3e}"
    )
