"""Triangulations of truncated domains, geodesic disks, and annuli.

Meshes live in Euclidean disk coordinates with per-node metric weights and
tagged boundary edges.  Disks and annuli get structured concentric-ring
meshes (their boundaries are exact Euclidean circles in this model); the
horodisk-truncated polygonal domains get an unstructured Delaunay mesh with
boundary samples placed exactly on the defining circles, an offset layer to
protect boundary triangles, and Laplacian smoothing.  All construction is
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from . import hypgeom as hg
from .hypgeom import DiskPoint, Horodisk, conformal_factor

TAU = 2.0 * math.pi

__all__ = [
    "TriMesh",
    "RefinementSpec",
    "Feature",
    "MeshingError",
    "mesh_disk",
    "mesh_annulus",
    "mesh_truncated_domain",
    "restrict",
]


class MeshingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RefinementSpec:
    """Target Euclidean edge length, with optional hyperbolic grading.

    ``grading`` >= 1 shrinks elements near the ideal boundary: the local edge
    target is ``target_h * (2 / lambda)^(1 - 1/grading)``, so grading 1 is
    uniform in Euclidean size and large grading approaches uniform hyperbolic
    size.
    """

    target_h: float
    grading: float = 2.0

    def __post_init__(self):
        if self.target_h <= 0:
            raise ValueError("target_h must be positive")
        if self.grading < 1.0:
            raise ValueError("grading must be >= 1")

    def local_h(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        r2 = np.clip(np.sum(pts * pts, axis=-1), 0.0, 1.0 - 1e-12)
        lam = 2.0 / (1.0 - r2)
        expo = 1.0 - 1.0 / self.grading
        return self.target_h * (2.0 / lam) ** expo


@dataclass(frozen=True)
class Feature:
    """Geometric carrier of a tagged node set (boundary arc or interior circle)."""

    tag: str
    kind: str  # "circle" | "segment"
    center: np.ndarray | None
    radius: float
    node_ids: np.ndarray
    interior: bool = False  # interior alignment circle rather than boundary


@dataclass
class TriMesh:
    """Conforming triangulation with boundary tags and metric weights."""

    nodes: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3) positively oriented
    edge_tags: dict  # directed boundary edge (a, b) -> tag, region on the left
    lambda2: np.ndarray = field(default=None)
    features: dict = field(default_factory=dict)  # tag -> Feature

    def __post_init__(self):
        if self.lambda2 is None:
            self.lambda2 = conformal_factor(self.nodes) ** 2

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def boundary_nodes(self, tag: str | None = None) -> np.ndarray:
        ids = set()
        for (a, b), t in self.edge_tags.items():
            if tag is None or t == tag:
                ids.add(a)
                ids.add(b)
        return np.array(sorted(ids), dtype=int)

    def boundary_tags(self) -> list:
        return sorted(set(self.edge_tags.values()))

    def boundary_chains(self, tag: str) -> list:
        """Ordered node chains of the boundary edges carrying the tag."""
        edges = [(a, b) for (a, b), t in self.edge_tags.items() if t == tag]
        succ = dict(edges)
        starts = set(a for a, _ in edges) - set(b for _, b in edges)
        chains = []
        used = set()
        for s in sorted(starts) + sorted(set(a for a, _ in edges) - starts):
            if s in used or s not in succ:
                continue
            chain = [s]
            used.add(s)
            while chain[-1] in succ:
                nxt = succ[chain[-1]]
                chain.append(nxt)
                if nxt in used:
                    break
                used.add(nxt)
            chains.append(chain)
        return chains

    def triangle_quality(self) -> np.ndarray:
        """Per-triangle inradius/circumradius ratio (0.5 for equilateral)."""
        p = self.nodes[self.triangles]
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        s = 0.5 * (a + b + c)
        area = np.abs(
            0.5
            * (
                (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
            )
        )
        r_in = area / s
        r_circ = a * b * c / (4.0 * np.maximum(area, 1e-300))
        return r_in / r_circ

    def hyperbolic_area(self, order: int = 6) -> float:
        """Area of the meshed region via element quadrature of lambda^2."""
        pts, w = _tri_quadrature(order)
        p = self.nodes[self.triangles]
        area_e = 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )
        total = 0.0
        for bc, wq in zip(pts, w):
            q = np.einsum("k,mkd->md", bc, p)
            total += float(np.sum(area_e * wq * conformal_factor(q) ** 2))
        return total

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "tags": {f"{a},{b}": t for (a, b), t in sorted(self.edge_tags.items())},
        }

    def node_csv_rows(self):
        tag_of = {}
        for (a, b), t in sorted(self.edge_tags.items()):
            tag_of.setdefault(a, t)
            tag_of.setdefault(b, t)
        return [
            (i, float(x), float(y), tag_of.get(i, ""))
            for i, (x, y) in enumerate(self.nodes)
        ]


def _tri_quadrature(order: int):
    """Barycentric points and weights on the reference triangle."""
    if order <= 1:
        return np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    if order <= 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        return pts, np.full(3, 1 / 3)
    # 6-point Dunavant rule, degree 4
    a1, a2 = 0.445948490915965, 0.091576213509771
    w1, w2 = 0.223381589678011, 0.109951743655322
    pts = []
    ws = []
    for a, w in ((a1, w1), (a2, w2)):
        pts += [[1 - 2 * a, a, a], [a, 1 - 2 * a, a], [a, a, 1 - 2 * a]]
        ws += [w, w, w]
    return np.array(pts), np.array(ws)


def _orient_ccw(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = nodes[tris]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]
    ) * (p[:, 1, 1] - p[:, 0, 1])
    flip = det < 0
    tris = tris.copy()
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _boundary_directed_edges(tris: np.ndarray):
    """Directed edges appearing in exactly one triangle (region on the left)."""
    edges = {}
    for tri in tris:
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            if (b, a) in edges:
                del edges[(b, a)]
            else:
                edges[(a, b)] = True
    return list(edges.keys())


# ---------------------------------------------------------------------------
# structured ring meshes


def _ring_radii(rho_lo: float, rho_hi: float, spec: RefinementSpec) -> np.ndarray:
    # march in full local steps past the end, then rescale onto the span so
    # every radial gap keeps the same relative size (no thin last layer)
    radii = [rho_lo]
    rho = rho_lo
    for _ in range(100000):
        h = float(spec.local_h(np.array([[rho, 0.0]]))[0])
        rho = rho + h
        radii.append(rho)
        if rho >= rho_hi:
            break
    radii = np.asarray(radii)
    cum = radii - rho_lo
    return rho_lo + cum * (rho_hi - rho_lo) / cum[-1]


def _ring_count(rho: float, spec: RefinementSpec) -> int:
    h = float(spec.local_h(np.array([[rho, 0.0]]))[0])
    n = max(8, int(round(TAU * rho / h)))
    return n + (n % 2)


def _stitch(idx_in, ang_in, idx_out, ang_out):
    """Triangle strip between two concentric node rings ordered by angle."""
    n1, n2 = len(idx_in), len(idx_out)
    tris = []
    i = j = 0
    while i < n1 or j < n2:
        next1 = ang_in[i + 1] if i + 1 <= n1 else math.inf
        next2 = ang_out[j + 1] if j + 1 <= n2 else math.inf
        if next1 <= next2 and i < n1:
            tris.append((idx_in[i % n1], idx_in[(i + 1) % n1], idx_out[j % n2]))
            i += 1
        elif j < n2:
            tris.append((idx_in[i % n1], idx_out[(j + 1) % n2], idx_out[j % n2]))
            j += 1
        else:
            break
    return tris


def _ring_mesh(radii, spec: RefinementSpec, with_center: bool, tags) -> TriMesh:
    """Concentric-ring mesh between radii[0] and radii[-1] (Euclidean)."""
    nodes = []
    rings = []  # (ids, angles-with-wrap)
    if with_center:
        counts = [_ring_count(rho, spec) for rho in radii]
    else:
        counts = [_ring_count(0.5 * (radii[0] + radii[-1]), spec)] * len(radii)
    if with_center:
        nodes.append((0.0, 0.0))
    for k, rho in enumerate(radii):
        n = counts[k]
        base = len(nodes)
        # stagger alternating rings by half a step (keeps both axis symmetries)
        off = 0.5 * (TAU / n) * (k % 2)
        angs = np.sort((off + TAU * np.arange(n) / n) % TAU)
        for t in angs:
            nodes.append((rho * math.cos(t), rho * math.sin(t)))
        rings.append((list(range(base, base + n)), list(angs) + [angs[0] + TAU]))
    nodes = np.asarray(nodes, dtype=float)
    tris = []
    if with_center:
        ids, _ = rings[0]
        n = len(ids)
        for k in range(n):
            tris.append((0, ids[k], ids[(k + 1) % n]))
    for (ids1, a1), (ids2, a2) in zip(rings[:-1], rings[1:]):
        tris.extend(_stitch(ids1, a1, ids2, a2))
    tris = _orient_ccw(nodes, np.asarray(tris, dtype=np.int32))
    edge_tags = {}
    features = {}
    inner_tag, outer_tag = tags
    for a, b in _boundary_directed_edges(tris):
        rho = 0.5 * (np.hypot(*nodes[a]) + np.hypot(*nodes[b]))
        tag = outer_tag if rho > 0.5 * (radii[0] + radii[-1]) or with_center else inner_tag
        edge_tags[(a, b)] = tag
    if not with_center:
        features[inner_tag] = Feature(
            inner_tag, "circle", np.zeros(2), radii[0], np.asarray(rings[0][0], dtype=int)
        )
    features[outer_tag] = Feature(
        outer_tag, "circle", np.zeros(2), radii[-1], np.asarray(rings[-1][0], dtype=int)
    )
    return TriMesh(nodes=nodes, triangles=tris, edge_tags=edge_tags, features=features)


def _map_mesh(mesh: TriMesh, mob: hg.DiskAutomorphism) -> TriMesh:
    nodes = mob.apply(mesh.nodes)
    tris = _orient_ccw(nodes, mesh.triangles)
    features = {}
    for tag, f in mesh.features.items():
        if f.kind == "circle":
            c, r = mob.apply_circle(f.center, f.radius)
        else:
            c, r = None, 0.0
        features[tag] = Feature(tag, f.kind, c, r, f.node_ids, f.interior)
    return TriMesh(nodes=nodes, triangles=tris, edge_tags=dict(mesh.edge_tags), features=features)


def mesh_disk(center, radius: float, spec: RefinementSpec) -> TriMesh:
    """Mesh of the geodesic disk of given hyperbolic radius about a point."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    rho = math.tanh(0.5 * radius)
    radii = _ring_radii(0.0, rho, spec)[1:]
    m = _ring_mesh(radii, spec, with_center=True, tags=("circle", "circle"))
    cvec = np.zeros(2) if center is None else np.asarray(getattr(center, "vec", center), float)
    if np.hypot(*cvec) > 1e-15:
        m = _map_mesh(m, hg.disk_automorphism(-complex(cvec[0], cvec[1])))
    _audit(m)
    return m


def mesh_annulus(center, r_in: float, r_out: float, spec: RefinementSpec) -> TriMesh:
    """Mesh of a geodesic annulus; boundary tags "inner" and "outer"."""
    if not 0.0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    radii = _ring_radii(math.tanh(0.5 * r_in), math.tanh(0.5 * r_out), spec)
    m = _ring_mesh(radii, spec, with_center=False, tags=("inner", "outer"))
    cvec = np.zeros(2) if center is None else np.asarray(getattr(center, "vec", center), float)
    if np.hypot(*cvec) > 1e-15:
        m = _map_mesh(m, hg.disk_automorphism(-complex(cvec[0], cvec[1])))
    _audit(m)
    return m


def _audit(mesh: TriMesh):
    if np.any(np.hypot(*mesh.nodes.T) >= 1.0 - 1e-9):
        raise MeshingError("mesh node escaped the unit disk")
    for a, b in _boundary_directed_edges(mesh.triangles):
        if (a, b) not in mesh.edge_tags:
            raise MeshingError("untagged boundary edge")


# ---------------------------------------------------------------------------
# unstructured meshes of truncated domains


@dataclass
class _BoundarySpec:
    tag: str
    kind: str  # circle | segment
    center: np.ndarray | None
    radius: float
    t_lo: float  # angle (circle) or 0 (segment)
    t_hi: float
    seg: tuple | None  # (p0, p1) for segments
    inward: int  # +1: domain toward center / left; -1: away
    interior: bool = False
    pins: tuple = ()  # parameters that must become nodes

    def points(self, ts):
        ts = np.asarray(ts, float)
        if self.kind == "segment":
            p0, p1 = self.seg
            return p0 + np.multiply.outer(ts, p1 - p0)
        return np.stack(
            [
                self.center[0] + self.radius * np.cos(ts),
                self.center[1] + self.radius * np.sin(ts),
            ],
            axis=-1,
        )

    def normals_inward(self, ts):
        if self.kind == "segment":
            p0, p1 = self.seg
            d = (p1 - p0) / np.hypot(*(p1 - p0))
            n = np.array([-d[1], d[0]]) * self.inward
            return np.broadcast_to(n, (len(np.atleast_1d(ts)), 2))
        pts = self.points(ts)
        rad = (pts - self.center) / self.radius
        return -rad * self.inward  # inward=+1: normal toward the center

    def march(self, h_of):
        """Sample parameters between pins with spacing set by h_of(point)."""
        anchors = sorted({self.t_lo, self.t_hi, *self.pins})
        params = []
        for lo, hi in zip(anchors[:-1], anchors[1:]):
            piece = [lo]
            t = lo
            for _ in range(200000):
                z = self.points(np.array([t]))[0]
                h = float(h_of(z))
                dt = h / self.radius if self.kind == "circle" else h / np.hypot(
                    *(self.seg[1] - self.seg[0])
                )
                t = t + dt
                if t >= hi - 0.4 * dt:
                    break
                piece.append(t)
            piece.append(hi)
            arr = np.asarray(piece)
            if len(arr) > 2:
                arr = lo + (arr - lo) * (hi - lo) / (arr[-1] - lo)
            params.extend(arr.tolist()[:-1])
        params.append(anchors[-1])
        return np.asarray(params)


def _quadtree_points(bbox, h_of):
    """Deterministic graded interior fill: subdivide until the cell size
    matches the local target; returns all leaf centers (filtered later)."""
    out = []
    x0, y0, x1, y1 = bbox
    stack = [(x0, y0, max(x1 - x0, y1 - y0))]
    while stack:
        cx, cy, size = stack.pop()
        # skip cells fully outside the unit disk (the grading blows up there)
        nx = min(max(0.0, cx), cx + size)
        ny = min(max(0.0, cy), cy + size)
        if math.hypot(nx, ny) >= 0.9995:
            continue
        center = (cx + 0.5 * size, cy + 0.5 * size)
        h = float(h_of(np.array(center)))
        if size > h:
            half = 0.5 * size
            if half < 1e-6:
                continue
            for dx in (0.0, half):
                for dy in (0.0, half):
                    stack.append((cx + dx, cy + dy, half))
        else:
            out.append(center)
    return np.asarray(out) if out else np.zeros((0, 2))


def _build_unstructured(specs: list[_BoundarySpec], sdf, spec: RefinementSpec,
                        smooth_iters: int = 24) -> TriMesh:
    """``sdf`` maps an (n, 2) array to signed distances, positive inside."""
    h_of = lambda z: float(spec.local_h(np.asarray(z, float).reshape(1, 2))[0])

    fixed_pts = []
    fixed_feature = []  # feature index per fixed point (corners: first wins)
    feature_nodes = [[] for _ in specs]
    key_of = {}

    def add_fixed(p, fi):
        key = (round(float(p[0]), 12), round(float(p[1]), 12))
        if key in key_of:
            idx = key_of[key]
        else:
            idx = len(fixed_pts)
            fixed_pts.append(np.asarray(p, float))
            fixed_feature.append(fi)
            key_of[key] = idx
        feature_nodes[fi].append(idx)
        return idx

    offsets = []
    for fi, bs in enumerate(specs):
        ts = bs.march(h_of)
        pts = bs.points(ts)
        for p in pts:
            add_fixed(p, fi)
        # offset layer shields the boundary from sliver triangles
        mids = 0.5 * (ts[:-1] + ts[1:])
        mpts = bs.points(mids)
        nrm = bs.normals_inward(mids)
        hl = np.array([h_of(p) for p in mpts])
        if bs.interior:
            offsets.append(mpts + 0.8 * hl[:, None] * nrm)
            offsets.append(mpts - 0.8 * hl[:, None] * nrm)
        else:
            offsets.append(mpts + 0.8 * hl[:, None] * nrm)
    fixed_pts = np.asarray(fixed_pts)
    offsets = np.vstack(offsets) if offsets else np.zeros((0, 2))

    tree_fixed = cKDTree(fixed_pts)
    if len(offsets):
        hl = spec.local_h(offsets)
        near = tree_fixed.query(offsets)[0]
        offsets = offsets[(sdf(offsets) > 0.45 * hl) & (near > 0.55 * hl)]

    bb = np.vstack([fixed_pts, offsets]) if len(offsets) else fixed_pts
    pad = 2.0 * spec.target_h
    bbox = (bb[:, 0].min() - pad, bb[:, 1].min() - pad, bb[:, 0].max() + pad, bb[:, 1].max() + pad)

    anchor = np.vstack([fixed_pts, offsets]) if len(offsets) else fixed_pts
    tree_anchor = cKDTree(anchor)

    interior = _quadtree_points(bbox, h_of)
    if len(interior):
        hl = spec.local_h(interior)
        near = tree_anchor.query(interior)[0]
        interior = interior[(sdf(interior) > 0.55 * hl) & (near > 0.62 * hl)]

    pts = np.vstack([fixed_pts, offsets, interior]) if len(interior) else (
        np.vstack([fixed_pts, offsets]) if len(offsets) else fixed_pts
    )
    n_fixed = len(fixed_pts)
    if len(pts) > 400000:
        raise MeshingError(f"mesh too large: {len(pts)} points")

    def triangulate(p):
        tri = Delaunay(p)
        cent = p[tri.simplices].mean(axis=1)
        return tri.simplices[sdf(cent) > 0.0]

    for it in range(smooth_iters):
        tris = triangulate(pts)
        # Laplacian smoothing of the free points
        nbr_sum = np.zeros_like(pts)
        nbr_cnt = np.zeros(len(pts))
        for k in range(3):
            a = tris[:, k]
            for kk in (1, 2):
                b = tris[:, (k + kk) % 3]
                np.add.at(nbr_sum, a, pts[b])
                np.add.at(nbr_cnt, a, 1.0)
        with np.errstate(invalid="ignore"):
            target = nbr_sum / nbr_cnt[:, None]
        free = np.arange(len(pts)) >= n_fixed
        ok = free & (nbr_cnt > 0)
        prop = pts.copy()
        prop[ok] = pts[ok] + 0.6 * (target[ok] - pts[ok])
        # reject moves that leave the region or crowd the boundary
        bad = ok & (sdf(prop) < 0.3 * spec.local_h(prop))
        prop[bad] = pts[bad]
        pts = prop
    tris = triangulate(pts)
    tris = _orient_ccw(pts, tris.astype(np.int32))

    # drop unused points (outside-region leftovers)
    used = np.zeros(len(pts), dtype=bool)
    used[tris.ravel()] = True
    if not np.all(used[:n_fixed]):
        missing = int(np.sum(~used[:n_fixed]))
        raise MeshingError(f"{missing} boundary samples not used by any triangle")
    renum = -np.ones(len(pts), dtype=int)
    renum[used] = np.arange(int(used.sum()))
    pts = pts[used]
    tris = renum[tris]

    node_feature = {}
    for fi, ids in enumerate(feature_nodes):
        for i in ids:
            node_feature.setdefault(renum[i], set()).add(fi)

    edge_tags = {}
    for a, b in _boundary_directed_edges(tris):
        fa = node_feature.get(a, set())
        fb = node_feature.get(b, set())
        shared = [fi for fi in sorted(fa & fb) if not specs[fi].interior]
        if not shared:
            raise MeshingError(f"boundary edge ({a},{b}) not on any feature")
        edge_tags[(a, b)] = specs[shared[0]].tag

    features = {}
    for fi, bs in enumerate(specs):
        ids = np.array(sorted({int(renum[i]) for i in feature_nodes[fi]}), dtype=int)
        features[bs.tag] = Feature(
            bs.tag, bs.kind, bs.center, bs.radius, ids, interior=bs.interior
        )

    m = TriMesh(nodes=pts, triangles=tris, edge_tags=edge_tags, features=features)
    _audit(m)
    _check_feature_alignment(m, specs)
    return m


def _check_feature_alignment(mesh: TriMesh, specs):
    """Interior feature circles must be covered by mesh edges."""
    edge_set = set()
    for tri in mesh.triangles:
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            edge_set.add((min(a, b), max(a, b)))
    for bs, f in zip(specs, mesh.features.values()):
        if not bs.interior:
            continue
        ids = f.node_ids
        ang = np.arctan2(
            mesh.nodes[ids][:, 1] - bs.center[1], mesh.nodes[ids][:, 0] - bs.center[0]
        )
        order = np.argsort(ang)
        ids = ids[order]
        missing = 0
        closed = abs((bs.t_hi - bs.t_lo) - TAU) < 1e-12
        pairs = len(ids) if closed else len(ids) - 1
        for k in range(pairs):
            a, b = int(ids[k]), int(ids[(k + 1) % len(ids)])
            if (min(a, b), max(a, b)) not in edge_set:
                missing += 1
        if missing:
            raise MeshingError(
                f"interior feature {bs.tag} misaligned: {missing} segments missing"
            )


def _domain_sdf(domain, family: list[Horodisk], holes):
    def sdf(pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        val = domain.signed_margins(pts).min(axis=0)
        for h in family:
            val = np.minimum(val, np.hypot(*(pts - h.center).T) - h.radius)
        for c, r in holes:
            val = np.minimum(val, np.hypot(*(pts - c).T) - r)
        return val

    return sdf


def mesh_truncated_domain(
    domain,
    family,
    spec: RefinementSpec,
    holes=(),
    internal_families=(),
    internal_circles=(),
) -> TriMesh:
    """Mesh of a domain minus its vertex horodisks.

    Boundary edges are tagged by their source arcs (edge tags like "A0"/"B1",
    horocycle arcs "C<i>").  ``holes`` adds circular holes (tag, center,
    Euclidean radius); ``internal_families`` aligns coarser horodisk families
    as interior curves tagged "C<i>@<name>"; ``internal_circles`` aligns full
    interior circles.
    """
    arcs = list(domain.edges)
    disks = list(family.disks) if hasattr(family, "disks") else list(family)
    cut_lo, cut_hi, connectors = hg._chain_truncation(arcs, lambda i, p: disks[(i + 1) % len(arcs)])

    n = len(arcs)
    specs: list[_BoundarySpec] = []
    pins_per_edge = [[] for _ in range(n)]

    # pins where coarser-level horocycles cross the edges
    internal_meta = []
    for name, fam2 in internal_families:
        d2 = list(fam2.disks) if hasattr(fam2, "disks") else list(fam2)
        lo2, hi2, conn2 = hg._chain_truncation(arcs, lambda i, p: d2[(i + 1) % len(arcs)])
        internal_meta.append((name, lo2, hi2, conn2))
        for i in range(n):
            pins_per_edge[i] += [lo2[i], hi2[i]]

    for i, a in enumerate(arcs):
        lo, hi = cut_lo[i], cut_hi[i]
        tag = domain.edge_tag(i)
        pins = tuple(p for p in pins_per_edge[i] if lo + 1e-12 < p < hi - 1e-12)
        if a.kind == "segment":
            p0 = a.start.vec + lo * (a.end.vec - a.start.vec)
            p1 = a.start.vec + hi * (a.end.vec - a.start.vec)
            specs.append(
                _BoundarySpec(tag, "segment", None, 0.0, 0.0, 1.0, (p0, p1),
                              inward=+1, pins=tuple((p - lo) / (hi - lo) for p in pins))
            )
        else:
            t_a = a.t0 + lo * a.sweep
            t_b = a.t0 + hi * a.sweep
            t_lo, t_hi = (t_a, t_b) if t_b > t_a else (t_b, t_a)
            inward = +1 if a.sweep > 0 else -1
            pin_angles = tuple(a.t0 + p * a.sweep for p in pins)
            specs.append(
                _BoundarySpec(tag, "circle", a.center, a.radius, t_lo, t_hi, None,
                              inward=inward, pins=pin_angles)
            )
    for i, conn in enumerate(connectors):
        if conn is None:
            continue
        h, t_in, sweep = conn
        t_lo, t_hi = (t_in, t_in + sweep) if sweep > 0 else (t_in + sweep, t_in)
        vertex = (i + 1) % n
        specs.append(
            _BoundarySpec(f"C{vertex}", "circle", h.center, h.radius, t_lo, t_hi, None,
                          inward=-1)
        )
    for name, lo2, hi2, conn2 in internal_meta:
        for i, conn in enumerate(conn2):
            if conn is None:
                continue
            h, t_in, sweep = conn
            t_lo, t_hi = (t_in, t_in + sweep) if sweep > 0 else (t_in + sweep, t_in)
            vertex = (i + 1) % n
            specs.append(
                _BoundarySpec(f"C{vertex}@{name}", "circle", h.center, h.radius,
                              t_lo, t_hi, None, inward=-1, interior=True)
            )
    for tag, center, radius in holes:
        c = np.asarray(center, float)
        specs.append(_BoundarySpec(tag, "circle", c, float(radius), 0.0, TAU, None, inward=-1))
    for tag, center, radius in internal_circles:
        c = np.asarray(center, float)
        specs.append(
            _BoundarySpec(tag, "circle", c, float(radius), 0.0, TAU, None,
                          inward=-1, interior=True)
        )

    hole_list = [(np.asarray(c, float), float(r)) for _, c, r in holes]
    sdf = _domain_sdf(domain, disks, hole_list)
    try:
        return _build_unstructured(specs, sdf, spec)
    except MeshingError as e:
        raise MeshingError(f"meshing the truncated domain failed: {e}") from e


# ---------------------------------------------------------------------------
# submeshes


def restrict(mesh: TriMesh, predicate, cut_tag: str = "cut"):
    """Conforming submesh of the triangles selected by ``predicate``.

    ``predicate`` is a boolean mask over triangles or a callable on centroid
    coordinates.  Returns ``(submesh, node_map)`` with ``node_map`` mapping
    submesh node ids into the parent mesh.  The selection must be non-empty
    and edge-connected.
    """
    if callable(predicate):
        cent = mesh.nodes[mesh.triangles].mean(axis=1)
        mask = np.asarray([bool(predicate(c)) for c in cent])
    else:
        mask = np.asarray(predicate, dtype=bool)
    if mask.shape != (mesh.n_triangles,):
        raise ValueError("predicate mask must have one entry per triangle")
    if not mask.any():
        raise ValueError("empty triangle selection")
    if not _connected(mesh.triangles[mask]):
        raise ValueError("selected triangle set is not edge-connected")
    tris_old = mesh.triangles[mask]
    used = np.unique(tris_old)
    node_map = used.copy()
    renum = -np.ones(mesh.n_nodes, dtype=int)
    renum[used] = np.arange(len(used))
    tris = renum[tris_old]
    nodes = mesh.nodes[used]

    # feature membership survives restriction
    feat_nodes_old = {tag: set(f.node_ids.tolist()) for tag, f in mesh.features.items()}
    edge_tags = {}
    for a, b in _boundary_directed_edges(tris):
        pa, pb = int(node_map[a]), int(node_map[b])
        if (pa, pb) in mesh.edge_tags:
            edge_tags[(a, b)] = mesh.edge_tags[(pa, pb)]
            continue
        shared = [
            tag
            for tag, ids in sorted(feat_nodes_old.items())
            if pa in ids and pb in ids
        ]
        edge_tags[(a, b)] = shared[0] if shared else cut_tag
    features = {}
    for tag, f in mesh.features.items():
        ids = np.array(sorted(int(renum[i]) for i in f.node_ids if renum[i] >= 0), dtype=int)
        if len(ids):
            features[tag] = Feature(tag, f.kind, f.center, f.radius, ids, f.interior)
    sub = TriMesh(
        nodes=nodes,
        triangles=tris.astype(np.int32),
        edge_tags=edge_tags,
        lambda2=mesh.lambda2[used],
        features=features,
    )
    return sub, node_map


def _connected(tris: np.ndarray) -> bool:
    m = len(tris)
    if m == 0:
        return False
    edge_owner = {}
    adj = [[] for _ in range(m)]
    for t in range(m):
        for k in range(3):
            a, b = int(tris[t, k]), int(tris[t, (k + 1) % 3])
            key = (min(a, b), max(a, b))
            if key in edge_owner:
                adj[t].append(edge_owner[key])
                adj[edge_owner[key]].append(t)
            else:
                edge_owner[key] = t
    seen = np.zeros(m, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        t = stack.pop()
        for s in adj[t]:
            if not seen[s]:
                seen[s] = True
                stack.append(s)
    return bool(seen.all())
