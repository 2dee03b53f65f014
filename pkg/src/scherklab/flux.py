"""Flux integrals of graph fields along tagged curves and the horodisk
exhaustion experiments.

The flux of a field through a curve is int (grad u / W) . eta ds taken with
the hyperbolic conormal and line element; in conformal reduction the metric
factors cancel and the integrand is the Euclidean (grad u . eta) / W.  The
per-element gradients are the solver's own (no re-interpolation), evaluated
by Gauss quadrature along element-aligned curves, so the pointwise speed
bound |grad u|/W < 1 transfers to |flux| <= length at the quadrature level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hypgeom as hg
from . import solver as sv
from .mesh import TriMesh, RefinementSpec, mesh_truncated_domain, restrict
from .solver import ScalarField, SolverConfig

__all__ = [
    "Curve",
    "FluxReport",
    "region_curves",
    "flux",
    "curve_length",
    "stokes_residual",
    "difference_flux",
    "ExhaustionSetup",
    "build_exhaustion_setup",
    "exhaustion_experiment",
    "uniqueness_experiment",
]

_GAUSS_X = np.array([-math.sqrt(3.0 / 5.0), 0.0, math.sqrt(3.0 / 5.0)])
_GAUSS_W = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


@dataclass
class Curve:
    """Element-aligned oriented curve: directed mesh edges with the region on
    the left, each with its left (region-side) triangle."""

    mesh: TriMesh
    tag: str
    edges: list  # [(a, b)]
    left_tri: list  # triangle index per edge

    def __len__(self):
        return len(self.edges)


def _left_triangles(mesh: TriMesh, tri_ids, directed_edges):
    owner = {}
    for t in tri_ids:
        tri = mesh.triangles[t]
        for k in range(3):
            owner[(int(tri[k]), int(tri[(k + 1) % 3]))] = int(t)
    return [owner[e] for e in directed_edges]


def region_curves(mesh: TriMesh, tri_mask) -> list:
    """Boundary of a triangle subset as tagged curves (region on the left).

    Edge tags come from the parent boundary tags, else from feature circles
    both endpoints lie on, else "cut".
    """
    tri_mask = np.asarray(tri_mask, dtype=bool)
    tri_ids = np.where(tri_mask)[0]
    edges = {}
    for t in tri_ids:
        tri = mesh.triangles[t]
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            if (b, a) in edges:
                del edges[(b, a)]
            else:
                edges[(a, b)] = True
    directed = list(edges.keys())
    feat_nodes = {tag: set(f.node_ids.tolist()) for tag, f in mesh.features.items()}

    def tag_of(e):
        if e in mesh.edge_tags:
            return mesh.edge_tags[e]
        a, b = e
        shared = [t for t, ids in sorted(feat_nodes.items()) if a in ids and b in ids]
        return shared[0] if shared else "cut"

    groups = {}
    for e in directed:
        groups.setdefault(tag_of(e), []).append(e)
    out = []
    for tag in sorted(groups):
        es = sorted(groups[tag])
        out.append(Curve(mesh, tag, es, _left_triangles(mesh, tri_ids, es)))
    return out


def _edge_quantities(curve: Curve, fields):
    """Per-quadrature-point data along the curve: weights ds, hyperbolic
    length element, and (grad . eta)/W for each field."""
    mesh = curve.mesh
    nodes = mesh.nodes
    ws = sv._workspace(mesh)
    a_ids = np.array([e[0] for e in curve.edges])
    b_ids = np.array([e[1] for e in curve.edges])
    pa, pb = nodes[a_ids], nodes[b_ids]
    d = pb - pa
    L = np.hypot(*d.T)
    # outward conormal of the region on the left of a->b
    eta = np.stack([d[:, 1], -d[:, 0]], axis=-1) / L[:, None]
    tri = np.asarray(curve.left_tri)
    grads = [
        np.einsum("mk,mkd->md", f.values[mesh.triangles[tri]], ws.grads[tri]) for f in fields
    ]
    gn = [np.einsum("md,md->m", g, eta) for g in grads]
    g2 = [np.einsum("md,md->m", g, g) for g in grads]
    # 3-point Gauss along each edge
    t = 0.5 * (1.0 + _GAUSS_X)  # in (0,1)
    pts = pa[:, None, :] + t[None, :, None] * d[:, None, :]
    lam2 = hg.conformal_factor(pts) ** 2  # (E, Q)
    wq = 0.5 * _GAUSS_W
    ds = L[:, None] * wq[None, :]
    lam = np.sqrt(lam2)
    integrands = [gn_k[:, None] / np.sqrt(1.0 + g2_k[:, None] / lam2) for gn_k, g2_k in zip(gn, g2)]
    return ds, lam, integrands


def flux(u: ScalarField, curve: Curve, orientation: int = +1) -> float:
    """int over the curve of (grad u / W) . eta ds, eta the outward conormal
    of the region on the left of the curve's orientation."""
    if u.mesh is not curve.mesh:
        raise ValueError("field and curve live on different meshes")
    ds, lam, (g,) = _edge_quantities(curve, [u])
    return float(orientation) * float(np.sum(ds * g))


def curve_length(curve: Curve) -> float:
    """Hyperbolic length of the curve under the same quadrature as flux."""
    ds, lam, _ = _edge_quantities(curve, [])
    return float(np.sum(ds * lam))


def speed_bound(u: ScalarField, curve: Curve) -> float:
    """max over quadrature points of |grad u|_g / W along the curve."""
    mesh = curve.mesh
    ws = sv._workspace(mesh)
    tri = np.asarray(curve.left_tri)
    g = np.einsum("mk,mkd->md", u.values[mesh.triangles[tri]], ws.grads[tri])
    g2 = np.einsum("md,md->m", g, g)
    a_ids = np.array([e[0] for e in curve.edges])
    b_ids = np.array([e[1] for e in curve.edges])
    pa, pb = mesh.nodes[a_ids], mesh.nodes[b_ids]
    t = 0.5 * (1.0 + _GAUSS_X)
    pts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    lam2 = hg.conformal_factor(pts) ** 2
    r2 = (g2[:, None] / lam2) / (1.0 + g2[:, None] / lam2)
    return float(np.sqrt(np.max(r2)))


def difference_flux(u: ScalarField, beta_field: ScalarField, curve: Curve,
                    orientation: int = +1, method: str = "pointwise",
                    tri_mask=None) -> float:
    """Flux of (grad u / W_u - grad beta / W_beta) through the curve.

    ``method="consistent"`` uses the weak-form node pairing (exact Stokes
    cancellation on closed boundaries, superconvergent per curve);
    ``tri_mask`` then selects the region the curve bounds (default: all).
    """
    if u.mesh is not beta_field.mesh or u.mesh is not curve.mesh:
        raise ValueError("fields and curve must share a mesh")
    if method == "consistent":
        mask = np.ones(u.mesh.n_triangles, bool) if tri_mask is None else tri_mask
        fu = paired_node_flux(u, 0.0, mask)
        fb = paired_node_flux(beta_field, 0.0, mask)
        w = _curve_node_weights(u.mesh, [curve], tri_mask=mask)[0]
        return float(orientation) * float(np.sum((fu - fb)[w[:, 0].astype(int)] * w[:, 1]))
    ds, lam, (gu, gb) = _edge_quantities(curve, [u, beta_field])
    return float(orientation) * float(np.sum(ds * (gu - gb)))


def paired_node_flux(u: ScalarField, H: float, tri_mask, quadrature: int = 2) -> np.ndarray:
    """Per-node weak-form flux functional over a triangle subset:

        F_i = int_R (grad u . grad phi_i)/W + 2H int_R lambda^2 phi_i.

    F_i vanishes at nodes whose support lies inside R when u solves the
    discrete equation there, and sums to 2H * (assembled area of R), making
    boundary sums of F_i the discretely conservative flux.
    """
    mesh = u.mesh
    ws = sv._workspace(mesh, quadrature)
    tri_mask = np.asarray(tri_mask, bool)
    tris = mesh.triangles[tri_mask]
    grads = ws.grads[tri_mask]
    area = ws.area[tri_mask]
    lam2 = ws.lam2_q[:, tri_mask]
    gu = np.einsum("mk,mkd->md", u.values[tris], grads)
    W = np.sqrt(1.0 + np.sum(gu * gu, axis=1)[None, :] / lam2)
    gug = np.einsum("md,mkd->mk", gu, grads)
    inv_w = np.einsum("q,qm->m", ws.quad_w, 1.0 / W)
    load = np.einsum("q,qm,qk->mk", ws.quad_w, lam2, ws.quad_bc)
    contrib = gug * (area * inv_w)[:, None] + 2.0 * H * area[:, None] * load
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, tris.ravel(), contrib.ravel())
    return out


def _curve_node_weights(mesh: TriMesh, curves, tri_mask=None):
    """Node/weight pairs per curve; nodes shared between curves of the same
    region boundary count half toward each."""
    counts = {}
    all_curves = curves if tri_mask is None else region_curves(mesh, tri_mask)
    for c in all_curves:
        seen = set()
        for a, b in c.edges:
            seen.add(a)
            seen.add(b)
        for i in seen:
            counts[i] = counts.get(i, 0) + 1
    out = []
    for c in curves:
        seen = set()
        for a, b in c.edges:
            seen.add(a)
            seen.add(b)
        rows = np.array([[i, 1.0 / counts.get(i, 1)] for i in sorted(seen)])
        out.append(rows)
    return out


def stokes_residual(u: ScalarField, tri_mask, H: float, method: str = "consistent",
                    quad_order: int = 6) -> float:
    """Closed-boundary flux minus 2H times the region's hyperbolic area.

    The default weak-form pairing satisfies the discrete Stokes identity up
    to solver tolerance; ``method="pointwise"`` integrates the element
    gradients along the boundary instead, which converges at first order and
    measures the discretization error.
    """
    tri_mask = np.asarray(tri_mask, bool)
    if method == "consistent":
        F = paired_node_flux(u, H, tri_mask)
        sub_nodes = np.unique(u.mesh.triangles[tri_mask])
        total = float(np.sum(F[sub_nodes]))
        area = _region_area_assembled(u.mesh, tri_mask)
        return total - 2.0 * H * area
    curves = region_curves(u.mesh, tri_mask)
    total = sum(flux(u, c) for c in curves)
    sub_area = _region_area(u.mesh, tri_mask, quad_order)
    return total - 2.0 * H * sub_area


def _region_area_assembled(mesh: TriMesh, tri_mask, quadrature: int = 2) -> float:
    """Region area under the solver's own element quadrature."""
    ws = sv._workspace(mesh, quadrature)
    tri_mask = np.asarray(tri_mask, bool)
    lam2 = ws.lam2_q[:, tri_mask]
    return float(np.einsum("q,qm,m->", ws.quad_w, lam2, ws.area[tri_mask]))


def _region_area(mesh: TriMesh, tri_mask, order: int = 6) -> float:
    from .mesh import _tri_quadrature

    tri_mask = np.asarray(tri_mask, bool)
    pts, w = _tri_quadrature(order)
    p = mesh.nodes[mesh.triangles[tri_mask]]
    area_e = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    total = 0.0
    for bc, wq in zip(pts, w):
        q = np.einsum("k,mkd->md", bc, p)
        total += float(np.sum(area_e * wq * hg.conformal_factor(q) ** 2))
    return total


# ---------------------------------------------------------------------------
# exhaustion experiments


@dataclass
class FluxRow:
    level: int
    tag: str
    length: float
    flux_u: float
    flux_beta: float | None
    diff_flux: float | None

    @property
    def bound_gap(self) -> float:
        return self.length - abs(self.flux_u)

    def row(self):
        return {
            "level": self.level,
            "tag": self.tag,
            "length": self.length,
            "flux_u": self.flux_u,
            "flux_beta": self.flux_beta,
            "diff_flux": self.diff_flux,
            "bound_gap": self.bound_gap,
        }


@dataclass
class FluxReport:
    """Per-curve fluxes at one exhaustion level.

    Sign convention: eta is the outward conormal of the region on the left of
    the oriented boundary; on the inner-ball circle it points into the ball.
    """

    level: int
    rows: list
    stokes_residual_u: float
    sum_c_length: float
    hole_diff_flux: float | None
    sign_convention: str = "eta = outward conormal of the region left of the boundary"

    def to_dict(self):
        return {
            "level": self.level,
            "sign_convention": self.sign_convention,
            "rows": [r.row() for r in self.rows],
            "stokes_residual_u": self.stokes_residual_u,
            "sum_c_length": self.sum_c_length,
            "hole_diff_flux": self.hole_diff_flux,
        }


@dataclass
class ExhaustionSetup:
    """Shared meshes and per-level regions for the flux experiments.

    One mesh carries the finest truncation with all coarser horocycles and
    the inner ball circle element-aligned, so every level is a triangle
    subset and fields transfer between levels without interpolation.
    """

    domain: object
    families: list
    H: float
    full_mesh: TriMesh  # finest truncation, ball circle aligned (no hole)
    holed_mesh: TriMesh
    holed_map: np.ndarray
    u_full: ScalarField
    u_holed: ScalarField
    level_masks: list  # triangle masks on holed_mesh, one per level
    ball_center: np.ndarray
    ball_radius_h: float
    probe_nodes: np.ndarray  # holed-mesh node ids near the ball
    cap_reached: float

    def level_mesh(self, n: int):
        return restrict(self.holed_mesh, self.level_masks[n - 1])


def _nested(families) -> bool:
    for f1, f2 in zip(families[:-1], families[1:]):
        for h1, h2 in zip(f1.disks, f2.disks):
            if h2.size > h1.size - 1e-15:
                return False
    return True


def build_exhaustion_setup(
    domain,
    families,
    ball_center,
    ball_radius_h: float,
    spec: RefinementSpec,
    H: float | None = None,
    config: SolverConfig | None = None,
    cap_M: float = 20.0,
    probe_band=(0.15, 0.45),
) -> ExhaustionSetup:
    """Mesh the finest truncation with all levels aligned and solve the
    capped graph once; levels become triangle subsets of one mesh."""
    if not _nested(families):
        raise ValueError("horodisk families must be strictly nested")
    H = domain.H if H is None else H
    config = config or SolverConfig()
    n_levels = len(families)
    finest = families[-1]
    cvec = np.asarray(getattr(ball_center, "vec", ball_center), float)
    mob = hg.disk_automorphism(-complex(cvec[0], cvec[1]))
    c_by, r_by = mob.apply_circle(np.zeros(2), math.tanh(0.5 * ball_radius_h))
    internal = [(f"L{n + 1}", families[n]) for n in range(n_levels - 1)]
    full_mesh = mesh_truncated_domain(
        domain, finest, spec,
        internal_families=internal,
        internal_circles=[("byring", c_by, r_by)],
    )
    u_full, rep, reached = sv.scherk_approx(
        domain, finest, cap_M, spec, H, config, mesh=full_mesh
    )
    holed, holed_map = restrict(
        full_mesh, lambda c: np.hypot(c[0] - c_by[0], c[1] - c_by[1]) > r_by
    )
    u_holed = ScalarField(holed, u_full.values[holed_map])
    masks = []
    cent = holed.nodes[holed.triangles].mean(axis=1)
    for n in range(n_levels):
        mask = np.ones(holed.n_triangles, dtype=bool)
        for h in families[n].disks:
            mask &= np.hypot(*(cent - h.center).T) > h.radius
        masks.append(mask)
    # probe annulus around the ball
    d2 = np.sum((holed.nodes - cvec) ** 2, axis=1)
    a = 1.0 - float(np.sum(cvec * cvec))
    b = 1.0 - np.sum(holed.nodes**2, axis=1)
    rho = np.arccosh(1.0 + 2.0 * d2 / (a * b))
    lo, hi = ball_radius_h + probe_band[0], ball_radius_h + probe_band[1]
    probe = np.where((rho >= lo) & (rho <= hi))[0]
    if len(probe) < 10:
        raise ValueError("probe annulus captured too few nodes; refine the mesh")
    return ExhaustionSetup(
        domain=domain,
        families=list(families),
        H=H,
        full_mesh=full_mesh,
        holed_mesh=holed,
        holed_map=holed_map,
        u_full=u_full,
        u_holed=u_holed,
        level_masks=masks,
        ball_center=cvec,
        ball_radius_h=ball_radius_h,
        probe_nodes=probe,
        cap_reached=reached,
    )


def _level_report(setup: ExhaustionSetup, n: int, u: ScalarField,
                  beta: ScalarField | None, mask) -> FluxReport:
    mesh = u.mesh
    curves = region_curves(mesh, mask)
    rows = []
    sum_c = 0.0
    hole_diff = None
    for c in curves:
        L = curve_length(c)
        fu = flux(u, c)
        fb = flux(beta, c) if beta is not None else None
        df = difference_flux(u, beta, c) if beta is not None else None
        rows.append(FluxRow(n, c.tag, L, fu, fb, df))
        if c.tag.startswith("C"):
            sum_c += L
        if c.tag == "byring" and beta is not None:
            hole_diff = difference_flux(u, beta, c, method="consistent", tri_mask=mask)
    st = stokes_residual(u, mask, setup.H, method="consistent")
    return FluxReport(n, rows, st, sum_c, hole_diff)


def exhaustion_experiment(domain, families, u: ScalarField, beta_field: ScalarField,
                          setup: ExhaustionSetup) -> list:
    """Fluxes of two fields over every tagged arc of each level's region.

    ``u`` and ``beta_field`` live on the setup's holed mesh and must solve
    the equation there (e.g. the capped construction and a vertical
    translate).  Checks the speed bound on every curve and the monotone decay
    of the horocycle lengths.
    """
    if not _nested(families):
        raise ValueError("horodisk families must be strictly nested")
    reports = []
    for n in range(1, len(families) + 1):
        mask = setup.level_masks[n - 1]
        rep = _level_report(setup, n, u, beta_field, mask)
        for row in rep.rows:
            if abs(row.flux_u) > row.length + 1e-8 * max(1.0, row.length):
                raise AssertionError(
                    f"speed bound violated on {row.tag} at level {n}: "
                    f"|flux| = {abs(row.flux_u)} > length = {row.length}"
                )
        reports.append(rep)
    for r1, r2 in zip(reports[:-1], reports[1:]):
        if not r2.sum_c_length < r1.sum_c_length:
            raise AssertionError("horocycle lengths failed to decrease with the level")
    return reports


@dataclass
class UniquenessLevel:
    level: int
    sup_gap: float
    hole_diff_flux: float
    sum_c_length: float

    def row(self):
        return {
            "n": self.level,
            "sup_gap": self.sup_gap,
            "dBy_diff_flux": self.hole_diff_flux,
            "sum_C_length": self.sum_c_length,
        }


def uniqueness_experiment(setup: ExhaustionSetup, eps_prime: float,
                          config: SolverConfig | None = None) -> list:
    """Truncation-convergence table for the translate rigidity mechanism.

    For each level n the comparison solution takes the capped field's own
    trace on the outer arcs and u + eps' on the ball circle; its gap to
    u + eps' on the probe annulus and the ball-circle difference flux must
    both shrink as the truncation recedes.
    """
    config = config or SolverConfig()
    u = setup.u_holed
    out = []
    for n in range(1, len(setup.level_masks) + 1):
        mask = setup.level_masks[n - 1]
        sub, node_map = restrict(setup.holed_mesh, mask)
        u_sub = ScalarField(sub, u.values[node_map])
        data = {}
        for tag in sub.boundary_tags():
            ids = sub.boundary_nodes(tag)
            if tag == "byring":
                data[tag] = u_sub.values[ids] + eps_prime
            else:
                data[tag] = u_sub.values[ids]
        beta, rep = sv.solve_dirichlet(sub, data, setup.H, config, init=u_sub)
        lo = float(np.min(beta.values - u_sub.values))
        hi = float(np.max(beta.values - (u_sub.values + eps_prime)))
        if lo < -1e-10 or hi > 1e-10:
            raise AssertionError(
                f"comparison breached at level {n}: min(beta-u) = {lo}, "
                f"max(beta-u-eps') = {hi}"
            )
        # probe nodes in level-mesh indexing
        inv = -np.ones(setup.holed_mesh.n_nodes, dtype=int)
        inv[node_map] = np.arange(len(node_map))
        probe_sub = inv[setup.probe_nodes]
        if np.any(probe_sub < 0):
            raise ValueError("probe annulus escapes the level mesh")
        sup_gap = float(np.max(np.abs(beta.values[probe_sub] - (u_sub.values[probe_sub] + eps_prime))))
        curves = region_curves(sub, np.ones(sub.n_triangles, dtype=bool))
        hole_diff = None
        sum_c = 0.0
        for c in curves:
            if c.tag == "byring":
                hole_diff = difference_flux(u_sub, beta, c)
            if c.tag.startswith("C"):
                sum_c += curve_length(c)
        out.append(UniquenessLevel(n, sup_gap, float(hole_diff), sum_c))
    return out
