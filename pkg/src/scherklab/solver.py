"""Finite-element solver for the prescribed-curvature graph equation.

The unknown is a piecewise-linear nodal field u on a disk-coordinate mesh.
In conformal reduction the equation div(grad u / W) = 2H (hyperbolic
divergence/gradient) becomes, in weak form over Euclidean coordinates,

    -int (grad u . grad phi) / W dx dy - 2H int lambda^2 phi dx dy = 0,
    W = sqrt(1 + |grad u|^2 / lambda^2),

with the metric entering only through lambda^2.  The module provides the
residual, its exact linearization, damped Newton Dirichlet solves, local
disk replacement, the sweep-based sub/supersolution iteration, barrier
continuation on annuli, the capped construction of graphs with +/-infinity
boundary data, the radial reference profile, and pointwise field algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from . import hypgeom as hg
from . import mesh as meshmod
from .mesh import TriMesh, _tri_quadrature, restrict

__all__ = [
    "ScalarField",
    "SolverConfig",
    "NewtonReport",
    "PerronReport",
    "SolverError",
    "residual",
    "linearize",
    "solve_dirichlet",
    "disk_replace",
    "perron",
    "make_disk_cover",
    "annulus_barrier",
    "scherk_approx",
    "radial_oracle",
    "RadialProfile",
    "max_field",
    "min_field",
    "shift",
    "inf_gap",
]


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_iter: int = 40
    damping: bool = True
    quadrature: int = 2
    sweep_tol: float = 1e-9
    monotone_tol: float = 1e-12

    def __post_init__(self):
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")


@dataclass
class NewtonReport:
    iterations: int
    residual_norm: float
    converged: bool
    gradient_bound: float

    def __post_init__(self):
        if self.gradient_bound >= 1.0:
            raise SolverError(
                f"gradient bound {self.gradient_bound} >= 1; discretization broke the speed limit"
            )

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "gradient_bound": self.gradient_bound,
        }


@dataclass
class PerronReport:
    sweeps: int
    sup_changes: list
    max_monotonicity_violation: float
    converged: bool
    residual_norm: float

    def to_dict(self):
        return {
            "sweeps": self.sweeps,
            "sup_changes": self.sup_changes,
            "max_monotonicity_violation": self.max_monotonicity_violation,
            "converged": self.converged,
            "residual_norm": self.residual_norm,
        }


# ---------------------------------------------------------------------------
# fields


@dataclass
class ScalarField:
    """Nodal values on a mesh (graph height, hyperbolic-length units)."""

    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError("one value per mesh node required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def copy(self) -> "ScalarField":
        return ScalarField(self.mesh, self.values.copy())

    def at(self, points: np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolation at arbitrary interior points."""
        pts = np.atleast_2d(np.asarray(points, float))
        ws = _workspace(self.mesh)
        tree = ws.centroid_tree
        tris = self.mesh.triangles
        nodes = self.mesh.nodes
        out = np.empty(len(pts))
        k = min(48, self.mesh.n_triangles)
        _, cand = tree.query(pts, k=k)
        cand = np.atleast_2d(cand)
        for i, p in enumerate(pts):
            found = False
            for t in cand[i]:
                tri = tris[t]
                bc = _barycentric(nodes[tri], p)
                if bc is not None and np.all(bc > -1e-10):
                    out[i] = float(bc @ self.values[tri])
                    found = True
                    break
            if not found:
                raise ValueError(f"point {p} is not inside the mesh")
        return out


def _barycentric(tri_pts, p):
    T = np.array(
        [
            [tri_pts[0, 0] - tri_pts[2, 0], tri_pts[1, 0] - tri_pts[2, 0]],
            [tri_pts[0, 1] - tri_pts[2, 1], tri_pts[1, 1] - tri_pts[2, 1]],
        ]
    )
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    if abs(det) < 1e-300:
        return None
    rhs = p - tri_pts[2]
    l0 = (T[1, 1] * rhs[0] - T[0, 1] * rhs[1]) / det
    l1 = (-T[1, 0] * rhs[0] + T[0, 0] * rhs[1]) / det
    return np.array([l0, l1, 1.0 - l0 - l1])


def _same_mesh(f: ScalarField, g: ScalarField):
    if f.mesh is not g.mesh:
        raise ValueError("fields live on different meshes")


def max_field(f: ScalarField, g: ScalarField) -> ScalarField:
    _same_mesh(f, g)
    return ScalarField(f.mesh, np.maximum(f.values, g.values))


def min_field(f: ScalarField, g: ScalarField) -> ScalarField:
    _same_mesh(f, g)
    return ScalarField(f.mesh, np.minimum(f.values, g.values))


def shift(f: ScalarField, c: float) -> ScalarField:
    return ScalarField(f.mesh, f.values + float(c))


def inf_gap(f: ScalarField, g: ScalarField) -> float:
    """Minimum over nodes of f - g."""
    _same_mesh(f, g)
    return float(np.min(f.values - g.values))


# ---------------------------------------------------------------------------
# FEM workspace (cached per mesh)


class _Workspace:
    def __init__(self, mesh: TriMesh, quadrature: int = 2):
        nodes, tris = mesh.nodes, mesh.triangles
        p = nodes[tris]  # (M,3,2)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.area = 0.5 * det  # positive: triangles are ccw
        if np.any(self.area <= 0):
            raise ValueError("mesh contains non-positively-oriented triangles")
        # P1 basis gradients: grad_k constant per element
        g = np.empty((len(tris), 3, 2))
        g[:, 1, 0] = e2[:, 1] / det
        g[:, 1, 1] = -e2[:, 0] / det
        g[:, 2, 0] = -e1[:, 1] / det
        g[:, 2, 1] = e1[:, 0] / det
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.grads = g
        self.quad_bc, self.quad_w = _tri_quadrature(quadrature)
        self.quad_pts = np.einsum("qk,mkd->qmd", self.quad_bc, p)  # (Q,M,2)
        self.lam2_q = hg.conformal_factor(self.quad_pts) ** 2  # (Q,M)
        self.tris = tris
        self.nodes = nodes
        self.boundary = np.zeros(mesh.n_nodes, dtype=bool)
        self.boundary[mesh.boundary_nodes()] = True
        self.free = ~self.boundary
        cent = nodes[tris].mean(axis=1)
        self.centroid_tree = cKDTree(cent)
        # sparse assembly indices for 3x3 element blocks
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        self.asm_rows = rows
        self.asm_cols = cols


def _workspace(mesh: TriMesh, quadrature: int = 2) -> _Workspace:
    cache = getattr(mesh, "_fem_ws", None)
    if cache is None or cache[0] != quadrature:
        ws = _Workspace(mesh, quadrature)
        object.__setattr__(mesh, "_fem_ws", (quadrature, ws))
        return ws
    return cache[1]


def _grad_u(ws: _Workspace, values: np.ndarray) -> np.ndarray:
    return np.einsum("mk,mkd->md", values[ws.tris], ws.grads)


def _w_factor(ws: _Workspace, gu: np.ndarray) -> np.ndarray:
    """W at quadrature points, shape (Q, M)."""
    gu2 = np.sum(gu * gu, axis=1)  # (M,)
    return np.sqrt(1.0 + gu2[None, :] / ws.lam2_q)


def gradient_bound(u: ScalarField, quadrature: int = 2) -> float:
    """max over elements/quad points of |grad u|_g / W (always < 1)."""
    ws = _workspace(u.mesh, quadrature)
    gu = _grad_u(ws, u.values)
    gu2 = np.sum(gu * gu, axis=1)
    ratio2 = (gu2[None, :] / ws.lam2_q) / (1.0 + gu2[None, :] / ws.lam2_q)
    return float(np.sqrt(np.max(ratio2)))


def residual(u: ScalarField, H: float, quadrature: int = 2) -> ScalarField:
    """Weak-form residual; entries at boundary nodes are zeroed (they carry
    Dirichlet data, not equations).  Zero iff u is a discrete solution."""
    ws = _workspace(u.mesh, quadrature)
    gu = _grad_u(ws, u.values)
    W = _w_factor(ws, gu)  # (Q,M)
    gug = np.einsum("md,mkd->mk", gu, ws.grads)  # (M,3): grad u . grad phi_k
    inv_w = np.einsum("q,qm->m", ws.quad_w, 1.0 / W)
    out = np.zeros(u.mesh.n_nodes)
    contrib = -(gug * (ws.area * inv_w)[:, None])
    load = np.einsum("q,qm,qk->mk", ws.quad_w, ws.lam2_q, ws.quad_bc)
    contrib = contrib - 2.0 * H * ws.area[:, None] * load
    np.add.at(out, ws.tris.ravel(), contrib.ravel())
    out[ws.boundary] = 0.0
    return ScalarField(u.mesh, out)


class LinearizedOperator:
    """Exact derivative of the residual at u (the elliptic linearization).

    ``apply`` is the derivative action (matches finite differences of the
    residual); ``form_matrix`` returns the symmetric positive-definite weak
    form K = -dR/du restricted to interior nodes.
    """

    def __init__(self, u: ScalarField, quadrature: int = 2):
        ws = _workspace(u.mesh, quadrature)
        self.ws = ws
        self.mesh = u.mesh
        gu = _grad_u(ws, u.values)
        W = _w_factor(ws, gu)  # (Q,M)
        gug = np.einsum("md,mkd->mk", gu, ws.grads)  # (M,3)
        gkl = np.einsum("mkd,mld->mkl", ws.grads, ws.grads)  # (M,3,3)
        s1 = np.einsum("q,qm->m", ws.quad_w, 1.0 / W)
        s3 = np.einsum("q,qm->m", ws.quad_w, 1.0 / (ws.lam2_q * W**3))
        blocks = gkl * (ws.area * s1)[:, None, None] - np.einsum(
            "mk,ml,m->mkl", gug, gug, ws.area * s3
        )
        self._blocks = blocks
        K = sp.coo_matrix(
            (blocks.ravel(), (ws.asm_rows, ws.asm_cols)),
            shape=(u.mesh.n_nodes, u.mesh.n_nodes),
        ).tocsr()
        self._K = K

    def apply(self, h: np.ndarray) -> np.ndarray:
        out = -(self._K @ np.asarray(h, float))
        out[self.ws.boundary] = 0.0
        return out

    def form_matrix(self, free_only: bool = True):
        if not free_only:
            return self._K
        f = self.ws.free
        return self._K[f][:, f]


def linearize(u: ScalarField, quadrature: int = 2) -> LinearizedOperator:
    return LinearizedOperator(u, quadrature)


# ---------------------------------------------------------------------------
# Dirichlet solves


def _resolve_boundary_data(mesh: TriMesh, boundary_data) -> np.ndarray:
    """Full nodal array carrying the Dirichlet data on tagged boundary nodes.

    ``boundary_data`` maps tag -> scalar | callable(x, y) | array over the
    tag's nodes in ascending node order.  Every boundary tag must be covered.
    """
    tags = mesh.boundary_tags()
    missing = [t for t in tags if t not in boundary_data]
    if missing:
        raise ValueError(f"boundary data missing for tags {missing}")
    data = np.zeros(mesh.n_nodes)
    seen = np.zeros(mesh.n_nodes, dtype=bool)
    for tag in sorted(boundary_data.keys()):
        if tag not in tags:
            raise ValueError(f"unknown boundary tag {tag!r}")
        spec = boundary_data[tag]
        ids = mesh.boundary_nodes(tag)
        if callable(spec):
            vals = np.asarray(spec(mesh.nodes[ids, 0], mesh.nodes[ids, 1]), float)
        elif np.isscalar(spec):
            vals = np.full(len(ids), float(spec))
        else:
            vals = np.asarray(spec, float)
            if vals.shape != ids.shape:
                raise ValueError(f"array data for tag {tag!r} has wrong length")
        data[ids] = vals
        seen[ids] = True
    return data


def _newton(mesh, full_data, fixed_mask, H, config, init=None):
    ws = _workspace(mesh, config.quadrature)
    free = ~fixed_mask
    u = np.where(fixed_mask, full_data, 0.0 if init is None else init)
    u = u.copy()
    if init is None:
        # warm start from the linear (W = 1) problem
        field0 = ScalarField(mesh, u)
        r0 = _masked_residual(field0, H, config.quadrature, fixed_mask)
        K0 = _laplace_matrix(ws)[free][:, free]
        du = spsolve(K0.tocsc(), r0[free])
        u[free] += du
    fld = ScalarField(mesh, u)
    rn_prev = None
    for it in range(config.max_iter):
        r = _masked_residual(fld, H, config.quadrature, fixed_mask)
        rn = float(np.linalg.norm(r[free])) if free.any() else 0.0
        if rn <= config.newton_tol:
            rep = NewtonReport(it, rn, True, gradient_bound(fld, config.quadrature))
            return fld, rep
        op = LinearizedOperator(fld, config.quadrature)
        K = op.form_matrix(free_only=False)[free][:, free]
        du = spsolve(K.tocsc(), r[free])
        alpha = 1.0
        accepted = False
        for _ in range(30 if config.damping else 1):
            trial = fld.values.copy()
            trial[free] += alpha * du
            tf = ScalarField(mesh, trial)
            rt = _masked_residual(tf, H, config.quadrature, fixed_mask)
            rtn = float(np.linalg.norm(rt[free]))
            if rtn < rn * (1.0 - 1e-4 * alpha) or rtn <= config.newton_tol:
                fld = tf
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            rep = NewtonReport(it + 1, rn, False, gradient_bound(fld, config.quadrature))
            return fld, rep
        rn_prev = rn
    r = _masked_residual(fld, H, config.quadrature, fixed_mask)
    rn = float(np.linalg.norm(r[free])) if free.any() else 0.0
    rep = NewtonReport(config.max_iter, rn, rn <= config.newton_tol,
                       gradient_bound(fld, config.quadrature))
    return fld, rep


def _masked_residual(fld, H, quadrature, fixed_mask):
    ws = _workspace(fld.mesh, quadrature)
    gu = _grad_u(ws, fld.values)
    W = _w_factor(ws, gu)
    gug = np.einsum("md,mkd->mk", gu, ws.grads)
    inv_w = np.einsum("q,qm->m", ws.quad_w, 1.0 / W)
    out = np.zeros(fld.mesh.n_nodes)
    load = np.einsum("q,qm,qk->mk", ws.quad_w, ws.lam2_q, ws.quad_bc)
    contrib = -(gug * (ws.area * inv_w)[:, None]) - 2.0 * H * ws.area[:, None] * load
    np.add.at(out, ws.tris.ravel(), contrib.ravel())
    out[fixed_mask] = 0.0
    return out


def _laplace_matrix(ws: _Workspace):
    gkl = np.einsum("mkd,mld->mkl", ws.grads, ws.grads)
    blocks = gkl * ws.area[:, None, None]
    return sp.coo_matrix(
        (blocks.ravel(), (ws.asm_rows, ws.asm_cols)),
        shape=(len(ws.boundary), len(ws.boundary)),
    ).tocsr()


def solve_dirichlet(mesh: TriMesh, boundary_data, H: float, config: SolverConfig | None = None,
                    init: ScalarField | None = None):
    """Damped Newton solve with nodal Dirichlet data.

    Returns ``(field, report)``; when the iteration fails to converge the
    report says so and the field is the last iterate (not a solution).
    """
    config = config or SolverConfig()
    data = _resolve_boundary_data(mesh, boundary_data)
    ws = _workspace(mesh, config.quadrature)
    init_vals = None
    if init is not None:
        _ = _same_mesh(init, init)
        if init.mesh is not mesh:
            raise ValueError("init field lives on a different mesh")
        init_vals = init.values
    fld, rep = _newton(mesh, data, ws.boundary, H, config, init=init_vals)
    if not rep.converged:
        raise SolverError(
            f"Newton did not converge: residual {rep.residual_norm:.3e} after {rep.iterations} iterations"
        )
    return fld, rep


def try_solve_dirichlet(mesh, boundary_data, H, config=None, init=None):
    """Like solve_dirichlet but returns (field_or_None, report) on failure."""
    config = config or SolverConfig()
    data = _resolve_boundary_data(mesh, boundary_data)
    ws = _workspace(mesh, config.quadrature)
    init_vals = init.values if init is not None else None
    fld, rep = _newton(mesh, data, ws.boundary, H, config, init=init_vals)
    return (fld if rep.converged else None), rep


# ---------------------------------------------------------------------------
# disk replacement and the sweep iteration


@dataclass
class _DiskPatch:
    sub: TriMesh
    node_map: np.ndarray
    sub_boundary: np.ndarray  # submesh boundary node ids
    sub_interior: np.ndarray


def _disk_patch(mesh: TriMesh, center, radius: float) -> _DiskPatch:
    cvec = np.asarray(getattr(center, "vec", center), float)
    mob = hg.disk_automorphism(-complex(cvec[0], cvec[1]))
    c_e, r_e = mob.apply_circle(np.zeros(2), math.tanh(0.5 * radius))
    inside = np.hypot(*(mesh.nodes - c_e).T) <= r_e + 1e-12
    tri_in = inside[mesh.triangles].all(axis=1)
    if not tri_in.any():
        raise ValueError("replacement disk contains no triangles")
    sub, node_map = restrict(mesh, tri_in)
    ws = _workspace(sub)
    sub_boundary = np.where(ws.boundary)[0]
    sub_interior = np.where(~ws.boundary)[0]
    return _DiskPatch(sub, node_map, sub_boundary, sub_interior)


def disk_replace(w: ScalarField, disk, H: float, config: SolverConfig | None = None,
                 patch: _DiskPatch | None = None) -> ScalarField:
    """Replace w inside a geodesic disk by the solution with w's trace there.

    ``disk`` is ``(center, hyperbolic_radius)``.  Outside the disk the output
    is bitwise identical to w.
    """
    config = config or SolverConfig()
    if patch is None:
        center, radius = disk
        patch = _disk_patch(w.mesh, center, radius)
    sub_vals = w.values[patch.node_map]
    fixed = np.zeros(patch.sub.n_nodes, dtype=bool)
    fixed[patch.sub_boundary] = True
    fld, rep = _newton(patch.sub, sub_vals, fixed, H, config, init=sub_vals)
    if not rep.converged:
        raise SolverError(f"local disk solve failed: residual {rep.residual_norm:.3e}")
    out = w.values.copy()
    out[patch.node_map[patch.sub_interior]] = fld.values[patch.sub_interior]
    return ScalarField(w.mesh, out)


def _subinterior_nodes(mesh: TriMesh, center_vec: np.ndarray, radius: float) -> np.ndarray:
    """Nodes that the replacement patch of this disk actually re-solves: all
    of their incident triangles lie inside the disk."""
    mob = hg.disk_automorphism(-complex(center_vec[0], center_vec[1]))
    c_e, r_e = mob.apply_circle(np.zeros(2), math.tanh(0.5 * radius))
    inside = np.hypot(*(mesh.nodes - c_e).T) <= r_e + 1e-12
    tri_in = inside[mesh.triangles].all(axis=1)
    out = inside.copy()
    bad = np.unique(mesh.triangles[~tri_in])
    out[bad] = False
    return out


def make_disk_cover(mesh: TriMesh, radius: float):
    """Overlapping geodesic disks whose replacement patches jointly re-solve
    every interior node.  Greedy and deterministic; raises if the radius is
    too small relative to the mesh size."""
    ws = _workspace(mesh)
    interior = np.where(ws.free)[0]
    nodes = mesh.nodes
    order = interior[np.lexsort((nodes[interior, 1], nodes[interior, 0]))]
    covered = np.zeros(mesh.n_nodes, dtype=bool)
    centers = []
    for i in order:
        if covered[i]:
            continue
        p = nodes[i].copy()
        sub = _subinterior_nodes(mesh, p, radius)
        if not sub[i]:
            raise ValueError(
                "cover radius too small: a disk centered at a node fails to re-solve it"
            )
        centers.append((p, radius))
        covered |= sub
    if not covered[interior].all():
        raise ValueError("disk cover leaves interior nodes untouched")
    return centers


def perron(u_minus: ScalarField, u_plus: ScalarField, disk_cover, H: float,
           config: SolverConfig | None = None, max_sweeps: int = 400):
    """Monotone sweep iteration: disk replacements capped by a supersolution.

    Starting from the subsolution ``u_minus``, repeatedly replaces on the
    cover disks (fixed canonical order) and caps with ``u_plus``; iterates
    must be nondecreasing within ``config.monotone_tol``, which fails loudly
    when ``u_plus`` is not a supersolution.  Stops when a full sweep changes
    the field by less than ``config.sweep_tol``.
    """
    config = config or SolverConfig()
    _same_mesh(u_minus, u_plus)
    if np.any(u_minus.values > u_plus.values + 1e-12):
        raise ValueError("u_minus must lie below u_plus")
    local_cfg = replace(config, newton_tol=min(config.newton_tol, 1e-12))
    patches = [_disk_patch(u_minus.mesh, c, r) for c, r in disk_cover]
    # coverage: every interior node is interior to some patch
    ws = _workspace(u_minus.mesh)
    cov = np.zeros(u_minus.mesh.n_nodes, dtype=bool)
    for p in patches:
        cov[p.node_map[p.sub_interior]] = True
    if not cov[ws.free].all():
        raise ValueError("disk cover leaves interior nodes untouched by replacement")

    w = u_minus.copy()
    sup_changes = []
    max_viol = 0.0
    converged = False
    sweeps = 0
    for sweep in range(max_sweeps):
        start = w.values.copy()
        for patch in patches:
            w = disk_replace(w, None, H, local_cfg, patch=patch)
            w = min_field(w, u_plus)
        viol = float(np.max(start - w.values))
        max_viol = max(max_viol, viol)
        if viol > config.monotone_tol:
            raise SolverError(
                f"sweep decreased the iterate by {viol:.3e} (> {config.monotone_tol:.0e}); "
                "the upper barrier is not a supersolution"
            )
        w.values = np.maximum(start, w.values)
        change = float(np.max(np.abs(w.values - start)))
        sup_changes.append(change)
        sweeps = sweep + 1
        if change < config.sweep_tol:
            converged = True
            break
    rn = float(np.linalg.norm(residual(w, H, config.quadrature).values))
    report = PerronReport(sweeps, sup_changes, max_viol, converged, rn)
    return w, report


# ---------------------------------------------------------------------------
# barrier continuation on an annulus


def annulus_barrier(u: ScalarField, t_max: float, steps: int, H: float,
                    config: SolverConfig | None = None,
                    inner_tag: str = "inner", outer_tag: str = "outer"):
    """Family of solutions with data (u on the outer circle, u + t inner).

    Continuation in t with warm starts; returns ``(family, eps_reached)``
    where family is a list of (t, field).  The first failing t truncates the
    family.
    """
    config = config or SolverConfig()
    mesh = u.mesh
    inner = mesh.boundary_nodes(inner_tag)
    outer = mesh.boundary_nodes(outer_tag)
    if not len(inner) or not len(outer):
        raise ValueError("annulus mesh must carry the inner/outer boundary tags")
    family = [(0.0, u.copy())]
    eps_reached = 0.0
    prev = u
    for k in range(1, steps + 1):
        t = t_max * k / steps
        data = {
            outer_tag: u.values[outer],
            inner_tag: u.values[inner] + t,
        }
        fld, rep = try_solve_dirichlet(mesh, data, H, config, init=prev)
        if fld is None:
            break
        lo = float(np.min(fld.values - u.values))
        hi = float(np.max(fld.values - (u.values + t)))
        if lo < -1e-8 or hi > 1e-8:
            break  # left the barrier ordering; treat as failure
        family.append((t, fld))
        eps_reached = t
        prev = fld
    return family, eps_reached


# ---------------------------------------------------------------------------
# capped construction of the +/-infinity boundary-value solution


def _horocycle_chain_data(mesh: TriMesh, tag: str, value_from: float, value_to: float):
    """Linear interpolation in hyperbolic arclength along a boundary chain."""
    chains = mesh.boundary_chains(tag)
    if len(chains) != 1:
        raise ValueError(f"expected one boundary chain for {tag!r}")
    chain = chains[0]
    pts = mesh.nodes[chain]
    lam = hg.conformal_factor(pts)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    ds = 0.5 * (lam[:-1] + lam[1:]) * seg
    s = np.concatenate([[0.0], np.cumsum(ds)])
    frac = s / s[-1] if s[-1] > 0 else np.zeros_like(s)
    vals = value_from + (value_to - value_from) * frac
    order = np.argsort(chain)
    return np.asarray(chain)[order], vals[order]


def scherk_boundary_data(mesh: TriMesh, domain, cap_M: float,
                         horocycle_values: dict | None = None) -> dict:
    """Dirichlet data +M on A-edges, -M on B-edges, and, on each truncation
    horocycle, either supplied nodal values or linear interpolation in
    hyperbolic arclength between the neighbouring caps."""
    data = {}
    n = domain.n
    for i in range(n):
        tag = domain.edge_tag(i)
        if tag in mesh.boundary_tags():
            data[tag] = cap_M if domain.labels[i] == "A" else -cap_M
    for tag in mesh.boundary_tags():
        if not tag.startswith("C"):
            continue
        if horocycle_values is not None:
            data[tag] = horocycle_values[tag]
            continue
        vertex = int(tag[1:].split("@")[0])
        lab_in = domain.labels[(vertex - 1) % n]   # edge ending at this vertex
        lab_out = domain.labels[vertex]            # edge starting here
        v_in = cap_M if lab_in == "A" else -cap_M
        v_out = cap_M if lab_out == "A" else -cap_M
        ids, vals = _horocycle_chain_data(mesh, tag, v_in, v_out)
        # chain direction: match the endpoint adjacent to the incoming edge
        edge_nodes = set(mesh.boundary_nodes(domain.edge_tag((vertex - 1) % n)).tolist())
        chain = mesh.boundary_chains(tag)[0]
        if chain[0] not in edge_nodes and chain[-1] in edge_nodes:
            ids2, vals2 = _horocycle_chain_data(mesh, tag, v_out, v_in)
            ids, vals = ids2, vals2
        data[tag] = vals
    return data


def scherk_approx(domain, family, cap_M: float, spec, H: float,
                  config: SolverConfig | None = None, mesh: TriMesh | None = None,
                  ramp_cap: float = 4.0, cap_step: float = 4.0):
    """Capped approximation of the solution with data +inf on A-edges and
    -inf on B-edges.

    The horocycle arcs cannot carry caps of their own: their data starts as a
    linear arclength interpolation between the neighbouring caps at the
    reference level ``ramp_cap``, and every further continuation step reuses
    the previous solution's own trace there.  Raising the edge caps with the
    horocycle data pinned this way gives data monotone in the cap, so the
    fields increase and the interior saturates; interpolating afresh at every
    cap would instead grow interior values linearly in the cap.

    Returns ``(field, report, cap_reached)``; a Newton failure stops the
    continuation at the largest convergent cap.
    """
    config = config or SolverConfig()
    if mesh is None:
        mesh = meshmod.mesh_truncated_domain(domain, family, spec)
    first_cap = min(abs(cap_M), ramp_cap) if cap_M != 0.0 else 0.0
    data = scherk_boundary_data(mesh, domain, first_cap)
    fld, report = try_solve_dirichlet(mesh, data, H, config)
    if fld is None:
        raise SolverError("capped construction failed at the ramp stage")
    reached = first_cap
    M = first_cap
    while M < cap_M - 1e-12:
        M = min(cap_M, M + cap_step)
        horo = {
            tag: fld.values[mesh.boundary_nodes(tag)]
            for tag in mesh.boundary_tags()
            if tag.startswith("C")
        }
        data = scherk_boundary_data(mesh, domain, float(M), horocycle_values=horo)
        cand, rep = try_solve_dirichlet(mesh, data, H, config, init=fld)
        if cand is None:
            break
        fld, report, reached = cand, rep, float(M)
    return fld, report, reached


# ---------------------------------------------------------------------------
# radial reference profile


@dataclass
class RadialProfile:
    """Rotationally symmetric solution profile u(rho) with u(0) = 0.

    Built from the first integral of the graph equation on geodesic disks:
    the flux through the circle of radius rho forces

        sinh(rho) u'/sqrt(1 + u'^2) = 2H (cosh(rho) - 1),

    so u'(rho) = Q / sqrt(sinh(rho)^2 - Q^2) with Q = 2H (cosh(rho) - 1),
    integrated by high-order quadrature.  Serves as the independent oracle
    for the finite-element solver.
    """

    H: float
    rho: np.ndarray
    u: np.ndarray
    du: np.ndarray

    def u_of(self, r):
        return np.interp(np.asarray(r, float), self.rho, self.u)

    def du_of(self, r):
        r = np.asarray(r, float)
        Q = 2.0 * self.H * (np.cosh(r) - 1.0)
        s = np.sinh(r)
        return np.where(r > 0, Q / np.sqrt(np.maximum(s * s - Q * Q, 1e-300)), 0.0)

    def field_on(self, mesh: TriMesh, center=None) -> ScalarField:
        cvec = np.zeros(2) if center is None else np.asarray(getattr(center, "vec", center), float)
        d2 = np.sum((mesh.nodes - cvec) ** 2, axis=1)
        a = 1.0 - np.sum(cvec * cvec)
        b = 1.0 - np.sum(mesh.nodes**2, axis=1)
        rho = np.arccosh(1.0 + 2.0 * d2 / (a * b))
        return ScalarField(mesh, self.u_of(rho))


def radial_oracle(H: float, rho_max: float, n: int = 4000) -> RadialProfile:
    if not 0.0 < H < 0.5:
        raise ValueError(f"H = {H} outside (0, 1/2)")
    if rho_max <= 0 or n < 2:
        raise ValueError("need rho_max > 0 and n >= 2")
    rho = np.linspace(0.0, rho_max, n)

    def du(r):
        Q = 2.0 * H * (np.cosh(r) - 1.0)
        s = np.sinh(r)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = Q[pos] / np.sqrt(s[pos] ** 2 - Q[pos] ** 2)
        return out

    # 8-point Gauss-Legendre on each interval
    xg, wg = np.polynomial.legendre.leggauss(8)
    mid = 0.5 * (rho[:-1] + rho[1:])
    half = 0.5 * np.diff(rho)
    pts = mid[:, None] + half[:, None] * xg[None, :]
    vals = du(pts.ravel()).reshape(pts.shape)
    incr = half * (vals @ wg)
    u = np.concatenate([[0.0], np.cumsum(incr)])
    return RadialProfile(H=H, rho=rho, u=u, du=du(rho))
