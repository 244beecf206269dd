"""Lagrange P1/P2 finite elements on triangles: spaces, quadrature, assembly.

Assembly uses a degree-5 rule (coefficients are smooth but not polynomial),
error norms a degree-7-capable rule.  All element loops are vectorized over
triangles and the triplet-to-CSR compression order is fixed, so assembling
the same inputs twice gives bitwise-identical matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as expr_mod
from .expr import Expr, differentiate, evaluate
from .mesh import Mesh
from .sparse import CsrMatrix, lu_solve

ASSEMBLY_DEGREE = 5
NORM_DEGREE = 7


@dataclass(frozen=True)
class QuadRule:
    """Quadrature on the reference triangle {xi,eta >= 0, xi+eta <= 1}."""

    degree: int
    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,), sums to the reference area 1/2


def _orbit3(a):
    b = (1.0 - a) / 2.0
    return [(a, b, b), (b, a, b), (b, b, a)]


def _orbit6(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _rule_from_barycentric(degree, groups):
    pts, wts = [], []
    for lams, w in groups:
        for lam in lams:
            pts.append((lam[1], lam[2]))  # (xi, eta) = (lambda_1, lambda_2)
            wts.append(w)
    return QuadRule(degree, np.array(pts), np.array(wts) / 2.0)


_CENTROID = [(1 / 3, 1 / 3, 1 / 3)]

# Edge-midpoint rule, exact for quadratics.
_RULE_2 = _rule_from_barycentric(2, [([(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)], 1 / 3)])

# Classic symmetric 7-point rule, exact for quintics.
_RULE_5 = _rule_from_barycentric(5, [
    (_CENTROID, 0.225),
    (_orbit3(0.059715871789770), 0.132394152788506),
    (_orbit3(0.797426985353087), 0.125939180544827),
])

# Symmetric 16-point rule with positive weights, exact for degree 8
# (weights refined so every moment up to degree 8 is matched to 1e-16).
_RULE_7 = _rule_from_barycentric(7, [
    (_CENTROID, 0.14431560767779872),
    (_orbit3(0.08141482341452808), 0.09509163426727361),
    (_orbit3(0.6588613844964488), 0.10321737053472294),
    (_orbit3(0.8989055433659368), 0.03245849762319746),
    (_orbit6(0.008394777409969158, 0.2631128296345982), 0.027230314174436537),
])

_RULES = {2: _RULE_2, 5: _RULE_5, 7: _RULE_7}


def quad_rule(degree: int) -> QuadRule:
    """Symmetric rule exact to the requested degree; degrees 2, 5, 7."""
    try:
        return _RULES[degree]
    except KeyError:
        raise ValueError(f"unsupported quadrature degree {degree}; choose from {sorted(_RULES)}")


def reference_basis(k: int, p):
    """Basis values and reference gradients at point(s) p on the reference triangle.

    For a single point returns ((nloc,), (nloc, 2)); for an (nq, 2) batch
    returns ((nq, nloc), (nq, nloc, 2)).  Local ordering: the three vertices
    (0,0), (1,0), (0,1), then for k=2 the edge midpoints (1/2,0), (1/2,1/2),
    (0,1/2).
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = p[None, :] if single else p
    xi, eta = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)  # (nq, 3)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # (3, 2)

    if k == 1:
        vals = lam
        grads = np.broadcast_to(dlam, (len(pts), 3, 2)).copy()
    elif k == 2:
        nq = len(pts)
        vals = np.empty((nq, 6))
        grads = np.empty((nq, 6, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
        for e, (i, j) in enumerate([(0, 1), (1, 2), (2, 0)]):
            vals[:, 3 + e] = 4.0 * lam[:, i] * lam[:, j]
            grads[:, 3 + e] = 4.0 * (lam[:, i, None] * dlam[j] + lam[:, j, None] * dlam[i])
    else:
        raise ValueError(f"unsupported element degree {k}")

    if single:
        return vals[0], grads[0]
    return vals, grads


class FunctionSpace:
    """P1 or P2 Lagrange space over a mesh.

    DOFs are mesh vertices (P1) plus edge midpoints (P2); cell_dofs maps each
    triangle to its local-to-global numbering, vertices first.
    """

    def __init__(self, mesh: Mesh, degree: int):
        if degree not in (1, 2):
            raise ValueError(f"degree must be 1 or 2, got {degree}")
        self.mesh = mesh
        self.degree = degree
        nv = mesh.num_vertices
        if degree == 1:
            self.dof_coords = mesh.vertices.copy()
            self.cell_dofs = mesh.triangles.copy()
            self.boundary_dof = mesh.boundary_vertex.copy()
        else:
            edges, tri_edges, boundary_edge = mesh.edges()
            midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
            self.dof_coords = np.vstack([mesh.vertices, midpoints])
            self.cell_dofs = np.hstack([mesh.triangles, nv + tri_edges])
            self.boundary_dof = np.concatenate([mesh.boundary_vertex, boundary_edge])
        self.ndof = len(self.dof_coords)
        self.local_size = self.cell_dofs.shape[1]
        self._geom = None
        self._tables = {}
        self._pattern = None
        self._mass = None

    # -- cached geometry and basis tables ------------------------------------

    def geometry(self):
        if self._geom is None:
            p = self.mesh.vertices[self.mesh.triangles]  # (nt, 3, 2)
            v0 = p[:, 0]
            jac = np.stack([p[:, 1] - v0, p[:, 2] - v0], axis=2)  # columns
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            inv = np.empty_like(jac)
            inv[:, 0, 0] = jac[:, 1, 1]
            inv[:, 0, 1] = -jac[:, 1, 0]
            inv[:, 1, 0] = -jac[:, 0, 1]
            inv[:, 1, 1] = jac[:, 0, 0]
            inv_t = inv / det[:, None, None]  # rows of J^{-1}: inv_t[t,i,:] . dref = d/dx_i
            self._geom = (v0, jac, det, inv_t)
        return self._geom

    def tables(self, degree=ASSEMBLY_DEGREE):
        """(rule, vals, phys_grads, phys_points, scale) for a quadrature degree."""
        if degree not in self._tables:
            rule = quad_rule(degree)
            vals, ref_grads = reference_basis(self.degree, rule.points)
            v0, jac, det, inv_t = self.geometry()
            phys = v0[:, None, :] + np.einsum("tij,qj->tqi", jac, rule.points)
            grads = np.einsum("tij,qlj->tqli", inv_t, ref_grads)
            scale = det[:, None] * rule.weights[None, :]
            self._tables[degree] = (rule, vals, grads, phys, scale)
        return self._tables[degree]

    def pattern(self):
        """CSR pattern plus triplet positions for deterministic fast assembly."""
        if self._pattern is None:
            nloc = self.local_size
            rows = np.repeat(self.cell_dofs, nloc, axis=1).ravel()
            cols = np.tile(self.cell_dofs, (1, nloc)).ravel()
            order = np.lexsort((cols, rows))
            rs, cs = rows[order], cols[order]
            first = np.ones(len(rs), dtype=bool)
            first[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
            group = np.cumsum(first) - 1
            pos = np.empty(len(rs), dtype=np.int64)
            pos[order] = group
            indices = cs[first]
            indptr = np.zeros(self.ndof + 1, dtype=np.int64)
            np.add.at(indptr, rs[first] + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._pattern = (indptr, indices, pos, int(first.sum()))
        return self._pattern

    def assemble_from_local(self, local) -> CsrMatrix:
        """Scatter (nt, nloc, nloc) element matrices into a CSR matrix."""
        indptr, indices, pos, nnz = self.pattern()
        data = np.bincount(pos, weights=local.ravel(), minlength=nnz)
        return CsrMatrix(self.ndof, indptr, indices, data)

    def mass_matrix(self) -> CsrMatrix:
        if self._mass is None:
            self._mass = assemble_mass(self)
        return self._mass


@dataclass
class FEField:
    """One species' density at one time level: coefficients over a space."""

    space: FunctionSpace
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndof,):
            raise ValueError(
                f"coefficient vector has shape {self.coeffs.shape}, expected ({self.space.ndof},)"
            )

    def at_quad(self, degree=ASSEMBLY_DEGREE):
        _, vals, _, _, _ = self.space.tables(degree)
        return np.einsum("tl,ql->tq", self.coeffs[self.space.cell_dofs], vals)

    def grad_at_quad(self, degree=ASSEMBLY_DEGREE):
        _, _, grads, _, _ = self.space.tables(degree)
        return np.einsum("tl,tqli->tqi", self.coeffs[self.space.cell_dofs], grads)

    def eval(self, x, y):
        """Point evaluation; raises for points outside the mesh rectangle."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        xf = np.broadcast_to(x, shape).ravel()
        yf = np.broadcast_to(y, shape).ravel()
        m = self.space.mesh
        x0, x1, y0, y1 = m.bounds
        tol = 1e-12 * max(x1 - x0, y1 - y0)
        if np.any(xf < x0 - tol) or np.any(xf > x1 + tol) or \
                np.any(yf < y0 - tol) or np.any(yf > y1 + tol):
            raise ValueError("point outside the meshed rectangle")
        fx = np.clip((xf - x0) / (x1 - x0) * m.nx, 0, m.nx * (1 - 1e-16))
        fy = np.clip((yf - y0) / (y1 - y0) * m.ny, 0, m.ny * (1 - 1e-16))
        ix = np.minimum(fx.astype(np.int64), m.nx - 1)
        iy = np.minimum(fy.astype(np.int64), m.ny - 1)
        cx, cy = fx - ix, fy - iy  # local cell coordinates in [0, 1]
        lower = cx >= cy  # below the lower-left -> upper-right diagonal
        tri = 2 * (iy * m.nx + ix) + np.where(lower, 0, 1)
        xi = np.where(lower, cx - cy, cx)
        eta = np.where(lower, cy, cy - cx)
        vals, _ = reference_basis(self.space.degree, np.stack([xi, eta], axis=1))
        out = np.einsum("pl,pl->p", self.coeffs[self.space.cell_dofs[tri]], vals)
        return float(out[0]) if x.ndim == 0 and y.ndim == 0 else out.reshape(shape)


# ---------------------------------------------------------------------------
# Coefficient evaluation at quadrature points
# ---------------------------------------------------------------------------

def _eval_coefficient(w, t, pts):
    """Evaluate a weight (constant, Expr, or callable) at (t, pts[...,0], pts[...,1])."""
    if w is None:
        return np.ones(pts.shape[:-1])
    if isinstance(w, str):
        w = expr_mod.parse(w)
    if isinstance(w, Expr):
        out = evaluate(w, t, pts[..., 0], pts[..., 1])
    elif callable(w):
        out = w(t, pts[..., 0], pts[..., 1])
    else:
        out = float(w)
    return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1])


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def assemble_mass(space: FunctionSpace, weight=None, t=0.0, fields=()) -> CsrMatrix:
    """Weighted mass matrix: (a,b) entry = sum over triangles of w phi_a phi_b.

    ``weight`` may be None (w = 1), a constant, an Expr, or a callable of
    (t, x, y); if ``fields`` are given the weight is multiplied pointwise by
    the sum of the fields' values.
    """
    _, vals, _, phys, scale = space.tables(ASSEMBLY_DEGREE)
    w = _eval_coefficient(weight, t, phys)
    if fields:
        acc = np.zeros(phys.shape[:-1])
        for f in fields:
            if f.space is not space:
                raise ValueError("field lives on a different function space")
            acc += f.at_quad(ASSEMBLY_DEGREE)
        w = w * acc
    local = np.einsum("tq,qa,qb->tab", scale * w, vals, vals)
    return space.assemble_from_local(local)


def assemble_stiffness(space: FunctionSpace, d: float) -> CsrMatrix:
    """Diffusion matrix d * (grad phi_a, grad phi_b); requires d > 0."""
    if d <= 0:
        raise ValueError(f"diffusion coefficient must be positive, got {d}")
    _, _, grads, _, scale = space.tables(ASSEMBLY_DEGREE)
    local = d * np.einsum("tq,tqai,tqbi->tab", scale, grads, grads)
    return space.assemble_from_local(local)


def assemble_load(space: FunctionSpace, f, t=0.0) -> np.ndarray:
    """Load vector with entries sum over triangles of f phi_a."""
    _, vals, _, phys, scale = space.tables(ASSEMBLY_DEGREE)
    fv = _eval_coefficient(f, t, phys)
    local = np.einsum("tq,qa->ta", scale * fv, vals)
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.ndof)


def interpolate(space: FunctionSpace, g, t=0.0) -> FEField:
    """Nodal interpolant: coefficient at each DOF equals g at its coordinate."""
    pts = space.dof_coords
    coeffs = _eval_coefficient(g, t, pts)
    return FEField(space, coeffs.copy(), time=t)


def l2_project(space: FunctionSpace, g, t=0.0) -> FEField:
    """L2 projection of g onto the space: solves M c = load(g)."""
    b = assemble_load(space, g, t)
    return FEField(space, lu_solve(space.mass_matrix(), b), time=t)


def apply_dirichlet(a: CsrMatrix, b, space: FunctionSpace, g, t=0.0):
    """Replace boundary-DOF rows of A by identity rows and set b to g there.

    Returns modified copies; columns are left untouched (the per-step systems
    are nonsymmetric anyway).
    """
    bdofs = np.flatnonzero(space.boundary_dof)
    a = a.copy()
    b = np.asarray(b, dtype=float).copy()
    for r in bdofs:
        lo, hi = a.indptr[r], a.indptr[r + 1]
        a.data[lo:hi] = 0.0
        k = np.searchsorted(a.indices[lo:hi], r)
        if k == hi - lo or a.indices[lo + k] != r:
            raise ValueError("matrix pattern lacks a diagonal entry on a boundary row")
        a.data[lo + k] = 1.0
    if len(bdofs):
        b[bdofs] = _eval_coefficient(g, t, space.dof_coords[bdofs])
    return a, b


def error_norms(field: FEField, g, t=0.0, grad=None):
    """(L2, H1) distance between the FE field and an exact function.

    ``g`` is an Expr (spatial derivatives are derived symbolically) or a
    callable, in which case ``grad=(gx, gy)`` callables must be supplied.
    Uses the degree-7 rule.
    """
    if isinstance(g, str):
        g = expr_mod.parse(g)
    if isinstance(g, Expr):
        gx, gy = differentiate(g, "x"), differentiate(g, "y")
    elif grad is not None:
        gx, gy = grad
    else:
        raise ValueError("callable g requires grad=(gx, gy)")
    space = field.space
    _, _, _, phys, scale = space.tables(NORM_DEGREE)
    diff = field.at_quad(NORM_DEGREE) - _eval_coefficient(g, t, phys)
    l2_sq = float(np.sum(scale * diff**2))
    gr = field.grad_at_quad(NORM_DEGREE)
    dgx = gr[:, :, 0] - _eval_coefficient(gx, t, phys)
    dgy = gr[:, :, 1] - _eval_coefficient(gy, t, phys)
    h1_sq = l2_sq + float(np.sum(scale * (dgx**2 + dgy**2)))
    return np.sqrt(l2_sq), np.sqrt(h1_sq)
