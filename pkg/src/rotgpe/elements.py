"""Reference elements, DOF maps and quadrature on the reference square [-1,1]^2.

Two element families are supported:

- ElementKind.Q1: continuous bilinear elements, one DOF per mesh node,
  local space span{1, x, y, xy}, DOFs are vertex values.
- ElementKind.EQ1ROT: nonconforming rotated-bilinear elements enriched by a
  cell bubble, local space span{1, x, y, x^2, y^2}.  The five DOFs are the
  four edge means (bottom, right, top, left) and the cell mean, which makes
  edge means continuous across interior edges while traces jump pointwise.

Bases are represented by monomial coefficient matrices obtained by inverting
the matrix of DOF functionals applied to the monomials, so basis_i(dof_j
functional) = delta_ij by construction.

Global DOF numbering: Q1 uses node ids; EQ1ROT uses edge ids for the edge
means followed by n_edges + cell id for the cell means.  Homogeneous
Dirichlet conditions constrain boundary nodes (Q1) or boundary edge means
(EQ1ROT).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class ElementKind(Enum):
    Q1 = "q1"
    EQ1ROT = "eq1rot"


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss rule on [-1,1]^2; weights sum to 4."""

    order: int
    points: np.ndarray   # (n, 2)
    weights: np.ndarray  # (n,)


@dataclass(frozen=True)
class QuadratureRule1D:
    order: int
    points: np.ndarray
    weights: np.ndarray


def gauss_rule_1d(q):
    x, w = np.polynomial.legendre.leggauss(q)
    return QuadratureRule1D(q, x, w)


def gauss_rule(q):
    """q*q point tensor Gauss rule, exact for degree 2q-1 per variable."""
    x, w = np.polynomial.legendre.leggauss(q)
    X, Y = np.meshgrid(x, x)
    W = np.outer(w, w)
    return QuadratureRule(q, np.column_stack([X.ravel(), Y.ravel()]), W.ravel())


class ReferenceBasis:
    """Polynomial basis on [-1,1]^2 stored as monomial coefficients.

    coeffs[i, m] is the coefficient of monomial m in basis function i, with
    monomial exponents in exps[m] = (px, py).
    """

    def __init__(self, kind, exps, coeffs):
        self.kind = kind
        self.exps = np.asarray(exps, dtype=np.int64)
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        self.n_local = self.coeffs.shape[0]

    def _monomials(self, pts):
        px = self.exps[:, 0]
        py = self.exps[:, 1]
        return pts[:, 0:1] ** px * pts[:, 1:2] ** py  # (npts, nmono)

    def values(self, pts):
        """Basis values at reference points, shape (npts, n_local)."""
        pts = np.atleast_2d(pts)
        return self._monomials(pts) @ self.coeffs.T

    def grads(self, pts):
        """Reference gradients, shape (npts, n_local, 2)."""
        pts = np.atleast_2d(pts)
        px = self.exps[:, 0]
        py = self.exps[:, 1]
        x = pts[:, 0:1]
        y = pts[:, 1:2]
        # d/dx x^p y^q = p x^(p-1) y^q, with 0 * x^(-1) handled via where
        dx = np.where(px > 0, px * x ** np.maximum(px - 1, 0) * y ** py, 0.0)
        dy = np.where(py > 0, py * y ** np.maximum(py - 1, 0) * x ** px, 0.0)
        out = np.empty((pts.shape[0], self.n_local, 2))
        out[:, :, 0] = dx @ self.coeffs.T
        out[:, :, 1] = dy @ self.coeffs.T
        return out


_Q1_VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def reference_basis(kind):
    if kind == ElementKind.Q1:
        exps = [(0, 0), (1, 0), (0, 1), (1, 1)]
        # functional matrix: monomials evaluated at the four vertices
        F = np.array([[1.0, vx, vy, vx * vy] for vx, vy in _Q1_VERTICES])
        return ReferenceBasis(kind, exps, np.linalg.inv(F).T)
    if kind == ElementKind.EQ1ROT:
        exps = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)]
        # rows: means of {1, x, y, x^2, y^2} over bottom/right/top/left edge
        # and over the cell
        F = np.array([
            [1.0,  0.0, -1.0, 1 / 3, 1.0],
            [1.0,  1.0,  0.0, 1.0,   1 / 3],
            [1.0,  0.0,  1.0, 1 / 3, 1.0],
            [1.0, -1.0,  0.0, 1.0,   1 / 3],
            [1.0,  0.0,  0.0, 1 / 3, 1 / 3],
        ])
        return ReferenceBasis(kind, exps, np.linalg.inv(F).T)
    raise ValueError(f"unknown element kind: {kind!r}")


class DofMap:
    """Cell-to-global DOF connectivity plus Dirichlet constraint flags."""

    def __init__(self, cell_dofs, n_dofs, constrained):
        self.cell_dofs = cell_dofs
        self.n_dofs = n_dofs
        self.constrained = constrained
        self.free = np.flatnonzero(~constrained)

    @property
    def n_constrained(self):
        return int(self.constrained.sum())


def build_dof_map(mesh, kind):
    if kind == ElementKind.Q1:
        return DofMap(mesh.cells.copy(), mesh.n_nodes, mesh.node_on_boundary.copy())
    if kind == ElementKind.EQ1ROT:
        nc = mesh.n_cells
        cell_dofs = np.column_stack([mesh.cell_edges,
                                     mesh.n_edges + np.arange(nc, dtype=np.int64)])
        constrained = np.concatenate([mesh.edge_on_boundary,
                                      np.zeros(nc, dtype=bool)])
        return DofMap(cell_dofs, mesh.n_edges + nc, constrained)
    raise ValueError(f"unknown element kind: {kind!r}")


# reference trace points of side s at 1D coordinate g: bottom (g,-1),
# right (1,g), top (g,1), left (-1,g)
_SIDE_AXIS = [0, 1, 0, 1]          # coordinate that varies along the side
_SIDE_FIXED = [-1.0, 1.0, 1.0, -1.0]


def side_points(side, g):
    """Map 1D points g in [-1,1] onto side `side` of the reference square."""
    pts = np.empty((len(g), 2))
    ax = _SIDE_AXIS[side]
    pts[:, ax] = g
    pts[:, 1 - ax] = _SIDE_FIXED[side]
    return pts


class FeSpace:
    """A finite element space on a structured mesh.

    Bundles the mesh, element kind, DOF map and the default quadrature rule
    (order 3 for Q1, order 5 for EQ1ROT: both integrate every form in the
    scheme exactly, including the quartic density terms, which is what makes
    the conservation identities hold to solver precision).
    """

    def __init__(self, mesh, kind, quad_order=None):
        self.mesh = mesh
        self.kind = kind
        self.basis = reference_basis(kind)
        self.dofmap = build_dof_map(mesh, kind)
        if quad_order is None:
            quad_order = 3 if kind == ElementKind.Q1 else 5
        self.quad = gauss_rule(quad_order)
        self.edge_quad = gauss_rule_1d(5)
        self.detJ = mesh.hx * mesh.hy / 4.0
        self.grad_scale = np.array([2.0 / mesh.hx, 2.0 / mesh.hy])
        self._tables = {}

    @property
    def n_dofs(self):
        return self.dofmap.n_dofs

    def tables(self, rule=None):
        """Basis values and physical gradients at the rule's points.

        Returns (phi, dphi) with shapes (nq, n_local) and (nq, n_local, 2);
        gradients are already scaled to physical coordinates, which is the
        same on every cell of a uniform mesh.
        """
        rule = rule or self.quad
        key = rule.order
        if key not in self._tables:
            phi = self.basis.values(rule.points)
            dphi = self.basis.grads(rule.points) * self.grad_scale
            self._tables[key] = (phi, dphi)
        return self._tables[key]

    def cell_points(self, rule=None):
        """Physical quadrature points, shape (n_cells, nq, 2)."""
        rule = rule or self.quad
        half = np.array([self.mesh.hx / 2.0, self.mesh.hy / 2.0])
        return self.mesh.cell_centers[:, None, :] + rule.points[None, :, :] * half

    def eval_at_quad(self, coeffs, rule=None):
        """Field values at quadrature points, shape (n_cells, nq)."""
        phi, _ = self.tables(rule)
        return coeffs[self.dofmap.cell_dofs] @ phi.T

    def eval_grad_at_quad(self, coeffs, rule=None):
        """Physical field gradients at quadrature points, (n_cells, nq, 2)."""
        _, dphi = self.tables(rule)
        local = coeffs[self.dofmap.cell_dofs]
        return np.einsum("cl,qld->cqd", local, dphi)

    def integrate(self, cell_values, rule=None):
        """Integrate per-quadrature-point values over the whole mesh."""
        rule = rule or self.quad
        return self.detJ * (cell_values @ rule.weights).sum()

    def interpolate(self, fn):
        """Apply the element's DOF functionals to a callable fn(x, y).

        Q1 samples nodes; EQ1ROT takes edge means (5 point Gauss) and cell
        means.  Constrained DOFs are zeroed so the result satisfies the
        homogeneous Dirichlet condition.
        """
        mesh = self.mesh
        if self.kind == ElementKind.Q1:
            coeffs = np.asarray(fn(mesh.nodes[:, 0], mesh.nodes[:, 1]),
                                dtype=np.complex128)
        else:
            g, w = self.edge_quad.points, self.edge_quad.weights
            p0 = mesh.nodes[mesh.edge_nodes[:, 0]]
            p1 = mesh.nodes[mesh.edge_nodes[:, 1]]
            pts = (p0[:, None, :] * (1 - g[None, :, None]) / 2
                   + p1[:, None, :] * (1 + g[None, :, None]) / 2)
            edge_means = np.asarray(fn(pts[..., 0], pts[..., 1]),
                                    dtype=np.complex128) @ w / 2.0
            cp = self.cell_points()
            cell_vals = np.asarray(fn(cp[..., 0], cp[..., 1]), dtype=np.complex128)
            cell_means = cell_vals @ self.quad.weights / 4.0
            coeffs = np.concatenate([edge_means, cell_means])
        coeffs[self.dofmap.constrained] = 0.0
        return coeffs

    def zero_constrained(self, coeffs):
        coeffs = np.array(coeffs, dtype=np.complex128, copy=True)
        coeffs[self.dofmap.constrained] = 0.0
        return coeffs
