"""Sparse assembly of every bilinear form used by the scheme.

All forms are assembled cell by cell with the element's default Gauss rule,
which integrates each integrand below exactly (polynomial degrees stay under
2q-1 per variable).  That exactness is not cosmetic: the conservation
properties of the time stepper reduce to algebraic identities between these
matrices which only hold when nothing is under-integrated.

Matrix conventions, for basis functions phi_i (all real):

- mass       M[i,j]  = sum_K int_K phi_j phi_i
- stiffness  A[i,j]  = sum_K int_K grad phi_j . grad phi_i
- potential  P[i,j]  = sum_K int_K V phi_j phi_i
- rotation   L[i,j]  = sum_K int_K (-i)(x d_y phi_j - y d_x phi_j) phi_i
- pairing    B[i,j]  = sum_K int_{dK} phi_j phi_i (x . nperp) ds,
  with nperp = (n_y, -n_x) built from the outward normal of each cell

Cell-wise integration by parts gives L - L^H = -iB exactly, so the
combination L + (i/2)B is Hermitian.  For continuous elements the interior
pairing contributions cancel and B vanishes after boundary elimination; for
the nonconforming family B is the boundary defect of the broken rotation
form, and pairing it back in is precisely the stabilization that restores
exact mass and energy conservation.

Homogeneous Dirichlet conditions are imposed by zeroing constrained rows and
columns (unit diagonal on the mass matrix so systems stay nonsingular).
"""

import numpy as np
import scipy.sparse as sp

from rotgpe.elements import ElementKind, side_points


class PotentialSpec:
    """External potential V(x, y), evaluated pointwise during assembly."""

    def __init__(self, fn, label="custom"):
        self._fn = fn
        self.label = label

    @classmethod
    def harmonic(cls, gamma_x, gamma_y):
        """V = (gamma_x^2 x^2 + gamma_y^2 y^2) / 2."""
        gx2, gy2 = gamma_x ** 2, gamma_y ** 2

        def fn(x, y):
            return 0.5 * (gx2 * x ** 2 + gy2 * y ** 2)

        spec = cls(fn, label=f"harmonic({gamma_x},{gamma_y})")
        spec.gamma_x, spec.gamma_y = gamma_x, gamma_y
        return spec

    @classmethod
    def zero(cls):
        return cls(lambda x, y: np.zeros_like(x), label="zero")

    @classmethod
    def custom(cls, fn):
        return cls(fn)

    def values(self, x, y):
        return self._fn(x, y)


def _scatter_matrix(space, cell_mats, dtype=np.float64):
    """Sum per-cell element matrices into a global CSR matrix."""
    dofs = space.dofmap.cell_dofs
    nc, nloc = dofs.shape
    rows = np.broadcast_to(dofs[:, :, None], (nc, nloc, nloc))
    cols = np.broadcast_to(dofs[:, None, :], (nc, nloc, nloc))
    data = np.broadcast_to(cell_mats, (nc, nloc, nloc))
    mat = sp.coo_matrix((data.ravel().astype(dtype), (rows.ravel(), cols.ravel())),
                        shape=(space.n_dofs, space.n_dofs))
    return mat.tocsr()


def assemble_mass(space):
    phi, _ = space.tables()
    w = space.quad.weights
    Me = space.detJ * np.einsum("q,qi,qj->ij", w, phi, phi)
    return _scatter_matrix(space, Me[None, :, :])


def assemble_stiffness(space):
    _, dphi = space.tables()
    w = space.quad.weights
    Ke = space.detJ * np.einsum("q,qid,qjd->ij", w, dphi, dphi)
    return _scatter_matrix(space, Ke[None, :, :])


def assemble_potential(space, potential):
    phi, _ = space.tables()
    w = space.quad.weights
    pts = space.cell_points()
    V = potential.values(pts[..., 0], pts[..., 1])
    Pe = space.detJ * np.einsum("q,cq,qi,qj->cij", w, V, phi, phi)
    return _scatter_matrix(space, Pe)


def assemble_rotation(space):
    """Angular momentum form; complex since the operator is -i(x d_y - y d_x)."""
    phi, dphi = space.tables()
    w = space.quad.weights
    pts = space.cell_points()
    # trial function j carries the derivative, test function i the plain value
    Ge = np.einsum("q,cq,qj,qi->cij", w, pts[..., 0], dphi[:, :, 1], phi) \
       - np.einsum("q,cq,qj,qi->cij", w, pts[..., 1], dphi[:, :, 0], phi)
    return _scatter_matrix(space, -1j * space.detJ * Ge, dtype=np.complex128)


# outward normals of the reference square sides (bottom, right, top, left)
# rotated to nperp = (n_y, -n_x); (x . nperp) picks out -x, -y, +x, +y
_SIDE_MOMENT = [(-1.0, 0), (-1.0, 1), (1.0, 0), (1.0, 1)]  # (sign, coordinate)


def assemble_jump_pairing(space):
    """Boundary pairing sum_K int_{dK} phi_j phi_i (x . nperp) ds.

    Real and symmetric.  Interior contributions from neighbouring cells
    cancel for continuous traces, so the conforming matrix vanishes after
    boundary elimination; the nonconforming one does not.
    """
    mesh = space.mesh
    g, w1 = space.edge_quad.points, space.edge_quad.weights
    half = np.array([mesh.hx / 2.0, mesh.hy / 2.0])
    nloc = space.basis.n_local
    Be = np.zeros((mesh.n_cells, nloc, nloc))
    for side in range(4):
        ref = side_points(side, g)
        tr = space.basis.values(ref)  # (nq1, nloc)
        pts = mesh.cell_centers[:, None, :] + ref[None, :, :] * half
        sign, coord = _SIDE_MOMENT[side]
        moment = sign * pts[..., coord]          # (nc, nq1)
        # nperp is tangential, so the moment coordinate is also the one that
        # varies along the side; |e|/2 is the arc length scale
        ds = half[coord]
        Be += ds * np.einsum("q,cq,qi,qj->cij", w1, moment, tr, tr)
    return _scatter_matrix(space, Be)


def assemble_density_mass(space, a, b):
    """Weighted mass matrix with density rho = (|a_h|^2 + |b_h|^2)/2.

    The averaged density (rather than the density of the average) is what
    lets the quartic energy term telescope across a time step.
    """
    phi, _ = space.tables()
    w = space.quad.weights
    rho = 0.5 * (np.abs(space.eval_at_quad(a)) ** 2
                 + np.abs(space.eval_at_quad(b)) ** 2)
    Pe = space.detJ * np.einsum("q,cq,qi,qj->cij", w, rho, phi, phi)
    return _scatter_matrix(space, Pe)


def assemble_load(space, f, t):
    """Load vector F[i] = sum_K int_K f(x, y, t) phi_i."""
    phi, _ = space.tables()
    w = space.quad.weights
    pts = space.cell_points()
    fv = np.asarray(f(pts[..., 0], pts[..., 1], t), dtype=np.complex128)
    Fe = space.detJ * np.einsum("q,cq,qi->ci", w, fv, phi)
    F = np.zeros(space.n_dofs, dtype=np.complex128)
    np.add.at(F, space.dofmap.cell_dofs, Fe)
    F[space.dofmap.constrained] = 0.0
    return F


def apply_dirichlet(mat, constrained, unit_diagonal=False):
    """Zero constrained rows and columns; optionally set their diagonal to 1."""
    free = sp.diags((~constrained).astype(mat.dtype))
    out = free @ mat @ free
    if unit_diagonal:
        out = out + sp.diags(constrained.astype(mat.dtype))
    return out.tocsr()


class FormSet:
    """All constrained global matrices for one space and potential.

    Attributes
    ----------
    mass, stiffness, potential : real CSR
    rotation : complex CSR
    pairing : real CSR
    rotation_herm : complex CSR
        rotation + (i/2) pairing; Hermitian by the cell-wise integration by
        parts identity, this is the operator the time stepper applies.
    """

    def __init__(self, space, potential_spec):
        self.space = space
        self.potential_spec = potential_spec
        con = space.dofmap.constrained
        self.mass = apply_dirichlet(assemble_mass(space), con, unit_diagonal=True)
        self.stiffness = apply_dirichlet(assemble_stiffness(space), con)
        self.potential = apply_dirichlet(assemble_potential(space, potential_spec), con)
        self.rotation = apply_dirichlet(assemble_rotation(space), con)
        self.pairing = apply_dirichlet(assemble_jump_pairing(space), con)
        self.rotation_herm = (self.rotation + 0.5j * self.pairing).tocsr()

    def density_mass(self, a, b):
        """Constrained averaged-density mass matrix for coefficients a, b."""
        con = self.space.dofmap.constrained
        return apply_dirichlet(assemble_density_mass(self.space, a, b), con)


def build_forms(space, potential_spec):
    return FormSet(space, potential_spec)
