"""Conserved quantities, error norms and macro-cell postprocessing.

The discrete energy matches what the stepper conserves:

    E_h(u) = 1/2 u^H A u + u^H P u + (beta/2) int |u_h|^4
             - Omega Re(u^H L u)

with the quartic term integrated by the element's default rule (exact for
it, and identical to the rule used inside the stepper, so conservation
checks are not polluted by quadrature differences).

Error norms against an exact solution use an elevated Gauss rule, two
orders above the default, so the measured rates are not limited by
quadrature of the non-polynomial exact solution.

postprocess_i2h lifts a solution to a piecewise biquadratic field on the
mesh of 2x2 cell blocks.  For the conforming family this interpolates the
nine fine-grid nodal values of each block (reproducing global biquadratics
exactly); for the nonconforming family the biquadratic is the least squares
fit to the sixteen fine DOF functionals (12 edge means, 4 cell means).
Combined with the supercloseness of the interpolant this turns the
first-order gradient accuracy into second order.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from rotgpe.elements import ElementKind, gauss_rule
from rotgpe.scheme import Field


@dataclass
class ObservableRecord:
    t: float
    mass: float
    energy: float
    rel_mass_err: float
    rel_energy_err: float
    h1_norm: float
    fp_iters: int


@dataclass
class ExactSolution:
    """Closed-form reference solution; callables are vectorized over x, y."""

    value: Callable       # (x, y, t) -> complex
    grad: Callable        # (x, y, t) -> (du/dx, du/dy)
    source: Optional[Callable] = None  # (x, y, t) -> complex driving term


def mass_of(u, forms):
    """Squared L2 norm u^H M u."""
    return float(np.real(np.vdot(u.coeffs, forms.mass @ u.coeffs)))


def quartic_integral(u):
    """int |u_h|^4 by the element's exact-for-quartics rule."""
    vals = u.space.eval_at_quad(u.coeffs)
    return float(np.real(u.space.integrate(np.abs(vals) ** 4)))


def energy_h_of(u, forms, cfg):
    c = u.coeffs
    kinetic = 0.5 * np.real(np.vdot(c, forms.stiffness @ c))
    trap = np.real(np.vdot(c, forms.potential @ c))
    interaction = 0.5 * cfg.beta * quartic_integral(u)
    rotation = -cfg.omega * np.real(np.vdot(c, forms.rotation @ c))
    return float(kinetic + trap + interaction + rotation)


def l2_norm(u):
    vals = u.space.eval_at_quad(u.coeffs)
    return float(np.sqrt(np.real(u.space.integrate(np.abs(vals) ** 2))))


def broken_h1_norm(u):
    """Broken H1 seminorm (sum of per-cell gradient energies)."""
    grads = u.space.eval_grad_at_quad(u.coeffs)
    dens = (np.abs(grads) ** 2).sum(axis=-1)
    return float(np.sqrt(np.real(u.space.integrate(dens))))


def second_moment(u):
    """int (x^2 + y^2) |u_h|^2, the squared width of the cloud."""
    space = u.space
    pts = space.cell_points()
    r2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
    vals = space.eval_at_quad(u.coeffs)
    return float(np.real(space.integrate(r2 * np.abs(vals) ** 2)))


def interpolate_exact(exact, t, space):
    """Element interpolant of the exact solution at time t."""
    return Field(space, space.interpolate(lambda x, y: exact.value(x, y, t)))


def error_norms(u_h, exact, t):
    """L2 and broken H1 errors against the exact solution.

    Returns a dict with keys "l2" and "h1"; h1 is the broken seminorm.
    """
    space = u_h.space
    rule = gauss_rule(space.quad.order + 2)
    pts = space.cell_points(rule)
    uv = space.eval_at_quad(u_h.coeffs, rule)
    ev = exact.value(pts[..., 0], pts[..., 1], t)
    l2sq = np.real(space.integrate(np.abs(uv - ev) ** 2, rule))
    gv = space.eval_grad_at_quad(u_h.coeffs, rule)
    gx, gy = exact.grad(pts[..., 0], pts[..., 1], t)
    h1sq = np.real(space.integrate(np.abs(gv[..., 0] - gx) ** 2
                                   + np.abs(gv[..., 1] - gy) ** 2, rule))
    return {"l2": float(np.sqrt(l2sq)), "h1": float(np.sqrt(h1sq))}


def superclose_norm(u_h, exact, t):
    """Broken H1 distance between u_h and the interpolant of the exact
    solution; decays one order faster than the plain gradient error."""
    d = interpolate_exact(exact, t, u_h.space).coeffs - u_h.coeffs
    return broken_h1_norm(Field(u_h.space, d))


# --- macro-cell biquadratic postprocessing ---------------------------------

# tensor quadratic monomials xi^p eta^q, p, q in {0, 1, 2}; index m = 3p + q
_P = np.repeat(np.arange(3), 3)
_Q = np.tile(np.arange(3), 3)


def _mono_vandermonde(xi, eta):
    return xi[:, None] ** _P[None, :] * eta[:, None] ** _Q[None, :]


def _q1_macro_matrix():
    # biquadratic Lagrange at the 9 fine nodes of a 2x2 block, local
    # coordinates in {-1, 0, 1}^2, node index k = 3*j_local + i_local
    xi = np.tile(np.array([-1.0, 0.0, 1.0]), 3)
    eta = np.repeat(np.array([-1.0, 0.0, 1.0]), 3)
    return np.linalg.inv(_mono_vandermonde(xi, eta))


def _segment_moment(a, b, p):
    """Mean of s^p over [a, b]."""
    return (b ** (p + 1) - a ** (p + 1)) / ((p + 1) * (b - a))


def _eq1rot_macro_matrix():
    """Least squares map from the 16 fine DOF means of a block to the 9
    biquadratic monomial coefficients; geometry is the same for every block.

    Row order: 6 horizontal edges (j_local major, then i_local), 6 vertical
    edges (i_local major, then j_local), then the 4 cells (row major).

    The 16 functionals annihilate (xi^2 - 1/3)(eta^2 - 1/3), the tensor
    product of second Legendre polynomials, so the fit has a rank-one null
    space.  Solving the least squares problem in the tensor Legendre basis
    makes the dropped direction exactly that mode (whose true coefficient is
    two orders smaller than the rest); the naive monomial pseudoinverse
    would instead leak the constant component into the quadratic ones and
    ruin the gradient.
    """
    rows = []
    for jl in range(3):
        eta = jl - 1.0
        for di in range(2):
            a, b = di - 1.0, di + 0.0
            rows.append([_segment_moment(a, b, p) * eta ** q
                         for p, q in zip(_P, _Q)])
    for il in range(3):
        xi = il - 1.0
        for dj in range(2):
            a, b = dj - 1.0, dj + 0.0
            rows.append([xi ** p * _segment_moment(a, b, q)
                         for p, q in zip(_P, _Q)])
    for dj in range(2):
        for di in range(2):
            rows.append([_segment_moment(di - 1.0, di + 0.0, p)
                         * _segment_moment(dj - 1.0, dj + 0.0, q)
                         for p, q in zip(_P, _Q)])
    R = np.array(rows)
    # columns of T1 are 1, s, (3s^2-1)/2 in monomial coordinates
    T1 = np.array([[1.0, 0.0, -0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.5]])
    T = np.kron(T1, T1)  # index 3p+q matches _P, _Q
    return T @ np.linalg.pinv(R @ T)


class MacroQuadraticField:
    """Piecewise biquadratic field on the mesh of 2x2 cell blocks.

    coeffs[m, k] is the coefficient of monomial xi^p eta^q (k = 3p + q) on
    macro cell m, in macro-local coordinates.
    """

    def __init__(self, mesh, coeffs):
        if mesh.nx % 2 or mesh.ny % 2:
            raise ValueError("postprocessing needs even cell counts")
        self.mesh = mesh
        self.mx = mesh.nx // 2
        self.my = mesh.ny // 2
        self.coeffs = coeffs
        self.Hx = mesh.hx * 2.0
        self.Hy = mesh.hy * 2.0
        d = mesh.domain
        cx = d.xmin + self.Hx * (np.arange(self.mx) + 0.5)
        cy = d.ymin + self.Hy * (np.arange(self.my) + 0.5)
        CX, CY = np.meshgrid(cx, cy)
        self.centers = np.column_stack([CX.ravel(), CY.ravel()])

    def eval_tables(self, rule):
        """Monomial values and physical gradients at rule points."""
        xi, eta = rule.points[:, 0], rule.points[:, 1]
        V = _mono_vandermonde(xi, eta)
        dV = np.empty((len(xi), 9, 2))
        dV[:, :, 0] = np.where(_P > 0, _P * xi[:, None] ** np.maximum(_P - 1, 0)
                               * eta[:, None] ** _Q, 0.0) * (2.0 / self.Hx)
        dV[:, :, 1] = np.where(_Q > 0, _Q * eta[:, None] ** np.maximum(_Q - 1, 0)
                               * xi[:, None] ** _P, 0.0) * (2.0 / self.Hy)
        return V, dV

    def cell_points(self, rule):
        half = np.array([self.Hx / 2.0, self.Hy / 2.0])
        return self.centers[:, None, :] + rule.points[None, :, :] * half


def postprocess_i2h(u_h):
    """Lift u_h to the macro biquadratic field described in the module doc."""
    space = u_h.space
    mesh = space.mesh
    if mesh.nx % 2 or mesh.ny % 2:
        raise ValueError("postprocessing needs even cell counts")
    mx, my = mesh.nx // 2, mesh.ny // 2
    if space.kind == ElementKind.Q1:
        grid = u_h.coeffs.reshape(mesh.ny + 1, mesh.nx + 1)
        vals = np.empty((my * mx, 9), dtype=np.complex128)
        m = 0
        for J in range(my):
            for I in range(mx):
                vals[m] = grid[2 * J:2 * J + 3, 2 * I:2 * I + 3].ravel()
                m += 1
        coeffs = vals @ _q1_macro_matrix().T
    else:
        nxm = mesh.nx
        n_hedges = nxm * (mesh.ny + 1)
        vals = np.empty((my * mx, 16), dtype=np.complex128)
        m = 0
        for J in range(my):
            for I in range(mx):
                idx = []
                for jl in range(3):
                    for di in range(2):
                        idx.append((2 * J + jl) * nxm + (2 * I + di))
                for il in range(3):
                    for dj in range(2):
                        idx.append(n_hedges + (2 * J + dj) * (nxm + 1) + (2 * I + il))
                for dj in range(2):
                    for di in range(2):
                        idx.append(mesh.n_edges + (2 * J + dj) * nxm + (2 * I + di))
                vals[m] = u_h.coeffs[idx]
                m += 1
        coeffs = vals @ _eq1rot_macro_matrix().T
    return MacroQuadraticField(mesh, coeffs)


def postprocessed_h1_error(u_h, exact, t):
    """Full H1 error of the macro biquadratic lift against the exact
    solution (elevated quadrature on the macro cells)."""
    macro = postprocess_i2h(u_h)
    rule = gauss_rule(u_h.space.quad.order + 2)
    V, dV = macro.eval_tables(rule)
    pts = macro.cell_points(rule)
    vals = macro.coeffs @ V.T                     # (nmacro, nq)
    gx_h = macro.coeffs @ dV[:, :, 0].T
    gy_h = macro.coeffs @ dV[:, :, 1].T
    ev = exact.value(pts[..., 0], pts[..., 1], t)
    gx, gy = exact.grad(pts[..., 0], pts[..., 1], t)
    detJ = macro.Hx * macro.Hy / 4.0
    w = rule.weights
    l2sq = detJ * float(np.real((np.abs(vals - ev) ** 2 @ w).sum()))
    h1sq = detJ * float(np.real(((np.abs(gx_h - gx) ** 2
                                  + np.abs(gy_h - gy) ** 2) @ w).sum()))
    return float(np.sqrt(l2sq + h1sq))
