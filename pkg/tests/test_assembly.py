import numpy as np
import pytest

from rotgpe.assembly import (PotentialSpec, apply_dirichlet, assemble_density_mass,
                             assemble_jump_pairing, assemble_load, assemble_mass,
                             assemble_potential, assemble_rotation,
                             assemble_stiffness, build_forms)
from rotgpe.elements import ElementKind, FeSpace
from rotgpe.mesh import RectDomain, build_mesh

import oracles

KINDS = [ElementKind.Q1, ElementKind.EQ1ROT]
# small meshes for dense comparison, one square and one skewed/anisotropic
MESHES = [
    (RectDomain(0, 1, 0, 1), 4, 4),
    (RectDomain(-0.3, 1.1, -0.2, 1.0), 3, 4),
]


def _space(dom, nx, ny, kind):
    return FeSpace(build_mesh(dom, nx, ny), kind)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("dom,nx,ny", MESHES)
def test_matrices_match_dense_oracle(kind, dom, nx, ny):
    space = _space(dom, nx, ny, kind)
    mesh = space.mesh
    V = PotentialSpec.harmonic(1.0, 2.0)
    rng = np.random.default_rng(5)
    a = rng.standard_normal(space.n_dofs) + 1j * rng.standard_normal(space.n_dofs)
    b = rng.standard_normal(space.n_dofs) + 1j * rng.standard_normal(space.n_dofs)

    pairs = [
        (assemble_mass(space).toarray(), oracles.dense_mass(mesh, kind)),
        (assemble_stiffness(space).toarray(), oracles.dense_stiffness(mesh, kind)),
        (assemble_potential(space, V).toarray(),
         oracles.dense_potential(mesh, kind, lambda x, y: V.values(x, y))),
        (assemble_rotation(space).toarray(), oracles.dense_rotation(mesh, kind)),
        (assemble_jump_pairing(space).toarray(), oracles.dense_pairing(mesh, kind)),
        (assemble_density_mass(space, a, b).toarray(),
         oracles.dense_density_mass(mesh, kind, a, b)),
    ]
    for got, want in pairs:
        assert np.abs(got - want).max() < 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_load_matches_dense_oracle(kind):
    space = _space(RectDomain(0, 1, 0, 1), 4, 4, kind)

    # polynomial data so both quadratures integrate f*phi exactly
    def f(x, y, t):
        return (1 + t) * (x ** 2 * y - 2 * y + 1j * (x - y ** 2))

    got = assemble_load(space, f, 0.3)
    want = oracles.dense_load(space.mesh, kind, f, 0.3)
    want[space.dofmap.constrained] = 0.0
    assert np.abs(got - want).max() < 1e-12


def test_q1_element_matrices_closed_form():
    # single square cell of size h: the global matrices ARE the element ones
    h = 0.25
    space = _space(RectDomain(0, h, 0, h), 1, 1, ElementKind.Q1)
    # reorder row-major node ids into the cell's counterclockwise vertex order
    p = space.dofmap.cell_dofs[0]
    M = assemble_mass(space).toarray()[np.ix_(p, p)]
    A = assemble_stiffness(space).toarray()[np.ix_(p, p)]
    M_want = h ** 2 / 36.0 * np.array([[4, 2, 1, 2], [2, 4, 2, 1],
                                       [1, 2, 4, 2], [2, 1, 2, 4]])
    A_want = 1.0 / 6.0 * np.array([[4, -1, -2, -1], [-1, 4, -1, -2],
                                   [-2, -1, 4, -1], [-1, -2, -1, 4]])
    assert np.abs(M - M_want).max() < 1e-15
    assert np.abs(A - A_want).max() < 1e-14


@pytest.mark.parametrize("kind", KINDS)
def test_mass_and_stiffness_structure(kind):
    space = _space(RectDomain(0, 1, 0, 1), 4, 4, kind)
    M = assemble_mass(space).toarray()
    A = assemble_stiffness(space).toarray()
    assert np.abs(M - M.T).max() < 1e-15
    assert np.abs(A - A.T).max() < 1e-13
    assert np.linalg.eigvalsh(M).min() > 0
    # constants are in both local spaces: stiffness annihilates them
    ones = np.ones(space.n_dofs)
    assert np.abs(A @ ones).max() < 1e-13


def test_rotation_is_minus_i_times_real():
    space = _space(RectDomain(0, 1, 0, 1), 3, 3, ElementKind.EQ1ROT)
    L = assemble_rotation(space).toarray()
    assert np.abs(L.real).max() < 1e-15


def test_conforming_rotation_hermitian_after_elimination():
    space = _space(RectDomain(0, 1, 0, 1), 8, 8, ElementKind.Q1)
    L = apply_dirichlet(assemble_rotation(space), space.dofmap.constrained)
    assert np.abs((L - L.conj().T)).max() < 1e-13


@pytest.mark.parametrize("dom,nx,ny", MESHES + [(RectDomain(0, 1, 0, 2), 6, 6)])
def test_skew_defect_identity(dom, nx, ny):
    """L - L^H = -iB cellwise integration by parts, raw and constrained.

    The anisotropic meshes matter: on square cells the constrained pairing
    happens to cancel and the identity would hold for trivial reasons.
    """
    space = _space(dom, nx, ny, ElementKind.EQ1ROT)
    Lr = assemble_rotation(space)
    Br = assemble_jump_pairing(space)
    assert np.abs(((Lr - Lr.conj().T) + 1j * Br)).max() < 1e-13
    con = space.dofmap.constrained
    L = apply_dirichlet(Lr, con)
    B = apply_dirichlet(Br, con)
    assert np.abs(((L - L.conj().T) + 1j * B)).max() < 1e-13

    rng = np.random.default_rng(7)
    for _ in range(100):
        v = rng.standard_normal(space.n_dofs) + 1j * rng.standard_normal(space.n_dofs)
        v /= np.linalg.norm(v)
        lhs = np.imag(np.vdot(v, (Lr @ v)))
        rhs = -0.5 * np.real(np.vdot(v, (Br @ v)))
        assert abs(lhs - rhs) < 1e-12


def test_pairing_symmetric_and_conforming_vanishes():
    space = _space(RectDomain(0, 1, 0, 2), 5, 4, ElementKind.EQ1ROT)
    B = assemble_jump_pairing(space)
    assert np.abs((B - B.T)).max() < 1e-14

    spc = _space(RectDomain(0, 1, 0, 2), 5, 4, ElementKind.Q1)
    Bc = apply_dirichlet(assemble_jump_pairing(spc), spc.dofmap.constrained)
    assert np.abs(Bc).max() < 1e-14


def test_potential_energy_of_interpolant():
    """v^T P v for the interpolant of sin(pi x) sin(pi y), V harmonic with
    gamma = (1, 2): converges to (5/4)(1/6 - 1/(4 pi^2))."""
    limit = 1.25 * (1.0 / 6.0 - 1.0 / (4 * np.pi ** 2))
    vals = []
    for n in (32, 64):
        space = _space(RectDomain(0, 1, 0, 1), n, n, ElementKind.Q1)
        v = space.interpolate(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        P = assemble_potential(space, PotentialSpec.harmonic(1.0, 2.0))
        vals.append(np.real(np.vdot(v, P @ v)))
    assert abs(vals[-1] - limit) < 1e-3
    # second order convergence to the limit
    assert abs(vals[0] - limit) / abs(vals[1] - limit) > 3.5


def test_stiffness_energy_of_interpolant_closed_form():
    """v^T A v for the interpolant of sin(pi x) sin(pi y) equals 2ab with
    a = 2 sin^2(pi h/2)/h^2 and b = 1/2 - (1 - cos(pi h))/6 exactly; the
    deviation from the limit pi^2/2 shrinks by 4 per refinement."""
    limit = np.pi ** 2 / 2.0
    devs = []
    for n in (64, 128):
        h = 1.0 / n
        space = _space(RectDomain(0, 1, 0, 1), n, n, ElementKind.Q1)
        v = space.interpolate(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        A = assemble_stiffness(space)
        got = np.real(np.vdot(v, A @ v))
        a = 2.0 * np.sin(np.pi * h / 2) ** 2 / h ** 2
        b = (1.0 + np.cos(np.pi * h) / 2.0) / 3.0
        assert abs(got - 2 * a * b) < 1e-12
        devs.append(abs(got - limit))
    assert 3.7 < devs[0] / devs[1] < 4.3


def test_uniform_load_q1():
    space = _space(RectDomain(0, 1, 0, 1), 4, 4, ElementKind.Q1)
    F = assemble_load(space, lambda x, y, t: np.ones_like(x), 0.0)
    h2 = space.mesh.hx * space.mesh.hy
    free = ~space.dofmap.constrained
    assert np.abs(F[free] - h2).max() < 1e-15
    assert np.abs(F[~free]).max() == 0.0


def test_apply_dirichlet():
    space = _space(RectDomain(0, 1, 0, 1), 3, 3, ElementKind.Q1)
    con = space.dofmap.constrained
    M = apply_dirichlet(assemble_mass(space), con, unit_diagonal=True)
    D = M.toarray()
    idx = np.flatnonzero(con)
    assert np.allclose(D[idx][:, idx], np.eye(len(idx)))
    assert np.abs(D[idx][:, ~con]).max() == 0.0
    assert np.abs(D[~con][:, con]).max() == 0.0


@pytest.mark.parametrize("kind", KINDS)
def test_density_mass_properties(kind):
    space = _space(RectDomain(0, 1, 0, 1), 4, 4, kind)
    rng = np.random.default_rng(11)
    a = rng.standard_normal(space.n_dofs) + 1j * rng.standard_normal(space.n_dofs)
    b = rng.standard_normal(space.n_dofs) + 1j * rng.standard_normal(space.n_dofs)
    Mab = assemble_density_mass(space, a, b).toarray()
    Mba = assemble_density_mass(space, b, a).toarray()
    assert np.abs(Mab - Mba).max() < 1e-13
    assert np.abs(Mab - Mab.T).max() < 1e-13
    # nonnegative density: positive semidefinite
    assert np.linalg.eigvalsh(Mab).min() > -1e-12


def test_formset_wiring():
    space = _space(RectDomain(0, 1, 0, 2), 4, 4, ElementKind.EQ1ROT)
    forms = build_forms(space, PotentialSpec.harmonic(1.0, 1.0))
    H = forms.rotation_herm
    assert np.abs((H - H.conj().T)).max() < 1e-13
    want = (forms.rotation + 0.5j * forms.pairing).toarray()
    assert np.abs(H.toarray() - want).max() == 0.0
    con = space.dofmap.constrained
    assert np.allclose(forms.mass.diagonal()[con], 1.0)
    for mat in (forms.stiffness, forms.potential, forms.rotation, forms.pairing):
        arr = mat.toarray()
        assert np.abs(arr[con, :]).max() == 0.0
        assert np.abs(arr[:, con]).max() == 0.0
