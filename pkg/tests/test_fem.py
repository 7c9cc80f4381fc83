import numpy as np
import pytest
import scipy.sparse as sp

from fe2hom.errors import MeshError
from fe2hom.fem import (
    Material,
    apply_dirichlet,
    assemble,
    element_dofs,
    element_stiffness,
    quadrature,
    shape_gradients,
)
from fe2hom.linsolve import factor_solve
from fe2hom.mesh import VOID, gen_grid

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

# Exact entries of the unit-square plane-strain element matrix, integrated
# symbolically (sympy, exact B-matrix integration) and frozen here.
K_NU0_ROW0 = [1 / 2, 1 / 8, -1 / 4, -1 / 8, -1 / 4, -1 / 8, 0.0, 1 / 8]
K_NU03_ROW0 = [15 / 26, 25 / 104, -5 / 13, 5 / 104, -15 / 52, -25 / 104, 5 / 52, -5 / 104]


def test_quadrature_rules():
    q1 = quadrature(1)
    assert len(q1) == 1
    np.testing.assert_array_equal(q1[0][0], [0.0, 0.0])
    assert q1[0][1] == 4.0
    q2 = quadrature(2)
    g = 1 / np.sqrt(3)
    pts = sorted(tuple(np.round(p / g, 12)) for p, _ in q2)
    assert pts == [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    assert all(w == pytest.approx(1.0, abs=1e-15) for _, w in q2)
    assert sum(w for _, w in q2) == pytest.approx(4.0, abs=1e-14)
    with pytest.raises(ValueError):
        quadrature(3)


def test_material_validation():
    with pytest.raises(ValueError):
        Material(0.0, 0.3)
    with pytest.raises(ValueError):
        Material(1.0, 0.5)
    with pytest.raises(ValueError):
        Material(1.0, -1.0)


def test_unit_square_symbolic_values():
    K0 = element_stiffness(UNIT, Material(1.0, 0.0))
    assert K0[0, 0] == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_allclose(K0[0], K_NU0_ROW0, atol=1e-14)
    K3 = element_stiffness(UNIT, Material(1.0, 0.3))
    np.testing.assert_allclose(K3[0], K_NU03_ROW0, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize(
    "coords",
    [
        UNIT,
        np.array([[0.0, 0.0], [2.0, 0.3], [2.4, 1.7], [-0.2, 1.1]]),
        np.array([[1.0, 1.0], [1.5, 1.0], [1.5, 3.0], [1.0, 3.0]]),
    ],
)
def test_element_spectrum_and_kernel(coords):
    K = element_stiffness(coords, Material(3.0, 0.2))
    assert np.max(np.abs(K - K.T)) <= 1e-12 * np.max(np.abs(K))
    ev = np.linalg.eigvalsh(K)
    scale = ev.max()
    assert np.sum(np.abs(ev) < 1e-10 * scale) == 3
    assert ev.min() > -1e-10 * scale
    tx = np.tile([1.0, 0.0], 4)
    ty = np.tile([0.0, 1.0], 4)
    rot = np.column_stack([-coords[:, 1], coords[:, 0]]).ravel()
    for t in (tx, ty, rot):
        assert np.linalg.norm(K @ t) < 1e-12 * scale * np.linalg.norm(t)


def test_element_size_invariance():
    mat = Material(2.0, 0.3)
    np.testing.assert_allclose(element_stiffness(2 * UNIT, mat), element_stiffness(UNIT, mat), rtol=1e-13, atol=1e-15)


def test_inverted_element():
    with pytest.raises(MeshError):
        element_stiffness(UNIT[[0, 3, 2, 1]], Material(1.0, 0.3))
    with pytest.raises(MeshError):
        shape_gradients(np.zeros((4, 2)), np.zeros(2))


def test_single_element_global_equals_element():
    m = gen_grid(1, 1)
    op = assemble(m, {0: Material(1.0, 0.3)})
    Ke = element_stiffness(m.nodes[m.elems[0]], Material(1.0, 0.3))
    d = element_dofs(m.elems[0])
    np.testing.assert_allclose(op.matrix.toarray()[np.ix_(d, d)], Ke, atol=1e-15)


def test_two_element_hand_assembly():
    mat = Material(1.0, 0.3)
    m = gen_grid(2, 1)
    op = assemble(m, {0: mat}).matrix.toarray()
    K = np.zeros((12, 12))
    for e in range(2):
        d = element_dofs(m.elems[e])
        K[np.ix_(d, d)] += element_stiffness(m.nodes[m.elems[e]], mat)
    np.testing.assert_allclose(op, K, atol=1e-15)
    # node 1 sits on the shared edge: local node 1 of element 0 and local node 0 of element 1
    Ke = element_stiffness(np.array([[0, 0], [0.5, 0], [0.5, 1], [0, 1]]), mat)
    assert op[2, 2] == pytest.approx(Ke[2, 2] + Ke[0, 0], rel=1e-14)
    assert op[3, 3] == pytest.approx(Ke[3, 3] + Ke[1, 1], rel=1e-14)


def test_assembly_translation_and_symmetry():
    m = gen_grid(5, 4, 2.0, 1.0)
    phase = np.arange(m.n_elems) % 2
    op = assemble(m.with_phase(phase), {0: Material(1.0, 0.3), 1: Material(7.0, 0.1)})
    A = op.matrix
    assert op.symmetry_defect() <= 1e-12
    norm = sp.linalg.norm(A)
    for t in (np.tile([1.0, 0.0], m.n_nodes), np.tile([0.0, 1.0], m.n_nodes)):
        assert np.linalg.norm(A @ t) <= 1e-10 * norm
    assert np.all(A.diagonal() >= 0)


def test_all_void_is_degenerate():
    m = gen_grid(2, 2).with_phase(np.full(4, VOID))
    op = assemble(m, {})
    assert op.degenerate
    assert op.matrix.nnz == 0


def test_unmapped_tag():
    m = gen_grid(2, 2).with_phase(np.array([0, 1, 0, 0]))
    with pytest.raises(MeshError):
        assemble(m, {0: Material(1.0, 0.3)})


def test_dirichlet_all_constrained():
    m = gen_grid(1, 1)
    op = assemble(m, {0: Material(1.0, 0.3)})
    u = np.linspace(0.1, 0.8, 8)
    red = apply_dirichlet(op, None, {i: u[i] for i in range(8)})
    assert red.Kff.shape == (0, 0)
    np.testing.assert_allclose(red.reactions(np.zeros(0)), op.matrix @ u, atol=1e-15)


def test_dirichlet_zero_values_keep_rhs():
    m = gen_grid(2, 2)
    op = assemble(m, {0: Material(1.0, 0.3)})
    f = np.arange(op.ndof, dtype=float)
    red = apply_dirichlet(op, f, {0: 0.0, 1: 0.0, 5: 0.0})
    np.testing.assert_array_equal(red.rhs, f[red.free])


def test_dirichlet_reactions_balance():
    m = gen_grid(1, 1)
    op = assemble(m, {0: Material(1.0, 0.3)})
    bcs = {}
    for n in m.boundary.bottom:
        bcs[2 * n], bcs[2 * n + 1] = 0.0, 0.0
    for n in m.boundary.top:
        bcs[2 * n], bcs[2 * n + 1] = 0.1, 0.0
    red = apply_dirichlet(op, None, bcs)
    assert red.Kff.shape == (0, 0)
    r = red.reactions(np.zeros(0))
    assert abs(r[0::2].sum()) < 1e-14 and abs(r[1::2].sum()) < 1e-14
    assert np.abs(r).max() > 0


def test_dirichlet_conflicting_duplicates():
    op = assemble(gen_grid(1, 1), {0: Material(1.0, 0.3)})
    with pytest.raises(ValueError):
        apply_dirichlet(op, None, [(0, 0.0), (0, 1.0)])
    apply_dirichlet(op, None, [(0, 0.5), (0, 0.5)])
    with pytest.raises(ValueError):
        apply_dirichlet(op, None, {99: 0.0})


def test_dirichlet_symmetry_preserved():
    op = assemble(gen_grid(3, 3), {0: Material(1.0, 0.3)})
    red = apply_dirichlet(op, None, {0: 0.0, 1: 0.0, 7: 0.1})
    assert abs(red.Kff - red.Kff.T).max() <= 1e-12 * abs(red.Kff).max()
    np.testing.assert_allclose(red.Kfp.toarray(), red.Kpf.T.toarray())


@pytest.mark.parametrize("grid", [(4, 4, 1.0, 1.0), (5, 3, 2.0, 1.5)])
def test_patch_test(grid):
    m = gen_grid(*grid)
    # distort interior nodes: affine fields must still be reproduced exactly
    rng = np.random.default_rng(3)
    nodes = m.nodes.copy()
    interior = np.setdiff1d(np.arange(m.n_nodes), m.boundary.nodes)
    h = min(grid[2] / grid[0], grid[3] / grid[1])
    nodes[interior] += rng.uniform(-0.2, 0.2, (interior.size, 2)) * h
    m = type(m)(nodes, m.elems, m.phase, m.dims, m.boundary)
    op = assemble(m, {0: Material(1.0, 0.3)})
    H = np.array([[0.01, 0.004], [-0.002, 0.02]])
    exact = (nodes @ H.T).ravel()
    bcs = {}
    for n in m.boundary.nodes:
        bcs[2 * n], bcs[2 * n + 1] = exact[2 * n], exact[2 * n + 1]
    red = apply_dirichlet(op, None, bcs)
    u = red.full(factor_solve(red.Kff, red.rhs))
    assert np.max(np.abs(u - exact)) <= 1e-10
