import numpy as np
import pytest

from fe2hom.fem import Material
from fe2hom.mesh import MicrostructureSpec, gen_grid, tag_phases

E_REF, NU_REF = 1.0, 0.3


def lame_closed_form(E, nu):
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


def isotropic_oracle(E, nu):
    """Plane-strain isotropic tensor built component by component."""
    lam, mu = lame_closed_form(E, nu)
    C = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    C[a, b, c, d] = lam * (a == b) * (c == d) + mu * ((a == c) * (b == d) + (a == d) * (b == c))
    return C


@pytest.fixture
def steel_like():
    return Material(E_REF, NU_REF)


def shipped_microstructures():
    """(name, mesh, materials) for every microstructure the package ships configs for."""
    m1, m2 = Material(1.0, 0.3), Material(10.0, 0.25)
    return [
        ("homogeneous", gen_grid(4, 4), {0: m1}),
        ("laminate", tag_phases(gen_grid(8, 8), MicrostructureSpec.laminate("x", 0.5)), {0: m1, 1: m2}),
        ("inclusion", tag_phases(gen_grid(8, 8), MicrostructureSpec.inclusion((0.5, 0.5), 0.25)), {0: m1, 1: m2}),
        ("void", tag_phases(gen_grid(8, 8), MicrostructureSpec.void((0.5, 0.5), 0.25)), {0: m1}),
    ]


def plane_strain_voigt(E, nu):
    """3x3 plane-strain stiffness in (11, 22, 12-engineering) notation."""
    lam, mu = lame_closed_form(E, nu)
    return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def laminate_oracle(phases, fractions, normal=0):
    """Exact effective Voigt stiffness of a layered stack.

    Layers are stacked along ``normal``.  The in-plane strain is common to all
    layers, the traction on the layer plane is continuous and the normal and
    shear strains average to the macroscopic values.  Solved column by column
    as a small linear system, independent of any finite element code.
    """
    tan = [1 - normal]  # in-plane normal strain component
    nrm = [normal, 2]  # components carried by the traction
    n = len(phases)
    D_eff = np.zeros((3, 3))
    for col in range(3):
        eps_bar = np.zeros(3)
        eps_bar[col] = 1.0
        # unknowns: per-phase strains in nrm (2n) and the common traction (2)
        A = np.zeros((2 * n + 2, 2 * n + 2))
        rhs = np.zeros(2 * n + 2)
        for k, D in enumerate(phases):
            for r, i in enumerate(nrm):
                row = 2 * k + r
                A[row, 2 * k : 2 * k + 2] = D[i, nrm]
                A[row, 2 * n + r] = -1.0
                rhs[row] = -D[i, tan] @ eps_bar[tan]
        for r in range(2):
            A[2 * n + r, [2 * k + r for k in range(n)]] = fractions
            rhs[2 * n + r] = eps_bar[nrm[r]]
        sol = np.linalg.solve(A, rhs)
        sig = np.zeros(3)
        for k, D in enumerate(phases):
            eps = eps_bar.copy()
            eps[nrm] = sol[2 * k : 2 * k + 2]
            sig += fractions[k] * (D @ eps)
        D_eff[:, col] = sig
    return D_eff


def voigt_to_tensor_components(D):
    """(C1111, C1122, C2222, C1212) from a 3x3 Voigt matrix."""
    return np.array([D[0, 0], D[0, 1], D[1, 1], D[2, 2]])


def tensor_components(C):
    return np.array([C[0, 0, 0, 0], C[0, 0, 1, 1], C[1, 1, 1, 1], C[0, 1, 0, 1]])
