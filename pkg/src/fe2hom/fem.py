"""Bilinear quadrilateral elements, assembly and Dirichlet elimination.

DOF numbering is node-major: the displacement component ``a`` of node ``n``
lives at index ``2*n + a``.  Element matrices follow the same ordering over the
element's four nodes.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import MeshError
from .mesh import VOID, Mesh
from .tensors import isotropic_tensor, lame

DIM = 2
_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class Material:
    """Isotropic linear elastic material, plane strain."""

    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {self.nu}")

    @property
    def lame(self) -> tuple[float, float]:
        return lame(self.E, self.nu)

    def tensor(self) -> np.ndarray:
        return isotropic_tensor(*self.lame, d=DIM)

    def scaled(self, factor: float) -> "Material":
        return Material(self.E * factor, self.nu)


def quadrature(order: int = 2) -> list[tuple[np.ndarray, float]]:
    """Tensor-product Gauss-Legendre rule on the reference square [-1, 1]^2."""
    if order not in (1, 2):
        raise ValueError(f"unsupported quadrature order {order}; use 1 or 2")
    pts, wts = np.polynomial.legendre.leggauss(order)
    return [(np.array([xi, eta]), float(wx * wy)) for eta, wy in zip(pts, wts) for xi, wx in zip(pts, wts)]


def shape_functions(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return 0.25 * (1.0 + _REF[:, 0] * xi[0]) * (1.0 + _REF[:, 1] * xi[1])


def shape_gradients(coords, xi) -> tuple[np.ndarray, np.ndarray, float]:
    """Shape values, physical gradients ``(4, 2)`` and Jacobian determinant at ``xi``."""
    coords = np.asarray(coords, dtype=float)
    xi = np.asarray(xi, dtype=float)
    dN = 0.25 * np.column_stack(
        [_REF[:, 0] * (1.0 + _REF[:, 1] * xi[1]), _REF[:, 1] * (1.0 + _REF[:, 0] * xi[0])]
    )
    Jm = coords.T @ dN  # dX/dxi
    detJ = Jm[0, 0] * Jm[1, 1] - Jm[0, 1] * Jm[1, 0]
    if not detJ > 0.0:
        raise MeshError(f"non-positive element Jacobian {detJ!r}: inverted or degenerate element")
    G = dN @ np.linalg.inv(Jm)
    return shape_functions(xi), G, float(detJ)


def tensor_stiffness(coords, C, order: int = 2) -> np.ndarray:
    """Element matrix ``K[(A,a),(B,c)] = ∫ dN_A/dX_b C_abcd dN_B/dX_d dV``."""
    K = np.zeros((4, DIM, 4, DIM))
    for xi, w in quadrature(order):
        _, G, detJ = shape_gradients(coords, xi)
        K += w * detJ * np.einsum("Ab,abcd,Bd->AaBc", G, C, G)
    return K.reshape(4 * DIM, 4 * DIM)


def element_stiffness(coords, mat: Material, order: int = 2) -> np.ndarray:
    """8 x 8 plane-strain stiffness of a bilinear quadrilateral."""
    return tensor_stiffness(coords, mat.tensor(), order)


def element_dofs(elem) -> np.ndarray:
    elem = np.asarray(elem)
    return (DIM * elem[:, None] + np.arange(DIM)).ravel()


@dataclass(frozen=True)
class SparseOperator:
    """Symmetric global operator over nodal displacement DOFs."""

    matrix: sp.csr_matrix
    n_nodes: int
    degenerate: bool = False
    dofs_per_node: int = DIM

    @staticmethod
    def dof(node: int, comp: int) -> int:
        return DIM * node + comp

    @property
    def ndof(self) -> int:
        return self.matrix.shape[0]

    def symmetry_defect(self) -> float:
        d = abs(self.matrix - self.matrix.T)
        return float(d.max()) if d.nnz else 0.0


def scatter(rows: list, cols: list, vals: list, n: int) -> sp.csr_matrix:
    """Sum element contributions given as COO triplet blocks."""
    if not vals:
        return sp.csr_matrix((n, n))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def assemble(
    mesh: Mesh,
    materials: Mapping[int, Material],
    order: int = 2,
    elements: Iterable[int] | None = None,
) -> SparseOperator:
    """Global stiffness of all non-void elements (or of ``elements`` only)."""
    ids = range(mesh.n_elems) if elements is None else elements
    rows, cols, vals = [], [], []
    cache: dict[int, np.ndarray] = {}
    for e in ids:
        tag = int(mesh.phase[e])
        if tag == VOID:
            continue
        if tag not in materials:
            raise MeshError(f"element {e} has phase tag {tag} without a registered material")
        if tag not in cache:
            cache[tag] = materials[tag].tensor()
        ke = tensor_stiffness(mesh.nodes[mesh.elems[e]], cache[tag], order)
        dofs = element_dofs(mesh.elems[e])
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        vals.append(ke.ravel())
    n = DIM * mesh.n_nodes
    K = scatter(rows, cols, vals, n)
    return SparseOperator(K, mesh.n_nodes, degenerate=not vals)


@dataclass
class ReducedSystem:
    """``K_ff u_f = f_f - K_fp u_p`` with the blocks kept for reaction recovery."""

    free: np.ndarray
    fixed: np.ndarray
    Kff: sp.csr_matrix
    Kfp: sp.csr_matrix
    Kpf: sp.csr_matrix
    Kpp: sp.csr_matrix
    rhs: np.ndarray
    u_p: np.ndarray
    f_p: np.ndarray = field(repr=False)

    def full(self, u_f) -> np.ndarray:
        u = np.zeros(len(self.free) + len(self.fixed))
        u[self.free] = u_f
        u[self.fixed] = self.u_p
        return u

    def reactions(self, u_f) -> np.ndarray:
        """Forces at the constrained DOFs, ``K_pf u_f + K_pp u_p - f_p``."""
        return self.Kpf @ np.asarray(u_f) + self.Kpp @ self.u_p - self.f_p


def normalize_bcs(bcs) -> dict[int, float]:
    """Accept a mapping or an iterable of ``(dof, value)``; reject conflicting repeats."""
    items = bcs.items() if isinstance(bcs, Mapping) else bcs
    out: dict[int, float] = {}
    for dof, value in items:
        dof, value = int(dof), float(value)
        if dof in out and out[dof] != value:
            raise ValueError(f"conflicting constraints on DOF {dof}: {out[dof]} vs {value}")
        out[dof] = value
    return out


def apply_dirichlet(K, f, bcs) -> ReducedSystem:
    """Eliminate prescribed DOFs from ``K u = f``."""
    A = K.matrix if isinstance(K, SparseOperator) else sp.csr_matrix(K)
    n = A.shape[0]
    f = np.zeros(n) if f is None else np.asarray(f, dtype=float)
    bc = normalize_bcs(bcs)
    fixed = np.array(sorted(bc), dtype=int)
    if fixed.size and (fixed[0] < 0 or fixed[-1] >= n):
        raise ValueError("constrained DOF index out of range")
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    u_p = np.array([bc[d] for d in fixed])
    A = A.tocsr()
    Kff = A[free][:, free]
    Kfp = A[free][:, fixed]
    Kpf = A[fixed][:, free]
    Kpp = A[fixed][:, fixed]
    return ReducedSystem(free, fixed, Kff, Kfp, Kpf, Kpp, f[free] - Kfp @ u_p, u_p, f[fixed])
