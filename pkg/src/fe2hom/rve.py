"""Mechanical RVE: boundary conditions from the macroscale deformation gradient,
boundary-force homogenization of the first Piola-Kirchhoff stress and the
macroscale tangent from the condensed boundary operator.

The RVE response is linear (constant stiffness) so that an increment of the
macroscale deformation gradient maps to boundary displacement increments
through ``du = dF_M X``.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import MeshError, SolverError
from .fem import DIM, Material, SparseOperator, assemble, element_dofs
from .linsolve import (
    CondensedOperator,
    Factorization,
    condense,
    content_hash,
    load_condensed,
    save_condensed,
)
from .mesh import Mesh, mirror_check
from .tensors import ddot22, det_inv, tensor2

log = logging.getLogger(__name__)

MODES = ("affine", "periodic")
HILL_MANDEL_FLOOR = 1e-30


@dataclass(frozen=True)
class RveSolution:
    u: np.ndarray  # (n_nodes, 2) nodal displacements
    boundary_nodes: np.ndarray
    X: np.ndarray  # (n_b, 2) reference positions of boundary_nodes
    f_p: np.ndarray  # (n_b, 2) boundary nodal forces
    P_M: np.ndarray
    F_M: np.ndarray
    volume: float
    mode: str
    interior_residual: float

    @property
    def fluctuation(self) -> np.ndarray:
        """Boundary displacement minus its affine part ``(F_M - I) X``."""
        H = self.F_M - np.eye(DIM)
        return self.u[self.boundary_nodes] - self.X @ H.T


class RveModel:
    """Mesh, phase materials and boundary-condition mode of one RVE.

    The stiffness is assembled at construction; the factorization of the
    interior block and the condensed boundary operator are built on first use
    and then shared read-only.
    """

    def __init__(
        self,
        mesh: Mesh,
        materials: Mapping[int, Material],
        mode: str = "affine",
        order: int = 2,
        cache_dir=None,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown boundary-condition mode {mode!r}; expected one of {MODES}")
        if mode == "periodic" and not mirror_check(mesh):
            raise MeshError("periodic mode needs a mesh whose opposite edges are mirror images")
        self.mesh = mesh
        self.materials = dict(materials)
        self.mode = mode
        self.order = order
        self.cache_dir = None if cache_dir is None else Path(cache_dir)
        self.K: SparseOperator = assemble(mesh, self.materials, order)
        if self.K.degenerate:
            raise MeshError("RVE has no solid element (all elements void)")

        active = mesh.active_nodes()
        bnodes = np.intersect1d(mesh.boundary.nodes, active)
        self.boundary_nodes = bnodes
        self.interior_nodes = np.setdiff1d(active, bnodes)
        self.p_dofs = element_dofs(bnodes)
        self.f_dofs = element_dofs(self.interior_nodes)
        self.X = mesh.nodes[bnodes]
        self._fac: Factorization | None = None
        self._condensed: CondensedOperator | None = None
        self._periodic = _PeriodicMap(self) if mode == "periodic" else None

    @property
    def volume(self) -> float:
        return self.mesh.volume

    @property
    def key(self) -> str:
        mats = sorted((k, m.E, m.nu) for k, m in self.materials.items())
        m = self.mesh
        return content_hash(m.nodes, m.elems, m.phase, mats, self.mode, self.order)

    def interior_factorization(self) -> Factorization:
        if self._fac is None:
            A = self.K.matrix
            self._fac = Factorization(A[self.f_dofs][:, self.f_dofs])
        return self._fac

    @property
    def condensed(self) -> CondensedOperator:
        if self._condensed is None:
            self._condensed = self._load_or_condense()
        return self._condensed

    def _load_or_condense(self) -> CondensedOperator:
        path = None
        if self.cache_dir is not None:
            path = self.cache_dir / f"{self.key}.kb"
            if path.exists():
                log.debug("loading condensed operator from %s", path)
                return load_condensed(path)
        op = condense(self.K, self.p_dofs, self.f_dofs, self.X, self.volume)
        if self._periodic is not None:
            op = CondensedOperator(self._periodic.project(op.Kb), op.positions, op.volume, op.dofs)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            save_condensed(op, path)
        return op

    def tangent(self) -> np.ndarray:
        return macro_tangent(self)

    def stress(self, F_M) -> np.ndarray:
        return solve_rve(self, F_M).P_M


class _PeriodicMap:
    """Periodic fluctuation basis on the boundary DOFs.

    Corners carry no fluctuation; each non-corner mirror pair shares one
    fluctuation vector (master on left/bottom, slave on right/top).
    """

    def __init__(self, rve: RveModel):
        b = rve.mesh.boundary
        corners = set(b.corners)
        where = {int(n): k for k, n in enumerate(rve.boundary_nodes)}
        cols = []
        for a, s in b.pairs:
            if a in corners or s in corners:
                continue
            if a not in where or s not in where:
                raise MeshError(f"periodic pair ({a}, {s}) touches a void-only node")
            for c in range(DIM):
                cols.append((DIM * where[a] + c, DIM * where[s] + c))
        n_p = DIM * len(rve.boundary_nodes)
        S = np.zeros((n_p, len(cols)))
        for k, (i, j) in enumerate(cols):
            S[i, k] = S[j, k] = 1.0
        self.S = S
        self.corner_rows = [
            DIM * where[c] + comp for c in b.corners if c in where for comp in range(DIM)
        ]

    def project(self, Kb: np.ndarray) -> np.ndarray:
        """Condense the periodic fluctuations out of the affine boundary operator."""
        S = self.S
        if S.shape[1] == 0:
            return Kb
        KS = Kb @ S
        A = S.T @ KS
        return Kb - KS @ np.linalg.solve(A, KS.T)


def impose_macro_bc(rve: RveModel, F_M) -> dict:
    """Prescribed boundary data for ``x = F_M X``.

    Affine mode returns ``{dof: value}`` for every boundary DOF.  Periodic mode
    returns ``{"corners": {dof: value}, "ties": [(dof_a, dof_b, offset), ...]}``
    where each tie reads ``u_b - u_a = offset``.
    """
    F_M = tensor2(F_M)
    det_inv(F_M)
    H = F_M - np.eye(DIM)
    X = rve.mesh.nodes
    if rve.mode == "affine":
        return {
            DIM * n + c: float(H[c] @ X[n]) for n in rve.boundary_nodes for c in range(DIM)
        }
    b = rve.mesh.boundary
    corner_set = set(b.corners)
    corners = {DIM * n + c: float(H[c] @ X[n]) for n in b.corners for c in range(DIM)}
    ties = [
        (DIM * a + c, DIM * s + c, float(H[c] @ (X[s] - X[a])))
        for a, s in b.pairs
        if a not in corner_set and s not in corner_set
        for c in range(DIM)
    ]
    return {"corners": corners, "ties": ties}


def solve_rve(rve: RveModel, F_M) -> RveSolution:
    """Solve the RVE boundary value problem driven by ``F_M``."""
    F_M = tensor2(F_M)
    det_inv(F_M)
    H = F_M - np.eye(DIM)
    A = rve.K.matrix
    n = A.shape[0]
    u = np.zeros(n)
    u_aff = (rve.X @ H.T).ravel()
    if rve.mode == "affine":
        u[rve.p_dofs] = u_aff
        u_f = rve.interior_factorization().solve(-(A[rve.f_dofs][:, rve.p_dofs] @ u_aff))
        u[rve.f_dofs] = u_f
    else:
        # unknowns: interior DOFs and master fluctuations; T maps them to all active DOFs
        S = rve._periodic.S
        nf, npd = len(rve.f_dofs), len(rve.p_dofs)
        Ef = sp.csr_matrix((np.ones(nf), (rve.f_dofs, np.arange(nf))), shape=(n, nf))
        Ep = sp.csr_matrix((np.ones(npd), (rve.p_dofs, np.arange(npd))), shape=(n, npd))
        T = sp.hstack([Ef, Ep @ sp.csr_matrix(S)]).tocsr()
        g = np.zeros(n)
        g[rve.p_dofs] = u_aff
        q = Factorization((T.T @ A @ T).tocsc()).solve(-(T.T @ (A @ g)))
        u = T @ q + g
    r = A @ u
    scale = max(np.max(np.abs(r)), 1e-300) if r.size else 1.0
    interior = float(np.max(np.abs(r[rve.f_dofs])) / scale) if len(rve.f_dofs) else 0.0
    if interior > 1e-10 and np.max(np.abs(r)) > 0:
        raise SolverError(f"RVE interior residual {interior:.2e} exceeds 1e-10")
    f_p = r[rve.p_dofs].reshape(-1, DIM)
    P_M = boundary_average(f_p, rve.X, rve.volume)
    return RveSolution(
        u=u.reshape(-1, DIM),
        boundary_nodes=rve.boundary_nodes,
        X=rve.X,
        f_p=f_p,
        P_M=P_M,
        F_M=F_M,
        volume=rve.volume,
        mode=rve.mode,
        interior_residual=interior,
    )


def boundary_average(forces, positions, volume: float) -> np.ndarray:
    """``(1/V0) sum_i f^(i) ⊗ X^(i)``."""
    forces = np.asarray(forces, dtype=float)
    positions = np.asarray(positions, dtype=float)
    return np.einsum("ia,ib->ab", forces, positions) / volume


def homogenize_pk(sol: RveSolution, rve: RveModel | None = None, origin=None) -> np.ndarray:
    """Homogenized first Piola-Kirchhoff stress from the boundary nodal forces.

    ``origin`` shifts the reference positions; the result does not depend on it
    because the boundary forces of an equilibrated RVE sum to zero.
    """
    X = sol.X if origin is None else sol.X - np.asarray(origin, dtype=float)
    volume = sol.volume if rve is None else rve.volume
    return boundary_average(sol.f_p, X, volume)


def macro_tangent(rve: RveModel) -> np.ndarray:
    """``C[a,b,c,d] = (1/V0) sum_ij Kb[(i,a),(j,c)] X_b^(i) X_d^(j)``."""
    op = rve.condensed
    nb = len(op.positions)
    Kb = op.Kb.reshape(nb, DIM, nb, DIM)
    X = op.positions
    return np.einsum("iajc,ib,jd->abcd", Kb, X, X) / op.volume


def hill_mandel_residual(sol: RveSolution, dF, rve: RveModel | None = None) -> float:
    """Relative gap between macroscopic and boundary-averaged microscopic work.

    The boundary variation is ``dF X``.  In periodic mode, when ``rve`` is
    given, the periodic fluctuation of the response to ``dF`` is added, so the
    variation is the full admissible boundary field of that mode.
    """
    dF = np.asarray(dF, dtype=float)
    du = sol.X @ dF.T
    if sol.mode == "periodic" and rve is not None and np.any(dF):
        du = du + solve_rve(rve, np.eye(DIM) + dF).fluctuation
    macro = ddot22(sol.P_M, dF)
    micro = float(np.sum(sol.f_p * du)) / sol.volume
    return abs(macro - micro) / max(abs(macro), HILL_MANDEL_FLOOR)
