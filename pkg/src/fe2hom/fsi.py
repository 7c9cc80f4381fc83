"""Fluid-filled porous RVE with a fictitious elastic material in the pores.

Discretization
--------------
* displacement: bilinear on every element; solid elements carry the solid
  stiffness, fluid elements a fictitious material ``gamma * E_solid`` that
  follows the interface.  Interface continuity ``u_f = u_s`` (and hence a zero
  relative velocity) holds because interface nodes carry one displacement.
* pressure: bilinear on fluid nodes, coupled through
  ``B[(A,a),k] = -∫ dN_A/dX_a N_k dV`` and stabilized by
  ``S[k,l] = tau ∫ grad N_k . grad N_l dV`` with ``tau = h^2 / (4 mu_f)``.
* the fluid velocity is the displacement increment per unit pseudo-time, so
  the linearized incompressibility constraint reads ``B^T u - S p = 0``.

Viscous stresses vanish in the quasi-static limit; the viscosity only scales
the stabilization.  The monolithic operator is ``[[K, B], [B^T, -S]]``,
symmetric and indefinite.  DOFs: ``2*n + a`` for displacements, then one
pressure per fluid node in ascending node order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import MeshError, SolverError
from .fem import DIM, Material, element_dofs, quadrature, scatter, shape_gradients, tensor_stiffness
from .linsolve import Factorization, schur_complement
from .mesh import Mesh
from .tensors import det_inv, tensor2

SOLID = 0
FLUID = 1
DEFAULT_GAMMA = 1e-3
DEFAULT_VISCOSITY = 1.0
COMPONENTS = ("11", "12", "21", "22")
INPUT_LABELS = ("F11", "F12", "F21", "F22", "p_c", "g1", "g2")


@dataclass(frozen=True)
class Partition:
    solid_elems: np.ndarray
    fluid_elems: np.ndarray
    interface: np.ndarray  # nodes incident to both phases
    gamma_s: np.ndarray  # exterior boundary nodes incident to a solid element
    gamma_f: np.ndarray  # exterior boundary nodes incident to a fluid element


def partition(mesh: Mesh) -> Partition:
    """Split elements by phase and classify interface and exterior boundary nodes."""
    bad = np.flatnonzero(~np.isin(mesh.phase, (SOLID, FLUID)))
    if bad.size:
        raise MeshError(f"elements {bad[:5].tolist()} are tagged neither solid nor fluid")
    solid = np.flatnonzero(mesh.phase == SOLID)
    fluid = np.flatnonzero(mesh.phase == FLUID)
    s_nodes = np.unique(mesh.elems[solid])
    f_nodes = np.unique(mesh.elems[fluid])
    orphans = np.setdiff1d(np.arange(mesh.n_nodes), np.union1d(s_nodes, f_nodes))
    if orphans.size:
        raise MeshError(f"nodes {orphans[:5].tolist()} are incident to no solid or fluid element")
    bnd = mesh.boundary.nodes
    return Partition(
        solid_elems=solid,
        fluid_elems=fluid,
        interface=np.intersect1d(s_nodes, f_nodes),
        gamma_s=np.intersect1d(bnd, s_nodes),
        gamma_f=np.intersect1d(bnd, f_nodes),
    )


@dataclass(frozen=True)
class MacroHydroInput:
    """Macroscale data driving one RVE: deformation gradient, pressure and its gradient at X_c."""

    F_M: np.ndarray = field(default_factory=lambda: np.eye(DIM))
    p_c: float = 0.0
    grad_p: np.ndarray = field(default_factory=lambda: np.zeros(DIM))
    X_c: np.ndarray | None = None

    def __post_init__(self):
        F = tensor2(self.F_M)
        det_inv(F)
        object.__setattr__(self, "F_M", F)
        object.__setattr__(self, "grad_p", np.asarray(self.grad_p, dtype=float))

    @classmethod
    def from_vector(cls, z, X_c=None) -> "MacroHydroInput":
        """Inverse of :meth:`vector`: ``z = (F-I row-major, p_c, grad_p)``."""
        z = np.asarray(z, dtype=float)
        return cls(np.eye(DIM) + z[:4].reshape(DIM, DIM), float(z[4]), z[5:7], X_c)

    def vector(self) -> np.ndarray:
        return np.concatenate([(self.F_M - np.eye(DIM)).ravel(), [self.p_c], self.grad_p])


class FsiRveModel:
    """Solid/fluid RVE: materials, partition and stabilization parameters."""

    def __init__(
        self,
        mesh: Mesh,
        solid: Material,
        gamma: float = DEFAULT_GAMMA,
        viscosity: float = DEFAULT_VISCOSITY,
        tau: float | None = None,
        order: int = 2,
    ):
        if not gamma > 0.0:
            raise ValueError(f"fictitious stiffness factor must be positive, got {gamma}")
        if not viscosity > 0.0:
            raise ValueError(f"viscosity must be positive, got {viscosity}")
        self.mesh = mesh
        self.solid = solid
        self.gamma = float(gamma)
        self.fictitious = solid.scaled(gamma)
        self.viscosity = float(viscosity)
        self.tau = tau
        self.order = order
        self.part = partition(mesh)
        self.fluid_nodes = np.unique(mesh.elems[self.part.fluid_elems])
        self.boundary_nodes = mesh.boundary.nodes
        self._operator = None
        self._system = None

    @property
    def has_fluid(self) -> bool:
        return len(self.part.fluid_elems) > 0

    @property
    def volume(self) -> float:
        return self.mesh.volume

    @property
    def solid_volume(self) -> float:
        return float(self.mesh.element_areas()[self.part.solid_elems].sum())

    @property
    def fluid_volume(self) -> float:
        return float(self.mesh.element_areas()[self.part.fluid_elems].sum())

    @property
    def center(self) -> np.ndarray:
        return 0.5 * np.asarray(self.mesh.dims)

    def element_tau(self, e: int) -> float:
        if self.tau is not None:
            return float(self.tau)
        c = self.mesh.nodes[self.mesh.elems[e]]
        h = max(np.linalg.norm(c[2] - c[0]), np.linalg.norm(c[3] - c[1]))
        return h * h / (4.0 * self.viscosity)

    def pressure_anchor(self, X_c=None) -> int | None:
        """Fluid node carrying the pressure datum when no fluid reaches the exterior boundary."""
        if not self.has_fluid or len(self.part.gamma_f):
            return None
        Xc = self.center if X_c is None else np.asarray(X_c, dtype=float)
        d = np.linalg.norm(self.mesh.nodes[self.fluid_nodes] - Xc, axis=1)
        return int(self.fluid_nodes[np.argmin(d)])

    def pressure_dof(self, node: int) -> int:
        k = np.searchsorted(self.fluid_nodes, node)
        if k >= len(self.fluid_nodes) or self.fluid_nodes[k] != node:
            raise KeyError(f"node {node} carries no pressure")
        return DIM * self.mesh.n_nodes + int(k)

    @property
    def operator(self) -> "FsiOperator":
        if self._operator is None:
            self._operator = assemble_fsi(self)
        return self._operator

    @property
    def system(self) -> "FsiSystem":
        if self._system is None:
            self._system = condense_fsi(self.operator)
        return self._system


@dataclass(frozen=True)
class FsiOperator:
    """Monolithic operator plus its per-phase pieces, with boundary DOF sets."""

    matrix: sp.csr_matrix
    solid: sp.csr_matrix  # solid-element part (force rows only are meaningful)
    fluid: sp.csr_matrix  # fluid-element part: fictitious elasticity + pressure coupling rows
    fictitious: sp.csr_matrix  # fictitious elasticity alone
    n_u: int
    boundary_u: np.ndarray  # displacement DOFs on the exterior boundary
    boundary_p: np.ndarray  # pressure DOFs on Gamma_f (or the anchor)
    interior: np.ndarray
    model: "FsiRveModel" = field(repr=False)
    anchor: int | None = None

    @property
    def boundary(self) -> np.ndarray:
        return np.concatenate([self.boundary_u, self.boundary_p])


def fluid_element_blocks(coords, tau: float, order: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Pressure coupling ``B`` (8x4) and stabilization ``S`` (4x4) of one fluid element."""
    B = np.zeros((4, DIM, 4))
    S = np.zeros((4, 4))
    for xi, w in quadrature(order):
        N, G, detJ = shape_gradients(coords, xi)
        B -= w * detJ * np.einsum("Aa,k->Aak", G, N)
        S += w * detJ * tau * (G @ G.T)
    return B.reshape(4 * DIM, 4), S


def assemble_fsi(model: FsiRveModel, X_c=None) -> FsiOperator:
    """Monolithic displacement-pressure operator of the RVE."""
    mesh = model.mesh
    n_u = DIM * mesh.n_nodes
    n = n_u + len(model.fluid_nodes)
    Cs = model.solid.tensor()
    Cf = model.fictitious.tensor()
    blocks = {"solid": ([], [], []), "fict": ([], [], []), "coup": ([], [], [])}

    def add(key, r, c, m):
        rows, cols, vals = blocks[key]
        rows.append(np.repeat(r, len(c)))
        cols.append(np.tile(c, len(r)))
        vals.append(np.asarray(m).ravel())

    for e in model.part.solid_elems:
        d = element_dofs(mesh.elems[e])
        add("solid", d, d, tensor_stiffness(mesh.nodes[mesh.elems[e]], Cs, model.order))
    for e in model.part.fluid_elems:
        coords = mesh.nodes[mesh.elems[e]]
        d = element_dofs(mesh.elems[e])
        pd = np.array([model.pressure_dof(nd) for nd in mesh.elems[e]])
        add("fict", d, d, tensor_stiffness(coords, Cf, model.order))
        B, S = fluid_element_blocks(coords, model.element_tau(e), model.order)
        add("coup", d, pd, B)
        add("coup", pd, d, B.T)
        add("coup", pd, pd, -S)
    Ks = scatter(*blocks["solid"], n)
    Kf = scatter(*blocks["fict"], n)
    Kc = scatter(*blocks["coup"], n)
    A = (Ks + Kf + Kc).tocsr()

    bu = element_dofs(model.boundary_nodes)
    anchor = model.pressure_anchor(X_c)
    p_nodes = model.part.gamma_f if anchor is None else np.array([anchor])
    bp = np.array([model.pressure_dof(k) for k in p_nodes], dtype=int)
    interior = np.setdiff1d(np.arange(n), np.concatenate([bu, bp]))
    # coupling rows belong to the fluid phase only on displacement rows
    Kc_u = sp.csr_matrix(Kc)
    Kc_u = sp.diags((np.arange(n) < n_u).astype(float)) @ Kc_u
    return FsiOperator(
        matrix=A,
        solid=Ks.tocsr(),
        fluid=(Kf + Kc_u).tocsr(),
        fictitious=Kf.tocsr(),
        n_u=n_u,
        boundary_u=bu,
        boundary_p=bp,
        interior=interior,
        model=model,
        anchor=anchor,
    )


def impose_fsi_bc(model: FsiRveModel, inp: MacroHydroInput) -> dict[int, float]:
    """Boundary data: ``u = (F_M - I) X`` on the exterior boundary and
    ``p = p_c + grad_p . (X - X_c)`` on fluid boundary nodes (or on the anchor)."""
    X = model.mesh.nodes
    H = inp.F_M - np.eye(DIM)
    Xc = model.center if inp.X_c is None else np.asarray(inp.X_c, dtype=float)
    out = {DIM * n + c: float(H[c] @ X[n]) for n in model.boundary_nodes for c in range(DIM)}
    if model.has_fluid:
        anchor = model.pressure_anchor(inp.X_c)
        nodes = model.part.gamma_f if anchor is None else [anchor]
        for n in nodes:
            out[model.pressure_dof(n)] = float(inp.p_c + inp.grad_p @ (X[n] - Xc))
    return out


@dataclass(frozen=True)
class FsiSystem:
    """Boundary-condensed coupled system with phase-stress recovery rows.

    ``K_uu, K_up, K_pu, K_pp`` map boundary displacements and pressures to the
    boundary forces and fluxes.  ``solid_rows`` and ``fictitious_rows``
    (4 x n_boundary) map the same boundary data to the solid-phase average
    stress and to the fictitious-material part of the fluid-phase average.
    """

    K_uu: np.ndarray
    K_up: np.ndarray
    K_pu: np.ndarray
    K_pp: np.ndarray
    X_u: np.ndarray  # (n_bu_nodes, 2)
    X_p: np.ndarray  # (n_bp, 2)
    volume: float
    solid_volume: float
    fluid_volume: float
    solid_rows: np.ndarray
    fictitious_rows: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.block([[self.K_uu, self.K_up], [self.K_pu, self.K_pp]])


def _averaging_rows(n: int, nodes_X: np.ndarray, n_nodes: int) -> np.ndarray:
    """E[(a,b), (i,a)] = X_b^(i): turns nodal forces into sum_i f^(i) ⊗ X^(i)."""
    E = np.zeros((DIM * DIM, n))
    for i in range(n_nodes):
        for a in range(DIM):
            for b in range(DIM):
                E[DIM * a + b, DIM * i + a] = nodes_X[i, b]
    return E


def condense_fsi(op: FsiOperator) -> FsiSystem:
    """Schur complement onto (boundary displacement, boundary pressure) DOFs."""
    model = op.model
    b = op.boundary
    nbu = len(op.boundary_u)
    try:
        Kb, _, Xi = schur_complement(op.matrix, b, op.interior, spd=not model.has_fluid)
    except SolverError as exc:
        raise SolverError(f"interior block of the coupled RVE operator: {exc}") from exc
    E = _averaging_rows(op.matrix.shape[0], model.mesh.nodes, model.mesh.n_nodes)

    def recovery(M, volume):
        if volume <= 0.0:
            return np.zeros((DIM * DIM, len(b)))
        W = (E @ M) / volume  # dense (4, n); M is symmetric in its force rows
        return W[:, b] - W[:, op.interior] @ Xi

    return FsiSystem(
        K_uu=Kb[:nbu, :nbu],
        K_up=Kb[:nbu, nbu:],
        K_pu=Kb[nbu:, :nbu],
        K_pp=Kb[nbu:, nbu:],
        X_u=model.mesh.nodes[model.boundary_nodes],
        X_p=_pressure_positions(op),
        volume=model.volume,
        solid_volume=model.solid_volume,
        fluid_volume=model.fluid_volume,
        solid_rows=recovery(op.solid, model.solid_volume),
        fictitious_rows=recovery(op.fictitious, model.fluid_volume),
    )


def _pressure_positions(op: FsiOperator) -> np.ndarray:
    model = op.model
    nodes = model.fluid_nodes[np.asarray(op.boundary_p, dtype=int) - op.n_u]
    return model.mesh.nodes[nodes].reshape(-1, DIM)


@dataclass(frozen=True)
class FsiSolution:
    u: np.ndarray  # (n_nodes, 2)
    p: np.ndarray  # (n_nodes,), NaN on solid-only nodes
    f_s: np.ndarray  # (n_boundary_nodes, 2) reactions at boundary displacement DOFs
    f_p: np.ndarray  # (n_bp,) reactions at boundary pressure DOFs (volume flux)
    X: np.ndarray  # (n_boundary_nodes, 2)
    solid_forces: np.ndarray  # (n_nodes, 2) nodal forces of solid elements
    fluid_forces: np.ndarray  # (n_nodes, 2) nodal forces of fluid elements
    fictitious_forces: np.ndarray  # (n_nodes, 2) fictitious-elastic part of fluid_forces
    F_M: np.ndarray
    momentum_residual: float
    mass_residual: float


def solve_fsi(model: FsiRveModel, inp: MacroHydroInput) -> FsiSolution:
    """Monolithic solve of the RVE with the boundary data of ``inp``."""
    op = model.operator if inp.X_c is None else assemble_fsi(model, inp.X_c)
    A = op.matrix
    n = A.shape[0]
    bc = impose_fsi_bc(model, inp)
    fixed = np.array(sorted(bc), dtype=int)
    free = np.setdiff1d(np.arange(n), fixed)
    x = np.zeros(n)
    x[fixed] = [bc[d] for d in fixed]
    try:
        fac = Factorization(A[free][:, free], spd=not model.has_fluid)
        x[free] = fac.solve(-(A[free][:, fixed] @ x[fixed]))
    except SolverError as exc:
        raise SolverError(
            f"coupled RVE solve failed ({len(model.part.solid_elems)} solid / "
            f"{len(model.part.fluid_elems)} fluid elements, {len(free)} free DOFs): {exc}"
        ) from exc

    r = A @ x
    scale = float(abs(A).max() * max(np.max(np.abs(x)), 1e-300))
    free_u = free[free < op.n_u]
    free_p = free[free >= op.n_u]
    mom = float(np.max(np.abs(r[free_u])) / scale) if free_u.size else 0.0
    mass = float(np.max(np.abs(r[free_p])) / scale) if free_p.size else 0.0
    if max(mom, mass) > 1e-10:
        raise SolverError(f"coupled RVE residual too large (momentum {mom:.2e}, mass {mass:.2e})")

    nn = model.mesh.n_nodes
    p = np.full(nn, np.nan)
    p[model.fluid_nodes] = x[op.n_u :]
    return FsiSolution(
        u=x[: op.n_u].reshape(nn, DIM),
        p=p,
        f_s=r[op.boundary_u].reshape(-1, DIM),
        f_p=r[op.boundary_p],
        X=model.mesh.nodes[model.boundary_nodes],
        solid_forces=(op.solid @ x)[: op.n_u].reshape(nn, DIM),
        fluid_forces=(op.fluid @ x)[: op.n_u].reshape(nn, DIM),
        fictitious_forces=(op.fictitious @ x)[: op.n_u].reshape(nn, DIM),
        F_M=inp.F_M,
        momentum_residual=mom,
        mass_residual=mass,
    )


@dataclass(frozen=True)
class BiphasicStress:
    """Phase-averaged first Piola-Kirchhoff stresses.

    ``P_fM`` is None when the cell holds no fluid.  ``P_fM_fictitious`` is the
    part of ``P_fM`` carried by the fictitious elastic material.
    """

    P_sM: np.ndarray
    P_fM: np.ndarray | None
    P_fM_fictitious: np.ndarray | None
    P_mix: np.ndarray


def homogenize_biphasic(sol: FsiSolution, model: FsiRveModel) -> BiphasicStress:
    """Phase averages from phase-resolved nodal force sums ``(1/|Omega|) sum f ⊗ X``."""
    X = model.mesh.nodes
    Vs, Vf, V0 = model.solid_volume, model.fluid_volume, model.volume
    Ss = np.einsum("ia,ib->ab", sol.solid_forces, X)
    Sf = np.einsum("ia,ib->ab", sol.fluid_forces, X)
    P_sM = Ss / Vs if Vs > 0 else np.zeros((DIM, DIM))
    if Vf > 0:
        P_fM = Sf / Vf
        P_fict = np.einsum("ia,ib->ab", sol.fictitious_forces, X) / Vf
    else:
        P_fM = P_fict = None
    return BiphasicStress(P_sM, P_fM, P_fict, (Ss + Sf) / V0)


def boundary_stress(sol: FsiSolution, model: FsiRveModel) -> np.ndarray:
    """Mixture stress from the exterior boundary reactions alone."""
    return np.einsum("ia,ib->ab", sol.f_s, sol.X) / model.volume


def fsi_hill_mandel_residual(sol: FsiSolution, model: FsiRveModel, dF) -> float:
    """Hill-Mandel gap of the mixture stress against the boundary work of ``f_s``."""
    dF = np.asarray(dF, dtype=float)
    P = boundary_stress(sol, model)
    macro = float(np.sum(P * dF))
    micro = float(np.sum(sol.f_s * (sol.X @ dF.T))) / model.volume
    return abs(macro - micro) / max(abs(macro), 1e-30)


@dataclass(frozen=True)
class CoupledTangent:
    matrix: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    flux: np.ndarray | None = None  # boundary fluxes per unit input, (n_bp, n_cols)

    def block(self, rows: str, cols: str) -> np.ndarray:
        """Sub-block by label prefix, e.g. ``block("Ps", "F")``."""
        r = [i for i, s in enumerate(self.row_labels) if s.startswith(rows)]
        c = [j for j, s in enumerate(self.col_labels) if s.startswith(cols)]
        return self.matrix[np.ix_(r, c)]


def _substitution(system: FsiSystem, X_c) -> np.ndarray:
    """Boundary data per unit macroscale input: du = dF X, dp = dp_c + dg . (X - X_c)."""
    nbu, nbp = len(system.X_u), len(system.X_p)
    Z = np.zeros((DIM * nbu + nbp, 7))
    for j, Xj in enumerate(system.X_u):
        for a in range(DIM):
            for b in range(DIM):
                Z[DIM * j + a, DIM * a + b] = Xj[b]
    for k, Xk in enumerate(system.X_p):
        Z[DIM * nbu + k, 4] = 1.0
        Z[DIM * nbu + k, 5:7] = Xk - X_c
    return Z


def coupled_tangent(model: FsiRveModel, X_c=None) -> CoupledTangent:
    """Macroscale tangent of the phase stresses w.r.t. (F_M, p_c, grad_p).

    Rows ``Ps11..Ps22`` and ``Pf11..Pf22``; columns ``F11..F22, p_c, g1, g2``.
    Without fluid only the ``Ps`` x ``F`` block exists.
    """
    system = model.system if X_c is None else condense_fsi(assemble_fsi(model, X_c))
    Xc = model.center if X_c is None else np.asarray(X_c, dtype=float)
    Z = _substitution(system, Xc)
    nbu = len(system.X_u)
    forces = np.hstack([system.K_uu, system.K_up]) @ Z  # (2*nbu, 7)
    mix = np.einsum("iac,ib->abc", forces.reshape(nbu, DIM, 7), system.X_u).reshape(4, 7)
    Ps = system.solid_rows @ Z
    rows_s = tuple("Ps" + c for c in COMPONENTS)
    if not model.has_fluid:
        return CoupledTangent(Ps[:, :4], rows_s, INPUT_LABELS[:4])
    Pf = (mix - system.solid_volume * Ps) / system.fluid_volume
    flux = np.hstack([system.K_pu, system.K_pp]) @ Z
    return CoupledTangent(
        np.vstack([Ps, Pf]),
        rows_s + tuple("Pf" + c for c in COMPONENTS),
        INPUT_LABELS,
        flux,
    )


def fictitious_tangent(model: FsiRveModel) -> np.ndarray:
    """Rows of the fictitious-material part of the fluid-phase average, (4, 7)."""
    system = model.system
    return system.fictitious_rows @ _substitution(system, model.center)


def _stress_vector(model: FsiRveModel, z, X_c=None) -> np.ndarray:
    st = homogenize_biphasic(solve_fsi(model, MacroHydroInput.from_vector(z, X_c)), model)
    parts = [st.P_sM.ravel()]
    if st.P_fM is not None:
        parts.append(st.P_fM.ravel())
    return np.concatenate(parts)


def fd_check(model: FsiRveModel, seed: int = 0, eps: float = 1e-6) -> float:
    """Worst relative gap between tangent columns and central differences of the stress map.

    The base point is drawn from ``seed``; every macroscale input direction
    present in the tangent is perturbed.  Column gaps are measured relative to
    ``max(|column|, 1e-8 * largest column norm)``.
    """
    rng = np.random.default_rng(seed)
    tan = coupled_tangent(model)
    ncol = tan.matrix.shape[1]
    z0 = np.zeros(7)
    z0[:4] = 1e-3 * rng.standard_normal(4)
    if ncol == 7:
        z0[4] = rng.uniform(0.5, 1.5)
        z0[5:] = 0.1 * rng.standard_normal(2)
    scale = max(np.linalg.norm(tan.matrix, axis=0).max(), 1e-300)
    worst = 0.0
    for k in range(ncol):
        e = np.zeros(7)
        e[k] = eps
        fd = (_stress_vector(model, z0 + e) - _stress_vector(model, z0 - e)) / (2 * eps)
        col = tan.matrix[:, k]
        worst = max(worst, float(np.linalg.norm(fd - col) / max(np.linalg.norm(col), 1e-8 * scale)))
    return worst


class FsiMaterialPoint:
    """Gauss-point binding of a fluid-filled RVE under a prescribed macroscale pressure.

    The macroscale momentum balance sees the mixture stress
    ``(|Omega_s| P_sM + |Omega_f| P_fM) / V0``.
    """

    def __init__(self, model: FsiRveModel, p_c: float = 0.0, grad_p=(0.0, 0.0)):
        self.model = model
        self.p_c = float(p_c)
        self.grad_p = np.asarray(grad_p, dtype=float)

    def _mixture_map(self) -> np.ndarray:
        tan = coupled_tangent(self.model)
        m = self.model
        if not m.has_fluid:
            return np.hstack([tan.matrix, np.zeros((4, 3))]) * (m.solid_volume / m.volume)
        return (m.solid_volume * tan.block("Ps", "") + m.fluid_volume * tan.block("Pf", "")) / m.volume

    def tangent(self) -> np.ndarray:
        return self._mixture_map()[:, :4].reshape(DIM, DIM, DIM, DIM)

    def stress(self, F_M) -> np.ndarray:
        inp = MacroHydroInput(F_M, self.p_c, self.grad_p)
        return homogenize_biphasic(solve_fsi(self.model, inp), self.model).P_mix
