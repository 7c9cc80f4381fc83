"""Macroscale FE² driver: gauss-point RVE coupling and incremental-iterative loading.

Every gauss point owns a material point object exposing ``tangent()`` (the
homogenized fourth-order tangent) and ``stress(F_M)`` (the homogenized first
Piola-Kirchhoff stress); :class:`fe2hom.rve.RveModel` is the standard one.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, Fe2Error, RveError
from .fem import DIM, apply_dirichlet, element_dofs, quadrature, scatter, shape_gradients
from .linsolve import Factorization
from .mesh import Mesh

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 25
_NORM_FLOOR = 1e-300


@dataclass(frozen=True)
class LoadStep:
    """Increments applied at the start of one load step.

    ``forces`` is a nodal force increment over all DOFs (or None);
    ``displacements`` maps DOF -> prescribed displacement increment.
    """

    forces: np.ndarray | None = None
    displacements: dict[int, float] = field(default_factory=dict)


@dataclass
class MacroProblem:
    mesh: Mesh
    points: list[list]  # points[e][g]: material point at gauss point g of element e
    supports: dict[int, float]  # DOFs held at zero for the whole run
    steps: list[LoadStep]
    gauss_order: int = 2
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    threads: int = 1
    refresh_tangent: bool = False

    def __post_init__(self):
        n_gp = len(quadrature(self.gauss_order))
        if len(self.points) != self.mesh.n_elems or any(len(p) != n_gp for p in self.points):
            raise ValueError(f"need exactly one material point per gauss point ({n_gp} per element)")
        if not self.tol > 0.0:
            raise ValueError(f"TOL must be positive, got {self.tol}")

    @classmethod
    def uniform(cls, mesh: Mesh, point, supports, steps, **kw) -> "MacroProblem":
        """Same material point object at every gauss point."""
        n_gp = len(quadrature(kw.get("gauss_order", 2)))
        return cls(mesh, [[point] * n_gp for _ in range(mesh.n_elems)], dict(supports), list(steps), **kw)

    @property
    def ndof(self) -> int:
        return DIM * self.mesh.n_nodes


@dataclass
class MacroState:
    u: np.ndarray  # (ndof,)
    F: np.ndarray  # (n_elems, n_gp, 2, 2)
    P: np.ndarray  # (n_elems, n_gp, 2, 2)
    f_ext: np.ndarray
    prescribed: dict[int, float]
    K: object = field(repr=False, default=None)
    tangents: np.ndarray | None = field(repr=False, default=None)
    step: int = 0
    iteration: int = 0
    residual: float = 0.0
    f_int: np.ndarray | None = field(repr=False, default=None)

    def copy(self) -> "MacroState":
        return replace(
            self,
            u=self.u.copy(),
            F=self.F.copy(),
            P=self.P.copy(),
            f_ext=self.f_ext.copy(),
            prescribed=dict(self.prescribed),
            f_int=None if self.f_int is None else self.f_int.copy(),
        )


class _Geometry:
    """Per gauss point shape gradients and integration weights."""

    def __init__(self, mesh: Mesh, order: int):
        rule = quadrature(order)
        ne, ng = mesh.n_elems, len(rule)
        self.G = np.zeros((ne, ng, 4, DIM))
        self.w = np.zeros((ne, ng))
        for e in range(ne):
            coords = mesh.nodes[mesh.elems[e]]
            for g, (xi, w) in enumerate(rule):
                _, G, detJ = shape_gradients(coords, xi)
                self.G[e, g] = G
                self.w[e, g] = w * detJ
        self.dofs = np.array([element_dofs(el) for el in mesh.elems])


def _geometry(problem: MacroProblem) -> _Geometry:
    geo = getattr(problem, "_geo", None)
    if geo is None:
        geo = _Geometry(problem.mesh, problem.gauss_order)
        problem._geo = geo
    return geo


def _for_points(problem: MacroProblem, fn, order=None):
    """Evaluate ``fn(e, g)`` at every gauss point, concurrently if threads > 1."""
    keys = [(e, g) for e in range(len(problem.points)) for g in range(len(problem.points[e]))]
    if order is not None:
        keys = [keys[k] for k in order]

    def call(key):
        try:
            return key, fn(*key)
        except Fe2Error as exc:
            raise RveError(str(exc), key) from exc
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise RveError(str(exc), key) from exc

    if problem.threads > 1:
        with ThreadPoolExecutor(max_workers=problem.threads) as pool:
            return dict(pool.map(call, keys))
    return dict(call(k) for k in keys)


def compute_tangents(problem: MacroProblem) -> np.ndarray:
    """Homogenized tangent at every gauss point; shared material points are evaluated once."""
    cache: dict[int, np.ndarray] = {}
    for e, row in enumerate(problem.points):
        for g, point in enumerate(row):
            if id(point) not in cache:
                try:
                    cache[id(point)] = np.asarray(point.tangent())
                except Fe2Error as exc:
                    raise RveError(f"tangent computation failed: {exc}", (e, g)) from exc
    ne, ng = problem.mesh.n_elems, len(problem.points[0])
    out = np.zeros((ne, ng, DIM, DIM, DIM, DIM))
    for e, row in enumerate(problem.points):
        for g, point in enumerate(row):
            out[e, g] = cache[id(point)]
    return out


def assemble_tangent(problem: MacroProblem, tangents: np.ndarray):
    """Gauss-weighted integration of the per-point tangents into the macro operator."""
    geo = _geometry(problem)
    rows, cols, vals = [], [], []
    for e in range(problem.mesh.n_elems):
        G, w = geo.G[e], geo.w[e]
        ke = np.einsum("g,gAb,gabcd,gBd->AaBc", w, G, tangents[e], G).reshape(4 * DIM, 4 * DIM)
        d = geo.dofs[e]
        rows.append(np.repeat(d, len(d)))
        cols.append(np.tile(d, len(d)))
        vals.append(ke.ravel())
    return scatter(rows, cols, vals, problem.ndof)


def internal_forces(problem: MacroProblem, P: np.ndarray, order=None) -> np.ndarray:
    """``f_int[(A,a)] = sum_e sum_g w detJ dN_A/dX_b P_ab``.

    ``order`` permutes the element summation order (used to check reordering stability).
    """
    geo = _geometry(problem)
    f = np.zeros(problem.ndof)
    elems = range(problem.mesh.n_elems) if order is None else order
    for e in elems:
        fe = np.einsum("g,gAb,gab->Aa", geo.w[e], geo.G[e], P[e])
        np.add.at(f, geo.dofs[e], fe.ravel())
    return f


def init_fe2(problem: MacroProblem) -> MacroState:
    """Reference state ``F_M = I`` with the macro tangent assembled from gauss-point RVEs."""
    ne, ng = problem.mesh.n_elems, len(problem.points[0])
    tangents = compute_tangents(problem)
    K = assemble_tangent(problem, tangents)
    F = np.broadcast_to(np.eye(DIM), (ne, ng, DIM, DIM)).copy()
    P = np.zeros((ne, ng, DIM, DIM))
    # reference stress; nonzero only for prestressed points (e.g. pressurized pores)
    for (e, g), Pg in _for_points(problem, lambda e, g: problem.points[e][g].stress(F[e, g])).items():
        P[e, g] = Pg
    return MacroState(
        u=np.zeros(problem.ndof),
        F=F,
        P=P,
        f_ext=np.zeros(problem.ndof),
        prescribed={d: 0.0 for d in problem.supports},
        K=K,
        tangents=tangents,
        f_int=internal_forces(problem, P),
    )


def _residual_norm(problem, state, f_int, free) -> float:
    num = np.linalg.norm((f_int - state.f_ext)[free])
    den = max(np.linalg.norm(state.f_ext), np.linalg.norm(f_int), _NORM_FLOOR)
    return float(num / den) if num > 0.0 else 0.0


def newton_step(problem: MacroProblem, state: MacroState, f_ext=None, order=None) -> tuple[MacroState, float]:
    """One macro iteration: solve for du, update F_M, re-solve the RVEs, recompute f_int.

    ``f_ext`` (total external force) defaults to ``state.f_ext``.  Returns the
    new state and ``||f_int - f_ext||_free / max(||f_ext||, ||f_int||)``.
    """
    new = state.copy()
    if f_ext is not None:
        new.f_ext = np.asarray(f_ext, dtype=float).copy()
    f_int = state.f_int if state.f_int is not None else internal_forces(problem, state.P)
    bcs = {d: v - state.u[d] for d, v in new.prescribed.items()}
    red = apply_dirichlet(state.K, new.f_ext - f_int, bcs)
    du_f = Factorization(red.Kff).solve(red.rhs) if len(red.free) else np.zeros(0)
    du = red.full(du_f)
    new.u = state.u + du

    geo = _geometry(problem)
    du_e = du[geo.dofs].reshape(problem.mesh.n_elems, 4, DIM)
    new.F = state.F + np.einsum("eAa,egAb->egab", du_e, geo.G)

    results = _for_points(problem, lambda e, g: problem.points[e][g].stress(new.F[e, g]), order)
    for (e, g), P in results.items():
        new.P[e, g] = P
    new.f_int = internal_forces(problem, new.P)
    new.iteration = state.iteration + 1
    new.residual = _residual_norm(problem, new, new.f_int, red.free)
    return new, new.residual


def run_load_steps(problem: MacroProblem, state: MacroState | None = None, log_rows=None) -> list[MacroState]:
    """Apply the load program; returns the converged state after every step.

    ``log_rows`` (a list) receives ``(step, iteration, residual)`` tuples.
    Raises :class:`ConvergenceError` when a step exceeds ``max_iter``.
    """
    state = init_fe2(problem) if state is None else state
    history = []
    for k, step in enumerate(problem.steps, start=1):
        if problem.refresh_tangent:
            # constant RVE operator: a refresh reproduces the stored tangent
            state.tangents = compute_tangents(problem)
            state.K = assemble_tangent(problem, state.tangents)
        state = state.copy()
        state.step, state.iteration = k, 0
        if step.forces is not None:
            state.f_ext = state.f_ext + np.asarray(step.forces, dtype=float)
        for d, v in step.displacements.items():
            state.prescribed[d] = state.prescribed.get(d, 0.0) + float(v)
        residuals = []
        while True:
            if state.iteration >= problem.max_iter:
                raise ConvergenceError(k, residuals)
            state, res = newton_step(problem, state)
            residuals.append(res)
            if log_rows is not None:
                log_rows.append((k, state.iteration, res))
            log.info("step %d iteration %d residual %.3e", k, state.iteration, res)
            if res <= problem.tol:
                break
        history.append(state)
    return history


def edge_traction(mesh: Mesh, edge: str, traction) -> np.ndarray:
    """Consistent nodal forces of a uniform traction (force per unit length) on an edge."""
    t = np.asarray(traction, dtype=float)
    nodes = mesh.boundary.edge(edge)
    f = np.zeros(DIM * mesh.n_nodes)
    for a, b in zip(nodes[:-1], nodes[1:]):
        L = float(np.linalg.norm(mesh.nodes[b] - mesh.nodes[a]))
        for n in (a, b):
            f[DIM * n : DIM * n + DIM] += 0.5 * L * t
    return f


def edge_dofs(mesh: Mesh, edge: str, component: int) -> list[int]:
    return [DIM * n + component for n in mesh.boundary.edge(edge)]


def gauss_point_positions(problem: MacroProblem) -> np.ndarray:
    """Reference coordinates ``(n_elems, n_gp, 2)`` of the gauss points."""
    from .fem import shape_functions

    rule = quadrature(problem.gauss_order)
    m = problem.mesh
    return np.array(
        [[shape_functions(xi) @ m.nodes[m.elems[e]] for xi, _ in rule] for e in range(m.n_elems)]
    )
