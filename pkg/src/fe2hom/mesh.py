"""Structured quadrilateral meshes for macro and RVE domains.

Nodes of an ``nx x ny`` grid are numbered row by row, ``node(i, j) = j*(nx+1) + i``,
and element corners run counterclockwise from the lower-left node.  Phases are
assigned per element from the element centroid; the tag ``VOID`` marks elements
that are skipped during assembly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshError

VOID = -1
MIRROR_RTOL = 1e-12


@dataclass(frozen=True)
class BoundarySets:
    """Boundary node bookkeeping of a rectangular domain.

    Edge lists include their end corners and are sorted by arc coordinate.
    ``pairs_lr`` matches left to right nodes at equal y, ``pairs_bt`` bottom to
    top nodes at equal x (corners included).
    """

    left: tuple[int, ...]
    right: tuple[int, ...]
    bottom: tuple[int, ...]
    top: tuple[int, ...]
    corners: tuple[int, int, int, int]  # bottom-left, bottom-right, top-right, top-left
    pairs_lr: tuple[tuple[int, int], ...]
    pairs_bt: tuple[tuple[int, int], ...]

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return self.pairs_lr + self.pairs_bt

    @property
    def nodes(self) -> np.ndarray:
        """All boundary nodes, sorted, without repetition."""
        return np.unique(np.concatenate([self.left, self.right, self.bottom, self.top]))

    def edge(self, name: str) -> tuple[int, ...]:
        if name not in ("left", "right", "bottom", "top"):
            raise MeshError(f"unknown edge {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray  # (n_nodes, 2) reference coordinates
    elems: np.ndarray  # (n_elems, 4) counterclockwise connectivity
    phase: np.ndarray  # (n_elems,) integer tags
    dims: tuple[float, float]
    boundary: BoundarySets

    def __post_init__(self):
        for name in ("nodes", "elems", "phase"):
            getattr(self, name).setflags(write=False)
        if self.elems.size and (self.elems.min() < 0 or self.elems.max() >= len(self.nodes)):
            raise MeshError("element connectivity refers to a node index out of range")
        if len(self.phase) != len(self.elems):
            raise MeshError("one phase tag per element required")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elems(self) -> int:
        return len(self.elems)

    @property
    def volume(self) -> float:
        """Reference measure of the whole cell, voids included."""
        return float(self.dims[0] * self.dims[1])

    def centroids(self) -> np.ndarray:
        return self.nodes[self.elems].mean(axis=1)

    def element_areas(self) -> np.ndarray:
        xy = self.nodes[self.elems]
        x, y = xy[..., 0], xy[..., 1]
        return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)

    def phase_volume(self, tag: int) -> float:
        return float(self.element_areas()[self.phase == tag].sum())

    def active_nodes(self) -> np.ndarray:
        """Nodes touched by at least one non-void element."""
        return np.unique(self.elems[self.phase != VOID])

    def with_phase(self, phase) -> "Mesh":
        return dataclasses.replace(self, phase=np.array(phase, dtype=int))


def gen_grid(nx: int, ny: int, Lx: float = 1.0, Ly: float = 1.0) -> Mesh:
    """Uniform ``nx x ny`` grid of bilinear quadrilaterals on ``[0,Lx] x [0,Ly]``."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"element counts must be positive integers, got nx={nx}, ny={ny}")
    if not (Lx > 0 and Ly > 0):
        raise MeshError(f"domain extents must be positive, got Lx={Lx}, Ly={Ly}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    elems = np.column_stack([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)])

    left = tuple(nid(0, jj) for jj in range(ny + 1))
    right = tuple(nid(nx, jj) for jj in range(ny + 1))
    bottom = tuple(nid(ii, 0) for ii in range(nx + 1))
    top = tuple(nid(ii, ny) for ii in range(nx + 1))
    boundary = BoundarySets(
        left=left,
        right=right,
        bottom=bottom,
        top=top,
        corners=(nid(0, 0), nid(nx, 0), nid(nx, ny), nid(0, ny)),
        pairs_lr=tuple(zip(left, right)),
        pairs_bt=tuple(zip(bottom, top)),
    )
    return Mesh(nodes, elems, np.zeros(nx * ny, dtype=int), (float(Lx), float(Ly)), boundary)


@dataclass(frozen=True)
class MicrostructureSpec:
    """Geometry of the cell content.

    kind is one of ``homogeneous``, ``laminate``, ``inclusion`` and ``void``.
    A laminate tags elements whose centroid coordinate along ``direction``
    (the layer normal, ``"x"`` or ``"y"``) is below ``fraction * L`` with 0 and the
    rest with 1.  Inclusions tag centroids strictly inside the circle with 1;
    voids tag them ``VOID``.  Center and radius are in absolute coordinates.
    """

    kind: str = "homogeneous"
    direction: str = "x"
    fraction: float = 0.5
    center: tuple[float, float] = (0.5, 0.5)
    radius: float = 0.25
    inside_tag: int = 1

    def __post_init__(self):
        if self.kind not in ("homogeneous", "laminate", "inclusion", "void"):
            raise MeshError(f"unknown microstructure kind {self.kind!r}")
        if self.kind == "laminate":
            if self.direction not in ("x", "y"):
                raise MeshError(f"laminate direction must be 'x' or 'y', got {self.direction!r}")
            if not 0.0 < self.fraction < 1.0:
                raise MeshError(f"volume fraction must lie in (0, 1), got {self.fraction}")
        if self.kind in ("inclusion", "void") and not self.radius > 0.0:
            raise MeshError(f"radius must be positive, got {self.radius}")

    @classmethod
    def homogeneous(cls) -> "MicrostructureSpec":
        return cls("homogeneous")

    @classmethod
    def laminate(cls, direction: str = "x", fraction: float = 0.5) -> "MicrostructureSpec":
        return cls("laminate", direction=direction, fraction=fraction)

    @classmethod
    def inclusion(cls, center=(0.5, 0.5), radius=0.25, tag: int = 1) -> "MicrostructureSpec":
        return cls("inclusion", center=tuple(center), radius=radius, inside_tag=tag)

    @classmethod
    def void(cls, center=(0.5, 0.5), radius=0.25) -> "MicrostructureSpec":
        return cls("void", center=tuple(center), radius=radius, inside_tag=VOID)

    def tags(self, points: np.ndarray, dims: tuple[float, float]) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.zeros(len(points), dtype=int)
        if self.kind == "laminate":
            axis = 0 if self.direction == "x" else 1
            out[points[:, axis] >= self.fraction * dims[axis]] = 1
        elif self.kind in ("inclusion", "void"):
            dist = np.hypot(points[:, 0] - self.center[0], points[:, 1] - self.center[1])
            out[dist < self.radius] = self.inside_tag if self.kind == "inclusion" else VOID
        return out


def tag_phases(mesh: Mesh, spec: MicrostructureSpec) -> Mesh:
    """Return a copy of ``mesh`` with element phases assigned by centroid test."""
    Lx, Ly = mesh.dims
    if spec.kind in ("inclusion", "void"):
        cx, cy = spec.center
        r = spec.radius
        if cx - r < 0.0 or cy - r < 0.0 or cx + r > Lx or cy + r > Ly:
            raise MeshError(
                f"{spec.kind} (center {spec.center}, radius {r}) is not inside the "
                f"domain [0, {Lx}] x [0, {Ly}]"
            )
    return mesh.with_phase(spec.tags(mesh.centroids(), mesh.dims))


def _column_phases(mesh: Mesh, edge: str) -> list[int]:
    """Phases of the element row/column touching an edge, ordered by arc coordinate."""
    nodes = set(mesh.boundary.edge(edge))
    c = mesh.centroids()
    sel = [e for e in range(mesh.n_elems) if sum(n in nodes for n in mesh.elems[e]) == 2]
    axis = 1 if edge in ("left", "right") else 0
    sel.sort(key=lambda e: c[e, axis])
    return [int(mesh.phase[e]) for e in sel]


def _same_pattern(a: list[int], b: list[int]) -> bool:
    """Equal up to a one-to-one relabelling of the phase tags."""
    if len(a) != len(b):
        return False
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True


def mirror_check(mesh: Mesh) -> bool:
    """True if opposite edges are mirror images of each other.

    Paired nodes must share their tangential coordinate within
    ``1e-12 * max(Lx, Ly)`` and the phase pattern of the element column along
    each edge must match the opposite column up to relabelling.
    """
    b = mesh.boundary
    tol = MIRROR_RTOL * max(mesh.dims)
    X = mesh.nodes
    for pairs, axis in ((b.pairs_lr, 1), (b.pairs_bt, 0)):
        for a, c in pairs:
            if abs(X[a, axis] - X[c, axis]) > tol:
                return False
    if len(b.left) != len(b.right) or len(b.bottom) != len(b.top):
        return False
    return _same_pattern(_column_phases(mesh, "left"), _column_phases(mesh, "right")) and (
        _same_pattern(_column_phases(mesh, "bottom"), _column_phases(mesh, "top"))
    )


def boundary_from_coordinates(nodes: np.ndarray, dims: tuple[float, float]) -> BoundarySets:
    """Rebuild boundary sets of a rectangular domain from node coordinates."""
    Lx, Ly = dims
    tol = MIRROR_RTOL * max(dims) * 10
    x, y = nodes[:, 0], nodes[:, 1]

    def sorted_on(mask, axis):
        idx = np.flatnonzero(mask)
        return tuple(int(k) for k in idx[np.argsort(nodes[idx, axis], kind="stable")])

    left = sorted_on(np.abs(x) <= tol, 1)
    right = sorted_on(np.abs(x - Lx) <= tol, 1)
    bottom = sorted_on(np.abs(y) <= tol, 0)
    top = sorted_on(np.abs(y - Ly) <= tol, 0)
    if not (left and right and bottom and top):
        raise MeshError("could not identify all four edges of the domain")

    def match(src, dst, axis, edge_names):
        out = []
        for a in src:
            hits = [c for c in dst if abs(nodes[a, axis] - nodes[c, axis]) <= tol]
            if len(hits) != 1:
                raise MeshError(f"node {a} on {edge_names[0]} has no unique mirror on {edge_names[1]}")
            out.append((a, hits[0]))
        return tuple(out)

    return BoundarySets(
        left=left,
        right=right,
        bottom=bottom,
        top=top,
        corners=(left[0], right[0], right[-1], left[-1]),
        pairs_lr=match(left, right, 1, ("left", "right")),
        pairs_bt=match(bottom, top, 0, ("bottom", "top")),
    )


def write_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text mesh format.

    ::

        <n_nodes> <n_elems>
        <id> <x> <y>                      (n_nodes lines)
        <id> <n0> <n1> <n2> <n3> <phase>  (n_elems lines)
    """
    lines = [f"{mesh.n_nodes} {mesh.n_elems}"]
    lines += [f"{k} {x:.17g} {y:.17g}" for k, (x, y) in enumerate(mesh.nodes)]
    lines += [
        f"{k} {n[0]} {n[1]} {n[2]} {n[3]} {p}"
        for k, (n, p) in enumerate(zip(mesh.elems, mesh.phase))
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read a mesh written by :func:`write_mesh` (domain assumed to start at the origin)."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        n_nodes, n_elems = int(rows[0][0]), int(rows[0][1])
        node_rows = rows[1 : 1 + n_nodes]
        elem_rows = rows[1 + n_nodes : 1 + n_nodes + n_elems]
        if len(node_rows) != n_nodes or len(elem_rows) != n_elems:
            raise MeshError(f"{path}: header announces {n_nodes} nodes / {n_elems} elements")
        nodes = np.zeros((n_nodes, 2))
        for r in node_rows:
            nodes[int(r[0])] = float(r[1]), float(r[2])
        elems = np.zeros((n_elems, 4), dtype=int)
        phase = np.zeros(n_elems, dtype=int)
        for r in elem_rows:
            k = int(r[0])
            elems[k] = [int(v) for v in r[1:5]]
            phase[k] = int(r[5])
    except (IndexError, ValueError) as exc:
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    dims = (float(nodes[:, 0].max()), float(nodes[:, 1].max()))
    return Mesh(nodes, elems, phase, dims, boundary_from_coordinates(nodes, dims))
