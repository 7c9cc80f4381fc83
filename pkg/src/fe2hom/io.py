"""Result emission: CSV blocks, legacy ASCII VTK and the run manifest.

Numbers are written with 17 significant digits so that values round-trip
exactly.  Tensor indices in CSV files are 1-based.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .mesh import Mesh

VTK_QUAD = 9


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_tangent_csv(C, path) -> None:
    """One row per component: ``a,b,c,d,value``."""
    C = np.asarray(C)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "c", "d", "value"])
        for idx in np.ndindex(*C.shape):
            w.writerow([i + 1 for i in idx] + [fmt(C[idx])])


def read_tangent_csv(path) -> np.ndarray:
    rows = list(csv.DictReader(open(path, newline="")))
    d = max(int(r["a"]) for r in rows)
    C = np.zeros((d, d, d, d))
    for r in rows:
        C[int(r["a"]) - 1, int(r["b"]) - 1, int(r["c"]) - 1, int(r["d"]) - 1] = float(r["value"])
    return C


def write_stress_csv(blocks: dict, path) -> None:
    """Second-order tensors as ``name,a,b,value`` rows; None entries are skipped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "a", "b", "value"])
        for name, T in blocks.items():
            if T is None:
                continue
            T = np.asarray(T)
            for a, b in np.ndindex(*T.shape):
                w.writerow([name, a + 1, b + 1, fmt(T[a, b])])


def write_labeled_matrix_csv(matrix, row_labels, col_labels, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for i, r in enumerate(row_labels):
            for j, c in enumerate(col_labels):
                w.writerow([r, c, fmt(matrix[i, j])])


def write_log_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "iteration", "residual"])
        for step, it, res in rows:
            w.writerow([step, it, fmt(res)])


def write_vtk(
    mesh: Mesh,
    path,
    title: str = "fe2hom",
    point_vectors: dict | None = None,
    point_scalars: dict | None = None,
    cell_scalars: dict | None = None,
    cell_tensors: dict | None = None,
) -> None:
    """Legacy ASCII unstructured grid of bilinear quads (z = 0).

    Vectors are ``(n, 2)`` arrays, tensors ``(n, 2, 2)``; both are padded to 3-D.
    NaN point scalars (e.g. pressure on solid-only nodes) are written as 0.
    """
    n, m = mesh.n_nodes, mesh.n_elems
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {n} double")
    out += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    out.append(f"CELLS {m} {5 * m}")
    out += ["4 " + " ".join(str(int(k)) for k in el) for el in mesh.elems]
    out.append(f"CELL_TYPES {m}")
    out += [str(VTK_QUAD)] * m
    if point_vectors or point_scalars:
        out.append(f"POINT_DATA {n}")
        for name, V in (point_vectors or {}).items():
            out.append(f"VECTORS {name} double")
            out += [f"{fmt(a)} {fmt(b)} 0" for a, b in np.asarray(V).reshape(n, 2)]
        for name, s in (point_scalars or {}).items():
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [fmt(0.0 if np.isnan(v) else v) for v in np.asarray(s, dtype=float)]
    out.append(f"CELL_DATA {m}")
    out += ["SCALARS phase int 1", "LOOKUP_TABLE default"]
    out += [str(int(p)) for p in mesh.phase]
    for name, s in (cell_scalars or {}).items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [fmt(v) for v in np.asarray(s, dtype=float)]
    for name, T in (cell_tensors or {}).items():
        out.append(f"TENSORS {name} double")
        for t in np.asarray(T).reshape(m, 2, 2):
            out += [f"{fmt(t[0, 0])} {fmt(t[0, 1])} 0", f"{fmt(t[1, 0])} {fmt(t[1, 1])} 0", "0 0 0"]
    Path(path).write_text("\n".join(out) + "\n")


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, default=str).encode()).hexdigest()


def write_manifest(out_dir, mode: str, raw_config: dict, files: list[str], extra: dict | None = None) -> Path:
    path = Path(out_dir) / "manifest.json"
    data = {"mode": mode, "config_hash": config_hash(raw_config), "files": sorted(files)}
    if extra:
        data.update(extra)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
