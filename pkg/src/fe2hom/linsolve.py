"""Sparse direct factorization and static condensation onto boundary DOFs."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

PIVOT_RTOL = 1e-12
RESIDUAL_RTOL = 1e-10


def _as_sparse(A) -> sp.csc_matrix:
    if hasattr(A, "matrix"):
        A = A.matrix
    return sp.csc_matrix(A, dtype=float)


class Factorization:
    """Factor once, solve for many right-hand sides.

    With ``spd=True`` the matrix is factored without pivoting under a symmetric
    fill-reducing ordering, so the pivots are those of an ``L D L^T`` split and
    any non-positive one flags an indefinite operator (missing constraints).
    With ``spd=False`` ordinary partial pivoting is used (saddle-point systems).
    """

    def __init__(self, A, spd: bool = True):
        self.A = _as_sparse(A)
        n, m = self.A.shape
        if n != m:
            raise SolverError(f"cannot factor a non-square {n}x{m} operator")
        self.n = n
        self._lu = None
        if n == 0:
            return
        try:
            if spd:
                lu = spla.splu(
                    self.A,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            else:
                lu = spla.splu(self.A)
        except RuntimeError as exc:
            raise SolverError(f"singular operator ({exc}); check constraints") from exc
        piv = lu.U.diagonal()
        scale = np.max(np.abs(piv))
        if not scale > 0.0 or np.min(np.abs(piv)) <= PIVOT_RTOL * scale:
            raise SolverError(
                "numerically singular operator: a floating part or missing constraint "
                f"(pivot ratio {np.min(np.abs(piv)) / scale if scale else 0.0:.2e})"
            )
        if spd and np.any(piv <= 0.0):
            raise SolverError("operator is not positive definite; check constraints")
        self._lu = lu

    def solve(self, B) -> np.ndarray:
        B = np.asarray(B, dtype=float)
        if self.n == 0:
            return np.zeros_like(B)
        X = self._lu.solve(B)
        R = B - self.A @ X
        # one step of iterative refinement when roundoff is visible
        bnorm = np.linalg.norm(B, axis=0)
        rnorm = np.linalg.norm(R, axis=0)
        if np.any(rnorm > RESIDUAL_RTOL * np.maximum(bnorm, 1e-300)):
            X = X + self._lu.solve(R)
            rnorm = np.linalg.norm(B - self.A @ X, axis=0)
            if np.any(rnorm > RESIDUAL_RTOL * np.maximum(bnorm, 1e-300)):
                raise SolverError(f"solve residual {rnorm.max():.3e} above tolerance")
        return X


def factor_solve(Kff, B, spd: bool = True) -> np.ndarray:
    """Solve ``Kff x = b`` for each column (or the single vector) of ``B``."""
    return Factorization(Kff, spd=spd).solve(B)


@dataclass(frozen=True)
class CondensedOperator:
    """Dense boundary operator with the reference data needed for averaging.

    ``Kb`` is ordered like ``dofs``; for nodal displacement DOFs with two
    components per node, node ``i`` of ``positions`` owns rows ``2i, 2i+1``.
    """

    Kb: np.ndarray
    positions: np.ndarray
    volume: float
    dofs: np.ndarray

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.Kb - self.Kb.T))) if self.Kb.size else 0.0


def schur_complement(K, p, f, spd: bool = True) -> tuple[np.ndarray, Factorization, np.ndarray]:
    """``K_pp - K_pf K_ff^{-1} K_fp``, the factorization of ``K_ff`` and ``K_ff^{-1} K_fp``."""
    A = _as_sparse(K).tocsr()
    p = np.asarray(p, dtype=int)
    f = np.asarray(f, dtype=int)
    Kpp = A[p][:, p].toarray()
    Kfp = A[f][:, p].toarray()
    Kpf = A[p][:, f]
    fac = Factorization(A[f][:, f], spd=spd)
    X = fac.solve(Kfp) if len(f) else np.zeros((0, len(p)))
    return Kpp - Kpf @ X, fac, X


def condense(K, p, f, positions=None, volume: float = 1.0, spd: bool = True) -> CondensedOperator:
    """Eliminate the ``f`` DOFs and return the dense operator over ``p``."""
    Kb, _, _ = schur_complement(K, p, f, spd=spd)
    pos = np.zeros((0, 2)) if positions is None else np.asarray(positions, dtype=float)
    return CondensedOperator(Kb, pos, float(volume), np.asarray(p, dtype=int))


def content_hash(*parts) -> str:
    """SHA-256 over the bytes/reprs of ``parts``; keys the condensed-operator cache."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part).tobytes())
            h.update(str(part.shape).encode())
        else:
            h.update(repr(part).encode())
    return h.hexdigest()


_MAGIC = b"FE2CB001"
_HEADER = struct.Struct("<8sqqqqd")  # magic, rows, cols, n_positions, dim, volume


def save_condensed(op: CondensedOperator, path) -> None:
    """Binary dump: header then row-major float64 Kb, positions and int64 dofs."""
    rows, cols = op.Kb.shape
    npos, dim = op.positions.shape if op.positions.size else (0, 2)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, rows, cols, npos, dim, op.volume))
        fh.write(np.ascontiguousarray(op.Kb, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(op.positions, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(op.dofs, dtype="<i8").tobytes())


def load_condensed(path) -> CondensedOperator:
    data = Path(path).read_bytes()
    magic, rows, cols, npos, dim, volume = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a condensed-operator cache file")
    off = _HEADER.size
    Kb = np.frombuffer(data, "<f8", rows * cols, off).reshape(rows, cols).copy()
    off += 8 * rows * cols
    pos = np.frombuffer(data, "<f8", npos * dim, off).reshape(npos, dim).copy()
    off += 8 * npos * dim
    dofs = np.frombuffer(data, "<i8", rows, off).copy()
    return CondensedOperator(Kb, pos, volume, dofs)
