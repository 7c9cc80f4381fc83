"""Small dense tensor algebra for plane (d=2) and solid (d=3) continuum mechanics.

Index convention (used by every module of the package): a second-order tensor
``A`` is a ``(d, d)`` array with ``A[i, j]`` the row-i / column-j component, so
``A @ v`` is the usual matrix-vector product.  A fourth-order tensor ``C`` is a
``(d, d, d, d)`` array acting as ``(C : A)[a, b] = C[a, b, c, d] * A[c, d]``.
Flattening to vectors is always row-major (``A.reshape(-1)``), i.e. for d=2 the
order is ``11, 12, 21, 22``.

Tensors are plain read-only numpy arrays; the helpers below validate shape and
finiteness and return fresh arrays.
"""

from __future__ import annotations

import numpy as np

SUPPORTED_DIMS = (2, 3)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def vec(values) -> np.ndarray:
    """Validated length-d vector."""
    v = np.array(values, dtype=float)
    if v.ndim != 1 or v.shape[0] not in SUPPORTED_DIMS:
        raise ValueError(f"vector must have length 2 or 3, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return _frozen(v)


def tensor2(values) -> np.ndarray:
    """Validated d x d tensor."""
    t = np.array(values, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] not in SUPPORTED_DIMS:
        raise ValueError(f"second-order tensor must be d x d with d in {{2,3}}, got {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor entries must be finite")
    return _frozen(t)


def tensor4(values) -> np.ndarray:
    """Validated d x d x d x d tensor."""
    t = np.array(values, dtype=float)
    if t.ndim != 4 or len(set(t.shape)) != 1 or t.shape[0] not in SUPPORTED_DIMS:
        raise ValueError(f"fourth-order tensor must be d^4 with d in {{2,3}}, got {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor entries must be finite")
    return _frozen(t)


def identity(d: int = 2) -> np.ndarray:
    if d not in SUPPORTED_DIMS:
        raise ValueError(f"unsupported dimension {d}")
    return _frozen(np.eye(d))


def outer(a, b) -> np.ndarray:
    """Dyadic product ``a ⊗ b`` with ``result[i, j] = a[i] * b[j]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch in outer product: {a.shape} vs {b.shape}")
    return _frozen(np.multiply.outer(a, b))


def ddot42(C, A) -> np.ndarray:
    """Double contraction ``C : A`` of a fourth-order with a second-order tensor."""
    C = np.asarray(C, dtype=float)
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d) or C.shape != (d, d, d, d):
        raise ValueError(f"dimension mismatch in ddot42: {C.shape} vs {A.shape}")
    return _frozen(np.einsum("abcd,cd->ab", C, A))


def ddot22(A, B) -> float:
    """Scalar product ``A : B = A_ij B_ij``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch in ddot22: {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def det_inv(F) -> tuple[float, np.ndarray]:
    """Determinant and inverse of a deformation gradient.

    Raises ValueError when ``det F <= 0`` (inverted material element).
    """
    F = tensor2(F)
    J = float(np.linalg.det(F))
    if not J > 0.0:
        raise ValueError(f"non-positive determinant J={J!r}: inverted element")
    if F.shape == (2, 2):
        Finv = np.array([[F[1, 1], -F[0, 1]], [-F[1, 0], F[0, 0]]]) / J
    else:
        Finv = np.linalg.inv(F)
    return J, _frozen(Finv)


def piola_to_cauchy(P, F) -> np.ndarray:
    """Cauchy stress ``sigma = P F^T / J`` from the first Piola-Kirchhoff stress."""
    P = tensor2(P)
    J, _ = det_inv(F)
    if P.shape != np.shape(F):
        raise ValueError("dimension mismatch between P and F")
    return _frozen(P @ np.asarray(F).T / J)


def lame(E: float, nu: float) -> tuple[float, float]:
    """Lamé constants ``(lambda, mu)`` from Young's modulus and Poisson ratio."""
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def isotropic_tensor(lam: float, mu: float, d: int = 2) -> np.ndarray:
    """``C_abcd = lam d_ab d_cd + mu (d_ac d_bd + d_ad d_bc)``.

    For d=2 this is the plane-strain tensor.
    """
    I = np.eye(d)
    C = (
        lam * np.einsum("ab,cd->abcd", I, I)
        + mu * (np.einsum("ac,bd->abcd", I, I) + np.einsum("ad,bc->abcd", I, I))
    )
    return _frozen(C)


def symmetric_identity(d: int = 2) -> np.ndarray:
    """Fourth-order tensor mapping any A to sym(A)."""
    I = np.eye(d)
    return _frozen(0.5 * (np.einsum("ac,bd->abcd", I, I) + np.einsum("ad,bc->abcd", I, I)))


def major_symmetry_defect(C) -> float:
    """``max |C_abcd - C_cdab|``."""
    C = np.asarray(C)
    return float(np.max(np.abs(C - C.transpose(2, 3, 0, 1))))
