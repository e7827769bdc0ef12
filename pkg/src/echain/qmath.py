"""Dense complex linear algebra for small matrices.

Matrices are plain ``numpy`` arrays of complex dtype. Every routine caps the
side length at ``tol().max_dim`` (64 by default); the simulations in this
package never need more and the cap catches accidental blow-ups early.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .config import DimensionError, NotHermitianError, NotPositiveError, tol

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z)


def as_matrix(m) -> np.ndarray:
    """Coerce to a 2-D complex array, enforcing finiteness and the size cap."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    limit = tol().max_dim
    if max(a.shape) > limit:
        raise DimensionError(f"matrix side {max(a.shape)} exceeds cap {limit}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _square(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return as_matrix(np.kron(a, b))


def kron_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def _check_dims(a: np.ndarray, dims) -> tuple[int, int]:
    da, db = (int(d) for d in dims)
    if da < 1 or db < 1 or a.shape != (da * db, da * db):
        raise DimensionError(f"matrix of shape {a.shape} does not match dims {dims}")
    return da, db


def _label(which) -> int:
    if which in ("A", 0):
        return 0
    if which in ("B", 1):
        return 1
    raise ValueError(f"subsystem label must be 'A' or 'B', got {which!r}")


def partial_trace(m, dims, keep="A") -> np.ndarray:
    """Trace out one factor of a bipartite operator, keeping ``keep``."""
    a = _square(m)
    da, db = _check_dims(a, dims)
    t = a.reshape(da, db, da, db)
    if _label(keep) == 0:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def partial_transpose(m, dims, which="B") -> np.ndarray:
    a = _square(m)
    da, db = _check_dims(a, dims)
    t = a.reshape(da, db, da, db)
    if _label(which) == 1:
        t = t.transpose(0, 3, 2, 1)
    else:
        t = t.transpose(2, 1, 0, 3)
    return t.reshape(da * db, da * db)


def permute_subsystems(m, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a square operator: new factor i is old ``perm[i]``."""
    a = _square(m)
    dims = [int(d) for d in dims]
    n = len(dims)
    if sorted(perm) != list(range(n)) or int(np.prod(dims)) != a.shape[0]:
        raise DimensionError("inconsistent dims/permutation")
    t = a.reshape(dims + dims)
    t = t.transpose(list(perm) + [p + n for p in perm])
    return t.reshape(a.shape)


def symmetrize(m) -> np.ndarray:
    """Return the Hermitian part of ``m``; reject matrices that are visibly non-Hermitian."""
    a = _square(m)
    residual = np.max(np.abs(a - dag(a))) if a.size else 0.0
    if residual > tol().hermitian:
        raise NotHermitianError(f"anti-Hermitian residual {residual:.3e} exceeds tolerance")
    return (a + dag(a)) / 2


def hermitian_eigensystem(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching eigenvector columns."""
    h = symmetrize(m)
    w, v = np.linalg.eigh(h)
    return w[::-1].copy(), v[:, ::-1].copy()


def clip_spectrum(w: np.ndarray) -> np.ndarray:
    """Zero out rounding-level negative eigenvalues; raise on genuine negativity."""
    t = tol()
    if w.size and w.min() < -t.negative:
        raise NotPositiveError(f"eigenvalue {w.min():.3e} below -{t.negative:g}")
    return np.where(w < 0, 0.0, w)


def svd_values(m) -> np.ndarray:
    return np.linalg.svd(as_matrix(m), compute_uv=False)


def trace_norm(m) -> float:
    return float(np.sum(svd_values(_square(m))))


def hermitian_trace_norm(m) -> float:
    """Trace norm of a Hermitian matrix via its spectrum."""
    w = np.linalg.eigvalsh(symmetrize(m))
    return float(np.sum(np.abs(w)))


def sqrtm_psd(m) -> np.ndarray:
    w, v = hermitian_eigensystem(m)
    w = clip_spectrum(w)
    return (v * np.sqrt(w)) @ dag(v)


def von_neumann_entropy(rho) -> float:
    """Entropy in bits, with 0 log 0 = 0."""
    w = np.linalg.eigvalsh(symmetrize(rho))
    w = clip_spectrum(w)
    return shannon_entropy(w)


def shannon_entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def _check_state(rho: np.ndarray, name: str) -> None:
    t = tol()
    tr = np.trace(rho).real
    if abs(tr - 1) > t.trace:
        raise ValueError(f"{name} has trace {tr!r}, expected 1")


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 between two states."""
    a = symmetrize(rho)
    b = symmetrize(sigma)
    if a.shape != b.shape:
        raise DimensionError("states have different dimensions")
    _check_state(a, "rho")
    _check_state(b, "sigma")
    f = np.sum(svd_values(sqrtm_psd(a) @ sqrtm_psd(b))) ** 2
    return float(min(max(f, 0.0), 1.0))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase correction."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def polar_isometry(w: np.ndarray) -> np.ndarray:
    """Closest isometry to ``w`` (columns orthonormal), via the SVD."""
    u, _, vh = np.linalg.svd(w, full_matrices=False)
    return u @ vh
