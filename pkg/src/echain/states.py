"""Bipartite pure and mixed states, Schmidt decompositions, purification, sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmath
from .config import DimensionError, tol


def _dims(dims) -> tuple[int, ...]:
    d = tuple(int(x) for x in dims)
    if not d or len(d) > 2 or any(x < 1 for x in d):
        raise DimensionError(f"dims must be (d,) or (dA, dB) with positive entries, got {dims}")
    return d


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    dims: tuple[int, int]

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        dims = _dims(self.dims)
        if len(dims) == 1:
            dims = (dims[0], 1)
        if amp.size != dims[0] * dims[1]:
            raise DimensionError(f"{amp.size} amplitudes do not match dims {dims}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1) > tol().norm:
            raise ValueError(f"state vector has norm {float(norm)!r}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def from_vector(cls, vector, dims) -> "PureState":
        """Normalize an arbitrary nonzero vector into a state."""
        v = np.asarray(vector, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / n, dims)

    @property
    def coefficients(self) -> np.ndarray:
        """The dA x dB coefficient matrix X with |psi> = sum X_ij |i>|j>."""
        return self.amplitudes.reshape(self.dims)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(qmath.projector(self.amplitudes), self.dims)

    def reduced(self, keep="A") -> np.ndarray:
        x = self.coefficients
        return x @ x.conj().T if keep in ("A", 0) else (x.T @ x.conj())


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        m = qmath.as_matrix(self.matrix)
        dims = _dims(self.dims)
        if m.shape != (int(np.prod(dims)),) * 2:
            raise DimensionError(f"matrix of shape {m.shape} does not match dims {dims}")
        m = qmath.symmetrize(m)
        t = tol()
        tr = np.trace(m).real
        if abs(tr - 1) > t.trace:
            raise ValueError(f"density matrix has trace {tr!r}")
        w = np.linalg.eigvalsh(m)
        if w[0] < -t.negative:
            raise qmath.NotPositiveError(f"density matrix eigenvalue {w[0]:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def partial_trace(self, keep="A") -> "DensityMatrix":
        if len(self.dims) != 2:
            raise DimensionError("partial trace needs a bipartite state")
        kept = self.dims[0] if keep in ("A", 0) else self.dims[1]
        return DensityMatrix(qmath.partial_trace(self.matrix, self.dims, keep), (kept,))


def as_array(rho) -> np.ndarray:
    """Matrix of a DensityMatrix, PureState (as projector) or raw array."""
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    if isinstance(rho, PureState):
        return qmath.projector(rho.amplitudes)
    return qmath.as_matrix(rho)


def dims_of(rho, dims=None) -> tuple[int, ...]:
    if dims is not None:
        return _dims(dims)
    if isinstance(rho, (DensityMatrix, PureState)):
        return rho.dims
    n = qmath.as_matrix(rho).shape[0]
    r = int(round(np.sqrt(n)))
    if r * r != n:
        raise DimensionError("cannot infer bipartite dims; pass dims explicitly")
    return (r, r)


def product_density(*factors) -> DensityMatrix:
    """Tensor product of single-system states, as a bipartite (first, rest) state."""
    mats = [as_array(f) for f in factors]
    dims = (mats[0].shape[0], int(np.prod([m.shape[0] for m in mats[1:]])))
    return DensityMatrix(qmath.kron_all(mats), dims)


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    coefficients: np.ndarray
    basis_a: np.ndarray
    basis_b: np.ndarray
    dims: tuple[int, int] = field(default=(1, 1))

    def reconstruct(self) -> PureState:
        """Sum_i sqrt(lambda_i) |a_i>|b_i>."""
        amp = np.einsum("i,ai,bi->ab", np.sqrt(self.coefficients), self.basis_a, self.basis_b)
        return PureState.from_vector(amp.reshape(-1), self.dims)


def schmidt(psi: PureState) -> SchmidtDecomposition:
    u, s, vh = np.linalg.svd(psi.coefficients)
    r = s.size
    return SchmidtDecomposition(s**2, u[:, :r], vh[:r, :].T, psi.dims)


def schmidt_coefficients(psi: PureState) -> np.ndarray:
    return np.linalg.svd(psi.coefficients, compute_uv=False) ** 2


def schmidt_rank(psi: PureState, cutoff: float | None = None) -> int:
    cutoff = tol().schmidt_cutoff if cutoff is None else cutoff
    return int(np.count_nonzero(schmidt_coefficients(psi) > cutoff))


def max_entangled(k: int) -> PureState:
    """(1/sqrt k) sum_i |ii> on C^k x C^k."""
    if k < 1:
        raise ValueError("k must be positive")
    return PureState(np.eye(k, dtype=complex).reshape(-1) / np.sqrt(k), (k, k))


def phi_plus() -> PureState:
    return max_entangled(2)


def purify(rho, cutoff: float | None = None) -> PureState:
    """Purification on system x reference, with reference dimension rank(rho).

    The system factor keeps the full dimension of ``rho``; a bipartite input is
    treated as one system of size dA*dB.
    """
    m = as_array(rho)
    cutoff = tol().clip if cutoff is None else cutoff
    w, v = qmath.hermitian_eigensystem(m)
    w = qmath.clip_spectrum(w)
    keep = w > cutoff
    w, v = w[keep], v[:, keep]
    amp = v * np.sqrt(w)
    return PureState.from_vector(amp.reshape(-1), (m.shape[0], w.size))


# --- reproducible sampling -------------------------------------------------

def rng_from(seed) -> np.random.Generator:
    """Generator from an int, SeedSequence or existing Generator."""
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _gaussian_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def random_pure(dims, seed=None) -> PureState:
    dims = _dims(dims)
    if len(dims) == 1:
        dims = (dims[0], 1)
    rng = rng_from(seed)
    return PureState.from_vector(_gaussian_vector(dims[0] * dims[1], rng), dims)


def random_density(dims, rank: int | None = None, seed=None) -> DensityMatrix:
    """Induced-measure mixed state: trace out a rank-dimensional environment."""
    dims = _dims(dims)
    d = int(np.prod(dims))
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise ValueError(f"rank must be in [1, {d}], got {rank}")
    big = random_pure((d, rank), seed)
    x = big.coefficients
    return DensityMatrix(x @ x.conj().T, dims)


def random_product_density(dims, seed=None) -> DensityMatrix:
    rng = rng_from(seed)
    da, db = _dims(dims)
    a = random_density((da,), seed=rng)
    b = random_density((db,), seed=rng)
    return DensityMatrix(qmath.kron(a.matrix, b.matrix), (da, db))


def random_schmidt_rank_state(dims, rank: int, seed=None, support: Sequence[int] | None = None) -> PureState:
    """Pure state of Schmidt rank ``rank`` whose A-support is spanned by ``support``.

    With ``support=None`` the A-support is a Haar-random ``rank``-dim subspace.
    """
    da, db = _dims(dims)
    rng = rng_from(seed)
    if support is None:
        a = qmath.random_unitary(da, rng)[:, :rank]
    else:
        if len(support) != rank:
            raise ValueError("support must list exactly `rank` basis indices")
        a = np.eye(da, dtype=complex)[:, list(support)] @ qmath.random_unitary(rank, rng)
    b = qmath.random_unitary(db, rng)[:, :rank]
    lam = rng.dirichlet(np.ones(rank))
    x = (a * np.sqrt(lam)) @ b.T
    return PureState.from_vector(x.reshape(-1), (da, db))


# --- JSON records -----------------------------------------------------------

def _complex_record(arr: np.ndarray, dims) -> dict:
    flat = np.asarray(arr, dtype=complex).reshape(-1)
    return {"dims": list(dims), "re": flat.real.tolist(), "im": flat.imag.tolist()}


def _complex_from_record(rec: dict) -> np.ndarray:
    re = np.asarray(rec["re"], dtype=float)
    im = np.asarray(rec.get("im", [0.0] * len(re)), dtype=float)
    if re.shape != im.shape:
        raise ValueError("re and im parts differ in length")
    return re + 1j * im


def state_to_record(state) -> dict:
    if isinstance(state, PureState):
        return _complex_record(state.amplitudes, state.dims)
    if isinstance(state, DensityMatrix):
        return _complex_record(state.matrix, state.dims)
    raise TypeError(f"cannot serialize {type(state).__name__}")


def state_from_record(rec: dict) -> PureState | DensityMatrix:
    """Vectors become PureState; square matrices of size prod(dims)^2 become DensityMatrix."""
    data = _complex_from_record(rec)
    dims = _dims(rec["dims"])
    d = int(np.prod(dims))
    if data.size == d:
        return PureState(data, dims if len(dims) == 2 else (dims[0], 1))
    if data.size == d * d:
        return DensityMatrix(data.reshape(d, d), dims)
    raise DimensionError(f"record of length {data.size} does not fit dims {dims}")


def matrix_to_record(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"shape": list(m.shape), "re": m.real.reshape(-1).tolist(), "im": m.imag.reshape(-1).tolist()}


def matrix_from_record(rec: dict) -> np.ndarray:
    data = _complex_from_record(rec)
    shape = tuple(int(x) for x in rec["shape"])
    return qmath.as_matrix(data.reshape(shape))
