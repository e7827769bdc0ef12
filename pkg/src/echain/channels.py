"""Quantum channels in Kraus form, Choi states and the named channel families."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import qmath
from .config import DimensionError, tol
from .states import (
    DensityMatrix,
    as_array,
    matrix_from_record,
    matrix_to_record,
    max_entangled,
    rng_from,
)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """A completely positive map given by Kraus operators K_i of shape (d_out, d_in).

    Operators with norm below ``tol().kraus_drop`` are discarded on construction.
    ``trace_preserving=False`` marks a trace-nonincreasing operation.
    """

    kraus: tuple
    d_in: int
    d_out: int
    trace_preserving: bool = True

    def __post_init__(self):
        t = tol()
        ops = [qmath.as_matrix(k) for k in self.kraus]
        for k in ops:
            if k.shape != (self.d_out, self.d_in):
                raise DimensionError(f"Kraus operator of shape {k.shape}, expected {(self.d_out, self.d_in)}")
        ops = [k for k in ops if np.linalg.norm(k) >= t.kraus_drop]
        if not ops:
            raise ValueError("channel has no non-negligible Kraus operators")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", tuple(ops))
        gram = sum(k.conj().T @ k for k in ops)
        eye = np.eye(self.d_in)
        if self.trace_preserving:
            err = np.max(np.abs(gram - eye))
            if err > t.hermitian:
                raise ValueError(f"Kraus operators are not trace preserving (error {err:.3e})")
        else:
            top = np.linalg.eigvalsh(qmath.symmetrize(gram))[-1]
            if top > 1 + t.hermitian:
                raise ValueError(f"Kraus operators are trace increasing (max eigenvalue {top!r})")

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)

    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus)


def _apply_kraus(kraus: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.einsum("kab,bc,kdc->ad", kraus, m, kraus.conj())


def apply(ch: QuantumChannel, rho):
    """Sum_i K_i rho K_i^dagger; returns the same kind of object it was given."""
    m = as_array(rho)
    if m.shape != (ch.d_in, ch.d_in):
        raise DimensionError(f"state dimension {m.shape[0]} does not match channel input {ch.d_in}")
    out = _apply_kraus(ch.stacked(), m)
    if isinstance(rho, DensityMatrix) and ch.trace_preserving:
        return DensityMatrix(out, (ch.d_out,))
    return out


def apply_on_A(ch: QuantumChannel, rho, dims=None):
    """(channel x identity) acting on the first factor of a bipartite state."""
    m = as_array(rho)
    if dims is None:
        if not isinstance(rho, DensityMatrix) or len(rho.dims) != 2:
            raise DimensionError("pass dims for raw arrays")
        dims = rho.dims
    da, db = dims
    if da != ch.d_in or m.shape != (da * db, da * db):
        raise DimensionError(f"state dims {dims} incompatible with channel input {ch.d_in}")
    t = m.reshape(da, db, da, db)
    k = ch.stacked()
    out = np.einsum("kai,ijlm,kbl->ajbm", k, t, k.conj()).reshape(ch.d_out * db, ch.d_out * db)
    if isinstance(rho, DensityMatrix) and ch.trace_preserving:
        return DensityMatrix(out, (ch.d_out, db))
    return out


def choi(ch: QuantumChannel) -> DensityMatrix:
    """Trace-one Choi state (channel x id)(phi+), dims (d_out, d_in)."""
    if ch.d_in != ch.d_out:
        raise DimensionError("Choi state is defined here for square channels only")
    if not ch.trace_preserving:
        raise ValueError("Choi state requires a trace-preserving channel")
    phi = max_entangled(ch.d_in).density()
    return apply_on_A(ch, phi)


def kraus_from_choi(gamma) -> QuantumChannel:
    """Canonical Kraus operators from the eigendecomposition of d * Gamma."""
    m = as_array(gamma)
    if isinstance(gamma, DensityMatrix) and len(gamma.dims) == 2:
        d_out, d_in = gamma.dims
    else:
        d_out = d_in = int(round(np.sqrt(m.shape[0])))
        if d_in * d_in != m.shape[0]:
            raise DimensionError("cannot infer Choi dims")
    w, v = qmath.hermitian_eigensystem(d_in * m)
    w = qmath.clip_spectrum(w)
    ops = [np.sqrt(lam) * v[:, i].reshape(d_out, d_in) for i, lam in enumerate(w) if lam > tol().clip]
    return QuantumChannel(tuple(ops), d_in, d_out)


def compose(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """second o first, with Kraus set {K_j L_i}."""
    if first.d_out != second.d_in:
        raise DimensionError("output of first channel does not match input of second")
    ops = tuple(k @ l for k in second.kraus for l in first.kraus)
    return QuantumChannel(ops, first.d_in, second.d_out, first.trace_preserving and second.trace_preserving)


def parallel(ch: QuantumChannel, m: int) -> QuantumChannel:
    """m independent copies, Kraus set = all m-fold tensor products."""
    if m < 1:
        raise ValueError("m must be at least 1")
    count = ch.n_kraus**m
    if count > tol().parallel_kraus_limit:
        raise ValueError(f"{count} Kraus products exceed the limit {tol().parallel_kraus_limit}")
    ops = tuple(qmath.kron_all(combo) for combo in itertools.product(ch.kraus, repeat=m))
    return QuantumChannel(ops, ch.d_in**m, ch.d_out**m, ch.trace_preserving)


def tensor(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    ops = tuple(qmath.kron(x, y) for x in a.kraus for y in b.kraus)
    return QuantumChannel(ops, a.d_in * b.d_in, a.d_out * b.d_out, a.trace_preserving and b.trace_preserving)


# --- named families ----------------------------------------------------------

def _check_unit(name: str, x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return x


def identity(d: int = 2) -> QuantumChannel:
    return QuantumChannel((np.eye(d, dtype=complex),), d, d)


def unitary_channel(u) -> QuantumChannel:
    u = qmath.as_matrix(u)
    return QuantumChannel((u,), u.shape[1], u.shape[0])


def depolarizing(d: int, p: float) -> QuantumChannel:
    """(1-p) rho + p I/d with Kraus set {sqrt(1-p) I} u {sqrt(p/d) |a><b|}."""
    p = _check_unit("p", p)
    ops = [np.sqrt(1 - p) * np.eye(d, dtype=complex)]
    for a in range(d):
        for b in range(d):
            op = np.zeros((d, d), dtype=complex)
            op[a, b] = np.sqrt(p / d)
            ops.append(op)
    return QuantumChannel(tuple(ops), d, d)


def amplitude_damping(gamma: float) -> QuantumChannel:
    g = _check_unit("gamma", gamma)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex)
    return QuantumChannel((k0, k1), 2, 2)


def dephasing(p: float) -> QuantumChannel:
    """Phase flip with probability p/2: off-diagonals shrink by (1 - p); p = 1 fully dephases."""
    p = _check_unit("p", p)
    return QuantumChannel((np.sqrt(1 - p / 2) * np.eye(2, dtype=complex), np.sqrt(p / 2) * qmath.SIGMA_Z), 2, 2)


def block_channel(inner: QuantumChannel, protected: int) -> QuantumChannel:
    """Identity on the first ``protected`` basis states, ``inner`` on the rest.

    ``inner`` must have canonical depolarizing-like structure whose first Kraus
    operator is proportional to the identity; that operator is extended by the
    identity on the protected block and every other one by zero, so the
    protected block is exactly correctable.
    """
    d = protected + inner.d_in
    ops = []
    for i, k in enumerate(inner.kraus):
        big = np.zeros((d, d), dtype=complex)
        big[protected:, protected:] = k
        if i == 0:
            big[:protected, :protected] = np.eye(protected)
        ops.append(big)
    return QuantumChannel(tuple(ops), d, d)


def random_channel(d: int, n_kraus: int, seed=None) -> QuantumChannel:
    """Random CPTP map: Haar unitary on R x A restricted to |0>_R, Kraus K_r = <r|U|0>."""
    rng = rng_from(seed)
    u = qmath.random_unitary(n_kraus * d, rng)
    v = u[:, :d]
    ops = tuple(v[r * d:(r + 1) * d, :] for r in range(n_kraus))
    return QuantumChannel(ops, d, d)


NAMED = {
    "identity": lambda d=2, **_: identity(d),
    "depolarizing": lambda d=2, p=0.0, **_: depolarizing(d, p),
    "amplitude_damping": lambda gamma=0.0, **_: amplitude_damping(gamma),
    "dephasing": lambda p=0.0, **_: dephasing(p),
}


def named_channel(name: str, **params) -> QuantumChannel:
    try:
        factory = NAMED[name]
    except KeyError:
        raise ValueError(f"unknown channel {name!r}; known: {sorted(NAMED)}") from None
    return factory(**{k: v for k, v in params.items() if v is not None})


def stinespring(ch: QuantumChannel) -> tuple[np.ndarray, int]:
    """Unitary U on R x A with Tr_R[U (|0><0| x rho) U^dagger] = channel(rho)."""
    if not ch.trace_preserving:
        raise ValueError("Stinespring dilation requires a trace-preserving channel")
    if ch.d_in != ch.d_out:
        raise DimensionError("dilation implemented for square channels")
    r = ch.n_kraus
    v = np.concatenate(ch.kraus, axis=0)
    if r == 1:
        return v.copy(), 1
    complement = scipy.linalg.null_space(v.conj().T)
    return np.concatenate([v, complement], axis=1), r


def apply_dilation(u: np.ndarray, env_dim: int, rho) -> np.ndarray:
    m = as_array(rho)
    d = m.shape[0]
    env0 = np.zeros((env_dim, env_dim), dtype=complex)
    env0[0, 0] = 1
    big = u @ np.kron(env0, m) @ u.conj().T
    return qmath.partial_trace(big, (env_dim, d), keep="B")


# --- JSON records -----------------------------------------------------------

def channel_to_record(ch: QuantumChannel) -> dict:
    return {
        "d_in": ch.d_in,
        "d_out": ch.d_out,
        "kraus": [matrix_to_record(k) for k in ch.kraus],
        "trace_preserving": ch.trace_preserving,
    }


def channel_from_record(rec: dict) -> QuantumChannel:
    if "name" in rec:
        params = {k: v for k, v in rec.items() if k != "name"}
        return named_channel(rec["name"], **params)
    ops = tuple(matrix_from_record(k) for k in rec["kraus"])
    return QuantumChannel(ops, int(rec["d_in"]), int(rec["d_out"]), bool(rec.get("trace_preserving", True)))
