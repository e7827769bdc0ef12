"""Entanglement quantifiers and the closed-form bounds they feed.

Logarithms are base 2 throughout. Mixed-state entanglement of formation beyond
two qubits and the distance to the separable set are only available as
certified one-sided bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.optimize

from . import qmath
from .channels import QuantumChannel
from .config import DimensionError, tol
from .optim import minimize_stiefel
from .states import (
    DensityMatrix,
    PureState,
    as_array,
    dims_of,
    rng_from,
    schmidt,
    schmidt_coefficients,
    schmidt_rank,
    state_to_record,
)

_YY = np.kron(qmath.SIGMA_Y, qmath.SIGMA_Y)
_LN2 = math.log(2.0)


@dataclass
class MeasureResult:
    name: str
    value: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "metadata": _jsonable(self.metadata)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (PureState, DensityMatrix)):
        return state_to_record(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# --- two-qubit concurrence ----------------------------------------------------

def _two_qubit(rho) -> np.ndarray:
    m = as_array(rho)
    if isinstance(rho, (DensityMatrix, PureState)) and tuple(rho.dims) != (2, 2):
        raise DimensionError(f"expected a two-qubit state, got dims {rho.dims}")
    if m.shape != (4, 4):
        raise DimensionError(f"expected a 4x4 matrix, got {m.shape}")
    return m


def spin_flip(rho) -> np.ndarray:
    """(sigma_y x sigma_y) rho* (sigma_y x sigma_y)."""
    m = _two_qubit(rho)
    return _YY @ m.conj() @ _YY


def _psd_sqrt_batch(mats: np.ndarray) -> np.ndarray:
    h = (mats + qmath.dag(mats)) / 2
    w, v = np.linalg.eigh(h)
    if w.size and w.min() < -tol().negative:
        raise qmath.NotPositiveError(f"eigenvalue {w.min():.3e} below tolerance")
    w = np.sqrt(np.clip(w, 0, None))
    return (v * w[..., None, :]) @ qmath.dag(v)


def concurrence_many(mats: np.ndarray) -> np.ndarray:
    """Wootters concurrence for a stack of two-qubit density matrices, shape (..., 4, 4).

    The xi_i are the singular values of sqrt(rho) sqrt(rho~), equivalently the
    square roots of the eigenvalues of rho rho~.
    """
    mats = np.asarray(mats, dtype=complex)
    flipped = _YY @ mats.conj() @ _YY
    xi = np.linalg.svd(_psd_sqrt_batch(mats) @ _psd_sqrt_batch(flipped), compute_uv=False)
    c = xi[..., 0] - xi[..., 1] - xi[..., 2] - xi[..., 3]
    return np.clip(c, 0.0, None)


def concurrence(rho) -> float:
    m = qmath.symmetrize(_two_qubit(rho))
    return float(concurrence_many(m[None])[0])


def binary_entropy(x: float) -> float:
    return qmath.shannon_entropy([x, 1 - x])


def eof_two_qubit(rho) -> float:
    """Closed form h(1/2 + sqrt(1 - C^2)/2)."""
    c = concurrence(rho)
    return binary_entropy(0.5 + 0.5 * math.sqrt(max(0.0, 1 - c * c)))


# --- pure-state quantities -----------------------------------------------------

def eof_pure(psi: PureState) -> float:
    """Entanglement entropy -sum lambda_i log2 lambda_i."""
    return qmath.shannon_entropy(schmidt_coefficients(psi))


def _check_k(psi_dims, k: int, low: int) -> None:
    if k < low or k > min(psi_dims):
        raise ValueError(f"k={k} outside [{low}, {min(psi_dims)}] for dims {tuple(psi_dims)}")


def _gk_from_weights(weights: np.ndarray, k: int) -> np.ndarray:
    """k * (product of the k largest weights)^(1/k) along the last axis (weights descending)."""
    top = weights[..., :k]
    if top.shape[-1] < k:
        return np.zeros(top.shape[:-1])
    top = np.clip(top, 0, None)
    with np.errstate(divide="ignore"):
        logs = np.log(top)
    return k * np.exp(np.mean(logs, axis=-1))


def gk_concurrence(psi: PureState, k: int) -> float:
    """G_k = k (prod of the k largest Schmidt weights)^(1/k); zero below Schmidt rank k.

    For states of Schmidt rank above k this evaluates the top-k product, which
    agrees with the rank-k definition wherever that one applies.
    """
    _check_k(psi.dims, k, 2)
    if schmidt_rank(psi) < k:
        return 0.0
    return float(_gk_from_weights(schmidt_coefficients(psi), k))


def gk_unnormalized(vector, k: int, dims=None) -> float:
    """G_k of an unnormalized bipartite vector; homogeneous of degree 2 in the vector."""
    if isinstance(vector, PureState):
        dims, x = vector.dims, vector.coefficients
    else:
        if dims is None:
            raise DimensionError("dims are required for raw vectors")
        x = np.asarray(vector, dtype=complex).reshape(tuple(dims))
    if k < 1 or k > min(x.shape):
        raise ValueError(f"k={k} outside [1, {min(x.shape)}]")
    s2 = np.linalg.svd(x, compute_uv=False) ** 2
    return float(_gk_from_weights(s2, k))


def gk_batch(coeffs: np.ndarray, k: int) -> np.ndarray:
    """G_k of a stack of unnormalized coefficient matrices, shape (n, dA, dB)."""
    s2 = np.linalg.svd(coeffs, compute_uv=False) ** 2
    return _gk_from_weights(s2, k)


def k_schmidt_fidelity_pure(psi: PureState, k: int) -> float:
    """Maximal fidelity with Schmidt-rank-k states: the sum of the k largest weights."""
    _check_k(psi.dims, k, 1)
    return float(min(1.0, np.sum(schmidt_coefficients(psi)[:k])))


def optimal_rank_k_state(psi: PureState, k: int) -> PureState:
    """The Schmidt-rank-k state attaining the k-Schmidt fidelity of ``psi``."""
    _check_k(psi.dims, k, 1)
    sd = schmidt(psi)
    lam = sd.coefficients[:k]
    amp = np.einsum("i,ai,bi->ab", np.sqrt(lam), sd.basis_a[:, :k], sd.basis_b[:, :k])
    return PureState.from_vector(amp.reshape(-1), psi.dims)


def _ensemble_matrix(ensemble) -> np.ndarray:
    return sum(p * qmath.projector(psi.amplitudes) for p, psi in ensemble)


def k_schmidt_fidelity_mixed_lower(rho, ensemble: Sequence[tuple[float, PureState]], k: int) -> float:
    """sum_i p_i F_k(psi_i): a lower bound on the mixed-state k-Schmidt fidelity."""
    m = as_array(rho)
    err = qmath.trace_norm(m - _ensemble_matrix(ensemble))
    if err > tol().ensemble_match:
        raise ValueError(f"ensemble does not reproduce the state (trace distance {err:.3e})")
    return float(sum(p * k_schmidt_fidelity_pure(psi, k) for p, psi in ensemble))


def k_schmidt_witness_state(ensemble: Sequence[tuple[float, PureState]], k: int) -> DensityMatrix:
    """sigma = sum_i q_i phi_i with q_i proportional to p_i F_k(psi_i), phi_i the optimal rank-k states."""
    weights = np.array([p * k_schmidt_fidelity_pure(psi, k) for p, psi in ensemble])
    q = weights / weights.sum()
    dims = ensemble[0][1].dims
    mat = sum(qi * qmath.projector(optimal_rank_k_state(psi, k).amplitudes) for qi, (_, psi) in zip(q, ensemble))
    return DensityMatrix(mat, dims)


# --- convex-roof upper bound on entanglement of formation --------------------

def _roof_terms(u: np.ndarray, a: np.ndarray):
    """Average entanglement and Wirtinger gradient for ensemble vectors X_j = sum_i U_ji A_i."""
    x = np.einsum("ji,iab->jab", u, a)
    s = x @ qmath.dag(x)
    mu, vec = np.linalg.eigh((s + qmath.dag(s)) / 2)
    mu = np.clip(mu, 0.0, None)
    p = mu.sum(axis=1)
    tiny = 1e-300
    f = float(-np.sum(mu * np.log(np.maximum(mu, tiny))) + np.sum(p * np.log(np.maximum(p, tiny)))) / _LN2
    log_s = (vec * np.log(np.maximum(mu, tiny))[:, None, :]) @ qmath.dag(vec)
    g_x = (np.log(np.maximum(p, tiny))[:, None, None] * x - log_s @ x) / _LN2
    g_u = np.einsum("iab,jab->ji", a.conj(), g_x)
    return f, g_u, x, p


def eof_convex_roof_upper(
    rho,
    ensemble_size: int | None = None,
    restarts: int = 20,
    seed=None,
    dims=None,
    maxiter: int = 400,
) -> MeasureResult:
    """Upper bound on E_f by minimizing the average entanglement over decompositions.

    Decompositions of rank-r ``rho`` into ``ensemble_size`` = N vectors are the
    N x r isometries U acting on the eigen-purification; each restart descends on
    that manifold from a Haar-random start. The metadata holds the best
    ensemble as (weight, PureState) pairs.
    """
    m = qmath.symmetrize(as_array(rho))
    dims = dims_of(rho, dims)
    w, v = qmath.hermitian_eigensystem(m)
    w = qmath.clip_spectrum(w)
    keep = w > tol().clip
    w, v = w[keep], v[:, keep]
    r = w.size
    if r == 1:
        psi = PureState.from_vector(v[:, 0], dims)
        return MeasureResult("eof_upper", eof_pure(psi), {"restarts": 0, "ensemble": [(1.0, psi)]})
    n = max(r, dims[0] * dims[1]) if ensemble_size is None else int(ensemble_size)
    if n < r:
        raise ValueError(f"ensemble_size {n} is below the rank {r}")
    a = (v * np.sqrt(w)).T.reshape(r, *dims)
    rng = rng_from(seed)

    def fun_grad(u):
        f, g, _, _ = _roof_terms(u, a)
        return f, g

    best = None
    for idx in range(max(1, restarts)):
        u0 = qmath.random_unitary(n, rng)[:, :r]
        res = minimize_stiefel(fun_grad, u0, maxiter=maxiter, gtol=1e-9)
        if best is None or (res.fun, idx) < (best[0].fun, best[1]):
            best = (res, idx)
    res = best[0]
    f, _, x, p = _roof_terms(res.x, a)
    ensemble = [
        (float(pj), PureState.from_vector(xj.reshape(-1), dims))
        for pj, xj in zip(p, x)
        if pj > 1e-14
    ]
    meta = {"restarts": restarts, "ensemble_size": n, "best_restart": best[1], "ensemble": ensemble}
    return MeasureResult("eof_upper", max(0.0, f), meta)


# --- separability witnesses and distance bounds --------------------------------

def _bipartite(rho, dims) -> tuple[np.ndarray, tuple[int, int]]:
    m = as_array(rho)
    d = dims_of(rho, dims)
    if len(d) != 2:
        raise DimensionError("bipartite state required")
    return m, d


def pt_trace_norm(rho, dims=None) -> float:
    m, d = _bipartite(rho, dims)
    return qmath.hermitian_trace_norm(qmath.partial_transpose(m, d, "B"))


def _pt_negative_mass(rho, dims=None) -> float:
    # for unit trace, ||X||_1 - 1 is twice the negative eigenvalue mass; summing
    # that mass directly gives an exact zero on PPT states
    m, d = _bipartite(rho, dims)
    ev = np.linalg.eigvalsh(qmath.partial_transpose(m, d, "B"))
    return float(-ev[ev < 0].sum())


def negativity(rho, dims=None) -> float:
    """(||rho^T_B||_1 - 1) / 2."""
    return _pt_negative_mass(rho, dims)


def sep_distance_lower(rho, dims=None) -> float:
    """Certified lower bound (||rho^T_B||_1 - 1)/d_B on the trace distance to separable states.

    For separable sigma, ||rho^T_B||_1 - 1 <= ||(rho - sigma)^T_B||_1 <= d_B ||rho - sigma||_1.
    """
    _, d = _bipartite(rho, dims)
    return 2 * _pt_negative_mass(rho, dims) / d[1]


@dataclass
class _ProductModel:
    da: int
    db: int
    terms: int

    def unpack(self, theta):
        t, da, db = self.terms, self.da, self.db
        i = 0
        xa = theta[i:i + 2 * t * da].reshape(2, t, da); i += 2 * t * da
        xb = theta[i:i + 2 * t * db].reshape(2, t, db); i += 2 * t * db
        z = theta[i:i + t]
        return xa[0] + 1j * xa[1], xb[0] + 1j * xb[1], z

    def pack(self, xa, xb, z):
        return np.concatenate([xa.real.ravel(), xa.imag.ravel(), xb.real.ravel(), xb.imag.ravel(), np.asarray(z, float)])

    def sigma(self, theta):
        xa, xb, z = self.unpack(theta)
        a = xa / np.linalg.norm(xa, axis=1, keepdims=True)
        b = xb / np.linalg.norm(xb, axis=1, keepdims=True)
        w = np.exp(z - z.max())
        w /= w.sum()
        prods = np.einsum("ji,jk->jik", a, b).reshape(self.terms, -1)
        return np.einsum("j,ja,jb->ab", w, prods, prods.conj()), (a, b, w, xa, xb)


def _smoothed_distance(model: _ProductModel, m: np.ndarray, eps: float):
    def fun(theta):
        sig, (a, b, w, xa, xb) = model.sigma(theta)
        lam, vec = np.linalg.eigh(m - sig)
        root = np.sqrt(lam**2 + eps**2)
        f = float(np.sum(root))
        s = (vec * (lam / root)) @ vec.conj().T
        s4 = s.reshape(model.da, model.db, model.da, model.db)
        # df = -tr(S dsigma)
        sa = np.einsum("jl,ilkm,jm->jik", b.conj(), s4, b)
        sb = np.einsum("ji,ilkm,jk->jlm", a.conj(), s4, a)
        g_w = -np.real(np.einsum("ji,jik,jk->j", a.conj(), sa, a))
        g_z = w * (g_w - np.dot(w, g_w))
        na = np.sum(np.abs(xa) ** 2, axis=1)
        nb = np.sum(np.abs(xb) ** 2, axis=1)
        qa = np.real(np.einsum("ji,jik,jk->j", xa.conj(), sa, xa)) / na
        qb = np.real(np.einsum("ji,jik,jk->j", xb.conj(), sb, xb)) / nb
        ga = -w[:, None] * (np.einsum("jik,jk->ji", sa, xa) - qa[:, None] * xa) / na[:, None]
        gb = -w[:, None] * (np.einsum("jik,jk->ji", sb, xb) - qb[:, None] * xb) / nb[:, None]
        grad = model.pack(2 * ga, 2 * gb, g_z)
        return f, grad
    return fun


def _init_marginal_products(m, dims, model, rng):
    da, db = dims
    ra = qmath.partial_trace(m, dims, "A")
    rb = qmath.partial_trace(m, dims, "B")
    wa, va = np.linalg.eigh(qmath.symmetrize(ra))
    wb, vb = np.linalg.eigh(qmath.symmetrize(rb))
    xa, xb, wts = [], [], []
    for i in range(da):
        for j in range(db):
            xa.append(va[:, i]); xb.append(vb[:, j]); wts.append(max(wa[i] * wb[j], 0.0))
    return _pad_init(np.array(xa), np.array(xb), np.array(wts), model, rng)


def _init_eigen_products(m, dims, model, rng):
    w, v = qmath.hermitian_eigensystem(m)
    xa, xb, wts = [], [], []
    for lam, vec in zip(w, v.T):
        if lam <= 0:
            continue
        u, s, vh = np.linalg.svd(vec.reshape(dims))
        xa.append(u[:, 0]); xb.append(vh[0].conj()); wts.append(lam)
    return _pad_init(np.array(xa), np.array(xb), np.array(wts), model, rng)


def _pad_init(xa, xb, wts, model, rng):
    t = model.terms
    xa, xb, wts = xa[:t], xb[:t], wts[:t]
    extra = t - len(wts)
    if extra > 0:
        xa = np.vstack([xa, rng.standard_normal((extra, model.da)) + 1j * rng.standard_normal((extra, model.da))])
        xb = np.vstack([xb, rng.standard_normal((extra, model.db)) + 1j * rng.standard_normal((extra, model.db))])
        wts = np.concatenate([wts, np.zeros(extra)])
    z = np.log(np.maximum(wts, 1e-12))
    return model.pack(xa.astype(complex), xb.astype(complex), z)


def _init_random(model, rng):
    t = model.terms
    xa = rng.standard_normal((t, model.da)) + 1j * rng.standard_normal((t, model.da))
    xb = rng.standard_normal((t, model.db)) + 1j * rng.standard_normal((t, model.db))
    return model.pack(xa, xb, rng.standard_normal(t))


def sep_distance_upper(
    rho,
    terms: int | None = None,
    restarts: int = 20,
    seed=None,
    dims=None,
    maxiter: int = 300,
) -> MeasureResult:
    """Trace distance from ``rho`` to an explicit separable state sum_j w_j a_j a_j^+ x b_j b_j^+.

    Any returned value is a valid upper bound on the distance to the separable
    set. The first two starts are the product of marginals and the best product
    approximations of the eigenvectors; the remaining ones are random. Each
    start minimizes a smoothed trace norm with a shrinking smoothing width.
    """
    m, d = _bipartite(rho, dims)
    m = qmath.symmetrize(m)
    terms = (d[0] * d[1]) ** 2 if terms is None else int(terms)
    if terms < 1:
        raise ValueError("terms must be positive")
    model = _ProductModel(d[0], d[1], terms)
    rng = rng_from(seed)
    best = None
    for idx in range(max(1, restarts)):
        if idx == 0:
            theta = _init_marginal_products(m, d, model, rng)
        elif idx == 1:
            theta = _init_eigen_products(m, d, model, rng)
        else:
            theta = _init_random(model, rng)
        value = qmath.hermitian_trace_norm(m - model.sigma(theta)[0])
        for eps in (1e-2, 1e-4, 1e-7):
            res = scipy.optimize.minimize(
                _smoothed_distance(model, m, eps), theta, jac=True, method="L-BFGS-B",
                options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15},
            )
            cand = qmath.hermitian_trace_norm(m - model.sigma(res.x)[0])
            if cand <= value:
                theta, value = res.x, cand
        if best is None or (value, idx) < (best[0], best[1]):
            best = (value, idx, theta)
    sig = model.sigma(best[2])[0]
    return MeasureResult(
        "sep_distance_upper", float(best[0]),
        {"terms": terms, "restarts": restarts, "best_restart": best[1], "sigma": DensityMatrix(sig, d)},
    )


# --- contraction factor and bound formulas -------------------------------------

def kappa_for_decomposition(ch: QuantumChannel, k: int) -> float:
    """sum_i G_k[(K_i x 1) phi_k+] for the channel's stored Kraus operators.

    phi_k+ is supported on the first k computational basis states of the input,
    so each term only sees the first k columns of K_i.
    """
    if k < 2 or k > ch.d_in:
        raise ValueError(f"k={k} outside [2, {ch.d_in}]")
    cols = ch.stacked()[:, :, :k] / math.sqrt(k)
    if ch.d_out < k:
        return 0.0
    return float(np.sum(gk_batch(cols, k)))


def theorem3_bound(kappa: float, n: float, dA: int) -> float:
    """4 kappa^(n / (2 (dA - 1))) (sqrt(dA) - 1): separability distance after n steps."""
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if n < 0 or dA < 2:
        raise ValueError("need n >= 0 and dA >= 2")
    return 4.0 * kappa ** (n / (2.0 * (dA - 1))) * (math.sqrt(dA) - 1.0)


def min_parallel_channels(n: float, p: float, k: int = 2, beta: float = 0.5) -> float:
    """ln n / gamma + ln(1 / (2 beta (k - 1))) / gamma with gamma = -ln p."""
    if n < 1 or not 0.0 < p < 1.0 or k < 2 or beta <= 0:
        raise ValueError("need n >= 1, p in (0, 1), k >= 2, beta > 0")
    gamma = -math.log(p)
    return math.log(n) / gamma + math.log(1.0 / (2.0 * beta * (k - 1))) / gamma


def measure_report(rho, dims=None) -> dict:
    """Cheap measures of a bipartite state, keyed by name."""
    m, d = _bipartite(rho, dims)
    out = {
        "negativity": negativity(m, d),
        "sep_lower": sep_distance_lower(m, d),
        "entropy_A": qmath.von_neumann_entropy(qmath.partial_trace(m, d, "A")),
    }
    if d == (2, 2):
        out["concurrence"] = concurrence(m)
        out["eof"] = eof_two_qubit(m)
    return out
