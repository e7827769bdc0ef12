"""Linear repeater chains with m parallel depolarizing uses per link.

The sweep engine tracks a single Werner fidelity per pair. A full density-matrix
engine runs the same protocol on tiny instances to validate the scalar recursions.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qmath
from .channels import apply_on_A, depolarizing, parallel
from .measures import min_parallel_channels
from .states import DensityMatrix, phi_plus

STRATEGIES = ("none", "distill_swap")
SCHEDULES = ("binary_tree",)


@dataclass(frozen=True)
class WernerLink:
    """Werner pair F |phi+><phi+| + (1 - F)(I - |phi+><phi+|)/3."""

    fidelity: float

    def __post_init__(self):
        f = float(self.fidelity)
        if not 0.25 - 1e-12 <= f <= 1 + 1e-12:
            raise ValueError(f"Werner fidelity must lie in [1/4, 1], got {f}")
        object.__setattr__(self, "fidelity", min(max(f, 0.25), 1.0))

    @property
    def entangled(self) -> bool:
        return self.fidelity > 0.5

    def density(self) -> np.ndarray:
        return werner_matrix(self.fidelity)


def werner_matrix(f: float) -> np.ndarray:
    phi = phi_plus().density().matrix
    return f * phi + (1 - f) * (np.eye(4) - phi) / 3


@dataclass
class ScalingSweepConfig:
    p: float
    n_values: list[int]
    m_values: list[int]
    strategy: str = "distill_swap"
    schedule: str = "binary_tree"
    seed: int = 0
    beta: float = 0.5

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        for name in ("n_values", "m_values"):
            vals = list(getattr(self, name))
            if not vals or any(v < 1 for v in vals) or vals != sorted(set(vals)):
                raise ValueError(f"{name} must be a nonempty strictly ascending list of positive integers")
            setattr(self, name, [int(v) for v in vals])
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")


# --- scalar engine -----------------------------------------------------------

def link_fidelity(p: float) -> WernerLink:
    """Bell pair after one qubit depolarizing use: F = 1 - 3p/4."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    return WernerLink(1 - 0.75 * p)


def distill_round(a: WernerLink, b: WernerLink) -> tuple[WernerLink, float]:
    """One recurrence round on two Werner pairs; returns (output, success probability)."""
    f1, f2 = a.fidelity, b.fidelity
    g1, g2 = 1 - f1, 1 - f2
    prob = f1 * f2 + f1 * g2 / 3 + f2 * g1 / 3 + 5 * g1 * g2 / 9
    return WernerLink((f1 * f2 + g1 * g2 / 9) / prob), prob


def swap(a: WernerLink, b: WernerLink) -> WernerLink:
    f1, f2 = a.fidelity, b.fidelity
    return WernerLink(f1 * f2 + (1 - f1) * (1 - f2) / 3)


def pairs_used(m: int) -> int:
    """Largest power of two not above m; a binary tree consumes exactly that many pairs."""
    if m < 1:
        raise ValueError("m must be positive")
    return 1 << (m.bit_length() - 1)


def distill_tree(link: WernerLink, m: int) -> tuple[WernerLink, list[float]]:
    """Binary tree on m identical pairs; returns the survivor and per-round success probabilities.

    When m is not a power of two the tree runs floor(log2 m) rounds and the
    leftover pairs are discarded.
    """
    rounds = pairs_used(m).bit_length() - 1
    probs = []
    for _ in range(rounds):
        link, prob = distill_round(link, link)
        probs.append(prob)
    return link, probs


def swap_chain(links: list[WernerLink]) -> WernerLink:
    out = links[0]
    for nxt in links[1:]:
        out = swap(out, nxt)
    return out


def _swap_power(f: float, n: int) -> float:
    # n identical Werner links swapped together: the singlet weight (4F-1)/3 multiplies.
    w = (4 * f - 1) / 3
    return 0.25 + 0.75 * w**n


def endpoint(p: float, n: int, m: int, strategy: str) -> dict:
    raw = link_fidelity(p)
    if strategy == "none":
        per_link, probs, used = raw, [], 1
    else:
        per_link, probs = distill_tree(raw, m)
        used = pairs_used(m)
    f_end = swap_chain([per_link] * n).fidelity
    return {
        "link_fidelity": per_link.fidelity,
        "endpoint_fidelity": f_end,
        "survives": f_end > 0.5,
        "distill_success_probs": probs,
        "pairs_used": used,
        "pairs_discarded": m - used,
    }


def bound_curve(config: ScalingSweepConfig) -> dict[int, float]:
    """Lower-bound curve ln n / gamma + ln(1/(2 beta)) / gamma for each swept n."""
    return {n: min_parallel_channels(n, config.p, k=2, beta=config.beta) for n in config.n_values}


@dataclass
class ScalingResult:
    config: ScalingSweepConfig
    rows: list[dict]
    m_min: dict[int, int | None]
    c0: float | None
    nondecreasing: bool
    offsets: dict[int, float] = field(default_factory=dict)

    CSV_COLUMNS = ("n", "m", "p", "endpoint_fidelity", "survives", "bound_value")

    def to_dict(self) -> dict:
        return {
            "p": self.config.p,
            "strategy": self.config.strategy,
            "schedule": self.config.schedule,
            "rows": self.rows,
            "m_min": {str(n): m for n, m in self.m_min.items()},
            "offsets": {str(n): v for n, v in self.offsets.items()},
            "c0": self.c0,
            "m_min_nondecreasing": self.nondecreasing,
        }

    def to_csv(self) -> str:
        from .chain import format_number

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([format_number(row[c]) for c in self.CSV_COLUMNS])
        return buf.getvalue()


def simulate_scaling(config: ScalingSweepConfig) -> ScalingResult:
    """Sweep the (n, m) grid with the scalar engine.

    ``m_min[n]`` is the smallest swept m whose endpoint survives (None if none
    does). ``c0`` is the minimum over surviving n of m_min(n) - ln n / gamma.
    """
    gamma = -math.log(config.p)
    bounds = bound_curve(config)
    rows, m_min = [], {}
    for n in config.n_values:
        m_min[n] = None
        for m in config.m_values:
            rec = endpoint(config.p, n, m, config.strategy)
            rows.append({"n": n, "m": m, "p": config.p, "bound_value": bounds[n], **rec})
            if rec["survives"] and m_min[n] is None:
                m_min[n] = m
    inf = math.inf
    seq = [inf if m_min[n] is None else m_min[n] for n in config.n_values]
    nondecreasing = all(a <= b for a, b in zip(seq, seq[1:]))
    offsets = {n: m_min[n] - math.log(n) / gamma for n in config.n_values if m_min[n] is not None}
    c0 = min(offsets.values()) if offsets else None
    return ScalingResult(config, rows, m_min, c0, nondecreasing, offsets)


# --- full density-matrix engine ------------------------------------------------

@lru_cache(maxsize=1)
def clifford_group() -> tuple[np.ndarray, ...]:
    """The 24 single-qubit Cliffords modulo phase, generated from H and S."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    s = np.diag([1, 1j])

    def canon(u):
        idx = np.flatnonzero(np.abs(u.reshape(-1)) > 1e-9)[0]
        v = u * (abs(u.flat[idx]) / u.flat[idx])
        return tuple(np.round(v.reshape(-1), 8))

    group = {canon(np.eye(2)): np.eye(2, dtype=complex)}
    frontier = list(group.values())
    while frontier:
        nxt = []
        for u in frontier:
            for g in (h, s):
                w = g @ u
                key = canon(w)
                if key not in group:
                    group[key] = w
                    nxt.append(w)
        frontier = nxt
    return tuple(group.values())


def werner_twirl(rho: np.ndarray) -> np.ndarray:
    """Average of (U x U*) rho (U x U*)^dagger over the Clifford group."""
    ops = np.stack([np.kron(u, u.conj()) for u in clifford_group()])
    return np.einsum("gab,bc,gdc->ad", ops, rho, ops.conj()) / len(ops)


def _fid_phi(rho: np.ndarray) -> float:
    phi = phi_plus().amplitudes
    return float(np.real(phi.conj() @ rho @ phi))


def _cnot(n_qubits: int, control: int, target: int) -> np.ndarray:
    dim = 2**n_qubits
    u = np.zeros((dim, dim))
    for i in range(dim):
        bits = [(i >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits)]
        if bits[control]:
            bits[target] ^= 1
        j = sum(b << (n_qubits - 1 - q) for q, b in enumerate(bits))
        u[j, i] = 1
    return u


def _reorder(rho: np.ndarray, perm: list[int]) -> np.ndarray:
    return qmath.permute_subsystems(rho, [2] * len(perm), perm)


def raw_pairs_full(p: float, m: int) -> np.ndarray:
    """m Bell pairs sent through m parallel depolarizing uses, ordered (A1, B1, A2, B2, ...)."""
    if m > 2:
        raise ValueError("full-matrix validation is limited to m <= 2")
    ch = parallel(depolarizing(2, p), m)
    bell = qmath.kron_all([phi_plus().density().matrix] * m)
    # kron of pairs is ordered A1 B1 A2 B2; move A's to the front for the channel.
    perm = [2 * i for i in range(m)] + [2 * i + 1 for i in range(m)]
    ab = _reorder(bell, perm)
    out = apply_on_A(ch, ab, (2**m, 2**m))
    inv = list(np.argsort(perm))
    return _reorder(out, inv)


def distill_full(rho1: np.ndarray, rho2: np.ndarray) -> tuple[np.ndarray, float]:
    """Twirl both inputs, bilateral CNOT (pair 1 controls), keep if the target parities agree."""
    big = np.kron(werner_twirl(rho1), werner_twirl(rho2))  # A1 B1 A2 B2
    u = _cnot(4, 0, 2) @ _cnot(4, 1, 3)
    big = u @ big @ u.T
    t = big.reshape([2] * 8)
    kept = sum(t[:, :, a, a, :, :, a, a] for a in (0, 1)).reshape(4, 4)
    prob = float(np.trace(kept).real)
    return werner_twirl(kept / prob), prob


def swap_full(rho1: np.ndarray, rho2: np.ndarray) -> np.ndarray:
    """Bell measurement on the middle qubits of (A, B1)(B2, C) with Pauli correction on C."""
    big = np.kron(rho1, rho2).reshape([2] * 8)  # A B1 B2 C
    phi = phi_plus().amplitudes.reshape(2, 2)
    out = np.zeros((4, 4), dtype=complex)
    for pauli in qmath.PAULIS:
        # Bell vector (1 x sigma)|phi+> on (B1, B2); correction sigma^T on C.
        bell = phi @ pauli.T
        proj = np.einsum("abcdefgh,bc,fg->adeh", big, bell.conj(), bell)
        corr = np.kron(np.eye(2), pauli.T)
        out += corr @ proj.reshape(4, 4) @ corr.conj().T
    return werner_twirl(out)


def full_matrix_validation(p: float, m: int, n: int, strategy: str = "distill_swap") -> dict:
    """Run the protocol with explicit density matrices and compare with the scalar engine."""
    if m > 2 or n > 3:
        raise ValueError("full-matrix validation is limited to m <= 2 and n <= 3")
    pairs = raw_pairs_full(p, m if strategy == "distill_swap" else 1)
    if strategy == "distill_swap" and m == 2:
        r = qmath.partial_trace(pairs, (4, 4), keep="A")
        r2 = qmath.partial_trace(pairs, (4, 4), keep="B")
        link, prob = distill_full(r, r2)
        probs = [prob]
    else:
        link = werner_twirl(pairs)
        probs = []
    chain_state = link
    stage = [_fid_phi(link)]
    for _ in range(n - 1):
        chain_state = swap_full(chain_state, link)
        stage.append(_fid_phi(chain_state))
    DensityMatrix(chain_state, (2, 2))
    scalar = endpoint(p, n, m, strategy)
    scalar_link = scalar["link_fidelity"]
    scalar_stages = [_swap_power(scalar_link, j) for j in range(1, n + 1)]
    disc = max(abs(a - b) for a, b in zip(stage, scalar_stages))
    prob_disc = max((abs(a - b) for a, b in zip(probs, scalar["distill_success_probs"])), default=0.0)
    return {
        "p": p,
        "m": m,
        "n": n,
        "strategy": strategy,
        "full_endpoint_fidelity": stage[-1],
        "scalar_endpoint_fidelity": scalar["endpoint_fidelity"],
        "max_fidelity_discrepancy": disc,
        "max_success_prob_discrepancy": prob_disc,
    }
