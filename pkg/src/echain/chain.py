"""Sequential channel uses interleaved with local filters.

One step of the chain applies the filter F_i first and then (channel x id):

    rho_n = (L x 1) o F_n o ... o (L x 1) o F_1 [rho_0]

Three evolutions are provided: exact density-matrix evolution for
deterministic filters, Monte Carlo sampling of post-selected SLOCC filters,
and an explicit pure-state ensemble used to track the G_k contraction.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qmath
from .channels import QuantumChannel, choi
from .config import DimensionError, tol
from .measures import (
    concurrence,
    concurrence_many,
    eof_two_qubit,
    gk_batch,
    kappa_for_decomposition,
    negativity,
    sep_distance_lower,
    theorem3_bound,
)
from .states import DensityMatrix, PureState, as_array, rng_from, schmidt_rank

FILTER_KINDS = ("none", "deterministic", "slocc")


class ChainError(RuntimeError):
    """A state left the valid set during evolution; the message names the step."""


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """Local filter with product Kraus operators M_l x N_l.

    ``accept`` lists the outcome indices that count as success; it is only
    meaningful for ``kind == "slocc"``.
    """

    kind: str = "none"
    kraus_pairs: tuple = ()
    accept: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"filter kind must be one of {FILTER_KINDS}, got {self.kind!r}")
        pairs = tuple((qmath.as_matrix(m), qmath.as_matrix(n)) for m, n in self.kraus_pairs)
        object.__setattr__(self, "kraus_pairs", pairs)
        object.__setattr__(self, "accept", frozenset(int(a) for a in self.accept))
        if self.kind == "none":
            if pairs:
                raise ValueError("a 'none' filter carries no Kraus pairs")
            return
        if not pairs:
            raise ValueError("filter needs at least one Kraus pair")
        shapes = {(m.shape, n.shape) for m, n in pairs}
        if len(shapes) != 1:
            raise DimensionError("all Kraus pairs must share shapes")
        gram = sum(np.kron(m.conj().T @ m, n.conj().T @ n) for m, n in pairs)
        t = tol()
        if self.kind == "deterministic":
            err = np.max(np.abs(gram - np.eye(gram.shape[0])))
            if err > t.hermitian:
                raise ValueError(f"deterministic filter is not trace preserving (error {err:.3e})")
        else:
            top = np.linalg.eigvalsh(qmath.symmetrize(gram))[-1]
            if top > 1 + t.hermitian:
                raise ValueError("SLOCC filter operators sum above the identity")
            if not self.accept:
                raise ValueError("SLOCC filter needs a nonempty accept set")
            if max(self.accept) >= len(pairs) or min(self.accept) < 0:
                raise ValueError("accept indices out of range")

    @property
    def dims(self) -> tuple[int, int] | None:
        if not self.kraus_pairs:
            return None
        m, n = self.kraus_pairs[0]
        return m.shape[1], n.shape[1]

    def operators(self) -> np.ndarray:
        return np.stack([np.kron(m, n) for m, n in self.kraus_pairs])


def no_filter() -> FilterSpec:
    return FilterSpec("none")


def local_unitary_filter(u, v) -> FilterSpec:
    return FilterSpec("deterministic", ((u, v),))


def pauli_twirl_filter() -> FilterSpec:
    """Correlated Pauli twirl (1/4) sum_i (s_i x s_i) rho (s_i x s_i): makes two-qubit states Bell diagonal."""
    return FilterSpec("deterministic", tuple((p / 2, p) for p in qmath.PAULIS))


def procrustean_filter(epsilon: float, dB: int = 2) -> FilterSpec:
    """Two-outcome filter on A: accept diag(epsilon, 1), reject diag(sqrt(1 - epsilon^2), 0)."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    keep = np.diag([epsilon, 1.0]).astype(complex)
    drop = np.diag([math.sqrt(1 - epsilon**2), 0.0]).astype(complex)
    eye = np.eye(dB, dtype=complex)
    return FilterSpec("slocc", ((keep, eye), (drop, eye)), frozenset({0}))


def bernoulli_filter(q: float, dims=(2, 2)) -> FilterSpec:
    """Accept with probability q regardless of the state."""
    ia, ib = np.eye(dims[0], dtype=complex), np.eye(dims[1], dtype=complex)
    return FilterSpec("slocc", ((math.sqrt(q) * ia, ib), (math.sqrt(1 - q) * ia, ib)), frozenset({0}))


def random_local_filter(dims=(2, 2), n_a: int = 2, n_b: int = 2, seed=None) -> FilterSpec:
    """Deterministic filter: independent random local instruments on A and on B."""
    rng = rng_from(seed)
    da, db = dims
    ua = qmath.random_unitary(n_a * da, rng)[:, :da]
    ub = qmath.random_unitary(n_b * db, rng)[:, :db]
    ms = [ua[i * da:(i + 1) * da] for i in range(n_a)]
    ns = [ub[j * db:(j + 1) * db] for j in range(n_b)]
    return FilterSpec("deterministic", tuple((m, n) for m in ms for n in ns))


@dataclass
class ChainConfig:
    channel: QuantumChannel
    n: int
    initial: DensityMatrix | PureState
    filters: FilterSpec | Sequence[FilterSpec] | None = None
    threshold_c: float = 0.5
    trajectories: int = 1000
    seed: int = 0
    policy: Callable[[int, tuple], FilterSpec] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 < self.threshold_c <= 1:
            raise ValueError("threshold_c must lie in (0, 1]")
        if self.trajectories < 1:
            raise ValueError("trajectories must be positive")
        if isinstance(self.filters, FilterSpec) or self.filters is None:
            pass
        elif len(self.filters) != self.n:
            raise ValueError(f"{len(self.filters)} filters given for n={self.n} steps")
        dims = self.dims
        if len(dims) != 2 or dims[0] != self.channel.d_in or self.channel.d_in != self.channel.d_out:
            raise DimensionError(f"initial dims {dims} incompatible with channel {self.channel.d_in}->{self.channel.d_out}")
        for spec in self._all_filters():
            if spec.dims is not None and spec.dims != tuple(dims):
                raise DimensionError(f"filter acts on {spec.dims}, state has dims {dims}")

    @property
    def dims(self) -> tuple[int, int]:
        return tuple(self.initial.dims)

    def _all_filters(self) -> list[FilterSpec]:
        if self.filters is None:
            return []
        if isinstance(self.filters, FilterSpec):
            return [self.filters]
        return list(self.filters)

    def filter_at(self, step: int) -> FilterSpec:
        """Filter used before the channel in step ``step`` (1-based)."""
        if self.filters is None:
            return no_filter()
        if isinstance(self.filters, FilterSpec):
            return self.filters
        return self.filters[step - 1]

    def initial_matrix(self) -> np.ndarray:
        return as_array(self.initial)


@dataclass
class ChainResult:
    per_step: list[dict]
    summary: dict = field(default_factory=dict)

    CSV_COLUMNS = ("step", "concurrence", "eof", "negativity", "sep_lower", "corollary1_bound", "theorem3_bound")

    def column(self, name: str) -> list:
        return [rec.get(name) for rec in self.per_step]

    def to_dict(self, include_states: bool = False) -> dict:
        rows = []
        for rec in self.per_step:
            row = {k: v for k, v in rec.items() if k != "state"}
            if include_states and rec.get("state") is not None:
                from .states import state_to_record
                row["state"] = state_to_record(rec["state"])
            rows.append(row)
        return {"per_step": rows, "summary": self.summary}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for rec in self.per_step:
            writer.writerow([format_number(rec.get(c)) for c in self.CSV_COLUMNS])
        return buf.getvalue()


def format_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# --- deterministic evolution ---------------------------------------------------

def _apply_filter(spec: FilterSpec, m: np.ndarray) -> np.ndarray:
    if spec.kind == "none":
        return m
    ops = spec.operators()
    return np.einsum("lab,bc,ldc->ad", ops, m, ops.conj())


def _apply_channel_A(ch: QuantumChannel, m: np.ndarray, dims) -> np.ndarray:
    da, db = dims
    k = ch.stacked()
    t = m.reshape(da, db, da, db)
    return np.einsum("kai,ijlm,kbl->ajbm", k, t, k.conj()).reshape(da * db, da * db)


def channel_kappas(ch: QuantumChannel) -> dict[int, float]:
    return {k: kappa_for_decomposition(ch, k) for k in range(2, ch.d_in + 1)}


def theorem3_constant(ch: QuantumChannel) -> tuple[float | None, dict[int, float]]:
    """Largest stored-decomposition kappa over k = 2..dA, or None when it is not in (0, 1)."""
    kap = channel_kappas(ch)
    if not kap:
        return None, kap
    top = max(kap.values())
    slack = tol().bound_slack
    return (top if slack < top < 1 - slack else None), kap


def _step_record(step: int, m: np.ndarray, dims, cgamma, kappa_max, keep_state: bool) -> dict:
    two_qubit = tuple(dims) == (2, 2)
    rec = {
        "step": step,
        "state": DensityMatrix(m, dims) if keep_state else None,
        "concurrence": concurrence(m) if two_qubit else None,
        "eof": eof_two_qubit(m) if two_qubit else None,
        "negativity": negativity(m, dims),
        "sep_lower": sep_distance_lower(m, dims),
        "corollary1_bound": cgamma**step if cgamma is not None else None,
        "theorem3_bound": theorem3_bound(kappa_max, step, dims[0]) if kappa_max is not None else None,
    }
    return rec


def _validated(m: np.ndarray, dims, step: int) -> np.ndarray:
    try:
        return DensityMatrix(m, dims).matrix
    except ValueError as exc:
        raise ChainError(f"step {step}: {exc}") from exc


def run_deterministic(config: ChainConfig, keep_states: bool = True) -> ChainResult:
    """Exact density-matrix evolution, recording measures at every step (step 0 is the input)."""
    dims = config.dims
    ch = config.channel
    for i in range(1, config.n + 1):
        if config.filter_at(i).kind == "slocc":
            raise ValueError("deterministic evolution does not accept SLOCC filters")
    cgamma = concurrence(choi(ch)) if ch.d_in == 2 else None
    kappa_max, kappas = theorem3_constant(ch)
    m = _validated(config.initial_matrix(), dims, 0)
    records = [_step_record(0, m, dims, cgamma, kappa_max, keep_states)]
    eof_drops = []
    for i in range(1, config.n + 1):
        spec = config.filter_at(i)
        filtered = _validated(_apply_filter(spec, m), dims, i)
        if tuple(dims) == (2, 2) and spec.kind != "none":
            eof_drops.append(eof_two_qubit(filtered) - eof_two_qubit(m))
        m = _validated(_apply_channel_A(ch, filtered, dims), dims, i)
        records.append(_step_record(i, m, dims, cgamma, kappa_max, keep_states))
    summary = {
        "n": config.n,
        "dims": list(dims),
        "choi_concurrence": cgamma,
        "kappas": {str(k): v for k, v in kappas.items()},
        "theorem3_kappa": kappa_max,
        "max_filter_eof_increase": max(eof_drops) if eof_drops else None,
    }
    return ChainResult(records, summary)


def verify_corollary1(config: ChainConfig) -> dict:
    """Check C(rho_step) <= C(Gamma)^step at every recorded step."""
    if config.dims != (2, 2):
        raise DimensionError("the concurrence bound needs a qubit channel and two-qubit states")
    result = run_deterministic(config, keep_states=True)
    slack = tol().bound_slack
    cs = result.column("concurrence")
    bounds = result.column("corollary1_bound")
    violations = [
        {"step": s, "concurrence": c, "bound": b}
        for s, (c, b) in enumerate(zip(cs, bounds))
        if c > b + slack
    ]
    return {
        "per_step_concurrence": cs,
        "per_step_bound": bounds,
        "violations": violations,
        "choi_concurrence": result.summary["choi_concurrence"],
        "states": result.column("state"),
    }


# --- Monte Carlo post-selection ------------------------------------------------

@dataclass
class MonteCarloResult:
    empirical_prob: float
    bound: float
    sigma: float
    success_prob: float
    trajectories: int
    n: int
    threshold_c: float
    choi_concurrence: float
    seed: int
    final_concurrence: np.ndarray = field(repr=False, default=None)
    success: np.ndarray = field(repr=False, default=None)

    @property
    def consistent(self) -> bool:
        return self.empirical_prob <= self.bound + 3 * self.sigma

    def to_dict(self) -> dict:
        above = int(np.count_nonzero(self.success & (self.final_concurrence >= self.threshold_c)))
        mean_c = float(self.final_concurrence[self.success].mean()) if self.success.any() else None
        return {
            "empirical_prob": self.empirical_prob,
            "bound": self.bound,
            "sigma": self.sigma,
            "consistent": self.consistent,
            "success_prob": self.success_prob,
            "trajectories": self.trajectories,
            "n": self.n,
            "threshold_c": self.threshold_c,
            "choi_concurrence": self.choi_concurrence,
            "seed": self.seed,
            "successful_trajectories": int(np.count_nonzero(self.success)),
            "trajectories_above_threshold": above,
            "mean_success_concurrence": mean_c,
        }


def trajectory_uniforms(seed: int, trajectories: int, n: int) -> np.ndarray:
    """Uniform draws u[t, step]; row t depends only on (seed, t), not on the batch size."""
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.random((trajectories, n))


def _sample_filter(spec: FilterSpec, states: np.ndarray, u: np.ndarray):
    """Apply one filter to a batch; returns (new states, outcome index, accepted mask).

    Outcome -1 stands for the missing probability of a trace-decreasing instrument.
    """
    ops = spec.operators()
    branches = np.einsum("lab,tbc,ldc->tlad", ops, states, ops.conj())
    probs = np.clip(np.einsum("tlaa->tl", branches).real, 0, None)
    cum = np.cumsum(probs, axis=1)
    outcome = np.sum(u[:, None] >= cum, axis=1)
    lost = outcome >= len(ops)
    outcome = np.where(lost, -1, outcome)
    idx = np.where(lost, 0, outcome)
    chosen = branches[np.arange(len(states)), idx]
    p = probs[np.arange(len(states)), idx]
    safe = np.where(p > 0, p, 1.0)
    chosen = chosen / safe[:, None, None]
    accepted = np.isin(outcome, list(spec.accept)) if spec.kind == "slocc" else ~lost
    chosen[~accepted] = states[~accepted]
    return chosen, outcome, accepted


def run_slocc_monte_carlo(config: ChainConfig) -> MonteCarloResult:
    """Sample filter outcomes with Born probabilities; channels are applied exactly.

    A trajectory succeeds when every filter outcome lies in its accept set. The
    estimate is the fraction of all trajectories that succeed and end with
    concurrence at least ``threshold_c``; the reference value is C(Gamma)^n / c.
    When ``config.policy`` is set, the filter at each step is chosen per
    outcome history by ``policy(step, history)``.
    """
    if config.dims != (2, 2):
        raise DimensionError("Monte Carlo post-selection is implemented for two qubits")
    specs = [config.filter_at(i) for i in range(1, config.n + 1)]
    if config.policy is None and not any(s.kind == "slocc" for s in specs):
        raise ValueError("Monte Carlo mode needs at least one SLOCC filter")
    ch = config.channel
    t_count, n = config.trajectories, config.n
    u = trajectory_uniforms(config.seed, t_count, n)
    states = np.broadcast_to(config.initial_matrix(), (t_count, 4, 4)).copy()
    alive = np.ones(t_count, dtype=bool)
    history = np.full((t_count, n), -2, dtype=int)
    k = ch.stacked()
    for step in range(1, n + 1):
        if config.policy is None:
            groups = [(specs[step - 1], np.nonzero(alive)[0])]
        else:
            groups = []
            live = np.nonzero(alive)[0]
            keys = history[live, :step - 1]
            uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
            for g, key in enumerate(uniq):
                groups.append((config.policy(step, tuple(int(x) for x in key)), live[inverse.reshape(-1) == g]))
        for spec, rows in groups:
            if spec.kind == "none" or rows.size == 0:
                continue
            new, outcome, accepted = _sample_filter(spec, states[rows], u[rows, step - 1])
            states[rows] = new
            history[rows, step - 1] = outcome
            alive[rows[~accepted]] = False
        live = np.nonzero(alive)[0]
        t4 = states[live].reshape(-1, 2, 2, 2, 2)
        states[live] = np.einsum("kai,tijlm,kbl->tajbm", k, t4, k.conj()).reshape(-1, 4, 4)
    final_c = np.zeros(t_count)
    if alive.any():
        final_c[alive] = concurrence_many(states[alive])
    hits = np.count_nonzero(alive & (final_c >= config.threshold_c))
    prob = hits / t_count
    cgamma = concurrence(choi(ch))
    return MonteCarloResult(
        empirical_prob=prob,
        bound=cgamma**n / config.threshold_c,
        sigma=math.sqrt(prob * (1 - prob) / t_count),
        success_prob=float(np.count_nonzero(alive) / t_count),
        trajectories=t_count,
        n=n,
        threshold_c=config.threshold_c,
        choi_concurrence=cgamma,
        seed=config.seed,
        final_concurrence=final_c,
        success=alive,
    )


# --- pure-state ensemble and the G_k contraction ---------------------------------

@dataclass
class EnsembleEvolution:
    k: int
    kappa: float
    per_step_gk: list[float]
    per_step_bound: list[float]
    dropped_mass: list[float]
    branch_counts: list[int]
    vectors: np.ndarray = field(repr=False)
    dims: tuple[int, int] = (2, 2)

    @property
    def bound_holds(self) -> bool:
        """No step shows the kept sum above kappa^step."""
        return not self.violation_certified

    @property
    def bound_certified(self) -> bool:
        """The kept sum plus the pruned mass stays below kappa^step, so the full ensemble does too."""
        slack = tol().bound_slack
        return all(g + d <= b + slack for g, d, b in zip(self.per_step_gk, self.dropped_mass, self.per_step_bound))

    @property
    def violation_certified(self) -> bool:
        slack = tol().bound_slack
        return any(g > b + slack for g, b in zip(self.per_step_gk, self.per_step_bound))

    def density(self) -> np.ndarray:
        v = self.vectors.reshape(len(self.vectors), -1)
        return v.T @ v.conj()

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "kappa": self.kappa,
            "per_step_gk": self.per_step_gk,
            "per_step_bound": self.per_step_bound,
            "dropped_mass": self.dropped_mass,
            "branch_counts": self.branch_counts,
            "bound_holds": self.bound_holds,
            "bound_certified": self.bound_certified,
        }


def ensemble_gk_evolution(
    channel: QuantumChannel,
    filters: FilterSpec | Sequence[FilterSpec] | None,
    psi0: PureState,
    k: int,
    n: int,
    prune: float = 1e-12,
) -> EnsembleEvolution:
    """Branch an explicit ensemble over every filter and channel Kraus operator.

    Branches are stored as unnormalized vectors v_i with weight s_i = |v_i|^2,
    so sum_i s_i G_k(phi_i) = sum_i G_k(v_i). Branches whose weight is at most
    ``prune`` are dropped and their mass accumulated.
    """
    dims = tuple(psi0.dims)
    if dims[0] != channel.d_in or channel.d_in != channel.d_out:
        raise DimensionError("channel must act on the first factor of psi0")
    if schmidt_rank(psi0) > k:
        raise ValueError(f"initial Schmidt rank {schmidt_rank(psi0)} exceeds k={k}")
    kappa = kappa_for_decomposition(channel, k)
    kraus = channel.stacked()
    limit = tol().ensemble_limit
    x = psi0.coefficients[None].copy()
    sums = [float(np.sum(gk_batch(x, k)))]
    bounds = [1.0]
    dropped = [0.0]
    counts = [1]
    lost = 0.0
    for step in range(1, n + 1):
        if filters is None:
            spec = no_filter()
        elif isinstance(filters, FilterSpec):
            spec = filters
        else:
            spec = filters[step - 1]
        if spec.kind == "slocc":
            raise ValueError("ensemble tracking covers deterministic filters only")
        if spec.kind == "deterministic":
            ms = np.stack([m for m, _ in spec.kraus_pairs])
            ns = np.stack([nn for _, nn in spec.kraus_pairs])
            x = np.einsum("lab,ibc,ldc->ilad", ms, x, ns).reshape(-1, *dims)
        x = np.einsum("kab,ibc->ikac", kraus, x).reshape(-1, *dims)
        if len(x) > limit:
            raise ValueError(f"ensemble grew to {len(x)} branches; raise `prune`")
        w = np.einsum("iab,iab->i", x, x.conj()).real
        keep = w > prune
        lost += float(w[~keep].sum())
        x = x[keep]
        sums.append(float(np.sum(gk_batch(x, k))))
        bounds.append(kappa**step)
        dropped.append(lost)
        counts.append(len(x))
    return EnsembleEvolution(k, kappa, sums, bounds, dropped, counts, x, dims)


# --- separability bound along a chain ---------------------------------------------

def theorem3_check(
    channel: QuantumChannel,
    filters: FilterSpec | Sequence[FilterSpec] | None,
    rho0,
    n: int,
) -> dict:
    """Compare the negativity-based lower bound with 4 kappa^(n/2(dA-1)) (sqrt(dA)-1) step by step."""
    kappa_max, kappas = theorem3_constant(channel)
    base = {"kappas": {str(k): v for k, v in kappas.items()}, "kappa": kappa_max}
    if kappa_max is None:
        return {**base, "status": "inapplicable", "consistent": None,
                "reason": "stored decomposition gives kappa outside (0, 1)"}
    initial = rho0 if isinstance(rho0, (DensityMatrix, PureState)) else DensityMatrix(rho0, (channel.d_in, channel.d_in))
    cfg = ChainConfig(channel=channel, n=n, initial=initial, filters=filters)
    result = run_deterministic(cfg, keep_states=False)
    slack = tol().bound_slack
    lower = result.column("sep_lower")
    bound = result.column("theorem3_bound")
    ok = all(lo <= b + slack for lo, b in zip(lower, bound))
    return {**base, "status": "applicable", "consistent": ok,
            "per_step_sep_lower": lower, "per_step_bound": bound}
