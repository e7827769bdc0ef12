import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echain import channels as ch
from echain import measures as ms
from echain import qmath, states
from echain.chain import random_local_filter

import oracles
from strategies import qubit_channels, seeds, two_qubit_states

PHI = states.phi_plus().density().matrix


def isotropic(p):
    return (1 - p) * PHI + p * np.eye(4) / 4


class TestSpinFlipAndConcurrence:
    def test_spin_flip_examples(self):
        assert np.allclose(ms.spin_flip(PHI), PHI)
        assert np.allclose(ms.spin_flip(np.eye(4) / 4), np.eye(4) / 4)
        e00 = qmath.projector(qmath.ket(0, 4))
        assert np.allclose(ms.spin_flip(e00), qmath.projector(qmath.ket(3, 4)))

    def test_examples(self):
        assert ms.concurrence(PHI) == pytest.approx(1, abs=1e-12)
        assert ms.concurrence(states.random_product_density((2, 2), seed=3)) == pytest.approx(0, abs=1e-7)

    @given(two_qubit_states())
    def test_matches_extended_precision_oracle(self, rho):
        assert ms.concurrence(rho) == pytest.approx(oracles.concurrence_eig(rho.matrix), abs=1e-7)

    def test_batch_matches_single(self, rng):
        mats = np.stack([states.random_density((2, 2), seed=rng).matrix for _ in range(10)])
        assert np.allclose(ms.concurrence_many(mats), [ms.concurrence(m) for m in mats])

    @given(two_qubit_states(), seeds)
    def test_local_unitary_invariance(self, rho, seed):
        rng = np.random.default_rng(seed)
        u = np.kron(qmath.random_unitary(2, rng), qmath.random_unitary(2, rng))
        rotated = u @ rho.matrix @ u.conj().T
        assert ms.concurrence(rotated) == pytest.approx(ms.concurrence(rho), abs=1e-10)

    @settings(max_examples=100)
    @given(qubit_channels(), two_qubit_states())
    def test_factorization_law(self, channel, rho):
        out = ch.apply_on_A(channel, rho)
        assert ms.concurrence(out) <= ms.concurrence(ch.choi(channel)) * ms.concurrence(rho) + 1e-9

    @given(two_qubit_states(), seeds)
    def test_average_concurrence_under_local_instrument(self, rho, seed):
        spec = random_local_filter((2, 2), 2, 3, seed=seed)
        total = 0.0
        for m, n in spec.kraus_pairs:
            k = np.kron(m, n)
            out = k @ rho.matrix @ k.conj().T
            p = np.trace(out).real
            if p > 1e-14:
                total += p * ms.concurrence(out / p)
        assert total <= ms.concurrence(rho) + 1e-9


class TestEntanglementOfFormation:
    def test_closed_form_limits(self):
        assert ms.eof_two_qubit(PHI) == pytest.approx(1, abs=1e-9)
        assert ms.eof_two_qubit(np.eye(4) / 4) == 0

    def test_pure(self):
        assert ms.eof_pure(states.phi_plus()) == pytest.approx(1)
        assert ms.eof_pure(states.PureState(np.kron([1, 0], [0, 1]), (2, 2))) == 0
        for k in (2, 3, 4):
            assert ms.eof_pure(states.max_entangled(k)) == pytest.approx(math.log2(k))

    def test_roof_on_pure_input(self):
        psi = states.random_pure((2, 3), seed=1)
        res = ms.eof_convex_roof_upper(psi.density(), seed=0)
        assert res.value == pytest.approx(ms.eof_pure(psi), abs=1e-12)

    def test_roof_on_classical_state(self):
        rho = np.diag([0.3, 0, 0, 0.7]).astype(complex)
        assert ms.eof_convex_roof_upper(rho, seed=0, restarts=5).value < 1e-6

    def test_werner_against_roof(self):
        rho = isotropic(0.2)
        roof = ms.eof_convex_roof_upper(rho, seed=1, restarts=20).value
        assert abs(roof - ms.eof_two_qubit(rho)) < 1e-3

    @settings(max_examples=8)
    @given(two_qubit_states(rank=2))
    def test_roof_dominates_closed_form(self, rho):
        roof = ms.eof_convex_roof_upper(rho, seed=0, restarts=20)
        assert ms.eof_two_qubit(rho) <= roof.value + 1e-6
        assert roof.value - ms.eof_two_qubit(rho) < 1e-3
        ens = roof.metadata["ensemble"]
        recon = sum(p * qmath.projector(psi.amplitudes) for p, psi in ens)
        assert qmath.trace_norm(recon - rho.matrix) < 1e-8


class TestGk:
    def test_examples(self, frozen):
        assert ms.gk_concurrence(states.max_entangled(3), 3) == pytest.approx(1)
        assert ms.gk_concurrence(states.PureState(np.kron([1, 0], [1, 0]), (2, 2)), 2) == 0
        psi = states.PureState(np.diag(np.sqrt([0.5, 0.3, 0.2])).reshape(-1), (3, 3))
        assert ms.gk_concurrence(psi, 3) == pytest.approx(frozen["gk_05_03_02_k3"], abs=1e-14)
        assert frozen["gk_05_03_02_k3"] == pytest.approx(0.932170, abs=1e-6)

    @given(seeds, st.floats(0.1, 10))
    def test_homogeneity(self, seed, c):
        psi = states.random_pure((3, 3), seed=seed)
        base = ms.gk_unnormalized(psi, 2)
        assert base == pytest.approx(ms.gk_concurrence(psi, 2), abs=1e-12)
        assert ms.gk_unnormalized(c * psi.amplitudes, 2, (3, 3)) == pytest.approx(c**2 * base, rel=1e-10)

    @given(seeds, st.integers(1, 4), st.integers(2, 4))
    def test_zero_iff_rank_below_k(self, seed, rank, k):
        psi = states.random_schmidt_rank_state((4, 4), rank, seed=seed)
        g = ms.gk_concurrence(psi, k)
        assert (g == 0) == (rank < k)

    @given(seeds, st.integers(2, 4))
    def test_multiplicativity(self, seed, k):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        psi = states.random_schmidt_rank_state((4, 4), k, seed=rng, support=range(k))
        lhs = ms.gk_unnormalized((np.kron(m, np.eye(4)) @ psi.amplitudes), k, (4, 4))
        phi_k = np.zeros((4, 4), dtype=complex)
        phi_k[range(k), range(k)] = 1 / np.sqrt(k)
        rhs = ms.gk_unnormalized(np.kron(m, np.eye(4)) @ phi_k.reshape(-1), k, (4, 4)) * ms.gk_concurrence(psi, k)
        assert lhs == pytest.approx(rhs, rel=1e-8)


class TestKSchmidtFidelity:
    def test_examples(self, frozen):
        assert ms.k_schmidt_fidelity_pure(states.phi_plus(), 2) == pytest.approx(1)
        assert ms.k_schmidt_fidelity_pure(states.max_entangled(3), 2) == pytest.approx(2 / 3)
        psi = states.PureState(np.diag(np.sqrt([0.5, 0.3, 0.2])).reshape(-1), (3, 3))
        value = ms.k_schmidt_fidelity_pure(psi, 2)
        assert value == pytest.approx(0.8)
        assert abs(value - frozen["k_schmidt_fidelity_numeric_05_03_02_k2"]) < 1e-4
        assert frozen["k_schmidt_fidelity_numeric_05_03_02_k2"] <= value + 1e-6

    def test_optimal_state_attains(self):
        psi = states.random_pure((3, 4), seed=2)
        phi = ms.optimal_rank_k_state(psi, 2)
        assert states.schmidt_rank(phi) == 2
        assert abs(np.vdot(phi.amplitudes, psi.amplitudes)) ** 2 == pytest.approx(ms.k_schmidt_fidelity_pure(psi, 2))

    def test_mixed_lower_bound_and_witness(self, rng):
        a = states.random_schmidt_rank_state((3, 3), 3, seed=rng)
        b = states.random_schmidt_rank_state((3, 3), 3, seed=rng)
        ens = [(0.6, a), (0.4, b)]
        rho = 0.6 * a.density().matrix + 0.4 * b.density().matrix
        low = ms.k_schmidt_fidelity_mixed_lower(rho, ens, 2)
        sigma = ms.k_schmidt_witness_state(ens, 2)
        assert low <= qmath.fidelity(rho, sigma.matrix) + 1e-9
        assert ms.k_schmidt_fidelity_mixed_lower(a.density(), [(1.0, a)], 2) == pytest.approx(ms.k_schmidt_fidelity_pure(a, 2))

    def test_product_ensemble(self, rng):
        prods = [states.PureState.from_vector(np.kron(rng.standard_normal(2), rng.standard_normal(2)), (2, 2)) for _ in range(3)]
        ens = [(1 / 3, p) for p in prods]
        rho = sum(p * q.density().matrix for p, q in ens)
        assert ms.k_schmidt_fidelity_mixed_lower(rho, ens, 1) == pytest.approx(1)

    def test_ensemble_must_match(self):
        with pytest.raises(ValueError):
            ms.k_schmidt_fidelity_mixed_lower(np.eye(4) / 4, [(1.0, states.phi_plus())], 2)


class TestNegativityAndSeparability:
    def test_examples(self):
        assert ms.negativity(PHI) == pytest.approx(0.5)
        assert ms.negativity(states.random_product_density((2, 3), seed=1)) == pytest.approx(0, abs=1e-12)
        assert ms.sep_distance_lower(PHI) == pytest.approx(0.5)

    def test_isotropic_threshold(self, frozen):
        thr = frozen["isotropic_negativity_threshold"]
        for p in np.linspace(0, 1, 31):
            neg = ms.negativity(isotropic(p))
            assert (neg > 1e-12) == (p < thr - 1e-9)

    def test_upper_on_product(self):
        rho = states.random_product_density((2, 2), seed=5)
        assert ms.sep_distance_upper(rho, restarts=1, seed=0).value < 1e-6

    def test_upper_on_bell(self):
        assert ms.sep_distance_upper(PHI, restarts=3, seed=0).value >= 0.5 - 1e-9

    def test_nearly_separable(self):
        sigma = states.random_product_density((2, 2), seed=8).matrix
        rho = 0.99 * sigma + 0.01 * PHI
        assert ms.sep_distance_upper(rho, restarts=2, seed=0).value <= 0.02

    @settings(max_examples=30)
    @given(two_qubit_states(), seeds)
    def test_lower_below_upper(self, rho, seed):
        up = ms.sep_distance_upper(rho, restarts=1, seed=seed, maxiter=40)
        assert ms.sep_distance_lower(rho) <= up.value + 1e-9
        sigma = up.metadata["sigma"].matrix
        assert ms.negativity(sigma) < 1e-9


class TestContraction:
    def test_kappa_examples(self):
        assert ms.kappa_for_decomposition(ch.identity(3), 2) == pytest.approx(1)
        assert ms.kappa_for_decomposition(ch.identity(3), 3) == pytest.approx(1)
        for p in (0.1, 0.3, 0.5):
            assert ms.kappa_for_decomposition(ch.depolarizing(2, p), 2) == pytest.approx(1 - p)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_kappa_parallel(self, m):
        p = 0.3
        assert ms.kappa_for_decomposition(ch.parallel(ch.depolarizing(2, p), m), 2) <= 1 - p**m + 1e-12

    def test_theorem3_bound_values(self, frozen):
        assert ms.theorem3_bound(0.5, 0, 2) == pytest.approx(frozen["theorem3_n0_d2"], abs=1e-14)
        assert ms.theorem3_bound(0.8, 10, 2) == pytest.approx(frozen["theorem3_k08_n10_d2"], abs=1e-14)
        first = frozen["theorem3_first_n_below_1e-6"]
        assert ms.theorem3_bound(0.5, first - 1, 2) >= 1e-6
        assert all(ms.theorem3_bound(0.5, n, 2) < 1e-6 for n in range(first, 200))
        assert ms.theorem3_bound(0.3, 0, 3) == pytest.approx(4 * (math.sqrt(3) - 1))

    def test_min_parallel_channels(self, frozen):
        p = 0.1
        g = -math.log(p)
        assert ms.min_parallel_channels(20, p) - ms.min_parallel_channels(10, p) == pytest.approx(math.log(2) / g)
        for n in (2, 10, 1000):
            assert ms.min_parallel_channels(n, math.exp(-1)) == pytest.approx(math.log(n))
        assert ms.min_parallel_channels(100, p) == pytest.approx(2)
        diff = ms.min_parallel_channels(100, p) - ms.min_parallel_channels(10, p)
        assert diff == pytest.approx(frozen["min_parallel_p01_diff_100_10"])

    def test_report(self):
        rep = ms.measure_report(states.phi_plus().density())
        assert rep["concurrence"] == pytest.approx(1)
        assert rep["entropy_A"] == pytest.approx(1)
