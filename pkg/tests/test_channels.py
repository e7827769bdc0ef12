import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echain import channels as ch
from echain import qmath, states
from echain.config import DimensionError
from echain.measures import concurrence

import oracles
from strategies import seeds


def _plus():
    return qmath.projector(np.array([1, 1]) / np.sqrt(2))


class TestConstruction:
    def test_rejects_non_trace_preserving(self):
        with pytest.raises(ValueError):
            ch.QuantumChannel((np.eye(2) * 0.5,), 2, 2)
        ch.QuantumChannel((np.eye(2) * 0.5,), 2, 2, trace_preserving=False)
        with pytest.raises(ValueError):
            ch.QuantumChannel((np.eye(2) * 1.5,), 2, 2, trace_preserving=False)

    def test_drops_zero_kraus(self):
        c = ch.depolarizing(2, 0.0)
        assert c.n_kraus == 1

    def test_shape_check(self):
        with pytest.raises(DimensionError):
            ch.QuantumChannel((np.eye(3),), 2, 2)

    @given(seeds, st.integers(2, 4), st.integers(1, 4))
    def test_random_channel_is_cptp(self, seed, d, r):
        c = ch.random_channel(d, r, seed=seed)
        gram = sum(k.conj().T @ k for k in c.kraus)
        assert np.max(np.abs(gram - np.eye(d))) < 1e-10


class TestApply:
    def test_identity(self):
        rho = states.random_density((2,), seed=1)
        assert np.allclose(ch.apply(ch.identity(2), rho).matrix, rho.matrix)

    def test_full_depolarization(self):
        assert np.allclose(ch.apply(ch.depolarizing(2, 1.0), qmath.projector([1, 0])), np.eye(2) / 2)

    def test_depolarizing_formula(self):
        out = ch.apply(ch.depolarizing(2, 0.3), qmath.projector([1, 0]))
        assert np.allclose(out, np.diag([0.85, 0.15]), atol=1e-14)
        out = ch.apply(ch.depolarizing(2, 0.3), _plus())
        assert np.allclose(out, 0.7 * _plus() + 0.3 * np.eye(2) / 2, atol=1e-14)

    def test_on_A_bell(self):
        phi = states.phi_plus().density()
        assert np.allclose(ch.apply_on_A(ch.identity(2), phi).matrix, phi.matrix)
        p = 0.35
        out = ch.apply_on_A(ch.depolarizing(2, p), phi).matrix
        assert np.allclose(out, (1 - p) * phi.matrix + p * np.eye(4) / 4, atol=1e-14)

    def test_on_A_product(self, rng):
        c = ch.random_channel(2, 3, seed=rng)
        a, b = states.random_density((2,), seed=rng), states.random_density((3,), seed=rng)
        out = ch.apply_on_A(c, np.kron(a.matrix, b.matrix), (2, 3))
        assert np.allclose(out, np.kron(ch.apply(c, a.matrix), b.matrix), atol=1e-12)


class TestChoi:
    def test_identity(self):
        assert np.allclose(ch.choi(ch.identity(2)).matrix, states.phi_plus().density().matrix)

    def test_depolarizing_concurrence(self, frozen):
        for p, ref in frozen["depolarizing_choi_concurrence"].items():
            assert concurrence(ch.choi(ch.depolarizing(2, float(p)))) == pytest.approx(ref, abs=1e-12)
        assert concurrence(ch.choi(ch.depolarizing(2, 0.4))) == pytest.approx(0.4, abs=1e-12)

    def test_amplitude_damping_concurrence(self, frozen):
        for g, ref in frozen["amplitude_damping_choi_concurrence"].items():
            assert concurrence(ch.choi(ch.amplitude_damping(float(g)))) == pytest.approx(ref, abs=1e-12)
            assert ref == pytest.approx(np.sqrt(1 - float(g)), abs=1e-12)

    def test_matches_loop_oracle(self, rng):
        c = ch.random_channel(2, 3, seed=rng)
        assert np.allclose(ch.choi(c).matrix, oracles.choi_loop(c.kraus, 2), atol=1e-14)

    @given(seeds, st.integers(2, 3), st.integers(1, 5))
    def test_marginal_is_maximally_mixed(self, seed, d, r):
        gamma = ch.choi(ch.random_channel(d, r, seed=seed))
        assert np.max(np.abs(qmath.partial_trace(gamma.matrix, (d, d), "B") - np.eye(d) / d)) < 1e-10

    def test_kraus_from_choi_examples(self):
        k = ch.kraus_from_choi(ch.choi(ch.identity(2)))
        assert k.n_kraus == 1
        assert abs(abs(np.trace(k.kraus[0])) - 2) < 1e-12
        assert ch.kraus_from_choi(ch.choi(ch.depolarizing(2, 0.5))).n_kraus == 4

    @settings(max_examples=60)
    @given(seeds, st.integers(2, 3), st.integers(1, 5))
    def test_round_trip(self, seed, d, r):
        gamma = ch.choi(ch.random_channel(d, r, seed=seed))
        again = ch.choi(ch.kraus_from_choi(gamma))
        assert np.max(np.abs(again.matrix - gamma.matrix)) < 1e-10


class TestComposition:
    def test_identity_composition(self, rng):
        c = ch.random_channel(2, 2, seed=rng)
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] = 1
                assert np.allclose(ch.apply(ch.compose(ch.identity(2), c), e), ch.apply(c, e))

    def test_depolarizing_semigroup(self):
        p, q = 0.2, 0.45
        both = ch.compose(ch.depolarizing(2, p), ch.depolarizing(2, q))
        target = ch.depolarizing(2, 1 - (1 - p) * (1 - q))
        # |a><b| |c><d| vanishes for b != c and is dropped: 1 + 4 + 4 + 8 nonzero products
        assert both.n_kraus == 17
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] = 1
                assert np.allclose(ch.apply(both, e), ch.apply(target, e), atol=1e-14)

    @settings(max_examples=20)
    @given(seeds)
    def test_compose_and_parallel_as_maps(self, seed):
        rng = np.random.default_rng(seed)
        a, b = ch.random_channel(2, 2, seed=rng), ch.random_channel(2, 3, seed=rng)
        rho = states.random_density((2,), seed=rng).matrix
        assert np.max(np.abs(ch.apply(ch.compose(b, a), rho) - ch.apply(b, ch.apply(a, rho)))) < 1e-11
        big = states.random_density((2, 2), seed=rng).matrix
        par = ch.apply(ch.tensor(a, b), big)
        nested = ch.apply_on_A(a, big, (2, 2))
        swap = qmath.permute_subsystems(nested, [2, 2], [1, 0])
        nested = qmath.permute_subsystems(ch.apply_on_A(b, swap, (2, 2)), [2, 2], [1, 0])
        assert np.max(np.abs(par - nested)) < 1e-11

    def test_kraus_count_is_product(self, rng):
        a, b = ch.random_channel(2, 3, seed=rng), ch.random_channel(2, 4, seed=rng)
        assert ch.compose(b, a).n_kraus == 12

    def test_parallel(self):
        c = ch.depolarizing(2, 0.3)
        assert ch.parallel(c, 1).n_kraus == c.n_kraus
        assert np.allclose(ch.parallel(ch.identity(2), 2).kraus[0], np.eye(4))

    def test_parallel_rank_one_weight(self):
        p = 0.3
        par = ch.parallel(ch.depolarizing(2, p), 2)
        weight = sum(np.trace(k.conj().T @ k).real / 4 for k in par.kraus if np.linalg.matrix_rank(k, tol=1e-12) == 1)
        assert weight == pytest.approx(p**2, abs=1e-14)

    def test_parallel_guard(self):
        with pytest.raises(ValueError):
            ch.parallel(ch.depolarizing(2, 0.3), 8)


class TestFamilies:
    def test_depolarizing_identity_and_weights(self):
        assert ch.depolarizing(2, 0).n_kraus == 1
        p = 0.37
        c = ch.depolarizing(3, p)
        s = sum(k.conj().T @ k for k in c.kraus[1:])
        assert np.allclose(s, p * np.eye(3))

    def test_amplitude_damping_limits(self, rng):
        assert np.allclose(ch.amplitude_damping(0).kraus[0], np.eye(2))
        rho = states.random_density((2,), seed=rng).matrix
        assert np.allclose(ch.apply(ch.amplitude_damping(1), rho), np.diag([1, 0]))

    def test_dephasing(self):
        out = ch.apply(ch.dephasing(0.4), _plus())
        assert out[0, 1] == pytest.approx(0.5 * 0.6)

    def test_range_check(self):
        with pytest.raises(ValueError):
            ch.depolarizing(2, 1.5)

    def test_named(self):
        assert ch.named_channel("amplitude_damping", gamma=0.2).n_kraus == 2
        with pytest.raises(ValueError):
            ch.named_channel("bogus")


class TestStinespring:
    def test_identity(self):
        u, env = ch.stinespring(ch.identity(2))
        assert env == 1 and np.allclose(u, np.eye(2))

    def test_amplitude_damping(self):
        c = ch.amplitude_damping(0.5)
        u, env = ch.stinespring(c)
        assert np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < 1e-10
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] = 1
                assert np.max(np.abs(ch.apply_dilation(u, env, e) - ch.apply(c, e))) < 1e-10

    @given(seeds, st.integers(2, 4))
    def test_unitary(self, seed, r):
        u, _ = ch.stinespring(ch.random_channel(3, r, seed=seed))
        assert np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < 1e-10


def test_record_round_trip():
    c = ch.random_channel(2, 3, seed=4)
    back = ch.channel_from_record(ch.channel_to_record(c))
    assert all(np.array_equal(a, b) for a, b in zip(c.kraus, back.kraus))
    assert ch.channel_from_record({"name": "depolarizing", "d": 2, "p": 0.1}).n_kraus == 5
