import numpy as np
import pytest
from hypothesis import given, settings

from echain import channels as ch
from echain import detect, qmath, states
from echain.channels import QuantumChannel

import oracles
from strategies import seeds


def bit_flip_code_channel(q):
    x = np.array([[0, 1], [1, 0]])
    eye = np.eye(2)
    flips = [np.kron(np.kron(x, eye), eye), np.kron(np.kron(eye, x), eye), np.kron(np.kron(eye, eye), x)]
    ops = [np.sqrt(1 - 3 * q) * np.eye(8)] + [np.sqrt(q) * f for f in flips]
    return QuantumChannel(tuple(ops), 8, 8)


CODE = np.zeros((8, 2))
CODE[0, 0] = CODE[7, 1] = 1


class TestResidual:
    def test_against_oracle(self, frozen):
        basis = np.eye(2)
        assert detect.kl_residual(ch.depolarizing(2, 0.3), basis) == pytest.approx(
            frozen["kl_depolarizing_03_computational"], abs=1e-12
        )
        pauli = QuantumChannel(tuple(oracles.depolarizing_kraus(0.3)), 2, 2)
        assert detect.kl_residual(pauli, basis) == pytest.approx(
            frozen["kl_depolarizing_03_computational_pauli_kraus"], abs=1e-12
        )

    def test_correctable_examples(self):
        assert detect.kl_residual(ch.identity(3), np.eye(3)[:, :2]) < 1e-14
        block = ch.block_channel(ch.depolarizing(2, 0.5), 2)
        assert detect.kl_residual(block, np.eye(4)[:, :2]) < 1e-14
        assert detect.kl_residual(bit_flip_code_channel(0.1), CODE) < 1e-14

    @given(seeds)
    def test_invariant_under_basis_rotation(self, seed):
        rng = np.random.default_rng(seed)
        channel = ch.random_channel(3, 3, seed=rng)
        b = qmath.random_unitary(3, rng)[:, :2]
        u = qmath.random_unitary(2, rng)
        assert detect.kl_residual(channel, b @ u) == pytest.approx(detect.kl_residual(channel, b), abs=1e-10)

    @settings(max_examples=10)
    @given(seeds)
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        channel = ch.random_channel(3, 2, seed=rng)
        b = qmath.random_unitary(3, rng)[:, :2]
        assert detect.kl_residual(channel, b) == pytest.approx(oracles.kl_residual_loop(channel.kraus, b), abs=1e-12)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            detect.kl_residual(ch.identity(2), np.ones((2, 1)))


class TestRecovery:
    def test_unitary_channel(self, rng):
        u = qmath.random_unitary(3, rng)
        basis = np.eye(3)[:, :2]
        channel = ch.unitary_channel(u)
        rec = detect.build_recovery(channel, basis)
        assert detect.verify_recovery(channel, rec, basis, seed=0) < 1e-10

    def test_bit_flip_code(self):
        channel = bit_flip_code_channel(0.1)
        rec = detect.build_recovery(channel, CODE)
        assert rec.trace_preserving
        assert detect.verify_recovery(channel, rec, CODE, seed=0) < 1e-10

    def test_refuses_uncorrectable(self):
        with pytest.raises(ValueError):
            detect.build_recovery(ch.depolarizing(2, 0.3), np.eye(2))


class TestSearch:
    def test_block_channel_found(self):
        res = detect.search_correctable(ch.block_channel(ch.depolarizing(2, 0.5), 2), dim=2, restarts=5, seed=0)
        assert res.found
        assert res.candidate.recovery_error < 1e-7

    def test_bit_flip_code_found(self):
        res = detect.search_correctable(bit_flip_code_channel(0.1), dim=2, restarts=5, seed=1)
        assert res.found

    def test_depolarizing_not_found(self):
        res = detect.search_correctable(ch.depolarizing(2, 0.3), dim=2, restarts=5, seed=0)
        assert res.status == "not_found"
        assert res.best_residual > 0.01
        assert res.candidate is None

    def test_reproducible(self):
        channel = ch.random_channel(3, 2, seed=4)
        a = detect.search_correctable(channel, restarts=3, seed=9)
        b = detect.search_correctable(channel, restarts=3, seed=9)
        assert a.best_residual == b.best_residual and a.best_restart == b.best_restart

    def test_dim_range(self):
        with pytest.raises(ValueError):
            detect.search_correctable(ch.identity(2), dim=3)


class TestFixedPoint:
    @given(seeds)
    def test_parameterization_respects_floor(self, seed):
        x = np.random.default_rng(seed).standard_normal(18)
        coeff = detect._state_from_params(x, 3, floor=0.5)
        assert np.linalg.norm(coeff) == pytest.approx(1)
        assert qmath.shannon_entropy(np.linalg.svd(coeff, compute_uv=False) ** 2) >= 0.5 - 1e-9

    def test_identity_has_zero_gap(self):
        out = detect.eof_fixed_point_search(ch.identity(2), restarts=3, seed=0)
        assert abs(out["gap"]) < 1e-9 and out["entangled"]

    def test_unitary_gap_on_bell_state(self):
        u = qmath.random_unitary(2, np.random.default_rng(3))
        assert detect.fixed_point_gap(ch.unitary_channel(u), states.phi_plus()) == pytest.approx(0, abs=1e-9)

    def test_depolarizing_gap(self):
        out = detect.eof_fixed_point_search(ch.depolarizing(2, 0.3), restarts=5, seed=0)
        assert out["gap"] > 0.01 and not out["entangled"]
        assert out["input_eof"] >= 0.1 - 1e-9

    def test_hints_are_candidates(self):
        block = ch.block_channel(ch.depolarizing(2, 0.5), 2)
        probe = np.zeros((4, 4))
        probe[0, 0] = probe[1, 1] = 1 / np.sqrt(2)
        hint = states.PureState(probe.reshape(-1), (4, 4))
        out = detect.eof_fixed_point_search(block, restarts=1, seed=0, hints=[hint])
        assert out["gap"] < 1e-6 and out["entangled"]


def test_detection_report_block():
    rep = detect.detection_report(ch.block_channel(ch.depolarizing(2, 0.5), 2), restarts=3, seed=0)
    assert rep["status"] == "certified_present" and rep["recovery_verified"]
    assert rep["fixed_point_entangled"]
    b = np.array(rep["basis"]["re"]) + 1j * np.array(rep["basis"]["im"])
    assert b.shape == (4, 2)


class TestModuleExamples:
    def test_identity_search(self):
        res = detect.search_correctable(ch.identity(3), dim=2, restarts=2, seed=0)
        assert res.found and res.best_residual < 1e-12

    def test_identity_recovery_is_identity(self):
        rec = detect.build_recovery(ch.identity(2), np.eye(2))
        assert np.allclose(ch.choi(rec).matrix, ch.choi(ch.identity(2)).matrix, atol=1e-12)

    def test_unitary_recovery_is_inverse(self, rng):
        u = qmath.random_unitary(2, rng)
        rec = detect.build_recovery(ch.unitary_channel(u), np.eye(2))
        assert np.allclose(ch.choi(rec).matrix, ch.choi(ch.unitary_channel(u.conj().T)).matrix, atol=1e-12)

    def test_block_recovery_verifies(self):
        block = ch.block_channel(ch.depolarizing(2, 0.5), 2)
        basis = np.eye(4)[:, :2]
        rec = detect.build_recovery(block, basis)
        assert detect.verify_recovery(block, rec, basis, samples=20, seed=3) < 1e-8

    def test_depolarizing_computational_residual(self):
        assert detect.kl_residual(ch.depolarizing(2, 0.3), np.eye(2)) > 0.05

    def test_identity_gap_at_bell_state(self):
        assert abs(detect.fixed_point_gap(ch.identity(2), states.phi_plus())) < 1e-6
