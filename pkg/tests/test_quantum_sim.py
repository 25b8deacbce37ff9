import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrnn_evo import quantum_sim as qs
from qrnn_evo.errors import ConfigurationError, UsageError
from qrnn_evo.qrnn import QrnnConfig, build_ansatz

from conftest import ROTATIONS, assert_physical, random_gate, random_mixed_state, random_product_state


class TestZeroState:
    def test_two_qubits(self):
        rho = qs.zero_state(2).elements
        expected = np.zeros((4, 4))
        expected[0, 0] = 1
        np.testing.assert_array_equal(rho, expected)

    def test_one_qubit(self):
        np.testing.assert_array_equal(qs.zero_state(1).elements, [[1, 0], [0, 0]])

    def test_trace_six(self):
        assert qs.zero_state(6).trace() == 1

    @pytest.mark.parametrize("n", [0, 11, -1])
    def test_out_of_range(self, n):
        with pytest.raises(ConfigurationError):
            qs.zero_state(n)


class TestGateMatrix:
    def test_ry_zero_is_identity(self):
        np.testing.assert_allclose(qs.gate_matrix(qs.Gate("RY", (0.0,), (0,))), np.eye(2))

    def test_ry_pi_flips(self):
        rho = qs.apply_gate(qs.zero_state(1), qs.Gate("RY", (np.pi,), (0,)))
        assert qs.prob_one(rho, 0) == pytest.approx(1.0, abs=1e-15)

    def test_crx_pi_with_control_set(self):
        rho = qs.apply_gate(qs.zero_state(2), qs.Gate("RX", (np.pi,), (0,)))
        rho = qs.apply_gate(rho, qs.Gate("CRX", (np.pi,), (0, 1)))
        assert qs.prob_one(rho, 1) == pytest.approx(1.0, abs=1e-15)

    def test_crx_idle_with_control_clear(self):
        rho = qs.apply_gate(qs.zero_state(2), qs.Gate("CRX", (np.pi,), (0, 1)))
        assert qs.prob_one(rho, 1) == pytest.approx(0.0, abs=1e-15)

    def test_ry_matrix_convention(self):
        t = 0.7
        expected = [[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]]
        np.testing.assert_allclose(qs.ry(t), expected)

    def test_u3_reduces_to_ry(self):
        np.testing.assert_allclose(qs.u3(0.4, 0.0, 0.0), qs.ry(0.4), atol=1e-15)

    def test_u3_is_rz_ry_rz_up_to_phase(self):
        th, ph, la = 0.3, -1.2, 2.5
        m = qs.rz(ph) @ qs.ry(th) @ qs.rz(la)
        u = qs.u3(th, ph, la)
        phase = u[0, 0] / m[0, 0]
        assert abs(abs(phase) - 1) < 1e-14
        np.testing.assert_allclose(u, phase * m, atol=1e-14)

    def test_unitarity(self, rng):
        for _ in range(50):
            g = random_gate(rng, 2)
            u = qs.gate_matrix(g)
            np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)

    def test_invalid_gates(self):
        with pytest.raises(UsageError):
            qs.Gate("H", (), (0,))
        with pytest.raises(UsageError):
            qs.Gate("CRX", (0.1,), (1, 1))
        with pytest.raises(UsageError):
            qs.Gate("U3", (0.1,), (0,))


class TestApplyGate:
    def test_quarter_turn(self):
        rho = qs.apply_gate(qs.zero_state(1), qs.Gate("RY", (np.pi / 2,), (0,)))
        assert qs.prob_one(rho, 0) == pytest.approx(0.5, abs=1e-15)

    def test_zero_rotation_leaves_state(self, rng):
        rho = random_mixed_state(rng, 3)
        out = qs.apply_gate(rho, qs.Gate("RY", (0.0,), (1,)))
        np.testing.assert_allclose(out.elements, rho.elements, atol=1e-15)

    def test_basis_order_qubit0_is_msb(self):
        rho = qs.apply_gate(qs.zero_state(2), qs.Gate("RY", (np.pi,), (0,)))
        diag = np.real(np.diag(rho.elements))
        np.testing.assert_allclose(diag, [0, 0, 1, 0], atol=1e-15)
        rho = qs.apply_gate(qs.zero_state(2), qs.Gate("RY", (np.pi,), (1,)))
        np.testing.assert_allclose(np.real(np.diag(rho.elements)), [0, 1, 0, 0], atol=1e-15)

    def test_matches_full_kron_conjugation(self, rng):
        rho = random_mixed_state(rng, 3)
        for _ in range(20):
            g = random_gate(rng, 3)
            full = qs.embed(qs.gate_matrix(g), g.targets, 3)
            expected = full @ rho.elements @ full.conj().T
            np.testing.assert_allclose(qs.apply_gate(rho, g).elements, expected, atol=1e-13)

    def test_crx_control_order_matters(self):
        # control on qubit 2, target on qubit 0
        rho = qs.apply_gate(qs.zero_state(3), qs.Gate("RX", (np.pi,), (2,)))
        rho = qs.apply_gate(rho, qs.Gate("CRX", (np.pi,), (2, 0)))
        assert qs.prob_one(rho, 0) == pytest.approx(1.0)
        assert qs.prob_one(rho, 1) == pytest.approx(0.0)

    def test_ansatz_preserves_trace(self):
        # 100 seeds of uniformly drawn ansatz angles
        for seed in range(100):
            theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, 24)
            rho = qs.apply_gates(qs.zero_state(6), build_ansatz(theta, QrnnConfig()))
            assert abs(rho.trace() - 1) < 1e-10

    def test_bad_target(self):
        with pytest.raises(UsageError):
            qs.apply_gate(qs.zero_state(2), qs.Gate("RY", (0.1,), (2,)))

    @pytest.mark.parametrize("kind", ROTATIONS + ("U3", "CRX"))
    def test_inverse_rotation(self, rng, kind):
        rho = random_mixed_state(rng, 3)
        n = qs.GATE_NPARAMS[kind]
        params = tuple(rng.uniform(-np.pi, np.pi, n))
        targets = (0, 2) if kind == "CRX" else (1,)
        fwd = qs.Gate(kind, params, targets)
        if kind == "U3":
            # U3(t, p, l)^-1 = U3(-t, -l, -p)
            back = qs.Gate(kind, (-params[0], -params[2], -params[1]), targets)
        else:
            back = qs.Gate(kind, tuple(-p for p in params), targets)
        out = qs.apply_gate(qs.apply_gate(rho, fwd), back)
        np.testing.assert_allclose(out.elements, rho.elements, atol=1e-10)


class TestProbOne:
    def test_ground_state(self):
        assert qs.prob_one(qs.zero_state(3), 0) == 0

    def test_half_turn_on_qubit1(self):
        rho = qs.apply_gate(qs.zero_state(2), qs.Gate("RY", (np.pi,), (1,)))
        assert qs.prob_one(rho, 1) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize(
        "theta, expected",
        # sin(theta/2)**2 evaluated separately
        [(0.3, 0.02233175543719699), (1.1, 0.27320193928721137), (2.9, 0.9854790825747952)],
    )
    def test_closed_form(self, theta, expected):
        rho = qs.apply_gate(qs.zero_state(1), qs.Gate("RY", (theta,), (0,)))
        assert qs.prob_one(rho, 0) == pytest.approx(expected, abs=1e-12)

    def test_bad_index(self):
        with pytest.raises(UsageError):
            qs.prob_one(qs.zero_state(2), 5)

    def test_linearity(self, rng):
        for _ in range(20):
            a, b = random_mixed_state(rng, 3), random_mixed_state(rng, 3)
            p = rng.uniform()
            q = int(rng.integers(3))
            lhs = qs.prob_one(qs.mix(p, a, b), q)
            rhs = p * qs.prob_one(a, q) + (1 - p) * qs.prob_one(b, q)
            assert abs(lhs - rhs) < 1e-12


class TestReset:
    def test_excited_to_ground(self):
        one = qs.DensityMatrix(1, np.array([[0, 0], [0, 1]], dtype=complex))
        np.testing.assert_array_equal(qs.reset_qubits(one, [0]).elements, [[1, 0], [0, 0]])

    def test_bell_state(self):
        bell = qs.pure_state(np.array([1, 0, 0, 1]) / np.sqrt(2))
        out = qs.reset_qubits(bell, [1])
        np.testing.assert_allclose(out.elements, np.diag([0.5, 0, 0.5, 0]), atol=1e-15)

    def test_memory_register_unchanged(self, rng):
        for _ in range(20):
            rho = random_product_state(rng, 6)
            before = rho.reduced([3, 4, 5])
            after = qs.reset_qubits(rho, [0, 1, 2])
            np.testing.assert_allclose(after.reduced([3, 4, 5]), before, atol=1e-12)
            for q in (0, 1, 2):
                assert qs.prob_one(after, q) < 1e-15

    def test_reduced_matches_direct_partial_trace(self, rng):
        rho = random_mixed_state(rng, 4)
        t = rho.elements.reshape(4, 4, 4, 4)  # (q0q1, q2q3) x (q0q1, q2q3)
        direct = np.einsum("aiaj->ij", t)
        np.testing.assert_allclose(rho.reduced([2, 3]), direct, atol=1e-14)

    def test_idempotent(self, rng):
        rho = random_mixed_state(rng, 4)
        once = qs.reset_qubits(rho, [0, 2])
        twice = qs.reset_qubits(once, [0, 2])
        np.testing.assert_allclose(twice.elements, once.elements, atol=1e-15)

    def test_bad_indices(self):
        with pytest.raises(UsageError):
            qs.reset_qubits(qs.zero_state(2), [0, 0])
        with pytest.raises(UsageError):
            qs.reset_qubits(qs.zero_state(2), [3])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), length=st.integers(1, 30))
def test_random_sequences_stay_physical(seed, length):
    rng = np.random.default_rng(seed)
    rho = qs.zero_state(6)
    for _ in range(length):
        if rng.uniform() < 0.2:
            k = int(rng.integers(1, 4))
            rho = qs.reset_qubits(rho, rng.choice(6, k, replace=False))
        else:
            rho = qs.apply_gate(rho, random_gate(rng, 6))
    assert_physical(rho)
