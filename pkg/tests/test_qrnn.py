import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrnn_evo import qrnn
from qrnn_evo import quantum_sim as qs
from qrnn_evo.errors import ConfigurationError, UsageError
from qrnn_evo.qrnn import ClampCounter, CompiledQrnn, QrnnConfig

CFG = QrnnConfig()
ZERO = np.zeros(24)


def s(u):
    return np.sin(np.pi * u / 2) ** 2


def reference_run(xs, theta, cfg=CFG):
    """Gate-by-gate run on the full register."""
    rho = qs.zero_state(cfg.n_qubits)
    ys = []
    for x in xs:
        rho, y = qrnn.step(rho, x, theta, cfg)
        ys.append(y)
    return np.array(ys), rho


class TestConfig:
    def test_defaults(self):
        assert (CFG.n_io, CFG.n_mem, CFG.n_params, CFG.output_qubit) == (3, 3, 24, 0)
        assert CFG.encoding_scale == pytest.approx(np.pi)

    def test_param_count_must_match(self):
        with pytest.raises(ConfigurationError):
            QrnnConfig(n_params=20)

    def test_output_qubit_in_io_register(self):
        with pytest.raises(ConfigurationError):
            QrnnConfig(output_qubit=3)


class TestEncode:
    def test_zero_input_is_identity(self):
        rho = qrnn.encode(qs.zero_state(6), 0.0)
        np.testing.assert_array_equal(rho.elements, qs.zero_state(6).elements)

    @pytest.mark.parametrize("x, p", [(1.0, 1.0), (0.5, 0.5)])
    def test_io_populations(self, x, p):
        rho = qrnn.encode(qs.zero_state(6), x)
        for q in CFG.io_qubits:
            assert qs.prob_one(rho, q) == pytest.approx(p, abs=1e-14)
        for q in CFG.mem_qubits:
            assert qs.prob_one(rho, q) == pytest.approx(0.0, abs=1e-14)

    def test_out_of_range_is_clamped_and_counted(self):
        counter = ClampCounter()
        rho = qrnn.encode(qs.zero_state(6), 1.3, clamp=counter)
        assert counter.count == 1
        assert qs.prob_one(rho, 0) == pytest.approx(1.0)
        qrnn.encode(qs.zero_state(6), -0.2, clamp=counter)
        assert counter.count == 2


class TestAnsatz:
    def test_twelve_gates(self):
        gates = qrnn.build_ansatz(ZERO)
        assert len(gates) == 12
        assert [g.kind for g in gates] == ["U3"] * 6 + ["CRX"] * 6
        assert [g.targets for g in gates[6:]] == [(i, (i + 1) % 6) for i in range(6)]

    def test_zero_params_is_identity(self):
        np.testing.assert_allclose(qrnn.ansatz_unitary(ZERO), np.eye(64), atol=1e-15)

    def test_every_parameter_used_once(self):
        used = sorted(i for _, idx, _ in qrnn.ansatz_layout(CFG) for i in idx)
        assert used == list(range(24))

    def test_wrong_length(self):
        with pytest.raises(UsageError):
            qrnn.build_ansatz(np.zeros(23))

    def test_nonfinite(self):
        theta = ZERO.copy()
        theta[3] = np.nan
        with pytest.raises(UsageError):
            qrnn.build_ansatz(theta)

    def test_first_coupling_needs_control_excitation(self):
        # theta[18] drives CRX(0 -> 1); look at the target qubit
        theta = ZERO.copy()
        theta[18] = 0.9
        ground = qs.zero_state(6)
        excited = qs.apply_gate(ground, qs.Gate("RX", (np.pi,), (0,)))
        for start, changes in ((ground, False), (excited, True)):
            base = qs.prob_one(qs.apply_gates(start, qrnn.build_ansatz(ZERO)), 1)
            moved = qs.prob_one(qs.apply_gates(start, qrnn.build_ansatz(theta)), 1)
            assert (abs(moved - base) > 1e-3) == changes


class TestStep:
    def test_identity_passes_encoding(self):
        rho, y = qrnn.step(qs.zero_state(6), 0.5, ZERO)
        assert y == pytest.approx(0.5, abs=1e-14)
        np.testing.assert_allclose(rho.reduced(CFG.mem_qubits), qs.zero_state(3).elements, atol=1e-14)

    @pytest.mark.parametrize("x", [0.0, 0.13, 0.5, 0.77, 1.0])
    def test_identity_closed_form(self, x):
        _, y = qrnn.step(qs.zero_state(6), x, ZERO)
        assert y == pytest.approx(s(x), abs=1e-14)

    def test_io_qubits_reset(self, rng):
        theta = rng.uniform(-np.pi, np.pi, 24)
        rho, _ = qrnn.step(qs.zero_state(6), 0.4, theta)
        for q in CFG.io_qubits:
            assert qs.prob_one(rho, q) < 1e-14

    def test_identity_has_no_memory(self):
        a, _ = reference_run([0.2, 0.7], ZERO)
        b, _ = reference_run([0.9, 0.7], ZERO)
        assert a[1] == pytest.approx(b[1], abs=1e-14)

    def test_generic_theta_has_memory(self, rng):
        theta = rng.uniform(-np.pi, np.pi, 24)
        a, _ = reference_run([0.2, 0.7], theta)
        b, _ = reference_run([0.9, 0.7], theta)
        assert abs(a[1] - b[1]) > 1e-6


class TestCompiledAgainstReference:
    def test_outputs_and_memory(self, rng):
        for _ in range(5):
            theta = rng.uniform(-np.pi, np.pi, 24)
            xs = rng.uniform(0, 1, 8)
            ys, rho = reference_run(xs, theta)
            model = CompiledQrnn(theta)
            fast_ys, mems = model.teacher_forced(xs)
            np.testing.assert_allclose(fast_ys, ys, atol=1e-12)
            np.testing.assert_allclose(mems[-1], rho.reduced(CFG.mem_qubits), atol=1e-12)

    @pytest.mark.parametrize("cfg", [QrnnConfig(output_qubit=2), QrnnConfig(n_io=2, n_mem=2, n_params=16)])
    def test_other_configs(self, rng, cfg):
        theta = rng.uniform(-np.pi, np.pi, cfg.n_params)
        xs = rng.uniform(0, 1, 6)
        ys, _ = reference_run(xs, theta, cfg)
        np.testing.assert_allclose(qrnn.run_sequence(xs, theta, cfg), ys, atol=1e-12)

    def test_forecast_matches_reference_feedback(self, rng):
        theta = rng.uniform(-np.pi, np.pi, 24)
        history = rng.uniform(0, 1, 5)
        ys, rho = reference_run(history, theta)
        expected = [ys[-1]]
        for _ in range(3):
            rho, y = qrnn.step(rho, expected[-1], theta)
            expected.append(y)
        np.testing.assert_allclose(qrnn.forecast(history, theta, horizon=4), expected, atol=1e-12)


class TestRunSequence:
    def test_single_point(self):
        np.testing.assert_allclose(qrnn.run_sequence([0.5], ZERO), [0.5], atol=1e-14)

    def test_deterministic(self, rng):
        theta = rng.uniform(-np.pi, np.pi, 24)
        xs = rng.uniform(0, 1, 20)
        a = qrnn.run_sequence(xs, theta)
        b = qrnn.run_sequence(xs.copy(), theta.copy())
        assert a.tobytes() == b.tobytes()

    def test_empty(self):
        with pytest.raises(UsageError):
            qrnn.run_sequence([], ZERO)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 80), seed=st.integers(0, 10_000))
    def test_length(self, n, seed):
        rng = np.random.default_rng(seed)
        ys = qrnn.run_sequence(rng.uniform(0, 1, n), rng.uniform(-np.pi, np.pi, 24))
        assert ys.shape == (n,)
        assert np.all((ys >= -1e-12) & (ys <= 1 + 1e-12))


class TestForecast:
    def test_horizon_one_is_last_teacher_output(self, rng):
        theta = rng.uniform(-np.pi, np.pi, 24)
        history = rng.uniform(0, 1, 12)
        f = qrnn.forecast(history, theta, horizon=1)
        assert f.shape == (1,)
        assert f[0] == pytest.approx(qrnn.run_sequence(history, theta)[-1], abs=1e-15)

    def test_identity_closed_form(self):
        x = 0.3
        np.testing.assert_allclose(qrnn.forecast([0.8, x], ZERO, horizon=2), [s(x), s(s(x))], atol=1e-14)

    def test_bad_horizon(self):
        with pytest.raises(ConfigurationError):
            qrnn.forecast([0.1, 0.2], ZERO, horizon=0)

    def test_rolling_matches_individual(self, rng):
        theta = rng.uniform(-np.pi, np.pi, 24)
        series = rng.uniform(0, 1, 15)
        model = CompiledQrnn(theta)
        origins = [3, 7, 11]
        batch = model.rolling_forecasts(series, origins, 3)
        for row, t0 in zip(batch, origins):
            np.testing.assert_allclose(row, qrnn.forecast(series[: t0 + 1], theta, horizon=3), atol=1e-13)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(1, 6))
    def test_prefix_consistency(self, seed, k):
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-np.pi, np.pi, 24)
        history = rng.uniform(0, 1, 6)
        full = qrnn.forecast(history, theta, horizon=k)
        assert np.all((full >= 0) & (full <= 1 + 1e-12))
        for j in range(1, k + 1):
            np.testing.assert_array_equal(qrnn.forecast(history, theta, horizon=j), full[:j])


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_identity_is_memoryless_under_permutation(seed):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0, 1, 6)
    perm = np.concatenate([rng.permutation(xs[:-1]), xs[-1:]])
    assert qrnn.run_sequence(xs, ZERO)[-1] == pytest.approx(qrnn.run_sequence(perm, ZERO)[-1], abs=1e-14)


def test_continuity_in_each_parameter(rng):
    theta = rng.uniform(-np.pi, np.pi, 24)
    xs = rng.uniform(0, 1, 10)
    base = qrnn.run_sequence(xs, theta)
    for i in range(24):
        bumped = theta.copy()
        bumped[i] += 1e-6
        assert np.max(np.abs(qrnn.run_sequence(xs, bumped) - base)) < 1e-4
