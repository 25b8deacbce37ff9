import numpy as np
import pytest

from qrnn_evo import quantum_sim as qs

ROTATIONS = ("RX", "RY", "RZ")


def random_gate(rng, n_qubits):
    kind = rng.choice(["RX", "RY", "RZ", "U3", "CRX"])
    if kind == "CRX":
        targets = tuple(int(q) for q in rng.choice(n_qubits, 2, replace=False))
    else:
        targets = (int(rng.integers(n_qubits)),)
    params = tuple(rng.uniform(-np.pi, np.pi, qs.GATE_NPARAMS[kind]))
    return qs.Gate(str(kind), params, targets)


def random_product_state(rng, n_qubits):
    psi = np.array([1.0 + 0j])
    for _ in range(n_qubits):
        q = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = np.kron(psi, q / np.linalg.norm(q))
    return qs.pure_state(psi)


def random_mixed_state(rng, n_qubits, rank=3):
    dim = 2**n_qubits
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return qs.DensityMatrix(n_qubits, rho / np.trace(rho))


def assert_physical(rho, trace_tol=1e-10, herm_tol=1e-12, eig_tol=1e-10):
    m = rho.elements
    assert abs(np.trace(m) - 1) < trace_tol
    assert np.max(np.abs(m - m.conj().T)) < herm_tol
    assert np.linalg.eigvalsh((m + m.conj().T) / 2).min() > -eig_tol


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
