"""Dense density-matrix simulator for a handful of qubits.

Basis convention: qubit 0 is the most significant bit of the basis index.
On a 2-qubit register, flipping qubit 0 moves |00> to basis index 2 (|10>),
flipping qubit 1 moves it to index 1 (|01>).

Readout is the exact probability Tr(rho P1), never a sampled estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, UsageError

MAX_QUBITS = 10

GATE_ARITY = {"RX": 1, "RY": 1, "RZ": 1, "U3": 1, "CRX": 2}
GATE_NPARAMS = {"RX": 1, "RY": 1, "RZ": 1, "U3": 3, "CRX": 1}


@dataclass(frozen=True)
class DensityMatrix:
    """Joint state of ``n_qubits`` qubits as a 2^n x 2^n complex matrix.

    Instances are treated as immutable: every operation returns a new one.
    """

    n_qubits: int
    elements: np.ndarray

    def __post_init__(self):
        dim = 2**self.n_qubits
        if self.elements.shape != (dim, dim):
            raise UsageError(
                f"expected a {dim}x{dim} matrix for {self.n_qubits} qubits, "
                f"got shape {self.elements.shape}"
            )

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def reduced(self, keep: Sequence[int]) -> np.ndarray:
        """Partial trace over every qubit not listed in ``keep`` (kept in given order)."""
        keep = _check_indices(keep, self.n_qubits)
        n = self.n_qubits
        traced = [q for q in range(n) if q not in keep]
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        rows = list(letters[:n])
        cols = list(letters[n : 2 * n])
        for q in traced:
            cols[q] = rows[q]
        out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
        t = self.elements.reshape((2,) * (2 * n))
        k = 2 ** len(keep)
        return np.einsum("".join(rows) + "".join(cols) + "->" + out, t).reshape(k, k)


@dataclass(frozen=True)
class Gate:
    """A gate kind, its angles (radians) and target qubits (control first for CRX)."""

    kind: str
    params: tuple[float, ...]
    targets: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise UsageError(f"unknown gate kind {self.kind!r}")
        if len(self.params) != GATE_NPARAMS[self.kind]:
            raise UsageError(
                f"{self.kind} takes {GATE_NPARAMS[self.kind]} angle(s), got {len(self.params)}"
            )
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise UsageError(
                f"{self.kind} acts on {GATE_ARITY[self.kind]} qubit(s), got {len(self.targets)}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise UsageError(f"repeated target qubit in {self.targets}")


def zero_state(n_qubits: int) -> DensityMatrix:
    """Return |0...0><0...0| on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits!r}")
    dim = 2**n_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(int(n_qubits), rho)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex
    )


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    # RZ(phi) RY(theta) RZ(lam) up to a global phase; each angle is a
    # rotation with generator eigenvalues +-1/2.
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def crx(theta: float) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[2:, 2:] = rx(theta)
    return m


_MATRICES = {"RX": rx, "RY": ry, "RZ": rz, "U3": u3, "CRX": crx}


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of ``gate`` on its own targets (2x2, or 4x4 with the control as MSB)."""
    return _MATRICES[gate.kind](*gate.params)


def _check_indices(qubits: Sequence[int], n_qubits: int) -> list[int]:
    qubits = [int(q) for q in qubits]
    if len(set(qubits)) != len(qubits):
        raise UsageError(f"qubit indices must be distinct, got {qubits}")
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise UsageError(f"qubit index {q} out of range for {n_qubits} qubits")
    return qubits


def apply_operator_left(
    tensor: np.ndarray, op: np.ndarray, targets: Sequence[int], n_qubits: int
) -> np.ndarray:
    """Left-multiply a 2^n x 2^n matrix by ``op`` embedded on ``targets``."""
    k = len(targets)
    t = tensor.reshape((2,) * (2 * n_qubits))
    opt = op.reshape((2,) * (2 * k))
    t = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), list(targets)))
    t = np.moveaxis(t, list(range(k)), list(targets))
    return t.reshape(tensor.shape)


def embed(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of ``op`` acting on ``targets``, identity elsewhere."""
    targets = _check_indices(targets, n_qubits)
    dim = 2**n_qubits
    return apply_operator_left(np.eye(dim, dtype=complex), op, targets, n_qubits)


def apply_unitary(rho: DensityMatrix, op: np.ndarray, targets: Sequence[int]) -> DensityMatrix:
    """Conjugate ``rho`` by ``op`` acting on ``targets``: rho -> U rho U^dagger."""
    n = rho.n_qubits
    targets = _check_indices(targets, n)
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise UsageError(f"operator shape {op.shape} does not match {k} target(s)")
    t = apply_operator_left(rho.elements, op, targets, n).reshape((2,) * (2 * n))
    opc = op.conj().reshape((2,) * (2 * k))
    col_axes = [n + q for q in targets]
    t = np.tensordot(t, opc, axes=(col_axes, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), col_axes)
    return DensityMatrix(n, t.reshape(rho.elements.shape))


def apply_gate(rho: DensityMatrix, gate: Gate) -> DensityMatrix:
    return apply_unitary(rho, gate_matrix(gate), gate.targets)


def apply_gates(rho: DensityMatrix, gates: Sequence[Gate]) -> DensityMatrix:
    for gate in gates:
        rho = apply_gate(rho, gate)
    return rho


def one_mask(qubit: int, n_qubits: int) -> np.ndarray:
    """Boolean mask over basis indices whose ``qubit`` bit is 1."""
    idx = np.arange(2**n_qubits)
    return ((idx >> (n_qubits - 1 - qubit)) & 1).astype(bool)


def prob_one(rho: DensityMatrix, qubit: int) -> float:
    """Exact probability of reading 1 on ``qubit``."""
    (qubit,) = _check_indices([qubit], rho.n_qubits)
    diag = np.real(np.diagonal(rho.elements))
    return float(np.sum(diag[one_mask(qubit, rho.n_qubits)]))


def reset_qubits(rho: DensityMatrix, qubits: Sequence[int]) -> DensityMatrix:
    """Trace out ``qubits`` and put each back in |0><0| at its original position."""
    n = rho.n_qubits
    qubits = _check_indices(qubits, n)
    t = rho.elements.reshape((2,) * (2 * n))
    for q in qubits:
        diag0 = [slice(None)] * (2 * n)
        diag1 = [slice(None)] * (2 * n)
        diag0[q] = diag0[n + q] = 0
        diag1[q] = diag1[n + q] = 1
        traced = t[tuple(diag0)] + t[tuple(diag1)]
        t = np.zeros_like(t)
        t[tuple(diag0)] = traced
    return DensityMatrix(n, t.reshape(rho.elements.shape))


def mix(p: float, a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Convex combination p*a + (1-p)*b."""
    if a.n_qubits != b.n_qubits:
        raise UsageError("cannot mix states of different sizes")
    return DensityMatrix(a.n_qubits, p * a.elements + (1 - p) * b.elements)


def pure_state(amplitudes: np.ndarray) -> DensityMatrix:
    """Density matrix of a (normalised) state vector."""
    psi = np.asarray(amplitudes, dtype=complex)
    n = int(round(np.log2(psi.size)))
    if 2**n != psi.size:
        raise UsageError("state vector length must be a power of two")
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(n, np.outer(psi, psi.conj()))
