"""Quantum recurrent network: angle encoding, the recurring ansatz, and forecasting.

The register holds ``n_io`` input/output qubits (indices ``0..n_io-1``)
followed by ``n_mem`` memory qubits. Each timestep resets the I/O qubits,
encodes the input on each of them with RY, applies the ansatz and reads out
P(1) on the output qubit. Only the memory register survives between steps.

Two evaluation paths exist. ``step`` works gate by gate on full
``DensityMatrix`` objects and is the reference. ``CompiledQrnn`` folds the
ansatz into one unitary and carries only the memory block between steps;
``run_sequence`` and ``forecast`` use it, and the tests pin both paths
together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import quantum_sim as qs
from .errors import ConfigurationError, UsageError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QrnnConfig:
    n_io: int = 3
    n_mem: int = 3
    n_params: int = 24
    output_qubit: int = 0
    encoding_scale: float = np.pi

    def __post_init__(self):
        if self.n_io < 1 or self.n_mem < 0:
            raise ConfigurationError("need at least one I/O qubit")
        if self.n_qubits > qs.MAX_QUBITS:
            raise ConfigurationError(f"at most {qs.MAX_QUBITS} qubits supported")
        if self.n_params != 4 * self.n_qubits:
            raise ConfigurationError(
                f"ansatz over {self.n_qubits} qubits takes {4 * self.n_qubits} parameters, "
                f"config says {self.n_params}"
            )
        if not 0 <= self.output_qubit < self.n_io:
            raise ConfigurationError("output_qubit must index the I/O register")

    @property
    def n_qubits(self) -> int:
        return self.n_io + self.n_mem

    @property
    def io_qubits(self) -> list[int]:
        return list(range(self.n_io))

    @property
    def mem_qubits(self) -> list[int]:
        return list(range(self.n_io, self.n_qubits))


@dataclass(frozen=True)
class ForecastTask:
    """Forecast ``horizon`` points after observing the series up to index ``t0``."""

    t0: int
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError("forecast horizon must be >= 1")
        if self.t0 < 0:
            raise ConfigurationError("t0 must be a valid index")


class ClampCounter:
    """Counts inputs pushed back into [0, 1] before encoding."""

    def __init__(self):
        self.count = 0

    def clamp(self, x):
        x = np.asarray(x, dtype=float)
        bad = (x < 0.0) | (x > 1.0)
        n_bad = int(np.count_nonzero(bad))
        if n_bad:
            self.count += n_bad
            log.debug("clamped %d encoder input(s) into [0, 1]", n_bad)
        return np.clip(x, 0.0, 1.0)


def check_params(theta, cfg: QrnnConfig) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cfg.n_params,):
        raise UsageError(f"expected {cfg.n_params} parameters, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise UsageError("parameters must be finite")
    return theta


def ansatz_layout(cfg: QrnnConfig) -> list[tuple[str, tuple[int, ...], tuple[int, ...]]]:
    """(gate kind, parameter indices, target qubits) for each ansatz gate, in order.

    A general single-qubit rotation on every qubit, then a ring of
    controlled-RX gates i -> (i+1) mod n. Swapping the gate assignment only
    requires editing this function.
    """
    n = cfg.n_qubits
    layout = [("U3", (3 * q, 3 * q + 1, 3 * q + 2), (q,)) for q in range(n)]
    layout += [("CRX", (3 * n + i,), (i, (i + 1) % n)) for i in range(n)]
    return layout


def build_ansatz(theta, cfg: QrnnConfig = QrnnConfig()) -> list[qs.Gate]:
    theta = check_params(theta, cfg)
    return [
        qs.Gate(kind, tuple(float(theta[i]) for i in idx), targets)
        for kind, idx, targets in ansatz_layout(cfg)
    ]


def ansatz_unitary(theta, cfg: QrnnConfig = QrnnConfig()) -> np.ndarray:
    """Full 2^n x 2^n unitary of the ansatz."""
    n = cfg.n_qubits
    u = np.eye(2**n, dtype=complex)
    for gate in build_ansatz(theta, cfg):
        u = qs.apply_operator_left(u, qs.gate_matrix(gate), gate.targets, n)
    return u


def encode(
    rho: qs.DensityMatrix,
    x_norm: float,
    cfg: QrnnConfig = QrnnConfig(),
    clamp: ClampCounter | None = None,
) -> qs.DensityMatrix:
    """Apply RY(encoding_scale * x_norm) to every I/O qubit."""
    x = (clamp or ClampCounter()).clamp(x_norm)
    angle = cfg.encoding_scale * float(x)
    for q in cfg.io_qubits:
        rho = qs.apply_gate(rho, qs.Gate("RY", (angle,), (q,)))
    return rho


def step(
    rho: qs.DensityMatrix,
    x_norm: float,
    theta,
    cfg: QrnnConfig = QrnnConfig(),
    clamp: ClampCounter | None = None,
) -> tuple[qs.DensityMatrix, float]:
    """One recurrent step on the full register; returns (next state, prediction)."""
    rho = encode(rho, x_norm, cfg, clamp)
    rho = qs.apply_gates(rho, build_ansatz(theta, cfg))
    y = qs.prob_one(rho, cfg.output_qubit)
    return qs.reset_qubits(rho, cfg.io_qubits), y


def product_amplitudes(angles) -> np.ndarray:
    """Amplitudes of (x)_q RY(a_q)|0> for per-qubit angles of shape (..., n)."""
    angles = np.asarray(angles, dtype=float)
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    amps = np.ones(angles.shape[:-1] + (1,))
    for q in range(angles.shape[-1]):
        amps = np.concatenate([amps * c[..., q, None], amps * s[..., q, None]], axis=-1)
    return amps


def encoding_amplitudes(angles, n_io: int) -> np.ndarray:
    """Amplitudes of RY(a)^{(x)n_io}|0...0> for each angle; shape (..., 2^n_io)."""
    angles = np.asarray(angles, dtype=float)
    return product_amplitudes(np.repeat(angles[..., None], n_io, axis=-1))


class CompiledQrnn:
    """The recurrent model for a fixed parameter vector, acting on memory blocks.

    The state between steps is the reduced density matrix of the memory
    register, shape ``(..., d_mem, d_mem)``. Leading axes batch independent
    trajectories.
    """

    def __init__(self, theta, cfg: QrnnConfig = QrnnConfig(), clamp: ClampCounter | None = None):
        self.cfg = cfg
        self.theta = check_params(theta, cfg)
        self.clamp = clamp or ClampCounter()
        self.d_io = 2**cfg.n_io
        self.d_mem = 2**cfg.n_mem
        self.unitary = ansatz_unitary(self.theta, cfg)
        self._u_amp_last = self.amp_last(self.unitary)
        io = np.arange(self.d_io)
        self.out_mask = ((io >> (cfg.n_io - 1 - cfg.output_qubit)) & 1).astype(float)

    def blocks(self, unitary: np.ndarray) -> np.ndarray:
        """Reshape a full unitary to (..., out_io, out_mem, in_io, in_mem)."""
        d_io, d_mem = self.d_io, self.d_mem
        return unitary.reshape(unitary.shape[:-2] + (d_io, d_mem, d_io, d_mem))

    def amp_last(self, unitary: np.ndarray) -> np.ndarray:
        """Blocks with the input I/O index moved last: (..., out_io, out_mem, in_mem, in_io)."""
        return np.ascontiguousarray(np.moveaxis(self.blocks(unitary), -2, -1))

    def initial_memory(self) -> np.ndarray:
        m = np.zeros((self.d_mem, self.d_mem), dtype=complex)
        m[0, 0] = 1.0
        return m

    def angles(self, x_norm) -> np.ndarray:
        return self.cfg.encoding_scale * self.clamp.clamp(x_norm)

    def isometry(self, amps: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
        """Blocks V_i = sum_j U[i, :, j, :] amps_j.

        ``amps`` has shape (B, d_io) and ``u`` (from ``amp_last``) shape
        (*U, d_io, d_mem, d_mem, d_io); the result has shape (B, *U, d_io, d_mem, d_mem).
        """
        u = self._u_amp_last if u is None else u
        return np.tensordot(amps, u, axes=([-1], [-1]))

    @staticmethod
    def conjugate(v: np.ndarray, mem: np.ndarray) -> np.ndarray:
        """X_i = V_i M V_i^dagger for every output I/O index i."""
        return v @ mem[..., None, :, :] @ np.conj(np.swapaxes(v, -1, -2))

    def readout(self, x: np.ndarray) -> np.ndarray:
        tr = np.real(np.trace(x, axis1=-2, axis2=-1))
        return tr @ self.out_mask

    @staticmethod
    def trace_io(x: np.ndarray) -> np.ndarray:
        return x.sum(axis=-3)

    def propagate(self, mem: np.ndarray, x_norm) -> tuple[np.ndarray, np.ndarray]:
        """Advance memory states by one step on inputs ``x_norm``; returns (mem, y)."""
        amps = encoding_amplitudes(self.angles(x_norm), self.cfg.n_io)
        x = self.conjugate(self.isometry(amps), mem)
        return self.trace_io(x), self.readout(x)

    def run_sequence(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 1 or xs.size == 0:
            raise UsageError("run_sequence needs a non-empty 1-D series")
        mem = self.initial_memory()
        ys = np.empty(xs.size)
        for t, x in enumerate(xs):
            mem, y = self.propagate(mem, x)
            ys[t] = y
        return ys

    def teacher_forced(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Outputs and memory states after each teacher-forced step."""
        xs = np.asarray(xs, dtype=float)
        mem = self.initial_memory()
        ys = np.empty(xs.size)
        mems = np.empty((xs.size, self.d_mem, self.d_mem), dtype=complex)
        for t, x in enumerate(xs):
            mem, ys[t] = self.propagate(mem, x)
            mems[t] = mem
        return ys, mems

    def rolling_forecasts(self, series, origins: Sequence[int], horizon: int) -> np.ndarray:
        """Iterative forecasts from every origin; shape (len(origins), horizon).

        Row k predicts ``series[origins[k] + 1 : origins[k] + 1 + horizon]``
        having seen ``series[: origins[k] + 1]``.
        """
        if horizon < 1:
            raise ConfigurationError("forecast horizon must be >= 1")
        origins = np.asarray(origins, dtype=int)
        series = np.asarray(series, dtype=float)
        if origins.size == 0:
            raise UsageError("no forecast origins")
        if origins.min() < 0 or origins.max() >= series.size:
            raise UsageError("forecast origin outside the series")
        ys, mems = self.teacher_forced(series[: origins.max() + 1])
        preds = np.empty((origins.size, horizon))
        preds[:, 0] = ys[origins]
        mem = mems[origins]
        for j in range(1, horizon):
            mem, preds[:, j] = self.propagate(mem, preds[:, j - 1])
        return preds

    def forecast(self, history, horizon: int) -> np.ndarray:
        history = np.asarray(history, dtype=float)
        if history.ndim != 1 or history.size == 0:
            raise UsageError("forecast needs a non-empty history")
        return self.rolling_forecasts(history, [history.size - 1], horizon)[0]


def run_sequence(xs, theta, cfg: QrnnConfig = QrnnConfig()) -> np.ndarray:
    """Teacher-forced run from a fresh register; ys[t] predicts xs[t + 1]."""
    return CompiledQrnn(theta, cfg).run_sequence(xs)


def forecast(history, theta, cfg: QrnnConfig = QrnnConfig(), horizon: int = 1) -> np.ndarray:
    """Consume ``history`` then feed predictions back for ``horizon`` outputs in total."""
    if horizon < 1:
        raise ConfigurationError("forecast horizon must be >= 1")
    return CompiledQrnn(theta, cfg).forecast(history, horizon)
