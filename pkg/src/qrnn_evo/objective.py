"""Training loss, forecast metric and gradient estimators.

The parameter vector is reused at every timestep, so the gradient of a
recurrent loss sums one contribution per occurrence of each parameter.
``grad_parameter_shift`` obtains every per-step partial derivative from
shifted evaluations of that step (two-term rule for U3 angles, four-term
rule for controlled-RX angles) and carries them forward through the
recurrence, including through predictions that are fed back as inputs.
``grad_finite_diff`` is the independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UsageError
from .qrnn import ClampCounter, CompiledQrnn, QrnnConfig, ansatz_layout, check_params, encoding_amplitudes, product_amplitudes

ONE_STEP = "one-step"
MULTI_STEP = "multi-step"

_C_PLUS = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
_C_MINUS = (np.sqrt(2) - 1) / (4 * np.sqrt(2))

# (coefficient, shift) pairs: d f/d theta = sum c * f(theta + s)
TWO_TERM = ((0.5, np.pi / 2), (-0.5, -np.pi / 2))
FOUR_TERM = (
    (_C_PLUS, np.pi / 2),
    (-_C_PLUS, -np.pi / 2),
    (-_C_MINUS, 3 * np.pi / 2),
    (_C_MINUS, -3 * np.pi / 2),
)
SHIFT_RULES = {"RX": TWO_TERM, "RY": TWO_TERM, "RZ": TWO_TERM, "U3": TWO_TERM, "CRX": FOUR_TERM}


def shift_rule_for_params(cfg: QrnnConfig) -> list[tuple[tuple[float, float], ...]]:
    """The shift rule that applies to each entry of the parameter vector."""
    rules = [None] * cfg.n_params
    for kind, idx, _ in ansatz_layout(cfg):
        for i in idx:
            rules[i] = SHIFT_RULES[kind]
    return rules


def shift_derivative(f: Callable[[float], float], x: float, rule=TWO_TERM) -> float:
    """Derivative of a single-angle expectation ``f`` at ``x`` via a shift rule."""
    return float(sum(c * f(x + s) for c, s in rule))


@dataclass(frozen=True)
class LossSpec:
    mode: str = MULTI_STEP
    horizon: int = 1

    def __post_init__(self):
        if self.mode not in (ONE_STEP, MULTI_STEP):
            raise ConfigurationError(f"unknown loss mode {self.mode!r}")
        if self.horizon < 1:
            raise ConfigurationError("loss horizon must be >= 1")

    @property
    def steps(self) -> int:
        return 1 if self.mode == ONE_STEP else self.horizon


@dataclass
class EvalReport:
    train_loss: float
    test_rel_rmse: float
    circuit_evals: int


class LossContext:
    """A normalized training series together with the loss definition."""

    def __init__(self, series, spec: LossSpec = LossSpec(), cfg: QrnnConfig = QrnnConfig()):
        self.series = np.asarray(series, dtype=float)
        self.spec = spec
        self.cfg = cfg
        steps = spec.steps
        if self.series.ndim != 1 or self.series.size <= steps + 1:
            raise ConfigurationError(
                f"training split of length {self.series.size} too short for "
                f"{steps}-step loss (need more than {steps + 1} points)"
            )
        self.origins = np.arange(self.series.size - steps)
        idx = self.origins[:, None] + 1 + np.arange(steps)[None, :]
        self.targets = self.series[idx]

    @property
    def n_occurrences(self) -> int:
        """Ansatz applications in one loss evaluation."""
        return self.origins.size + self.n_feedback

    @property
    def n_feedback(self) -> int:
        """Steps whose input is a fed-back prediction."""
        return self.origins.size * (self.spec.steps - 1)

    def predictions(self, theta, clamp: ClampCounter | None = None) -> np.ndarray:
        model = CompiledQrnn(theta, self.cfg, clamp)
        return model.rolling_forecasts(self.series, self.origins, self.spec.steps)


def loss_cost() -> int:
    return 1


def gradient_cost(ctx: LossContext) -> int:
    """Full-sequence evaluations charged for one parameter-shift gradient.

    One unshifted evaluation, plus for every ansatz occurrence one shifted
    evaluation per shift term of every parameter (2 for U3 angles, 4 for
    controlled-RX angles), plus two per I/O qubit for every fed-back input.
    """
    per_occurrence = sum(len(rule) for rule in shift_rule_for_params(ctx.cfg))
    return 1 + per_occurrence * ctx.n_occurrences + 2 * ctx.cfg.n_io * ctx.n_feedback


def rel_rmse(pred, truth) -> float:
    """RMS of the error divided by the RMS of the truth."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.size != truth.size or truth.size == 0:
        raise UsageError(f"length mismatch or empty input: {pred.size} vs {truth.size}")
    denom = np.sqrt(np.mean(truth**2))
    if denom == 0.0:
        raise UsageError("relative RMSE undefined: truth is identically zero")
    return float(np.sqrt(np.mean((pred - truth) ** 2)) / denom)


def train_loss(theta, ctx: LossContext) -> float:
    """Mean squared error (normalized space) of the forecasts over all origins."""
    preds = ctx.predictions(theta)
    return float(np.mean((preds - ctx.targets) ** 2))


def grad_finite_diff(loss: Callable[[np.ndarray], float], theta, h: float = 1e-5) -> np.ndarray:
    """Central differences (L(theta + h e_i) - L(theta - h e_i)) / 2h."""
    if h <= 0:
        raise UsageError("finite-difference step must be positive")
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        grad[i] = (loss(theta + e) - loss(theta - e)) / (2 * h)
    return grad


class _ShiftedModel:
    """Per-parameter shifted unitaries for one parameter vector."""

    def __init__(self, model: CompiledQrnn):
        cfg = model.cfg
        rules = shift_rule_for_params(cfg)
        coefs, owners, unitaries = [], [], []
        for p, rule in enumerate(rules):
            for c, s in rule:
                shifted = model.theta.copy()
                shifted[p] += s
                coefs.append(c)
                owners.append(p)
                unitaries.append(CompiledQrnn(shifted, cfg).unitary)
        # weights[p, k]: coefficient of shifted term k in the derivative for p
        self.weights = np.zeros((cfg.n_params, len(coefs)))
        self.weights[owners, np.arange(len(coefs))] = coefs
        self.u = model.amp_last(np.stack(unitaries))


def _step_with_tangents(model, shifted, mem, tan, angles, d_angles=None):
    """One step for memory states and their parameter tangents.

    mem: (B, dm, dm); tan: (B, P, dm, dm); angles: (B,); d_angles: (B, P) or None.
    Returns (mem', tan', y, dy) with y: (B,), dy: (B, P).
    """
    n_io = model.cfg.n_io
    amps = encoding_amplitudes(angles, n_io)
    v = model.isometry(amps)  # (B, dio, dm, dm)
    x = model.conjugate(v, mem)
    new_mem, y = model.trace_io(x), model.readout(x)
    # incoming tangents pushed through the unshifted step
    dx = model.conjugate(v[:, None], tan)  # (B, P, dio, dm, dm)
    dmem, dy = model.trace_io(dx), model.readout(dx)
    # explicit dependence of this occurrence on each parameter
    xs = model.conjugate(model.isometry(amps, shifted.u), mem[:, None])  # (B, K, dio, dm, dm)
    mem_s, y_s = model.trace_io(xs), model.readout(xs)
    batch, n_terms = y_s.shape
    dmem = dmem + (shifted.weights @ mem_s.reshape(batch, n_terms, -1)).reshape(dmem.shape)
    dy = dy + y_s @ shifted.weights.T
    if d_angles is not None:
        # derivative w.r.t. the encoding angle, one RY occurrence per I/O qubit
        xa = np.zeros_like(x)
        for q in range(n_io):
            for c, s in TWO_TERM:
                qa = np.repeat(angles[:, None], n_io, axis=1)
                qa[:, q] += s
                xa = xa + c * model.conjugate(model.isometry(product_amplitudes(qa)), mem)
        dmem = dmem + model.trace_io(xa)[:, None] * d_angles[:, :, None, None]
        dy = dy + model.readout(xa)[:, None] * d_angles
    return new_mem, dmem, y, dy


def grad_parameter_shift(theta, ctx: LossContext) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient at ``theta``; returns (loss, gradient)."""
    theta = check_params(theta, ctx.cfg)
    model = CompiledQrnn(theta, ctx.cfg)
    shifted = _ShiftedModel(model)
    n_params, dm = ctx.cfg.n_params, model.d_mem
    steps = ctx.spec.steps
    n_orig = ctx.origins.size

    # teacher-forced pass over the inputs needed by every origin
    inputs = ctx.series[: n_orig]
    mem = model.initial_memory()[None]
    tan = np.zeros((1, n_params, dm, dm), dtype=complex)
    mems = np.empty((n_orig, dm, dm), dtype=complex)
    tans = np.empty((n_orig, n_params, dm, dm), dtype=complex)
    preds = np.empty((n_orig, steps))
    dpreds = np.empty((n_orig, steps, n_params))
    for t, x in enumerate(inputs):
        angles = model.angles(np.array([x]))
        mem, tan, y, dy = _step_with_tangents(model, shifted, mem, tan, angles)
        mems[t], tans[t] = mem[0], tan[0]
        preds[t, 0], dpreds[t, 0] = y[0], dy[0]

    # feedback steps, batched over origins
    mem, tan = mems, tans
    scale = ctx.cfg.encoding_scale
    for j in range(1, steps):
        prev, dprev = preds[:, j - 1], dpreds[:, j - 1]
        inside = ((prev >= 0.0) & (prev <= 1.0)).astype(float)
        angles = model.angles(prev)
        d_angles = scale * dprev * inside[:, None]
        mem, tan, y, dy = _step_with_tangents(model, shifted, mem, tan, angles, d_angles)
        preds[:, j], dpreds[:, j] = y, dy

    resid = preds - ctx.targets
    loss = float(np.mean(resid**2))
    grad = 2.0 * np.einsum("os,osp->p", resid, dpreds) / resid.size
    return loss, grad


class ForecastObjective:
    """Training loss on the train split and forecast error on the test split.

    The test metric launches an iterative ``horizon``-step forecast from every
    origin between the last training point and the last test point that
    still leaves ``horizon`` targets, and scores all forecast points against
    the raw series.
    """

    def __init__(self, dataset, spec: LossSpec, horizon: int, cfg: QrnnConfig = QrnnConfig()):
        if horizon < 1:
            raise ConfigurationError("forecast horizon must be >= 1")
        self.dataset = dataset
        self.cfg = cfg
        self.dim = cfg.n_params
        self.horizon = horizon
        self.ctx = LossContext(dataset.train_norm, spec, cfg)
        first = dataset.train.stop - 1
        last = dataset.normalized.size - 1 - horizon
        if last < first:
            raise ConfigurationError(
                f"test split of {dataset.n_test} points is shorter than the horizon {horizon}"
            )
        self.test_origins = np.arange(first, last + 1)
        idx = self.test_origins[:, None] + 1 + np.arange(horizon)[None, :]
        self.test_truth = dataset.raw[idx]
        self.clamp = ClampCounter()
        self._grad_cost = gradient_cost(self.ctx)

    def loss(self, theta) -> float:
        return train_loss(theta, self.ctx)

    def loss_and_grad(self, theta) -> tuple[float, np.ndarray]:
        return grad_parameter_shift(theta, self.ctx)

    def loss_cost(self) -> int:
        return loss_cost()

    def grad_cost(self) -> int:
        return self._grad_cost

    def test_predictions(self, theta) -> np.ndarray:
        model = CompiledQrnn(theta, self.cfg, self.clamp)
        preds = model.rolling_forecasts(self.dataset.normalized, self.test_origins, self.horizon)
        return self.dataset.scaler.inverse(preds)

    def test_metric(self, theta) -> float:
        return rel_rmse(self.test_predictions(theta), self.test_truth)

    def report(self, theta, circuit_evals: int = 0) -> EvalReport:
        return EvalReport(self.loss(theta), self.test_metric(theta), circuit_evals)
