"""Training schedules: Adam, CMA-ES, and Adam warm-starting CMA-ES.

One gradient epoch is one full-batch gradient plus one Adam step. One
evolutionary epoch is one CMA-ES generation (``popsize`` loss evaluations).
Each epoch yields a ``RunRecord``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..errors import ConfigurationError, RunAborted
from .adam import AdamState, adam_step
from .cmaes import cma_ask, cma_init, cma_tell

GRADIENT = "gradient"
CMAES = "cmaes"
HYBRID = "hybrid"
METHODS = (GRADIENT, CMAES, HYBRID)

DEFAULT_BUDGETS = {GRADIENT: (100, 0), CMAES: (0, 11), HYBRID: (20, 9)}
EVO_EFFORT = 20


class Objective(Protocol):
    dim: int

    def loss(self, theta: np.ndarray) -> float: ...

    def loss_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]: ...

    def test_metric(self, theta: np.ndarray) -> float: ...

    def loss_cost(self) -> int: ...

    def grad_cost(self) -> int: ...


@dataclass(frozen=True)
class StrategySchedule:
    method: str
    gradient_epochs: int
    evo_generations: int
    seed: int = 0
    lr: float = 0.03
    sigma0: float = 0.5
    popsize: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.gradient_epochs < 0 or self.evo_generations < 0:
            raise ConfigurationError("epoch budgets must be non-negative")
        needs_grad = self.method in (GRADIENT, HYBRID)
        needs_evo = self.method in (CMAES, HYBRID)
        if needs_grad != (self.gradient_epochs > 0) or needs_evo != (self.evo_generations > 0):
            raise ConfigurationError(
                f"budgets ({self.gradient_epochs}, {self.evo_generations}) inconsistent with {self.method}"
            )

    @classmethod
    def default(cls, method: str, seed: int = 0, **kw) -> "StrategySchedule":
        if method not in DEFAULT_BUDGETS:
            raise ConfigurationError(f"unknown method {method!r}")
        grad, evo = DEFAULT_BUDGETS[method]
        return cls(method, grad, evo, seed, **kw)

    @property
    def n_epochs(self) -> int:
        return self.gradient_epochs + self.evo_generations


@dataclass(frozen=True)
class RunRecord:
    method: str
    seed: int
    epoch: int
    circuit_evals: int
    effort_x: int
    train_loss: float
    test_rel_rmse: float
    phase: str


def initial_params(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.uniform(-np.pi, np.pi, dim)


def run_strategy(schedule: StrategySchedule, objective: Objective, theta0=None) -> list[RunRecord]:
    """Train under ``schedule`` and return one record per epoch.

    The RNG is seeded from ``schedule.seed``; the initial parameters (or the
    cold-start CMA-ES mean) are its first draw, so gradient and hybrid runs
    with the same seed share their first gradient epochs exactly.
    """
    rng = np.random.default_rng(schedule.seed)
    theta = initial_params(rng, objective.dim) if theta0 is None else np.array(theta0, dtype=float)
    records: list[RunRecord] = []
    evals = 0
    grad_epochs = evo_gens = 0

    def record(phase, train, theta_eval):
        records.append(
            RunRecord(
                method=schedule.method,
                seed=schedule.seed,
                epoch=len(records) + 1,
                circuit_evals=evals,
                effort_x=grad_epochs + EVO_EFFORT * evo_gens,
                train_loss=float(train),
                test_rel_rmse=float(objective.test_metric(theta_eval)),
                phase=phase,
            )
        )

    try:
        state = AdamState.zeros(objective.dim, lr=schedule.lr)
        for _ in range(schedule.gradient_epochs):
            _, grad = objective.loss_and_grad(theta)
            evals += objective.grad_cost()
            state, theta = adam_step(state, theta, grad)
            grad_epochs += 1
            record(GRADIENT, objective.loss(theta), theta)

        if schedule.evo_generations:
            cma = cma_init(
                rng,
                dim=objective.dim,
                sigma0=schedule.sigma0,
                popsize=schedule.popsize,
                mean=theta,
            )
            for _ in range(schedule.evo_generations):
                candidates = cma_ask(cma)
                fitness = np.array([objective.loss(x) for x in candidates])
                evals += objective.loss_cost() * len(candidates)
                cma = cma_tell(cma, candidates, fitness)
                evo_gens += 1
                # NaN fitnesses rank last, matching cma_tell
                best = int(np.argsort(np.where(np.isnan(fitness), np.inf, fitness), kind="stable")[0])
                record("evolution", fitness[best], candidates[best])
    except Exception as exc:
        raise RunAborted(
            f"{schedule.method} seed {schedule.seed} failed after {len(records)} epoch(s): {exc}",
            records,
        ) from exc
    return records
