"""(mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation.

Strategy constants are the dimension-dependent defaults of Hansen's CMA-ES
tutorial: positive log-rank weights on the best half of the population,
rank-one plus rank-mu covariance update, and the h_sigma stall of the
rank-one path.

Usage is ask/tell::

    state = cma_init(rng, dim=24)
    for _ in range(generations):
        xs = cma_ask(state)
        state = cma_tell(state, xs, [f(x) for x in xs])
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import OptimizationError

log = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-14


def recombination_weights(popsize: int) -> np.ndarray:
    mu = popsize // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    return w / w.sum()


@dataclass(frozen=True)
class StrategyConstants:
    dim: int
    popsize: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float

    @classmethod
    def defaults(cls, dim: int, popsize: int) -> "StrategyConstants":
        if dim < 1 or popsize < 2:
            raise OptimizationError("CMA-ES needs dim >= 1 and popsize >= 2")
        n = dim
        weights = recombination_weights(popsize)
        mu_eff = 1.0 / np.sum(weights**2)
        c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
        d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
        c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
        c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
        c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
        chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))
        return cls(n, popsize, weights.size, weights, float(mu_eff), c_sigma, d_sigma, c_c, c_1, c_mu, chi_n)


@dataclass(frozen=True)
class CmaState:
    consts: StrategyConstants
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    rng: np.random.Generator
    generation: int = 0
    best_x: np.ndarray | None = None
    best_f: float = math.inf

    @property
    def dim(self) -> int:
        return self.consts.dim


def cma_init(
    rng: np.random.Generator,
    dim: int = 24,
    sigma0: float = 0.5,
    popsize: int = 10,
    mean=None,
    low: float = -np.pi,
    high: float = np.pi,
) -> CmaState:
    """Fresh state; without ``mean`` the mean is drawn uniformly from [low, high)^dim."""
    if not sigma0 > 0:
        raise OptimizationError("initial step size must be positive")
    consts = StrategyConstants.defaults(dim, popsize)
    if mean is None:
        mean = rng.uniform(low, high, dim)
    mean = np.array(mean, dtype=float)
    if mean.shape != (dim,):
        raise OptimizationError(f"initial mean must have shape ({dim},)")
    return CmaState(
        consts=consts,
        mean=mean,
        sigma=float(sigma0),
        cov=np.eye(dim),
        p_sigma=np.zeros(dim),
        p_c=np.zeros(dim),
        rng=rng,
    )


def _decompose(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors B and standard deviations D with C = B diag(D^2) B^T."""
    eigvals, basis = np.linalg.eigh(cov)
    if eigvals.min() < EIGEN_FLOOR:
        log.warning("covariance eigenvalue %.3g floored to %g", eigvals.min(), EIGEN_FLOOR)
        eigvals = np.maximum(eigvals, EIGEN_FLOOR)
    return basis, np.sqrt(eigvals)


def cma_ask(state: CmaState) -> np.ndarray:
    """Sample ``popsize`` candidates, one per row."""
    basis, stds = _decompose(state.cov)
    z = state.rng.standard_normal((state.consts.popsize, state.dim))
    return state.mean + state.sigma * (z * stds) @ basis.T


def cma_tell(state: CmaState, candidates, fitnesses) -> CmaState:
    """Update the distribution from evaluated candidates (lower fitness is better).

    Only the ranking of ``fitnesses`` is used; ties keep candidate order and
    NaN fitnesses rank last.
    """
    k = state.consts
    xs = np.asarray(candidates, dtype=float)
    fs = np.asarray(fitnesses, dtype=float)
    if xs.shape != (k.popsize, state.dim) or fs.shape != (k.popsize,):
        raise OptimizationError(
            f"expected {k.popsize} candidates of dim {state.dim} and as many fitnesses"
        )
    nan = np.isnan(fs)
    if nan.any():
        log.warning("%d NaN fitness value(s) ranked last", int(nan.sum()))
        fs = np.where(nan, np.inf, fs)
    order = np.argsort(fs, kind="stable")

    gen = state.generation + 1
    steps = (xs[order[: k.mu]] - state.mean) / state.sigma
    y_w = k.weights @ steps
    mean = state.mean + state.sigma * y_w

    basis, stds = _decompose(state.cov)
    inv_sqrt = (basis / stds) @ basis.T
    p_sigma = (1 - k.c_sigma) * state.p_sigma + math.sqrt(
        k.c_sigma * (2 - k.c_sigma) * k.mu_eff
    ) * (inv_sqrt @ y_w)
    ps_norm = float(np.linalg.norm(p_sigma))
    h_sigma = ps_norm / math.sqrt(1 - (1 - k.c_sigma) ** (2 * gen)) < (1.4 + 2 / (state.dim + 1)) * k.chi_n
    p_c = (1 - k.c_c) * state.p_c
    if h_sigma:
        p_c = p_c + math.sqrt(k.c_c * (2 - k.c_c) * k.mu_eff) * y_w
    delta_h = (1 - h_sigma) * k.c_c * (2 - k.c_c)

    rank_mu = (steps.T * k.weights) @ steps
    cov = (
        (1 + k.c_1 * delta_h - k.c_1 - k.c_mu * k.weights.sum()) * state.cov
        + k.c_1 * np.outer(p_c, p_c)
        + k.c_mu * rank_mu
    )
    cov = (cov + cov.T) / 2
    sigma = state.sigma * math.exp((k.c_sigma / k.d_sigma) * (ps_norm / k.chi_n - 1))

    best_x, best_f = state.best_x, state.best_f
    if fs[order[0]] < best_f:
        best_x, best_f = xs[order[0]].copy(), float(fs[order[0]])
    return replace(
        state,
        mean=mean,
        sigma=sigma,
        cov=cov,
        p_sigma=p_sigma,
        p_c=p_c,
        generation=gen,
        best_x=best_x,
        best_f=best_f,
    )
