from .adam import AdamState, adam_step
from .cmaes import CmaState, StrategyConstants, cma_ask, cma_init, cma_tell, recombination_weights
from .strategy import (
    CMAES,
    GRADIENT,
    HYBRID,
    METHODS,
    Objective,
    RunRecord,
    StrategySchedule,
    run_strategy,
)
