"""Multi-layer competitive-cooperative differential evolution.

A single population is monitored in parallel by several adaptive DE
optimizers ("layers").  Individuals keep a preferred layer that is retained
on success and randomly switched on failure, while the best-ranked
individuals each generation receive one trial from every layer and keep the
fittest.  The package also ships a seeded benchmark suite (unimodal,
multimodal, hybrid and composition categories) and the nonparametric
statistics used to compare optimizers (Wilcoxon signed-rank, Friedman mean
ranks, sign summaries).
"""

from .core import Bounds, Budget, BudgetExhausted, Individual, Population, Problem, RandomSource
from .mlcc import MlccConfig, RunRecord, mlcc_run, single_layer_run

__all__ = [
    "Bounds",
    "Budget",
    "BudgetExhausted",
    "Individual",
    "MlccConfig",
    "Population",
    "Problem",
    "RandomSource",
    "RunRecord",
    "mlcc_run",
    "single_layer_run",
]

__version__ = "0.1.0"
