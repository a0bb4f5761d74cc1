"""Parallel Bayesian optimization with informed partitioning of the search space."""

from .acquisition import AcqSpec, lcb, q_lcb
from .afopt import BoxDomain, LevelSetRegion
from .algorithms import ALGORITHMS, AlgoConfig, ParallelBayesOpt, Problem, RunTrace, run
from .gp import GaussianProcess, KernelParams
from .partition import (
    PartitionScheme,
    hyperboxes,
    levelset_custom,
    levelset_uniform,
    variable_partitions,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AcqSpec",
    "AlgoConfig",
    "BoxDomain",
    "GaussianProcess",
    "KernelParams",
    "LevelSetRegion",
    "ParallelBayesOpt",
    "PartitionScheme",
    "Problem",
    "RunTrace",
    "hyperboxes",
    "lcb",
    "levelset_custom",
    "levelset_uniform",
    "q_lcb",
    "run",
    "variable_partitions",
]
