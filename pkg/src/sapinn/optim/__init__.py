"""Optimizers and the training schedule (Adam, then L-BFGS with the mask frozen)."""

from .adam import AdamState, adam_step
from .lbfgs import LbfgsResult, LbfgsState, lbfgs_minimize, lbfgs_run, wolfe_search
from .training import TrainingReport, aggregate, setup, train

__all__ = [
    "AdamState",
    "LbfgsResult",
    "LbfgsState",
    "TrainingReport",
    "adam_step",
    "aggregate",
    "lbfgs_minimize",
    "lbfgs_run",
    "setup",
    "train",
    "wolfe_search",
]
