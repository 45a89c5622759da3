"""Simultaneous Byzantine Agreement under crash failures: simulator and epistemic checker."""

from .model import (
    Action,
    Crash,
    ExchangeKind,
    FailurePattern,
    Scenario,
    SystemConfig,
    enumerate_scenarios,
    validate_pattern,
)
from .runs import Run, generate_run
from .space import PointSpace, RunTree

__version__ = "0.1.0"

__all__ = [
    "Action", "Crash", "ExchangeKind", "FailurePattern", "PointSpace", "Run", "RunTree",
    "Scenario", "SystemConfig", "enumerate_scenarios", "generate_run", "validate_pattern",
]
