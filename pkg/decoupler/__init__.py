"""Numerical laboratory for multi-sender decoupling and QMAC coding bounds."""

from .channels import QuantumChannel, apply, choi, complementary, stinespring
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .decoupling import DecouplingExperiment, decoupling_report
from .runner import RunResult, run
from .tensor import MultipartiteOperator, OperatorError, PureState, SystemLabel, TruncationError

__all__ = [
    "ConfigError",
    "DecouplingExperiment",
    "ExperimentConfig",
    "MultipartiteOperator",
    "OperatorError",
    "PureState",
    "QuantumChannel",
    "RunResult",
    "SystemLabel",
    "TruncationError",
    "apply",
    "choi",
    "complementary",
    "decoupling_report",
    "load_config",
    "parse_config",
    "run",
    "stinespring",
]
