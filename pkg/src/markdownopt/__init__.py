"""Lagrangian-decomposition cutting-plane solver for markdown pricing."""

__version__ = "0.1.0"

from .driver import DriverConfig, RunResult, compare_strategies, run
from .gen import GenSpec, generate, oracle_master, oracle_solve
from .master import CutPool, MasterSolution
from .model import Instance, load_instance, save_instance

__all__ = [
    "__version__",
    "CutPool",
    "DriverConfig",
    "GenSpec",
    "Instance",
    "MasterSolution",
    "RunResult",
    "compare_strategies",
    "generate",
    "load_instance",
    "oracle_master",
    "oracle_solve",
    "run",
    "save_instance",
]
