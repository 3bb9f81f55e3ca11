from .arch import NetworkSpec, PruningAction, reference_network, total_flops
from .config import Config
from .controller import ControllerConfig, sample_action
from .rl import SearchConfig, best_action, run_search

__all__ = [
    "Config",
    "ControllerConfig",
    "NetworkSpec",
    "PruningAction",
    "SearchConfig",
    "best_action",
    "reference_network",
    "run_search",
    "sample_action",
    "total_flops",
]
