from .adam import AdamState, adam_step
from .baseline import BaselineState, update_baseline
from .evaluator import Evaluation, Evaluator
from .reinforce import reinforce_gradient, reinforce_step
from .reward import RewardConfig, reward
from .search import (
    BEST_CHECKPOINT,
    EpisodeRecord,
    SearchConfig,
    SearchState,
    best_action,
    episode_checkpoint_name,
    load_search_state,
    read_episode_log,
    run_search,
)

__all__ = [
    "AdamState",
    "BEST_CHECKPOINT",
    "BaselineState",
    "EpisodeRecord",
    "Evaluation",
    "Evaluator",
    "RewardConfig",
    "SearchConfig",
    "SearchState",
    "adam_step",
    "best_action",
    "episode_checkpoint_name",
    "load_search_state",
    "read_episode_log",
    "reinforce_gradient",
    "reinforce_step",
    "reward",
    "run_search",
    "update_baseline",
]
