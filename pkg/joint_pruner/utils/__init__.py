from .logger import get_formatted_logger
from .logging_config import EpisodeLogWriter, read_jsonl, setup_run_logging
from .seeding import child_episode_seed, split_seed

__all__ = [
    "get_formatted_logger",
    "EpisodeLogWriter",
    "read_jsonl",
    "setup_run_logging",
    "child_episode_seed",
    "split_seed",
]
