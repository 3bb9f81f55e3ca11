"""
Seed splitting.

The master seed feeds one `SeedSequence`; spawn index 0 drives the controller
generator and spawn index 1 yields the child seed. Episode `k` of the search
evaluates with `SeedSequence([child_seed, k])`, so changing how the child
consumes randomness never shifts what the controller samples.
"""
from typing import Any

import numpy as np


def split_seed(master_seed: int) -> tuple[np.random.Generator, int]:
    controller_seq, child_seq = np.random.SeedSequence(master_seed).spawn(2)
    child_seed = int(child_seq.generate_state(1, dtype=np.uint32)[0])
    return np.random.default_rng(controller_seq), child_seed


def child_episode_seed(child_seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([child_seed, episode]).generate_state(1, dtype=np.uint32)[0])


def generator_state(rng: np.random.Generator) -> dict[str, Any]:
    return rng.bit_generator.state


def restore_generator(state: dict[str, Any]) -> np.random.Generator:
    bit_generator = getattr(np.random, state["bit_generator"])()
    bit_generator.state = state
    return np.random.Generator(bit_generator)


PRETRAIN_STREAM = 2
RETRAIN_STREAM = 3


def stage_generator(master_seed: int, stream: int) -> np.random.Generator:
    """Generator for a one-off pipeline stage; streams 0 and 1 belong to `split_seed`."""
    return np.random.default_rng(np.random.SeedSequence(master_seed).spawn(stream + 1)[stream])
