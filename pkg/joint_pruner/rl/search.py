import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from ..arch.action import PruningAction
from ..arch.mask import enforce_group_constraint
from ..arch.network import NetworkSpec, require_valid
from ..controller.checkpoint import ControllerCheckpoint, load_checkpoint, save_checkpoint
from ..controller.params import ControllerConfig, ControllerParams, init_params
from ..controller.sampler import sample_action
from ..errors import InvalidArgumentError, NumericalFaultError, SearchAbortedError
from ..utils.logging_config import EpisodeLogWriter, read_jsonl
from ..utils.seeding import child_episode_seed, generator_state, restore_generator, split_seed
from .adam import AdamState
from .baseline import BaselineState, update_baseline
from .evaluator import Evaluator
from .reinforce import reinforce_step
from .reward import RewardConfig, reward

logger = logging.getLogger(__name__)

BEST_CHECKPOINT = "ctrl_best.json"


class SearchConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    controller: ControllerConfig = ControllerConfig()
    reward: RewardConfig = RewardConfig()
    episodes: int = Field(default=310, ge=1)
    lr: float = Field(default=1e-3, gt=0)
    baseline_decay: float = Field(default=0.9, ge=0.0, lt=1.0)
    checkpoint_every: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0)


class EpisodeRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    episode: int
    action: tuple[int | float, ...]
    loss: float
    flops: int
    reward: float
    baseline: float
    seed: int

    @property
    def pruning_action(self) -> PruningAction:
        return PruningAction(self.action)


def episode_checkpoint_name(episodes_done: int) -> str:
    return f"ctrl_ep{episodes_done:04d}.json"


@dataclass
class SearchState:
    """Everything an interrupted search needs to continue bit-identically."""
    params: ControllerParams
    adam: AdamState
    baseline: BaselineState
    rng: np.random.Generator
    episode: int = 0
    best_reward: float | None = None
    best_episode: int | None = None

    def to_checkpoint(self, cfg: SearchConfig) -> ControllerCheckpoint:
        return ControllerCheckpoint(
            config=cfg.controller,
            params=self.params,
            seed=cfg.seed,
            rng_state=generator_state(self.rng),
            extras={
                "episode": self.episode,
                "adam": self.adam.to_document(),
                "baseline": self.baseline.model_dump(mode="json"),
                "best_reward": self.best_reward,
                "best_episode": self.best_episode,
            },
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: ControllerCheckpoint) -> "SearchState":
        extras = checkpoint.extras
        missing = [key for key in ("episode", "adam", "baseline") if key not in extras]
        if missing or checkpoint.rng_state is None:
            raise InvalidArgumentError(f"controller checkpoint carries no search state (missing {missing})")
        return cls(
            params=checkpoint.params,
            adam=AdamState.from_document(extras["adam"]),
            baseline=BaselineState.model_validate(extras["baseline"]),
            rng=restore_generator(checkpoint.rng_state),
            episode=extras["episode"],
            best_reward=extras.get("best_reward"),
            best_episode=extras.get("best_episode"),
        )


def load_search_state(path: str | Path) -> SearchState:
    return SearchState.from_checkpoint(load_checkpoint(path))


def initial_state(spec: NetworkSpec, cfg: SearchConfig, rng: np.random.Generator) -> SearchState:
    return SearchState(
        params=init_params(spec, cfg.controller, rng),
        adam=AdamState(lr=cfg.lr),
        baseline=BaselineState(decay=cfg.baseline_decay),
        rng=rng,
    )


def _open_episode_log(log_path: str | Path, resume_episode: int | None) -> EpisodeLogWriter:
    """A fresh log, or on resume the existing one cut back to the episodes before `resume_episode`."""
    log_path = Path(log_path)
    if resume_episode is None or not log_path.exists():
        return EpisodeLogWriter(log_path)
    lines = read_jsonl(log_path)
    kept = [line for line in lines if line["episode"] < resume_episode]
    dropped = len(lines) - len(kept)
    if dropped:
        logger.warning(f"Dropping {dropped} logged episodes at or after {resume_episode} before resuming")
    writer = EpisodeLogWriter(log_path)
    for line in kept:
        writer.log_record(line)
    return writer


def run_search(
    spec: NetworkSpec,
    evaluator: Evaluator,
    cfg: SearchConfig,
    rng: np.random.Generator | None = None,
    *,
    log_path: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
    resume: SearchState | None = None,
    progress: bool = False,
) -> list[EpisodeRecord]:
    """Sample, constrain, evaluate, reward, update, record; once per episode.

    The controller generator is `rng` if given, else spawn 0 of `cfg.seed`;
    episode seeds for the evaluator always derive from spawn 1 of `cfg.seed`.
    With `resume`, the loop picks up at `resume.episode` and appends to the log.
    An evaluator failure raises SearchAbortedError carrying the records so far.
    """
    require_valid(spec)
    controller_rng, child_seed = split_seed(cfg.seed)
    state = resume if resume is not None else initial_state(spec, cfg, rng if rng is not None else controller_rng)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None

    records: list[EpisodeRecord] = []
    writer = _open_episode_log(log_path, resume.episode if resume is not None else None) if log_path is not None else None
    logger.info(f"Search over {spec.num_layers} layers: episodes {state.episode}..{cfg.episodes - 1}")
    try:
        for episode in tqdm(range(state.episode, cfg.episodes), desc="search", unit="episode", disable=not progress):
            action, trace = sample_action(state.params, spec, state.rng)
            constrained = enforce_group_constraint(spec, action)
            seed = child_episode_seed(child_seed, episode)

            try:
                evaluation = evaluator.evaluate(constrained, seed)
                loss, flops = float(evaluation.loss), int(evaluation.flops)
                r = reward(loss, flops, cfg.reward)
            except Exception as e:
                logger.error(f"Episode {episode} failed during evaluation: {e}")
                raise SearchAbortedError(f"search aborted at episode {episode}: {e}", records) from e

            b = state.baseline.value_for(r)
            try:
                state.params, state.adam = reinforce_step(state.params, trace, r, state.baseline, state.adam)
            except NumericalFaultError as e:
                logger.warning(f"Episode {episode} discarded, controller unchanged: {e}")
                state.episode = episode + 1
                continue
            state.baseline = update_baseline(state.baseline, r)
            state.episode = episode + 1

            record = EpisodeRecord(
                episode=episode,
                action=tuple(constrained.to_json()),
                loss=loss,
                flops=flops,
                reward=r,
                baseline=b,
                seed=seed,
            )
            records.append(record)
            if writer is not None:
                writer.log_record(record.model_dump(mode="json"))
            logger.info(
                f"Episode {episode}: reward {r:.5f} (loss {loss:.5f}, "
                f"FLOPs {flops:,}) baseline {b:.5f}"
            )

            if state.best_reward is None or r > state.best_reward:
                state.best_reward, state.best_episode = r, episode
                if checkpoint_dir is not None:
                    save_checkpoint(state.to_checkpoint(cfg), checkpoint_dir / BEST_CHECKPOINT)
            if checkpoint_dir is not None and state.episode % cfg.checkpoint_every == 0:
                save_checkpoint(state.to_checkpoint(cfg), checkpoint_dir / episode_checkpoint_name(state.episode))
    finally:
        if writer is not None:
            writer.close()

    logger.info(f"Search finished: best reward {state.best_reward} at episode {state.best_episode}")
    return records


def best_action(log: list[EpisodeRecord]) -> PruningAction:
    """Action of the highest-reward record; the earliest wins a tie."""
    if not log:
        raise InvalidArgumentError("episode log is empty")
    best = log[0]
    for record in log[1:]:
        if record.reward > best.reward:
            best = record
    return best.pruning_action


def read_episode_log(path: str | Path) -> list[EpisodeRecord]:
    return [EpisodeRecord.model_validate(line) for line in read_jsonl(path)]
