import math

import numpy as np
import pytest

from joint_pruner.arch import PruningAction, enforce_group_constraint
from joint_pruner.child import SyntheticEvaluator, enumerate_actions, random_landscape, synthetic_eval
from joint_pruner.controller import ControllerConfig, init_params, sample_action, score_action, trace_log_prob
from joint_pruner.controller.params import copy_params
from joint_pruner.controller.sampler import ActionChooser, rollout
from joint_pruner.errors import InvalidArgumentError, NumericalFaultError, SearchAbortedError
from joint_pruner.rl import (
    BEST_CHECKPOINT,
    AdamState,
    BaselineState,
    EpisodeRecord,
    Evaluation,
    RewardConfig,
    SearchConfig,
    adam_step,
    best_action,
    episode_checkpoint_name,
    load_search_state,
    read_episode_log,
    reinforce_gradient,
    reinforce_step,
    reward,
    run_search,
    update_baseline,
)
from joint_pruner.utils.enum import RatioMode, SearchMode
from joint_pruner.utils.seeding import split_seed

from .specs import build_spec


class ScriptedEvaluator:
    """Returns the given losses in order; raises once they run out."""

    def __init__(self, losses, flops: int = 0):
        self.losses = list(losses)
        self.flops = flops
        self.calls = 0

    def evaluate(self, action: PruningAction, seed: int) -> Evaluation:
        if self.calls >= len(self.losses):
            raise RuntimeError("evaluator backend went away")
        loss = self.losses[self.calls]
        self.calls += 1
        return Evaluation(loss, self.flops)


def record(episode: int, value: float, action=(0.0,)) -> EpisodeRecord:
    return EpisodeRecord(episode=episode, action=action, loss=-value, flops=0, reward=value, baseline=0.0, seed=0)


def search_config(**kwargs) -> SearchConfig:
    defaults = dict(controller=ControllerConfig(h_dim=6, e_dim=5), episodes=12, checkpoint_every=5, seed=3)
    defaults.update(kwargs)
    return SearchConfig(**defaults)


# =====================================
# reward
# =====================================

def test_reward_trades_loss_against_flops():
    cfg = RewardConfig(lambda_=5e5, flops_unit=1e3)
    assert reward(2.0, 5e8, cfg) == pytest.approx(-3.0)
    assert reward(2.0, 5e8, RewardConfig(lambda_=5e5, flops_unit=1e6)) == pytest.approx(-2.001)
    assert reward(0.0, 0, cfg) == 0.0
    assert reward(1.0, 1e6, cfg) < reward(1.0, 1e5, cfg)
    assert reward(1.5, 1e6, cfg) < reward(1.0, 1e6, cfg)


def test_reward_config_reads_lambda_by_name():
    assert RewardConfig.model_validate({"lambda": 5e5}).lambda_ == 5e5


def test_reward_rejects_bad_inputs():
    with pytest.raises(NumericalFaultError):
        reward(float("nan"), 10, RewardConfig())
    with pytest.raises(NumericalFaultError):
        reward(float("inf"), 10, RewardConfig())
    with pytest.raises(InvalidArgumentError):
        reward(1.0, -1, RewardConfig())


# =====================================
# baseline
# =====================================

def test_baseline_starts_at_first_reward():
    state = BaselineState(decay=0.9)
    assert state.value_for(-1.0) == -1.0
    state = update_baseline(state, -1.0)
    assert state.initialized and state.b == -1.0
    state = update_baseline(state, 0.0)
    assert state.b == pytest.approx(-0.9)
    assert state.value_for(5.0) == pytest.approx(-0.9)


def test_baseline_rejects_non_finite_reward():
    with pytest.raises(NumericalFaultError):
        update_baseline(BaselineState(), float("nan"))


# =====================================
# adam
# =====================================

def test_first_adam_step_moves_by_lr_against_gradient_sign():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.1, -3.0, 0.0])}
    state = AdamState(lr=1e-3)
    new_params, new_state = adam_step(params, grads, state)
    np.testing.assert_allclose(new_params["w"], [1.0 - 1e-3, -2.0 + 1e-3, 0.5], rtol=1e-6)
    assert new_state.t == 1 and state.t == 0
    assert np.array_equal(params["w"], [1.0, -2.0, 0.5])


def test_adam_state_document_round_trip():
    params = {"w": np.array([1.0, 2.0])}
    _, state = adam_step(params, {"w": np.array([0.3, -0.7])}, AdamState(lr=0.01))
    restored = AdamState.from_document(state.to_document())
    assert restored.t == state.t and restored.lr == state.lr
    assert np.array_equal(restored.m["w"], state.m["w"])
    assert np.array_equal(restored.v["w"], state.v["w"])


# =====================================
# reinforce_step
# =====================================

def test_zero_advantage_changes_nothing(pair_spec, tiny_controller):
    params = init_params(pair_spec, tiny_controller, np.random.default_rng(0))
    _, trace = sample_action(params, pair_spec, np.random.default_rng(1))
    adam = AdamState()

    same_params, same_adam = reinforce_step(params, trace, -1.0, BaselineState(b=-1.0, initialized=True), adam)
    assert same_params is params and same_adam is adam

    # before the first update the baseline is the reward itself
    same_params, same_adam = reinforce_step(params, trace, -4.2, BaselineState(), adam)
    assert same_params is params and same_adam is adam


def test_positive_advantage_makes_the_action_more_likely(pair_spec, tiny_controller):
    params = init_params(pair_spec, tiny_controller, np.random.default_rng(0))
    _, trace = sample_action(params, pair_spec, np.random.default_rng(1))
    new_params, adam = reinforce_step(params, trace, 1.0, BaselineState(b=0.0, initialized=True), AdamState())
    assert adam.t == 1
    assert trace_log_prob(new_params, trace) > trace_log_prob(params, trace)


def test_non_finite_update_is_a_fault(pair_spec, tiny_controller):
    params = init_params(pair_spec, tiny_controller, np.random.default_rng(0))
    _, trace = sample_action(params, pair_spec, np.random.default_rng(1))
    with pytest.raises(NumericalFaultError):
        reinforce_step(params, trace, float("inf"), BaselineState(b=0.0, initialized=True), AdamState())


def expected_objective(params, spec, actions, rewards) -> float:
    return math.fsum(math.exp(score_action(params, spec, a)) * r for a, r in zip(actions, rewards))


def objective_gradient(params, spec, actions, rewards, keys, step: float = 1e-5):
    perturbed = copy_params(params)
    grads = {}
    for key in keys:
        value = perturbed[key]
        grad = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            original = value[idx]
            value[idx] = original + step
            plus = expected_objective(perturbed, spec, actions, rewards)
            value[idx] = original - step
            minus = expected_objective(perturbed, spec, actions, rewards)
            value[idx] = original
            grad[idx] = (plus - minus) / (2 * step)
        grads[key] = grad
    return grads


def test_estimator_expectation_equals_objective_gradient(pair_spec):
    config = ControllerConfig(h_dim=3, e_dim=2, ratio_mode=RatioMode.Discrete)
    rng = np.random.default_rng(10)
    params = init_params(pair_spec, config, rng)
    actions = enumerate_actions(pair_spec)
    rewards = rng.uniform(-2.0, 0.0, size=len(actions))
    keys = ("block.1.b", "ratio.0.b", "ratio.2.W", "lstm.b1", "embed.block")

    expected = {key: np.zeros_like(params[key]) for key in keys}
    for action, r in zip(actions, rewards):
        trace = rollout(params, pair_spec, ActionChooser(action))
        weight = math.exp(trace.log_prob)
        estimate = reinforce_gradient(params, trace, r, b=-0.7)
        for key in keys:
            expected[key] += weight * estimate[key]

    numeric = objective_gradient(params, pair_spec, actions, rewards, keys)
    for key in keys:
        np.testing.assert_allclose(expected[key], numeric[key], rtol=1e-5, atol=1e-8, err_msg=key)


def test_sampled_estimator_matches_enumerated_gradient():
    spec = build_spec([("ordinary", 3, 4), ("block", 1, 2, 3)], size=6)
    config = ControllerConfig(h_dim=4, e_dim=3, ratio_mode=RatioMode.Discrete, search_mode=SearchMode.BlockOnly)
    rng = np.random.default_rng(11)
    params = init_params(spec, config, rng)
    actions = enumerate_actions(spec, SearchMode.BlockOnly)
    assert len(actions) == 2
    table = {tuple(a.to_json()): r for a, r in zip(actions, (-0.3, 0.7))}
    rewards = [table[tuple(a.to_json())] for a in actions]
    exact = objective_gradient(params, spec, actions, rewards, params.keys())

    samples = 20_000
    total = {key: np.zeros_like(value) for key, value in params.items()}
    for _ in range(samples):
        action, trace = sample_action(params, spec, rng)
        estimate = reinforce_gradient(params, trace, table[tuple(action.to_json())], b=0.2)
        for key in total:
            total[key] += estimate[key]

    checked = 0
    for key, grad in exact.items():
        mean = total[key] / samples
        large = np.abs(grad) > 1e-3
        checked += int(large.sum())
        assert np.all(np.abs(mean - grad)[large] <= 0.05 * np.abs(grad)[large]), key
    assert checked > 0


# =====================================
# run_search
# =====================================

def test_search_records_every_episode(tmp_path, spec):
    cfg = search_config()
    log_path = tmp_path / "episodes.jsonl"
    records = run_search(
        spec, SyntheticEvaluator(random_landscape(spec, 0)), cfg,
        log_path=log_path, checkpoint_dir=tmp_path / "ckpt",
    )
    assert [r.episode for r in records] == list(range(12))
    assert records[0].baseline == records[0].reward
    for r in records:
        action = r.pruning_action
        assert enforce_group_constraint(spec, action) == action
        assert math.isfinite(r.reward)
    assert read_episode_log(log_path) == records
    assert (tmp_path / "ckpt" / episode_checkpoint_name(5)).exists()
    assert (tmp_path / "ckpt" / episode_checkpoint_name(10)).exists()
    assert (tmp_path / "ckpt" / BEST_CHECKPOINT).exists()


def test_search_is_deterministic(spec):
    evaluator = SyntheticEvaluator(random_landscape(spec, 1))
    first = run_search(spec, evaluator, search_config(episodes=6))
    second = run_search(spec, evaluator, search_config(episodes=6))
    assert first == second


def test_resumed_search_matches_uninterrupted_run(tmp_path, spec):
    evaluator = SyntheticEvaluator(random_landscape(spec, 2))
    full = run_search(spec, evaluator, search_config())

    log_path = tmp_path / "episodes.jsonl"
    run_search(spec, evaluator, search_config(episodes=5), log_path=log_path, checkpoint_dir=tmp_path)
    state = load_search_state(tmp_path / episode_checkpoint_name(5))
    assert state.episode == 5
    rest = run_search(spec, evaluator, search_config(), log_path=log_path, resume=state)

    assert rest == full[5:]
    assert read_episode_log(log_path) == full


class FailingAfter:
    """Delegates to `evaluator` for `calls` episodes, then fails."""

    def __init__(self, evaluator, calls: int):
        self.evaluator = evaluator
        self.calls = calls

    def evaluate(self, action: PruningAction, seed: int) -> Evaluation:
        if self.calls == 0:
            raise RuntimeError("worker killed")
        self.calls -= 1
        return self.evaluator.evaluate(action, seed)


def test_resume_after_a_crash_past_the_checkpoint_rewrites_the_log(tmp_path, spec):
    evaluator = SyntheticEvaluator(random_landscape(spec, 2))
    reference_log = tmp_path / "reference.jsonl"
    full = run_search(spec, evaluator, search_config(), log_path=reference_log)

    log_path = tmp_path / "episodes.jsonl"
    with pytest.raises(SearchAbortedError):
        run_search(spec, FailingAfter(evaluator, 7), search_config(), log_path=log_path, checkpoint_dir=tmp_path)
    assert [r.episode for r in read_episode_log(log_path)] == list(range(7))

    state = load_search_state(tmp_path / episode_checkpoint_name(5))
    rest = run_search(spec, evaluator, search_config(), log_path=log_path, resume=state)

    assert rest == full[5:]
    assert [r.episode for r in read_episode_log(log_path)] == list(range(12))
    assert log_path.read_bytes() == reference_log.read_bytes()


def test_failed_evaluation_aborts_with_completed_records(tmp_path, spec):
    log_path = tmp_path / "episodes.jsonl"
    with pytest.raises(SearchAbortedError) as excinfo:
        run_search(spec, ScriptedEvaluator([0.5, 0.4, 0.3]), search_config(), log_path=log_path)
    assert [r.episode for r in excinfo.value.records] == [0, 1, 2]
    assert isinstance(excinfo.value.__cause__, RuntimeError)
    assert len(read_episode_log(log_path)) == 3


def test_non_finite_loss_aborts_the_search(spec):
    with pytest.raises(SearchAbortedError) as excinfo:
        run_search(spec, ScriptedEvaluator([0.5, float("nan")]), search_config())
    assert isinstance(excinfo.value.__cause__, NumericalFaultError)
    assert len(excinfo.value.records) == 1


def test_overflowing_update_discards_the_episode(spec):
    cfg = search_config(episodes=2, controller=ControllerConfig(h_dim=6, e_dim=5, ratio_mode=RatioMode.Discrete))
    records = run_search(spec, ScriptedEvaluator([-1e308, 1e308]), cfg)
    assert [r.episode for r in records] == [0]


def test_search_finds_the_synthetic_optimum(pair_spec):
    cfg_reward = RewardConfig()
    hits = 0
    for seed in range(10):
        landscape = random_landscape(pair_spec, seed)
        optimum = max(
            reward(*synthetic_eval(enforce_group_constraint(pair_spec, a), landscape), cfg_reward)
            for a in enumerate_actions(pair_spec)
        )
        cfg = SearchConfig(
            controller=ControllerConfig(h_dim=8, e_dim=8, ratio_mode=RatioMode.Discrete),
            reward=cfg_reward,
            episodes=310,
            lr=2e-2,
            seed=seed,
        )
        records = run_search(pair_spec, SyntheticEvaluator(landscape), cfg)
        best = max(r.reward for r in records)
        if abs(best - optimum) <= 0.05 * abs(optimum):
            hits += 1
    assert hits >= 8


def test_search_outlearns_the_untrained_controller(spec):
    """~84k discrete joint actions: the last 100 episodes beat the initial policy's draws at equal budget."""
    cfg_reward = RewardConfig()
    wins = 0
    for seed in range(5):
        landscape = random_landscape(spec, seed)
        cfg = SearchConfig(
            controller=ControllerConfig(h_dim=8, e_dim=8, ratio_mode=RatioMode.Discrete),
            reward=cfg_reward,
            episodes=310,
            lr=2e-2,
            seed=seed,
        )
        records = run_search(spec, SyntheticEvaluator(landscape), cfg)
        trained = np.mean([r.reward for r in records[-100:]])

        rng, _ = split_seed(seed)
        params = init_params(spec, cfg.controller, rng)
        untrained = []
        for _ in range(cfg.episodes):
            action, _ = sample_action(params, spec, rng)
            evaluation = synthetic_eval(enforce_group_constraint(spec, action), landscape)
            untrained.append(reward(*evaluation, cfg_reward))
        if trained > np.mean(untrained):
            wins += 1
    assert wins >= 4


# =====================================
# best_action
# =====================================

def test_best_action_picks_highest_reward():
    log = [record(0, -5.0, (0.1,)), record(1, -2.0, (0.2,)), record(2, -3.0, (0.3,))]
    assert best_action(log) == PruningAction((0.2,))


def test_best_action_prefers_earliest_on_tie():
    log = [record(0, -2.0, (0.1,)), record(1, -2.0, (0.2,))]
    assert best_action(log) == PruningAction((0.1,))


def test_best_action_of_empty_log():
    with pytest.raises(InvalidArgumentError):
        best_action([])


def test_record_keeps_element_kinds():
    r = record(0, -1.0, (0.0, 1, 1))
    assert [type(e) for e in EpisodeRecord.model_validate_json(r.model_dump_json()).action] == [float, int, int]
