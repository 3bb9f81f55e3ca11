"""
Desk-scale evaluations of the pruning search.

Usage:

```shell
python -m evals.desk_scale.run_eval pipeline --output-dir runs/eval
python -m evals.desk_scale.run_eval synthetic --seeds 10
python -m evals.desk_scale.run_eval lambda --output-dir runs/eval
```

`pipeline` runs pretrain -> search -> retrain with the desk_scale preset and
checks the compression target. `synthetic` searches closed-form landscapes
with known optima. `lambda` repeats the search on one parent for several
trade-off weights. Results are appended to <output-dir>/results.jsonl.
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Callable, List, TypeVar

import numpy as np
from dotenv import load_dotenv
from tqdm import tqdm

from cli import EPISODE_LOG, PARENT_FILE, RETRAIN_SUMMARY, run_cli
from joint_pruner.arch import reference_network
from joint_pruner.child import (
    ChildEvaluator,
    SyntheticEvaluator,
    load_child,
    random_landscape,
    synthetic_eval,
    synthetic_shapes,
)
from joint_pruner.config import Config
from joint_pruner.controller import ControllerConfig
from joint_pruner.rl import RewardConfig, SearchConfig, best_action, reward, run_search
from joint_pruner.utils.enum import RatioMode
from joint_pruner.utils.logger import get_formatted_logger
from joint_pruner.utils.logging_config import EpisodeLogWriter

logger = logging.getLogger("joint_pruner.evals")

T = TypeVar('T')
R = TypeVar('R')

FLOPS_REDUCTION_TARGET = 0.5
ACCURACY_DROP_LIMIT = 0.03
SYNTHETIC_TOLERANCE = 0.05
SYNTHETIC_LR = 2e-2
LAMBDAS = (1e3, 1e4, 1e5)


def map_with_progress(fn: Callable[[T], R], items: List[T]) -> List[R]:
    """Map function over items with progress bar."""
    return [fn(item) for item in tqdm(items)]


def run_pipeline(output_dir: Path, seed: int) -> dict:
    """pretrain -> search -> retrain on the built-in shapes; the compression claim as one record."""
    common = ["--config", "desk_scale", "--output-dir", str(output_dir), "--seed", str(seed)]
    for stage in ("pretrain", "search", "retrain"):
        status = run_cli([stage, *common])
        if status != 0:
            raise RuntimeError(f"{stage} exited with status {status}")

    with open(output_dir / RETRAIN_SUMMARY, "r", encoding="utf-8") as f:
        summary = json.load(f)
    drop = summary["accuracy_before"] - summary["accuracy_after"]
    return {
        "eval": "pipeline",
        "seed": seed,
        "flops_reduction": summary["flops_reduction"],
        "accuracy_before": summary["accuracy_before"],
        "accuracy_after": summary["accuracy_after"],
        "passed": summary["flops_reduction"] >= FLOPS_REDUCTION_TARGET and drop <= ACCURACY_DROP_LIMIT,
    }


def run_synthetic(seed: int) -> dict:
    """Search a landscape whose loss is lowest at a known action; compare against that action's reward."""
    spec = reference_network(32, 1)
    landscape = random_landscape(spec, seed)
    cfg = SearchConfig(
        controller=ControllerConfig(ratio_mode=RatioMode.Discrete),
        reward=RewardConfig(),
        lr=SYNTHETIC_LR,
        seed=seed,
    )
    target = reward(*synthetic_eval(landscape.optimum, landscape), cfg.reward)
    records = run_search(spec, SyntheticEvaluator(landscape), cfg)
    best = max(r.reward for r in records)
    return {
        "eval": "synthetic",
        "seed": seed,
        "optimum_reward": target,
        "best_reward": best,
        "passed": best >= target - SYNTHETIC_TOLERANCE * abs(target),
    }


def run_lambda_sweep(output_dir: Path, seed: int) -> List[dict]:
    """One parent, one search per trade-off weight: smaller lambda should buy fewer FLOPs."""
    if run_cli(["pretrain", "--config", "desk_scale", "--output-dir", str(output_dir), "--seed", str(seed)]) != 0:
        raise RuntimeError("pretrain failed")
    config = Config("desk_scale", {"OUTPUT_DIR": str(output_dir), "SEED": seed})
    parent = load_child(output_dir / PARENT_FILE)
    data = synthetic_shapes(config.train_samples, config.test_samples, config.image_size, seed=seed)
    evaluator = ChildEvaluator(parent, data, config.child)

    def search(lambda_: float) -> dict:
        cfg = config.search.model_copy(update={"reward": RewardConfig(lambda_=lambda_, flops_unit=config.flops_unit)})
        records = run_search(parent.spec, evaluator, cfg, log_path=output_dir / f"lambda_{lambda_:g}" / EPISODE_LOG)
        best = max(records, key=lambda r: r.reward)
        return {
            "eval": "lambda",
            "seed": seed,
            "lambda": lambda_,
            "action": best_action(records).to_json(),
            "loss": best.loss,
            "flops": best.flops,
        }

    return map_with_progress(search, list(LAMBDAS))


def main():
    parser = argparse.ArgumentParser(description="Run desk-scale evaluations of the pruning search")
    parser.add_argument("eval", choices=["pipeline", "synthetic", "lambda"])
    parser.add_argument("--seeds", type=int, default=1,
                        help="Number of seeds (0..n-1) to run. Default is 1.")
    parser.add_argument("--output-dir", type=str, default="runs/eval")
    args = parser.parse_args()

    load_dotenv()
    get_formatted_logger(logging.INFO)
    output_dir = Path(args.output_dir)
    seeds = list(range(args.seeds))

    if args.eval == "pipeline":
        results = map_with_progress(lambda seed: run_pipeline(output_dir / f"pipeline_{seed}", seed), seeds)
    elif args.eval == "synthetic":
        results = map_with_progress(run_synthetic, seeds)
    else:
        results = [r for seed in seeds for r in run_lambda_sweep(output_dir / f"lambda_{seed}", seed)]

    with EpisodeLogWriter(output_dir / "results.jsonl", append=True) as writer:
        for result in results:
            writer.log_record(result)

    print("\n=== Evaluation Summary ===")
    for result in results:
        print(json.dumps(result))
    verdicts = [r["passed"] for r in results if "passed" in r]
    if verdicts:
        print(f"Passed: {sum(verdicts)}/{len(verdicts)} (mean {np.mean(verdicts):.2f})")


if __name__ == "__main__":
    main()
