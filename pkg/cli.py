"""
Provides a command line interface for the joint block/channel pruning pipeline.

Usage:

```shell
python cli.py pretrain --config desk_scale
python cli.py search --config desk_scale [--resume runs/checkpoints/ctrl_ep0100.json]
python cli.py best
python cli.py retrain --config desk_scale
python cli.py eval [--checkpoint runs/pruned.json]
python cli.py flops [--spec network.json] [--action '[0.5, 1, 1, ...]']
python cli.py serve --config desk_scale
python cli.py checkpoint runs/checkpoints/ctrl_best.json
```

Everything a stage writes goes to the output directory (OUTPUT_DIR, `--output-dir`).
Exit codes: 0 success, 1 unexpected error, 2 malformed config or unknown document
version, 3 missing file, 4 numerical fault.
"""
import argparse
import json
import logging
import sys
import tempfile
from argparse import RawTextHelpFormatter
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from dotenv import load_dotenv

from joint_pruner.arch import (
    PruneMask,
    PruningAction,
    check_action,
    export_pruned,
    load_network,
    parameter_count,
    prune_summary,
    reference_network,
    resolve_mask,
    save_network,
    total_flops,
)
from joint_pruner.child import (
    ChildEvaluator,
    ExternalEvaluator,
    SyntheticEvaluator,
    accuracy,
    load_child,
    load_dataset,
    pretrain,
    random_landscape,
    retrain,
    save_child,
    serve_evaluator,
    synthetic_shapes,
    training,
)
from joint_pruner.child.model import CHILD_SCHEMA
from joint_pruner.config import Config
from joint_pruner.controller.checkpoint import CTRL_SCHEMA, load_checkpoint, save_checkpoint
from joint_pruner.errors import (
    ConfigError,
    NumericalFaultError,
    SearchAbortedError,
    VersionMismatchError,
)
from joint_pruner.rl import best_action, load_search_state, read_episode_log, run_search
from joint_pruner.utils.enum import EvaluatorKind
from joint_pruner.utils.logger import get_formatted_logger
from joint_pruner.utils.logging_config import setup_run_logging
from joint_pruner.utils.seeding import PRETRAIN_STREAM, RETRAIN_STREAM, stage_generator
from joint_pruner.utils.views import print_stage_output

logger = logging.getLogger("joint_pruner.cli")

PARENT_FILE = "parent.json"
SPEC_FILE = "network.json"
EPISODE_LOG = "episodes.jsonl"
CHECKPOINT_DIR = "checkpoints"
PRUNED_CHILD = "pruned.json"
PRUNED_SPEC = "pruned_network.json"
RETRAIN_SUMMARY = "retrain_summary.json"
EFFECTIVE_CONFIG = "config.json"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERICAL = 4

# =============================================================================
# CLI
# =============================================================================

cli = argparse.ArgumentParser(
    description="Search joint block-wise and channel-wise pruning actions for a residual CNN.",
    # Enables the use of newlines in the help message
    formatter_class=RawTextHelpFormatter)

# =====================================
# Arg: shared options
# =====================================

common = argparse.ArgumentParser(add_help=False)

common.add_argument(
    "--config",
    type=str,
    help="Path to a JSON config, or a bundled preset name. Presets:\n  "
    + "\n  ".join(Config.list_available_configs()),
    default=None)

common.add_argument(
    "--output-dir",
    type=str,
    help="Directory every stage reads from and writes to (overrides OUTPUT_DIR).",
    default=None)

common.add_argument(
    "--seed",
    type=int,
    help="Master seed (overrides SEED).",
    default=None)

# =====================================
# Subcommands
# =====================================

stages = cli.add_subparsers(dest="command", required=True, metavar="<command>")

stages.add_parser(
    "pretrain", parents=[common],
    help="Train the baseline child network and checkpoint it.")

search_cmd = stages.add_parser(
    "search", parents=[common],
    help="Run the controller search; writes the episode log and controller checkpoints.")
search_cmd.add_argument(
    "--resume",
    type=str,
    help="Controller checkpoint to continue the search from.",
    default=None)

best_cmd = stages.add_parser(
    "best", parents=[common],
    help="Print the highest-reward action of an episode log.")
best_cmd.add_argument(
    "--log",
    type=str,
    help=f"Episode log (default: <output-dir>/{EPISODE_LOG}).",
    default=None)

retrain_cmd = stages.add_parser(
    "retrain", parents=[common],
    help="Export the compact network of the best action and train it from scratch.")
retrain_cmd.add_argument(
    "--log",
    type=str,
    help=f"Episode log (default: <output-dir>/{EPISODE_LOG}).",
    default=None)

eval_cmd = stages.add_parser(
    "eval", parents=[common],
    help="Report test loss, accuracy, FLOPs and parameter count of a child checkpoint.")
eval_cmd.add_argument(
    "--checkpoint",
    type=str,
    help=f"Child checkpoint (default: <output-dir>/{PARENT_FILE}).",
    default=None)

flops_cmd = stages.add_parser(
    "flops", parents=[common],
    help="Static FLOPs report for a network and an optional mask or action.")
flops_cmd.add_argument(
    "--spec",
    type=str,
    help="Network document (default: SPEC_PATH, else the reference network).",
    default=None)
flops_group = flops_cmd.add_mutually_exclusive_group()
flops_group.add_argument(
    "--mask",
    type=str,
    help="JSON file holding a prune mask.",
    default=None)
flops_group.add_argument(
    "--action",
    type=str,
    help="Pruning action as a JSON array, e.g. '[0.5, 1, 1, 0.0]'.",
    default=None)
flops_cmd.add_argument(
    "--child",
    type=str,
    help="Child checkpoint whose BN scales rank channels for --action (default: channel order).",
    default=None)
flops_cmd.add_argument(
    "--classes",
    type=int,
    help="Classifier width for the parameter count.",
    default=3)

stages.add_parser(
    "serve", parents=[common],
    help="Serve the configured evaluator over stdin/stdout (line-delimited JSON).")

checkpoint_cmd = stages.add_parser(
    "checkpoint",
    help="Verify that a controller or child checkpoint reloads and re-saves byte-identically.")
checkpoint_cmd.add_argument(
    "path",
    type=str,
    help="Checkpoint file written by this tool.")

# =============================================================================
# Helpers
# =============================================================================


def _load_config(args: argparse.Namespace) -> Config:
    overrides: dict[str, Any] = {}
    if args.output_dir is not None:
        overrides["OUTPUT_DIR"] = args.output_dir
    if args.seed is not None:
        overrides["SEED"] = args.seed
    config = Config(args.config, overrides)
    get_formatted_logger(config.log_level)
    return config


def _start_run(config: Config) -> Path:
    output_dir = config.paths.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    log_file = setup_run_logging(output_dir, logging.getLevelName(config.log_level))
    logger.info(f"Run log: {log_file}")
    with open(output_dir / EFFECTIVE_CONFIG, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2)
        f.write("\n")
    return output_dir


def _load_data(config: Config):
    if config.paths.dataset_path is not None:
        return load_dataset(config.paths.dataset_path)
    return synthetic_shapes(config.train_samples, config.test_samples, config.image_size, seed=config.seed)


def _load_spec(config: Config, in_channels: int = 1):
    if config.paths.spec_path is not None:
        return load_network(config.paths.spec_path)
    return reference_network(config.image_size, in_channels)


def _episode_log(config: Config, log: str | None) -> Path:
    return Path(log) if log is not None else config.paths.output_dir / EPISODE_LOG


def _build_evaluator(config: Config):
    """(spec, evaluator) for the configured backend."""
    kind = config.evaluator_kind
    if kind == EvaluatorKind.Child:
        parent = load_child(config.paths.output_dir / PARENT_FILE)
        return parent.spec, ChildEvaluator(parent, _load_data(config), config.child)
    spec = _load_spec(config)
    if kind == EvaluatorKind.Synthetic:
        return spec, SyntheticEvaluator(random_landscape(spec, config.seed, config.controller.search_mode))
    return spec, ExternalEvaluator(config.evaluator_command)


def _print_report(report: dict[str, Any], stage: str) -> None:
    for key, value in report.items():
        print_stage_output(f"{key}: {value}", stage)

# =============================================================================
# Stages
# =============================================================================


def cmd_pretrain(args: argparse.Namespace) -> int:
    config = _load_config(args)
    output_dir = _start_run(config)
    data = _load_data(config)
    spec = _load_spec(config, data.image_shape[0])
    print_stage_output(f"training {spec.num_layers}-layer child for {config.child.epochs} epochs", "PRETRAIN")

    model = pretrain(spec, data, config.child, stage_generator(config.seed, PRETRAIN_STREAM), progress=True)
    save_child(model, output_dir / PARENT_FILE)
    save_network(spec, output_dir / SPEC_FILE)
    _print_report({
        "test_loss": round(training.test_loss(model, data), 6),
        "accuracy": round(accuracy(model, data), 4),
        "flops": total_flops(spec),
        "checkpoint": str(output_dir / PARENT_FILE),
    }, "PRETRAIN")
    return EXIT_OK


def cmd_search(args: argparse.Namespace) -> int:
    config = _load_config(args)
    output_dir = _start_run(config)
    resume = load_search_state(args.resume) if args.resume is not None else None
    spec, evaluator = _build_evaluator(config)
    print_stage_output(
        f"{config.search.episodes} episodes, {config.controller.search_mode.value} / "
        f"{config.controller.ratio_mode.value}, lambda {config.reward.lambda_:g}"
        + (f", resuming at episode {resume.episode}" if resume is not None else ""),
        "SEARCH",
    )
    try:
        records = run_search(
            spec,
            evaluator,
            config.search,
            log_path=output_dir / EPISODE_LOG,
            checkpoint_dir=output_dir / CHECKPOINT_DIR,
            resume=resume,
            progress=True,
        )
    finally:
        if isinstance(evaluator, ExternalEvaluator):
            evaluator.close()

    if records:
        best = max(records, key=lambda r: r.reward)
        print_stage_output(f"best reward {best.reward:.5f} at episode {best.episode}: {best.action}", "SEARCH")
    return EXIT_OK


def cmd_best(args: argparse.Namespace) -> int:
    config = _load_config(args)
    records = read_episode_log(_episode_log(config, args.log))
    action = best_action(records)
    print_stage_output(f"best of {len(records)} episodes", "BEST")
    print(json.dumps(action.to_json()))
    return EXIT_OK


def cmd_retrain(args: argparse.Namespace) -> int:
    config = _load_config(args)
    output_dir = _start_run(config)
    parent = load_child(output_dir / PARENT_FILE)
    action = check_action(parent.spec, best_action(read_episode_log(_episode_log(config, args.log))))
    mask = resolve_mask(parent.spec, action, parent.bn_gammas())
    pruned_spec = export_pruned(parent.spec, mask)
    data = _load_data(config)
    print_stage_output(f"retraining {pruned_spec.num_layers}-layer network from scratch", "RETRAIN")

    model = retrain(pruned_spec, data, config.child, stage_generator(config.seed, RETRAIN_STREAM), progress=True)
    save_child(model, output_dir / PRUNED_CHILD)
    save_network(pruned_spec, output_dir / PRUNED_SPEC)

    summary = prune_summary(parent.spec, mask)
    summary.update({
        "action": action.to_json(),
        "params_before": parameter_count(parent.spec, parent.num_classes),
        "params_after": parameter_count(pruned_spec, model.num_classes),
        "accuracy_before": accuracy(parent, data),
        "accuracy_after": accuracy(model, data),
        "test_loss_after": training.test_loss(model, data),
    })
    with open(output_dir / RETRAIN_SUMMARY, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    _print_report({key: summary[key] for key in (
        "flops_before", "flops_after", "flops_reduction", "accuracy_before", "accuracy_after"
    )}, "RETRAIN")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args)
    path = Path(args.checkpoint) if args.checkpoint is not None else config.paths.output_dir / PARENT_FILE
    model = load_child(path)
    data = _load_data(config)
    report = {
        "checkpoint": str(path),
        "test_loss": training.test_loss(model, data),
        "accuracy": accuracy(model, data),
        "flops": total_flops(model.spec),
        "params": parameter_count(model.spec, model.num_classes),
    }
    print_stage_output(json.dumps(report), "EVAL")
    return EXIT_OK


def cmd_flops(args: argparse.Namespace) -> int:
    config = _load_config(args)
    spec = load_network(args.spec) if args.spec is not None else _load_spec(config)
    if args.mask is not None:
        with open(args.mask, "r", encoding="utf-8") as f:
            mask = PruneMask.from_json(json.load(f))
    elif args.action is not None:
        action = check_action(spec, PruningAction.from_json(json.loads(args.action)))
        if args.child is not None:
            gammas = load_child(args.child).bn_gammas()
        else:
            # equal scales: the lowest channel indices go first
            gammas = [np.ones(layer.out_ch) for layer in spec.layers]
        mask = resolve_mask(spec, action, gammas)
    else:
        mask = PruneMask.identity(spec)

    report = prune_summary(spec, mask)
    report["params"] = parameter_count(spec, args.classes, mask)
    print_stage_output(json.dumps(report), "FLOPS")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if config.evaluator_kind == EvaluatorKind.External:
        raise ConfigError("serve needs a local evaluator (EVALUATOR 'child' or 'synthetic')")
    _, evaluator = _build_evaluator(config)
    served = serve_evaluator(evaluator, sys.stdin, sys.stdout)
    logger.info(f"Served {served} evaluation requests")
    return EXIT_OK


def checkpoint_roundtrip(path: str | Path) -> bool:
    """Load a checkpoint and save it again; True when the bytes are unchanged."""
    path = Path(path)
    original = path.read_bytes()
    try:
        found = json.loads(original).get("schema")
    except (json.JSONDecodeError, AttributeError):
        found = None
    with tempfile.TemporaryDirectory() as tmp:
        copy = Path(tmp) / path.name
        if found == CTRL_SCHEMA:
            save_checkpoint(load_checkpoint(path), copy)
        elif found == CHILD_SCHEMA:
            save_child(load_child(path), copy)
        else:
            raise VersionMismatchError(f"{CTRL_SCHEMA} or {CHILD_SCHEMA}", found)
        return copy.read_bytes() == original


def cmd_checkpoint(args: argparse.Namespace) -> int:
    if not checkpoint_roundtrip(args.path):
        print(f"error: {args.path} does not re-save byte-identically", file=sys.stderr)
        return EXIT_ERROR
    print_stage_output(f"{args.path} round-trips byte-identically", "CHECKPOINT")
    return EXIT_OK


COMMANDS = {
    "pretrain": cmd_pretrain,
    "search": cmd_search,
    "best": cmd_best,
    "retrain": cmd_retrain,
    "eval": cmd_eval,
    "flops": cmd_flops,
    "serve": cmd_serve,
    "checkpoint": cmd_checkpoint,
}

# =============================================================================
# Main
# =============================================================================


def exit_status(error: BaseException) -> int:
    if isinstance(error, SearchAbortedError) and error.__cause__ is not None:
        return exit_status(error.__cause__)
    if isinstance(error, (ConfigError, VersionMismatchError)):
        return EXIT_CONFIG
    if isinstance(error, FileNotFoundError):
        return EXIT_MISSING
    if isinstance(error, NumericalFaultError):
        return EXIT_NUMERICAL
    return EXIT_ERROR


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return its exit status."""
    try:
        args = cli.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return exit_status(e)


def main() -> None:
    load_dotenv()
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
