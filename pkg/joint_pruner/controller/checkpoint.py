import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import InvalidArgumentError, VersionMismatchError
from ..utils.arrays import decode_arrays, encode_arrays
from .params import ControllerConfig, ControllerParams

logger = logging.getLogger(__name__)

CTRL_SCHEMA = "abcp-ctrl/1"

_CORE_KEYS = ("schema", "config", "seed", "rng_state", "weights")


@dataclass
class ControllerCheckpoint:
    """Controller weights and config, plus whatever the search needs to resume.

    `extras` holds search state (optimizer moments, baseline, next episode)
    as plain JSON values, in the order they were written.
    """
    config: ControllerConfig
    params: ControllerParams
    seed: int | None = None
    rng_state: dict[str, Any] | None = None
    extras: dict[str, Any] = field(default_factory=dict)


def checkpoint_document(checkpoint: ControllerCheckpoint) -> dict[str, Any]:
    document = {
        "schema": CTRL_SCHEMA,
        "config": checkpoint.config.model_dump(mode="json"),
        "seed": checkpoint.seed,
        "rng_state": checkpoint.rng_state,
        "weights": encode_arrays(checkpoint.params),
    }
    for key, value in checkpoint.extras.items():
        if key in _CORE_KEYS:
            raise InvalidArgumentError(f"checkpoint extra {key!r} shadows a core field")
        document[key] = value
    return document


def save_checkpoint(checkpoint: ControllerCheckpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(checkpoint_document(checkpoint), f, separators=(",", ":"))
        f.write("\n")
    logger.debug(f"Controller checkpoint written to {path}")


def load_checkpoint(path: str | Path) -> ControllerCheckpoint:
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise VersionMismatchError(CTRL_SCHEMA, None) from e
    found = document.get("schema") if isinstance(document, dict) else None
    if found != CTRL_SCHEMA:
        raise VersionMismatchError(CTRL_SCHEMA, found)
    return ControllerCheckpoint(
        config=ControllerConfig.model_validate(document["config"]),
        params=decode_arrays(document["weights"]),
        seed=document["seed"],
        rng_state=document["rng_state"],
        extras={key: value for key, value in document.items() if key not in _CORE_KEYS},
    )
