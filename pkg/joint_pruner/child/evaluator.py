import json
import logging
import subprocess
from typing import IO, Sequence

import numpy as np

from ..arch.action import PruningAction
from ..arch.flops import total_flops
from ..arch.mask import resolve_mask
from ..errors import EvaluationError, PrunerError
from ..rl.evaluator import Evaluation, Evaluator
from .dataset import Dataset
from .model import ChildModel
from .training import ChildConfig, fine_tune, test_loss

logger = logging.getLogger(__name__)


class ChildEvaluator:
    """Mask the frozen parent, fine-tune its head for one epoch, score on the test split."""

    def __init__(self, parent: ChildModel, data: Dataset, cfg: ChildConfig):
        self.parent = parent
        self.data = data
        self.cfg = cfg
        self._gammas = parent.bn_gammas()

    def evaluate(self, action: PruningAction, seed: int) -> Evaluation:
        spec = self.parent.spec
        mask = resolve_mask(spec, action, self._gammas)
        tuned = fine_tune(self.parent.masked(mask), mask, self.data, self.cfg, np.random.default_rng(seed))
        loss = test_loss(tuned, self.data)
        flops = total_flops(spec, mask)
        logger.debug(f"Evaluated {action.to_json()}: loss {loss:.5f}, FLOPs {flops:,}")
        return Evaluation(loss, flops)


class ExternalEvaluator:
    """Speaks line-delimited JSON to a child process.

    Request:  {"action": [...], "seed": n}
    Response: {"loss": x, "flops": n}  or  {"error": "..."}
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        try:
            self._process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise EvaluationError(f"cannot start evaluator {self.command}: {e}") from e

    def evaluate(self, action: PruningAction, seed: int) -> Evaluation:
        request = json.dumps({"action": action.to_json(), "seed": seed})
        try:
            self._process.stdin.write(request + "\n")
            self._process.stdin.flush()
            line = self._process.stdout.readline()
        except (OSError, ValueError) as e:
            raise EvaluationError(f"evaluator {self.command} unreachable: {e}") from e
        if not line:
            raise EvaluationError(f"evaluator {self.command} closed its output (exit {self._process.poll()})")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as e:
            raise EvaluationError(f"evaluator sent malformed JSON: {line.strip()!r}") from e
        if "error" in response:
            raise EvaluationError(f"evaluator reported: {response['error']}")
        try:
            return Evaluation(float(response["loss"]), int(response["flops"]))
        except (KeyError, TypeError, ValueError) as e:
            raise EvaluationError(f"evaluator response lacks loss/flops: {response}") from e

    def close(self) -> None:
        if self._process.poll() is None:
            self._process.stdin.close()
            self._process.wait(timeout=10)

    def __enter__(self) -> "ExternalEvaluator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve_evaluator(evaluator: Evaluator, stdin: IO[str], stdout: IO[str]) -> int:
    """Answer evaluation requests line by line until stdin closes; returns the number served."""
    served = 0
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            evaluation = evaluator.evaluate(PruningAction.from_json(request["action"]), int(request["seed"]))
            response = {"loss": evaluation.loss, "flops": evaluation.flops}
        except (PrunerError, KeyError, TypeError, ValueError) as e:
            logger.warning(f"Rejected evaluation request: {e}")
            response = {"error": str(e)}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
        served += 1
    return served
