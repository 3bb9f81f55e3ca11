from typing import NamedTuple, Protocol, runtime_checkable

from ..arch.action import PruningAction


class Evaluation(NamedTuple):
    loss: float
    flops: int


@runtime_checkable
class Evaluator(Protocol):
    """Scores a (group-constrained) pruning action.

    Must behave as a pure function of (action, seed) between controller updates.
    """

    def evaluate(self, action: PruningAction, seed: int) -> Evaluation: ...
