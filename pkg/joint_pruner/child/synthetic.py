"""Closed-form stand-in for child training, for exercising the controller in milliseconds."""
import itertools
from dataclasses import dataclass

import numpy as np

from ..arch.action import BLOCK_KEEP, BLOCK_PRUNE, DISCRETE_RATIOS, PruningAction, check_action
from ..arch.flops import total_flops
from ..arch.mask import enforce_group_constraint, resolve_mask
from ..arch.network import NetworkSpec
from ..errors import InvalidArgumentError
from ..rl.evaluator import Evaluation
from ..utils.enum import LayerKind, SearchMode


def _coordinate(action: PruningAction, i: int) -> float:
    return 1.0 if action.is_pruned(i) else action.ratio(i)


@dataclass(frozen=True)
class SyntheticLandscape:
    """Pseudo-loss = base_loss + sum_i weights[i] * |v_i - v*_i|.

    v_i is the ratio of element i, with a pruned block counting as 1.0 and a
    kept block choice as 0.0; v* comes from `optimum`.
    """
    spec: NetworkSpec
    optimum: PruningAction
    weights: tuple[float, ...]
    base_loss: float = 0.1

    def __post_init__(self) -> None:
        check_action(self.spec, self.optimum)
        if len(self.weights) != self.spec.num_layers or any(w < 0 for w in self.weights):
            raise InvalidArgumentError("landscape needs one non-negative weight per layer")

    def pseudo_loss(self, action: PruningAction) -> float:
        check_action(self.spec, action)
        return self.base_loss + sum(
            w * abs(_coordinate(action, i) - _coordinate(self.optimum, i))
            for i, w in enumerate(self.weights)
        )


def synthetic_eval(action: PruningAction, landscape: SyntheticLandscape) -> Evaluation:
    gammas = [np.ones(layer.out_ch) for layer in landscape.spec.layers]
    mask = resolve_mask(landscape.spec, action, gammas)
    return Evaluation(landscape.pseudo_loss(action), total_flops(landscape.spec, mask))


class SyntheticEvaluator:
    def __init__(self, landscape: SyntheticLandscape):
        self.landscape = landscape

    def evaluate(self, action: PruningAction, seed: int) -> Evaluation:
        return synthetic_eval(action, self.landscape)


def enumerate_actions(
    spec: NetworkSpec,
    mode: SearchMode = SearchMode.Joint,
    ratios: tuple[float, ...] = DISCRETE_RATIOS,
) -> list[PruningAction]:
    """Every action a discrete-ratio controller in `mode` can emit, before the group constraint."""

    def from_layer(i: int) -> list[tuple]:
        if i >= spec.num_layers:
            return [()]
        layer = spec.layers[i]
        if layer.kind == LayerKind.BlockFirst and mode != SearchMode.ChannelOnly:
            pruned = [(BLOCK_PRUNE, BLOCK_PRUNE) + rest for rest in from_layer(i + 2)]
            if mode == SearchMode.BlockOnly:
                kept = [(BLOCK_KEEP, BLOCK_KEEP) + rest for rest in from_layer(i + 2)]
            else:
                kept = [
                    (first, second) + rest
                    for first, second in itertools.product(ratios, repeat=2)
                    for rest in from_layer(i + 2)
                ]
            return pruned + kept
        own = (0.0,) if mode == SearchMode.BlockOnly else ratios
        return [(value,) + rest for value in own for rest in from_layer(i + 1)]

    return [PruningAction(elements) for elements in from_layer(0)]


def random_landscape(spec: NetworkSpec, seed: int, mode: SearchMode = SearchMode.Joint,
                     ratios: tuple[float, ...] = DISCRETE_RATIOS) -> SyntheticLandscape:
    """A landscape whose optimum is a random action `mode` can reach, weights drawn from [0.1, 1]."""
    rng = np.random.default_rng(seed)
    elements: list = []
    for layer in spec.layers:
        if layer.kind == LayerKind.BlockSecond and mode != SearchMode.ChannelOnly:
            if elements[-1] == BLOCK_PRUNE:
                elements.append(BLOCK_PRUNE)
                continue
            if mode == SearchMode.BlockOnly:
                elements.append(BLOCK_KEEP)
                continue
        elif layer.kind == LayerKind.BlockFirst and mode != SearchMode.ChannelOnly:
            if rng.random() < 0.5:
                elements.append(BLOCK_PRUNE)
                continue
            if mode == SearchMode.BlockOnly:
                elements.append(BLOCK_KEEP)
                continue
        elements.append(0.0 if mode == SearchMode.BlockOnly else float(ratios[rng.integers(len(ratios))]))
    optimum = enforce_group_constraint(spec, PruningAction(tuple(elements)))
    weights = tuple(float(w) for w in rng.uniform(0.1, 1.0, size=spec.num_layers))
    return SyntheticLandscape(spec, optimum, weights)
