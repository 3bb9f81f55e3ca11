import math
from dataclasses import dataclass
from typing import Any, Iterator

from ..errors import InvalidArgumentError
from ..utils.enum import LayerKind
from .network import NetworkSpec

BLOCK_KEEP = 0
BLOCK_PRUNE = 1
MAX_RATIO = 0.9
DISCRETE_RATIOS = (0.0, 0.225, 0.45, 0.675, 0.9)

Element = int | float


@dataclass(frozen=True)
class PruningAction:
    """The list a_1..a_T of one controller rollout.

    Block choices are ints (1 = prune, 0 = keep); channel pruning ratios are
    floats in [0, 0.9]. The Python type is the element kind, so a JSON array
    written with `to_json` reads back with the same kinds.
    """
    elements: tuple[Element, ...]

    def __post_init__(self) -> None:
        normalized = []
        for i, element in enumerate(self.elements):
            if isinstance(element, bool):
                raise InvalidArgumentError(f"element {i}: booleans are not action elements")
            if isinstance(element, int):
                if element not in (BLOCK_KEEP, BLOCK_PRUNE):
                    raise InvalidArgumentError(f"element {i}: block choice must be 0 or 1, got {element}")
                normalized.append(int(element))
                continue
            value = float(element)
            if not math.isfinite(value) or not 0.0 <= value <= MAX_RATIO:
                raise InvalidArgumentError(f"element {i}: ratio {value} outside [0, {MAX_RATIO}]")
            normalized.append(value)
        object.__setattr__(self, "elements", tuple(normalized))

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i: int) -> Element:
        return self.elements[i]

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def is_block_choice(self, i: int) -> bool:
        return isinstance(self.elements[i], int)

    def is_pruned(self, i: int) -> bool:
        return self.is_block_choice(i) and self.elements[i] == BLOCK_PRUNE

    def ratio(self, i: int) -> float:
        """Channel pruning ratio of layer i; a kept block choice counts as 0."""
        element = self.elements[i]
        if isinstance(element, int):
            if element == BLOCK_PRUNE:
                raise InvalidArgumentError(f"layer {i} is block-pruned and has no ratio")
            return 0.0
        return element

    def replace(self, updates: dict[int, Element]) -> "PruningAction":
        elements = list(self.elements)
        for i, element in updates.items():
            elements[i] = element
        return PruningAction(tuple(elements))

    def to_json(self) -> list[Element]:
        return list(self.elements)

    @classmethod
    def from_json(cls, data: list[Any]) -> "PruningAction":
        return cls(tuple(data))

    @classmethod
    def unpruned(cls, spec: NetworkSpec) -> "PruningAction":
        return cls(tuple(0.0 for _ in spec.layers))


def check_action(spec: NetworkSpec, action: PruningAction) -> PruningAction:
    """Raise InvalidArgumentError unless `action` fits the layout of `spec`."""
    if len(action) != spec.num_layers:
        raise InvalidArgumentError(f"action length {len(action)} != T = {spec.num_layers}")
    for layer in spec.layers:
        i = layer.id
        if action.is_block_choice(i) and not layer.is_block_layer:
            raise InvalidArgumentError(f"block choice at non-block layer {i}")
        if layer.kind == LayerKind.BlockSecond:
            if action.is_pruned(i) != action.is_pruned(i - 1):
                raise InvalidArgumentError(f"layer {i} does not mirror the block choice of layer {i - 1}")
            if action.is_block_choice(i) and not action.is_block_choice(i - 1):
                raise InvalidArgumentError(f"layer {i} holds a block choice its BlockFirst did not make")
    return action
