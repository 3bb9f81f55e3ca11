import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import InvalidArgumentError
from .action import PruningAction, check_action
from .network import NetworkSpec, coupled_sets

WeightStore = dict[str, np.ndarray]

# Keeps floor(r * C) stable when r * C lands a hair under an integer (0.29 * 100)
_FLOOR_SLACK = 1e-9


def conv_key(j: int) -> str:
    return f"conv{j}.weight"


def gamma_key(j: int) -> str:
    return f"bn{j}.gamma"


def beta_key(j: int) -> str:
    return f"bn{j}.beta"


def running_mean_key(j: int) -> str:
    return f"bn{j}.mean"


def running_var_key(j: int) -> str:
    return f"bn{j}.var"


@dataclass(frozen=True)
class LayerMask:
    removed: bool
    kept_channels: tuple[int, ...]
    out_ch: int

    @property
    def kept_count(self) -> int:
        return 0 if self.removed else len(self.kept_channels)

    def dropped_channels(self) -> list[int]:
        if self.removed:
            return list(range(self.out_ch))
        kept = set(self.kept_channels)
        return [c for c in range(self.out_ch) if c not in kept]


@dataclass(frozen=True)
class PruneMask:
    layers: tuple[LayerMask, ...]

    def __len__(self) -> int:
        return len(self.layers)

    def __getitem__(self, j: int) -> LayerMask:
        return self.layers[j]

    @classmethod
    def identity(cls, spec: NetworkSpec) -> "PruneMask":
        return cls(tuple(
            LayerMask(False, tuple(range(layer.out_ch)), layer.out_ch) for layer in spec.layers
        ))

    def to_json(self) -> list[dict[str, Any]]:
        return [
            {"removed": m.removed, "kept": list(m.kept_channels), "out_ch": m.out_ch}
            for m in self.layers
        ]

    @classmethod
    def from_json(cls, data: list[dict[str, Any]]) -> "PruneMask":
        return cls(tuple(
            LayerMask(bool(m["removed"]), tuple(int(c) for c in m["kept"]), int(m["out_ch"])) for m in data
        ))


def check_mask(spec: NetworkSpec, mask: PruneMask) -> PruneMask:
    if len(mask) != spec.num_layers:
        raise InvalidArgumentError(f"mask covers {len(mask)} layers, network has {spec.num_layers}")
    for layer, m in zip(spec.layers, mask.layers):
        if m.out_ch != layer.out_ch:
            raise InvalidArgumentError(f"mask layer {layer.id} out_ch {m.out_ch} != {layer.out_ch}")
        if m.removed:
            if not layer.is_block_layer:
                raise InvalidArgumentError(f"layer {layer.id} is removed but is not in a residual block")
            continue
        if not 1 <= len(m.kept_channels) <= layer.out_ch:
            raise InvalidArgumentError(f"layer {layer.id} keeps {len(m.kept_channels)} channels")
        if any(not 0 <= c < layer.out_ch for c in m.kept_channels):
            raise InvalidArgumentError(f"layer {layer.id} keeps a channel outside 0..{layer.out_ch - 1}")
    for layer in spec.layers:
        if layer.kind.value == "block_first" and mask[layer.id].removed != mask[layer.id + 1].removed:
            raise InvalidArgumentError(f"block {layer.block_id} is only half removed")
    for coupled in coupled_sets(spec):
        kept = {mask[j].kept_channels for j in coupled.members if not mask[j].removed}
        if len(kept) > 1:
            raise InvalidArgumentError(
                f"coupled layers {list(coupled.members)} keep different channels: "
                f"counts {sorted(len(k) for k in kept)}"
            )
    return mask


def enforce_group_constraint(spec: NetworkSpec, action: PruningAction) -> PruningAction:
    """Lift every ratio of a shortcut-coupled set to the set's maximum.

    Layers of pruned blocks take no part; block choices are left untouched.
    """
    check_action(spec, action)
    updates: dict[int, float] = {}
    for coupled in coupled_sets(spec):
        members = [j for j in coupled.members if not action.is_block_choice(j)]
        if not members:
            continue
        top = max(action[j] for j in members)
        updates.update({j: top for j in members if action[j] != top})
    return action.replace(updates) if updates else action


def prune_count(ratio: float, out_ch: int) -> int:
    """floor(ratio * out_ch), leaving at least one channel."""
    return min(math.floor(ratio * out_ch + _FLOOR_SLACK), out_ch - 1)


def resolve_mask(
    spec: NetworkSpec,
    action: PruningAction,
    gammas: Sequence[np.ndarray],
) -> PruneMask:
    """Turn ratios into kept-channel sets, dropping the smallest |gamma| first (lower index on ties).

    The live members of a shortcut-coupled set feed one residual sum, so they are
    ranked once by their summed |gamma| and keep the same channels. Their count
    comes from the largest ratio among them, which `enforce_group_constraint`
    has already made common to all of them.
    """
    check_action(spec, action)
    if len(gammas) != spec.num_layers:
        raise InvalidArgumentError(f"got {len(gammas)} gamma vectors for {spec.num_layers} layers")
    for layer in spec.layers:
        shape = np.shape(gammas[layer.id])
        if shape != (layer.out_ch,):
            raise InvalidArgumentError(f"gamma of layer {layer.id} has shape {shape}, expected ({layer.out_ch},)")

    layer_masks: dict[int, LayerMask] = {}
    for layer in spec.layers:
        if action.is_pruned(layer.id):
            layer_masks[layer.id] = LayerMask(True, (), layer.out_ch)
        else:
            layer_masks[layer.id] = _keep_top(np.abs(gammas[layer.id]), action.ratio(layer.id))
    for coupled in coupled_sets(spec):
        live = [j for j in coupled.members if not action.is_pruned(j)]
        score = sum(np.abs(np.asarray(gammas[j], dtype=np.float64)) for j in live)
        shared = _keep_top(score, max(action.ratio(j) for j in live))
        layer_masks.update({j: shared for j in live})
    return PruneMask(tuple(layer_masks[layer.id] for layer in spec.layers))


def _keep_top(score: np.ndarray, ratio: float) -> LayerMask:
    out_ch = len(score)
    order = np.lexsort((np.arange(out_ch), np.asarray(score, dtype=np.float64)))
    dropped = set(order[:prune_count(ratio, out_ch)].tolist())
    return LayerMask(False, tuple(c for c in range(out_ch) if c not in dropped), out_ch)


def apply_mask(weights: Mapping[str, np.ndarray], mask: PruneMask) -> WeightStore:
    """Zero the filters, gamma and beta of dropped channels and every parameter of removed layers.

    Returns a new store; arrays of untouched keys are copied as well.
    """
    masked = {key: np.array(value, copy=True) for key, value in weights.items()}
    for j, m in enumerate(mask.layers):
        for key in (conv_key(j), gamma_key(j), beta_key(j)):
            if key not in masked:
                raise InvalidArgumentError(f"weight store has no entry {key!r}")
            if masked[key].shape[0] != m.out_ch:
                raise InvalidArgumentError(
                    f"{key} has {masked[key].shape[0]} output channels, mask expects {m.out_ch}"
                )
        dropped = m.dropped_channels()
        if not dropped:
            continue
        masked[conv_key(j)][dropped] = 0.0
        masked[gamma_key(j)][dropped] = 0.0
        masked[beta_key(j)][dropped] = 0.0
    return masked


def weight_mask(mask: PruneMask, weights: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Boolean arrays, True where `apply_mask` forces a zero."""
    zeros: dict[str, np.ndarray] = {}
    for j, m in enumerate(mask.layers):
        dropped = m.dropped_channels()
        for key in (conv_key(j), gamma_key(j), beta_key(j)):
            flags = np.zeros(weights[key].shape, dtype=bool)
            flags[dropped] = True
            zeros[key] = flags
    return zeros
