import logging
from typing import Any

from ..utils.enum import LayerKind
from .flops import kept_channel_flow, total_flops
from .mask import PruneMask
from .network import LayerSpec, NetworkSpec, blocks, require_valid

logger = logging.getLogger(__name__)


def export_pruned(spec: NetworkSpec, mask: PruneMask) -> NetworkSpec:
    """Build the compact architecture a mask describes.

    Removed blocks disappear, surviving layers shrink to their kept channel
    counts and ids/block ids are renumbered. The classifier head id follows
    the new T; other head ids follow their layer or vanish with it.
    """
    flow = kept_channel_flow(spec, mask)
    new_ids: dict[int, int] = {}
    block_ids: dict[int, int] = {}
    layers: list[LayerSpec] = []

    for layer, channels in zip(spec.layers, flow):
        if channels is None:
            continue
        block_id = None
        if layer.block_id is not None:
            block_id = block_ids.setdefault(layer.block_id, len(block_ids))
        new_ids[layer.id] = len(layers)
        layers.append(layer.model_copy(update={
            "id": len(layers),
            "in_ch": channels[0],
            "out_ch": channels[1],
            "block_id": block_id,
        }))

    head_ids = []
    for head in spec.head_ids:
        if head == spec.classifier_id:
            head_ids.append(len(layers))
        elif head in new_ids:
            head_ids.append(new_ids[head])

    pruned = NetworkSpec(
        layers=tuple(layers),
        s_frb=[layer.id for layer in layers if layer.kind == LayerKind.BlockFirst],
        head_ids=head_ids,
    )
    logger.debug(f"Exported {spec.num_layers} -> {pruned.num_layers} layers")
    return require_valid(pruned)


def prune_summary(spec: NetworkSpec, mask: PruneMask) -> dict[str, Any]:
    """Numbers for reports: FLOPs before/after, removed blocks and kept channels per layer."""
    before = total_flops(spec)
    after = total_flops(spec, mask)
    return {
        "flops_before": before,
        "flops_after": after,
        "flops_reduction": 1.0 - after / before,
        "removed_blocks": [block.block_id for block in blocks(spec) if mask[block.first].removed],
        "kept_channels": [m.kept_count for m in mask.layers],
        "out_channels": [layer.out_ch for layer in spec.layers],
    }
