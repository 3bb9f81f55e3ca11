from .action import (
    BLOCK_KEEP,
    BLOCK_PRUNE,
    DISCRETE_RATIOS,
    MAX_RATIO,
    PruningAction,
    check_action,
)
from .export import export_pruned, prune_summary
from .flops import layer_flops, parameter_count, total_flops
from .mask import (
    LayerMask,
    PruneMask,
    WeightStore,
    apply_mask,
    enforce_group_constraint,
    prune_count,
    resolve_mask,
)
from .network import (
    ARCH_SCHEMA,
    Block,
    CoupledSet,
    LayerSpec,
    NetworkSpec,
    blocks,
    conv_output_size,
    coupled_sets,
    load_network,
    reference_network,
    require_valid,
    save_network,
    validate_network,
)

__all__ = [
    "ARCH_SCHEMA",
    "BLOCK_KEEP",
    "BLOCK_PRUNE",
    "DISCRETE_RATIOS",
    "MAX_RATIO",
    "Block",
    "CoupledSet",
    "LayerMask",
    "LayerSpec",
    "NetworkSpec",
    "PruneMask",
    "PruningAction",
    "WeightStore",
    "apply_mask",
    "blocks",
    "check_action",
    "conv_output_size",
    "coupled_sets",
    "enforce_group_constraint",
    "export_pruned",
    "layer_flops",
    "load_network",
    "parameter_count",
    "prune_count",
    "prune_summary",
    "reference_network",
    "require_valid",
    "resolve_mask",
    "save_network",
    "total_flops",
    "validate_network",
]
