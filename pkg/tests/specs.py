"""Network and action builders shared by the test modules."""
import numpy as np

from joint_pruner.arch import BLOCK_PRUNE, LayerSpec, NetworkSpec, PruningAction, conv_output_size
from joint_pruner.utils.enum import LayerKind


def build_spec(plan, in_ch: int = 1, size: int = 8, head_ids=None) -> NetworkSpec:
    """Plan entries: ("ordinary", k, out), ("group", k, out, stride), ("block", k1, mid, k2)."""
    layers = []
    channels = in_ch
    block_id = 0
    group_id = -1
    entry_group = None

    def add(kind, kernel, out_ch, stride=1, block=None, group=None):
        nonlocal channels, size
        layers.append(LayerSpec(
            id=len(layers), kind=kind, kernel=kernel, in_ch=channels, out_ch=out_ch,
            in_h=size, in_w=size, stride=stride, block_id=block, group_id=group,
        ))
        channels = out_ch
        size = conv_output_size(size, kernel, stride)

    for entry in plan:
        if entry[0] == "ordinary":
            add(LayerKind.Ordinary, entry[1], entry[2])
            entry_group = None
        elif entry[0] == "group":
            group_id += 1
            add(LayerKind.GroupFirst, entry[1], entry[2], stride=entry[3], group=group_id)
            entry_group = group_id
        else:
            _, k1, mid, k2 = entry
            width = channels
            add(LayerKind.BlockFirst, k1, mid, block=block_id, group=entry_group)
            add(LayerKind.BlockSecond, k2, width, block=block_id, group=entry_group)
            block_id += 1

    return NetworkSpec(
        layers=tuple(layers),
        s_frb=[layer.id for layer in layers if layer.kind == LayerKind.BlockFirst],
        head_ids=head_ids if head_ids is not None else [len(layers)],
    )


def block_pair_spec() -> NetworkSpec:
    """[Ordinary, BlockFirst, BlockSecond]."""
    return build_spec([("ordinary", 3, 4), ("block", 1, 2, 3)], size=6)


def small_spec() -> NetworkSpec:
    """Stem, one strided group with two blocks, and a closing 1x1 layer: T = 7."""
    return build_spec([
        ("ordinary", 3, 4),
        ("group", 3, 8, 2),
        ("block", 1, 4, 3),
        ("block", 1, 4, 3),
        ("ordinary", 1, 6),
    ])


def random_spec(rng: np.random.Generator, in_ch: int | None = None) -> NetworkSpec:
    plan = [("ordinary", int(rng.choice([1, 3])), int(rng.integers(2, 7)))]
    size = 8
    for _ in range(int(rng.integers(1, 4))):
        if rng.random() < 0.7:
            stride = 2 if size >= 4 and rng.random() < 0.5 else 1
            plan.append(("group", int(rng.choice([1, 3])), int(rng.integers(2, 9)), stride))
            size = conv_output_size(size, 3, stride)
        else:
            plan.append(("ordinary", int(rng.choice([1, 3])), int(rng.integers(2, 9))))
        for _ in range(int(rng.integers(0, 3))):
            plan.append(("block", int(rng.choice([1, 3])), int(rng.integers(1, 6)), int(rng.choice([1, 3]))))
    drawn = int(rng.integers(1, 4))
    return build_spec(plan, in_ch=in_ch if in_ch is not None else drawn, size=8)


def random_action(spec: NetworkSpec, rng: np.random.Generator, prune_prob: float = 0.3) -> PruningAction:
    """Joint-mode action with uniform ratios, before the group constraint."""
    elements = []
    for layer in spec.layers:
        if layer.kind == LayerKind.BlockSecond and isinstance(elements[-1], int):
            elements.append(BLOCK_PRUNE)
        elif layer.kind == LayerKind.BlockFirst and rng.random() < prune_prob:
            elements.append(BLOCK_PRUNE)
        else:
            elements.append(float(rng.uniform(0.0, 0.9)))
    return PruningAction(tuple(elements))


def random_gammas(spec: NetworkSpec, rng: np.random.Generator) -> list[np.ndarray]:
    return [rng.normal(size=layer.out_ch) for layer in spec.layers]
