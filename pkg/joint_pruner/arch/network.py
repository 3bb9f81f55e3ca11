import json
from pathlib import Path
from typing import Any, NamedTuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import InvalidArgumentError, VersionMismatchError
from ..utils.enum import LayerKind

ARCH_SCHEMA = "abcp-arch/1"

BLOCK_KINDS = (LayerKind.BlockFirst, LayerKind.BlockSecond)


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    """Output extent of a 'same'-padded convolution (padding = kernel // 2)."""
    return (size + 2 * (kernel // 2) - kernel) // stride + 1


class LayerSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    kind: LayerKind
    kernel: int = Field(ge=1)
    in_ch: int = Field(ge=1)
    out_ch: int = Field(ge=1)
    in_h: int = Field(ge=1)
    in_w: int = Field(ge=1)
    stride: int = Field(default=1, ge=1)
    block_id: int | None = None
    group_id: int | None = None

    @property
    def out_h(self) -> int:
        return conv_output_size(self.in_h, self.kernel, self.stride)

    @property
    def out_w(self) -> int:
        return conv_output_size(self.in_w, self.kernel, self.stride)

    @property
    def is_block_layer(self) -> bool:
        return self.kind in BLOCK_KINDS


class NetworkSpec(BaseModel):
    """Ordered description of a residual CNN.

    Layer ids run 0..T-1. A head id equal to T names the affine classifier that
    follows global average pooling.
    """
    model_config = ConfigDict(frozen=True)

    layers: tuple[LayerSpec, ...]
    s_frb: tuple[int, ...]
    head_ids: tuple[int, ...] = ()

    @field_validator("s_frb", "head_ids", mode="before")
    @classmethod
    def _sorted_ids(cls, value: Any) -> tuple[int, ...]:
        return tuple(sorted(set(value)))

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def input_channels(self) -> int:
        return self.layers[0].in_ch

    @property
    def classifier_id(self) -> int:
        return len(self.layers)

    def to_document(self) -> dict[str, Any]:
        return {
            "schema": ARCH_SCHEMA,
            "layers": [layer.model_dump(mode="json") for layer in self.layers],
            "s_frb": list(self.s_frb),
            "head_ids": list(self.head_ids),
        }

    @classmethod
    def from_document(cls, document: dict[str, Any]) -> "NetworkSpec":
        found = document.get("schema")
        if found != ARCH_SCHEMA:
            raise VersionMismatchError(ARCH_SCHEMA, found)
        return cls.model_validate({key: value for key, value in document.items() if key != "schema"})


class Block(NamedTuple):
    block_id: int
    first: int
    second: int


class CoupledSet(NamedTuple):
    """Layers whose outputs meet in one residual sum: the entry layer plus every BlockSecond after it."""
    entry: int
    members: tuple[int, ...]


def validate_network(spec: NetworkSpec) -> list[str]:
    """Return every structural violation of `spec`; an empty list means valid."""
    violations: list[str] = []
    layers = spec.layers
    if not layers:
        return ["network has no layers"]

    if [layer.id for layer in layers] != list(range(len(layers))):
        violations.append("layer ids must be consecutive from 0")

    for j in range(1, len(layers)):
        previous, layer = layers[j - 1], layers[j]
        if layer.in_ch != previous.out_ch:
            violations.append(
                f"channel flow mismatch at layer {j}: in_ch {layer.in_ch} != {previous.out_ch}"
            )
        if (layer.in_h, layer.in_w) != (previous.out_h, previous.out_w):
            violations.append(
                f"spatial mismatch at layer {j}: input {layer.in_h}x{layer.in_w} "
                f"!= {previous.out_h}x{previous.out_w}"
            )

    seen_blocks: set[int] = set()
    entry: LayerSpec | None = None
    for j, layer in enumerate(layers):
        if not layer.is_block_layer:
            if layer.block_id is not None:
                violations.append(f"layer {j} carries block_id but is not a block layer")
            if layer.kind == LayerKind.GroupFirst and layer.group_id is None:
                violations.append(f"group entry layer {j} has no group_id")
            entry = layer
            continue

        if layer.block_id is None:
            violations.append(f"block layer {j} has no block_id")
            continue

        if layer.kind == LayerKind.BlockFirst:
            if layer.block_id in seen_blocks:
                violations.append(f"duplicate block id {layer.block_id}")
            seen_blocks.add(layer.block_id)
            if entry is None:
                violations.append(f"block {layer.block_id} has no entry layer")
            elif layer.group_id != (entry.group_id if entry.kind == LayerKind.GroupFirst else None):
                violations.append(f"block {layer.block_id} group mismatch with entry layer {entry.id}")
            partner = layers[j + 1] if j + 1 < len(layers) else None
            if (partner is None or partner.kind != LayerKind.BlockSecond
                    or partner.block_id != layer.block_id):
                violations.append(f"block {layer.block_id} layout broken: BlockFirst {j} not followed by its BlockSecond")
                continue
            if partner.out_ch != layer.in_ch:
                violations.append(
                    f"residual shape mismatch in block {layer.block_id}: "
                    f"BlockSecond out_ch {partner.out_ch} != block input {layer.in_ch}"
                )
            if layer.stride != 1 or partner.stride != 1:
                violations.append(f"strided residual block {layer.block_id}")
            if partner.group_id != layer.group_id:
                violations.append(f"block {layer.block_id} layers disagree on group_id")
        else:
            previous = layers[j - 1] if j > 0 else None
            if (previous is None or previous.kind != LayerKind.BlockFirst
                    or previous.block_id != layer.block_id):
                violations.append(f"block {layer.block_id} layout broken: BlockSecond {j} without its BlockFirst")

    first_ids = {layer.id for layer in layers if layer.kind == LayerKind.BlockFirst}
    missing = sorted(first_ids - set(spec.s_frb))
    extra = sorted(set(spec.s_frb) - first_ids)
    if missing:
        violations.append(f"s_frb incomplete: missing {missing}")
    if extra:
        violations.append(f"s_frb lists non-BlockFirst ids {extra}")

    out_of_range = [i for i in spec.head_ids if not 0 <= i <= len(layers)]
    if out_of_range:
        violations.append(f"head ids out of range: {out_of_range}")

    return violations


def require_valid(spec: NetworkSpec) -> NetworkSpec:
    violations = validate_network(spec)
    if violations:
        raise InvalidArgumentError("invalid network: " + "; ".join(violations))
    return spec


def blocks(spec: NetworkSpec) -> list[Block]:
    return [
        Block(layer.block_id, layer.id, layer.id + 1)
        for layer in spec.layers
        if layer.kind == LayerKind.BlockFirst
    ]


def coupled_sets(spec: NetworkSpec) -> list[CoupledSet]:
    """Group each entry layer with the BlockSecond layers of the run of blocks that follows it."""
    sets: list[list[int]] = []
    for layer in spec.layers:
        if not layer.is_block_layer:
            sets.append([layer.id])
        elif layer.kind == LayerKind.BlockSecond and sets:
            sets[-1].append(layer.id)
    return [CoupledSet(members[0], tuple(members)) for members in sets]


def reference_network(image_size: int = 32, in_channels: int = 1) -> NetworkSpec:
    """The desk-scale child: stem conv, two strided groups of two bottleneck blocks each.

    T = 11 prunable layers; the head is the affine classifier (id 11).
    """
    layers: list[LayerSpec] = []
    size = image_size

    def add(kind: LayerKind, kernel: int, in_ch: int, out_ch: int, stride: int = 1,
            block_id: int | None = None, group_id: int | None = None) -> None:
        nonlocal size
        layers.append(LayerSpec(
            id=len(layers), kind=kind, kernel=kernel, in_ch=in_ch, out_ch=out_ch,
            in_h=size, in_w=size, stride=stride, block_id=block_id, group_id=group_id,
        ))
        size = conv_output_size(size, kernel, stride)

    add(LayerKind.Ordinary, 3, in_channels, 16)
    block_id = 0
    for group_id, (width, bottleneck) in enumerate([(32, 16), (64, 32)]):
        add(LayerKind.GroupFirst, 3, layers[-1].out_ch, width, stride=2, group_id=group_id)
        for _ in range(2):
            add(LayerKind.BlockFirst, 1, width, bottleneck, block_id=block_id, group_id=group_id)
            add(LayerKind.BlockSecond, 3, bottleneck, width, block_id=block_id, group_id=group_id)
            block_id += 1

    return NetworkSpec(
        layers=tuple(layers),
        s_frb=[layer.id for layer in layers if layer.kind == LayerKind.BlockFirst],
        head_ids=[len(layers)],
    )


def save_network(spec: NetworkSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spec.to_document(), f, indent=2)
        f.write("\n")


def load_network(path: str | Path) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as f:
        return NetworkSpec.from_document(json.load(f))
