"""
FLOPs and parameter accounting for (masked) residual networks.

A convolution is charged H * W * S * S * Cin * Cout with H, W the extent of
the feature map entering the layer, strided layers included. Removed blocks
cost nothing and hand their input channel count straight to the next layer.
"""
from ..errors import InvalidArgumentError
from .mask import PruneMask, check_mask
from .network import NetworkSpec


def layer_flops(kernel: int, height: int, width: int, in_ch: int, out_ch: int) -> int:
    args = {"kernel": kernel, "height": height, "width": width, "in_ch": in_ch, "out_ch": out_ch}
    for name, value in args.items():
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise InvalidArgumentError(f"layer_flops: {name} must be a positive integer, got {value!r}")
    return height * width * kernel * kernel * in_ch * out_ch


def kept_channel_flow(spec: NetworkSpec, mask: PruneMask) -> list[tuple[int, int] | None]:
    """(Cin, Cout) actually seen by every layer, or None for removed layers."""
    check_mask(spec, mask)
    flow: list[tuple[int, int] | None] = []
    in_ch = spec.input_channels
    for layer, layer_mask in zip(spec.layers, mask.layers):
        if layer_mask.removed:
            flow.append(None)
            continue
        out_ch = layer_mask.kept_count
        flow.append((in_ch, out_ch))
        in_ch = out_ch
    return flow


def total_flops(spec: NetworkSpec, mask: PruneMask | None = None) -> int:
    mask = mask if mask is not None else PruneMask.identity(spec)
    total = 0
    for layer, channels in zip(spec.layers, kept_channel_flow(spec, mask)):
        if channels is None:
            continue
        total += layer_flops(layer.kernel, layer.in_h, layer.in_w, *channels)
    return total


def parameter_count(spec: NetworkSpec, num_classes: int, mask: PruneMask | None = None) -> int:
    """Conv filters, BN gamma/beta and the affine head, counting kept channels only."""
    if num_classes < 1:
        raise InvalidArgumentError(f"num_classes must be >= 1, got {num_classes}")
    mask = mask if mask is not None else PruneMask.identity(spec)
    count = 0
    features = spec.input_channels
    for layer, channels in zip(spec.layers, kept_channel_flow(spec, mask)):
        if channels is None:
            continue
        in_ch, out_ch = channels
        count += layer.kernel * layer.kernel * in_ch * out_ch + 2 * out_ch
        features = out_ch
    return count + features * num_classes + num_classes
