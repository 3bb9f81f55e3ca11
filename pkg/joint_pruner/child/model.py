import json
import logging
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from ..arch.mask import (
    PruneMask,
    WeightStore,
    apply_mask,
    beta_key,
    conv_key,
    gamma_key,
    running_mean_key,
    running_var_key,
)
from ..arch.network import NetworkSpec, require_valid
from ..errors import InvalidArgumentError, VersionMismatchError
from ..utils.arrays import decode_arrays, encode_arrays
from ..utils.enum import LayerKind
from .layers import (
    BatchNormCache,
    ConvCache,
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    leaky_relu_backward,
    leaky_relu_forward,
)

logger = logging.getLogger(__name__)

CHILD_SCHEMA = "abcp-child/1"
HEAD_W = "head.W"
HEAD_B = "head.b"


class LayerCache(NamedTuple):
    conv: ConvCache
    bn: BatchNormCache
    pre_activation: np.ndarray


class ForwardCache(NamedTuple):
    layers: list[LayerCache]
    last_shape: tuple[int, ...]
    pooled: np.ndarray


class ChildModel:
    """Residual CNN over a NetworkSpec: conv -> BN -> leaky ReLU per layer,
    shortcut added after the BlockSecond activation, then global average
    pooling and an affine classifier.

    Weights live in one flat store keyed conv{j}.weight, bn{j}.gamma,
    bn{j}.beta, bn{j}.mean, bn{j}.var, head.W, head.b.
    """

    def __init__(self, spec: NetworkSpec, num_classes: int, weights: WeightStore):
        self.spec = spec
        self.num_classes = num_classes
        self.weights = weights
        self._check_shapes()

    @classmethod
    def initialize(cls, spec: NetworkSpec, num_classes: int, rng: np.random.Generator) -> "ChildModel":
        require_valid(spec)
        weights: WeightStore = {}
        for layer in spec.layers:
            j = layer.id
            fan_in = layer.in_ch * layer.kernel * layer.kernel
            shape = (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
            weights[conv_key(j)] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
            weights[gamma_key(j)] = np.ones(layer.out_ch)
            weights[beta_key(j)] = np.zeros(layer.out_ch)
            weights[running_mean_key(j)] = np.zeros(layer.out_ch)
            weights[running_var_key(j)] = np.ones(layer.out_ch)
        features = spec.layers[-1].out_ch
        weights[HEAD_W] = rng.standard_normal((num_classes, features)) * np.sqrt(1.0 / features)
        weights[HEAD_B] = np.zeros(num_classes)
        return cls(spec, num_classes, weights)

    def _check_shapes(self) -> None:
        for layer in self.spec.layers:
            j = layer.id
            expected = {
                conv_key(j): (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel),
                gamma_key(j): (layer.out_ch,),
                beta_key(j): (layer.out_ch,),
                running_mean_key(j): (layer.out_ch,),
                running_var_key(j): (layer.out_ch,),
            }
            for key, shape in expected.items():
                if key not in self.weights or self.weights[key].shape != shape:
                    found = self.weights[key].shape if key in self.weights else None
                    raise InvalidArgumentError(f"weight {key} has shape {found}, expected {shape}")
        head_shape = (self.num_classes, self.spec.layers[-1].out_ch)
        if self.weights.get(HEAD_W) is None or self.weights[HEAD_W].shape != head_shape:
            raise InvalidArgumentError(f"head weight must have shape {head_shape}")

    def copy(self) -> "ChildModel":
        return ChildModel(self.spec, self.num_classes, {k: v.copy() for k, v in self.weights.items()})

    def masked(self, mask: PruneMask) -> "ChildModel":
        return ChildModel(self.spec, self.num_classes, apply_mask(self.weights, mask))

    def bn_gammas(self) -> list[np.ndarray]:
        return [self.weights[gamma_key(layer.id)].copy() for layer in self.spec.layers]

    def parameter_keys(self, head_ids: tuple[int, ...] | None = None) -> list[str]:
        """Trainable weights, restricted to the given layer ids (T = classifier) when set."""
        ids = range(self.spec.num_layers + 1) if head_ids is None else head_ids
        keys = []
        for j in ids:
            if j == self.spec.classifier_id:
                keys += [HEAD_W, HEAD_B]
            else:
                keys += [conv_key(j), gamma_key(j), beta_key(j)]
        return keys

    def features(self, x: np.ndarray, train: bool = False) -> tuple[np.ndarray, ForwardCache]:
        """Pooled trunk output. Training mode uses batch statistics and updates the running ones."""
        caches: list[LayerCache] = []
        a = x
        block_input = None
        for layer in self.spec.layers:
            j = layer.id
            if layer.kind == LayerKind.BlockFirst:
                block_input = a
            z, conv_cache = conv2d_forward(a, self.weights[conv_key(j)], layer.stride)
            y, bn_cache, updated = batchnorm_forward(
                z,
                self.weights[gamma_key(j)],
                self.weights[beta_key(j)],
                self.weights[running_mean_key(j)],
                self.weights[running_var_key(j)],
                train,
            )
            if updated is not None:
                self.weights[running_mean_key(j)], self.weights[running_var_key(j)] = updated
            a = leaky_relu_forward(y)
            if layer.kind == LayerKind.BlockSecond:
                a = a + block_input
            caches.append(LayerCache(conv_cache, bn_cache, y))
        pooled = a.mean(axis=(2, 3))
        return pooled, ForwardCache(caches, a.shape, pooled)

    def forward(self, x: np.ndarray, train: bool = False) -> tuple[np.ndarray, ForwardCache]:
        pooled, cache = self.features(x, train)
        return self.head_logits(pooled), cache

    def head_logits(self, pooled: np.ndarray) -> np.ndarray:
        return pooled @ self.weights[HEAD_W].T + self.weights[HEAD_B]

    def head_backward(self, pooled: np.ndarray, dlogits: np.ndarray) -> WeightStore:
        return {HEAD_W: dlogits.T @ pooled, HEAD_B: dlogits.sum(axis=0)}

    def backward(self, cache: ForwardCache, dlogits: np.ndarray) -> WeightStore:
        """Gradients of every trainable weight given d loss / d logits."""
        grads = self.head_backward(cache.pooled, dlogits)
        n, c, h, w = cache.last_shape
        da = np.broadcast_to((dlogits @ self.weights[HEAD_W])[:, :, None, None] / (h * w), cache.last_shape)
        d_shortcut = None
        for layer, layer_cache in zip(reversed(self.spec.layers), reversed(cache.layers)):
            j = layer.id
            if layer.kind == LayerKind.BlockSecond:
                d_shortcut = da
            dy = leaky_relu_backward(da, layer_cache.pre_activation)
            dz, grads[gamma_key(j)], grads[beta_key(j)] = batchnorm_backward(dy, layer_cache.bn)
            da, grads[conv_key(j)] = conv2d_backward(dz, self.weights[conv_key(j)], layer_cache.conv)
            if layer.kind == LayerKind.BlockFirst:
                da = da + d_shortcut
        return grads


def child_document(model: ChildModel) -> dict[str, Any]:
    return {
        "schema": CHILD_SCHEMA,
        "spec": model.spec.to_document(),
        "num_classes": model.num_classes,
        "weights": encode_arrays(model.weights),
    }


def save_child(model: ChildModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(child_document(model), f, separators=(",", ":"))
        f.write("\n")
    logger.debug(f"Child checkpoint written to {path}")


def load_child(path: str | Path) -> ChildModel:
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise VersionMismatchError(CHILD_SCHEMA, None) from e
    found = document.get("schema") if isinstance(document, dict) else None
    if found != CHILD_SCHEMA:
        raise VersionMismatchError(CHILD_SCHEMA, found)
    return ChildModel(
        NetworkSpec.from_document(document["spec"]),
        document["num_classes"],
        decode_arrays(document["weights"]),
    )
