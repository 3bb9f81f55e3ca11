import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from ..arch.mask import PruneMask, apply_mask, check_mask, weight_mask
from ..arch.network import NetworkSpec
from ..errors import InvalidArgumentError, NumericalFaultError
from ..rl.adam import AdamState, adam_step
from .dataset import Dataset, Split
from .layers import softmax_cross_entropy
from .model import ChildModel

logger = logging.getLogger(__name__)

EVAL_BATCH = 128


class ChildConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=8, ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=3e-3, gt=0)
    fine_tune_lr: float = Field(default=1e-2, gt=0)


def _batches(count: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(count)
    return [order[start:start + batch_size] for start in range(0, count, batch_size)]


def _require_finite(loss: float, what: str) -> None:
    if not math.isfinite(loss):
        raise NumericalFaultError(f"{what} diverged: loss {loss}")


def train_epoch(model: ChildModel, split: Split, cfg: ChildConfig, adam: AdamState,
                rng: np.random.Generator) -> tuple[float, AdamState]:
    """One pass of mini-batch Adam on every weight, BN in training mode."""
    x, labels = split.inputs(), split.labels
    keys = model.parameter_keys()
    losses = []
    for idx in _batches(len(split), cfg.batch_size, rng):
        logits, cache = model.forward(x[idx], train=True)
        batch_losses, dlogits = softmax_cross_entropy(logits, labels[idx])
        loss = float(batch_losses.mean())
        _require_finite(loss, "training")
        grads = model.backward(cache, dlogits)
        updated, adam = adam_step({k: model.weights[k] for k in keys}, grads, adam)
        model.weights.update(updated)
        losses.append(loss * len(idx))
    return math.fsum(losses) / len(split), adam


def pretrain(spec: NetworkSpec, data: Dataset, cfg: ChildConfig, rng: np.random.Generator,
             progress: bool = False) -> ChildModel:
    """Train a freshly initialized model on the train split for `cfg.epochs` epochs."""
    if len(data.train) == 0:
        raise InvalidArgumentError("training split is empty")
    model = ChildModel.initialize(spec, data.num_classes, rng)
    adam = AdamState(lr=cfg.lr)
    for epoch in tqdm(range(cfg.epochs), desc="train", unit="epoch", disable=not progress):
        loss, adam = train_epoch(model, data.train, cfg, adam, rng)
        logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: train loss {loss:.4f}")
    return model


def retrain(pruned_spec: NetworkSpec, data: Dataset, cfg: ChildConfig, rng: np.random.Generator,
            progress: bool = False) -> ChildModel:
    """Train the compact architecture from scratch; nothing carries over from the parent."""
    return pretrain(pruned_spec, data, cfg, rng, progress)


def _pooled_features(model: ChildModel, x: np.ndarray) -> np.ndarray:
    return np.concatenate([
        model.features(x[start:start + EVAL_BATCH], train=False)[0]
        for start in range(0, x.shape[0], EVAL_BATCH)
    ])


def fine_tune(model: ChildModel, mask: PruneMask, data: Dataset, cfg: ChildConfig,
              rng: np.random.Generator) -> ChildModel:
    """One epoch on the head layers of a masked model; everything else stays put.

    BN runs in inference mode. Gradients of masked entries are zeroed and the
    mask is re-applied after every step, so masked weights stay exactly 0.
    Returns a new model; `model` is not modified.
    """
    check_mask(model.spec, mask)
    tuned = model.copy()
    spec = tuned.spec
    keys = tuned.parameter_keys(spec.head_ids)
    zeroed = {k: flags for k, flags in weight_mask(mask, tuned.weights).items() if k in keys}
    x, labels = data.train.inputs(), data.train.labels
    adam = AdamState(lr=cfg.fine_tune_lr)

    # Trunk frozen in inference mode: its pooled output is fixed for the epoch
    pooled = _pooled_features(tuned, x) if set(spec.head_ids) == {spec.classifier_id} else None

    for idx in _batches(len(data.train), cfg.batch_size, rng):
        if pooled is not None:
            batch_losses, dlogits = softmax_cross_entropy(tuned.head_logits(pooled[idx]), labels[idx])
            grads = tuned.head_backward(pooled[idx], dlogits)
        else:
            logits, cache = tuned.forward(x[idx], train=False)
            batch_losses, dlogits = softmax_cross_entropy(logits, labels[idx])
            grads = tuned.backward(cache, dlogits)
        _require_finite(float(batch_losses.mean()), "fine-tuning")

        for k, flags in zeroed.items():
            grads[k][flags] = 0.0
        updated, adam = adam_step({k: tuned.weights[k] for k in keys}, grads, adam)
        tuned.weights.update(updated)
        tuned.weights = apply_mask(tuned.weights, mask)
    return tuned


def _split_losses(model: ChildModel, split: Split) -> tuple[np.ndarray, np.ndarray]:
    x = split.inputs()
    logits = np.concatenate([
        model.forward(x[start:start + EVAL_BATCH], train=False)[0]
        for start in range(0, x.shape[0], EVAL_BATCH)
    ])
    losses, _ = softmax_cross_entropy(logits, split.labels)
    return losses, logits


def test_loss(model: ChildModel, data: Dataset) -> float:
    """Mean cross-entropy over the whole test split, BN on running statistics."""
    if len(data.test) == 0:
        raise InvalidArgumentError("test split is empty")
    losses, _ = _split_losses(model, data.test)
    return math.fsum(losses.tolist()) / len(data.test)


test_loss.__test__ = False  # not a pytest test


def accuracy(model: ChildModel, data: Dataset) -> float:
    if len(data.test) == 0:
        raise InvalidArgumentError("test split is empty")
    _, logits = _split_losses(model, data.test)
    return float(np.mean(np.argmax(logits, axis=1) == data.test.labels))
