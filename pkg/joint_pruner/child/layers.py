"""
Forward/backward kernels of the reference child: same-padded convolution,
batch normalization, leaky rectifier, global average pooling and softmax
cross-entropy. Tensors are (N, C, H, W) float64.
"""
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
LEAKY_SLOPE = 0.1


class ConvCache(NamedTuple):
    windows: np.ndarray
    x_shape: tuple[int, ...]
    stride: int


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int = 1) -> tuple[np.ndarray, ConvCache]:
    kernel = w.shape[2]
    pad = kernel // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    # (N, C, Ho, Wo, S, S)
    windows = sliding_window_view(xp, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), ConvCache(windows, x.shape, stride)


def conv2d_backward(dout: np.ndarray, w: np.ndarray, cache: ConvCache) -> tuple[np.ndarray, np.ndarray]:
    """Return (dx, dw)."""
    n, c, h, width = cache.x_shape
    kernel = w.shape[2]
    pad = kernel // 2
    stride = cache.stride
    out_h, out_w = dout.shape[2], dout.shape[3]

    dw = np.tensordot(dout, cache.windows, axes=([0, 2, 3], [0, 2, 3]))

    dxp = np.zeros((n, c, h + 2 * pad, width + 2 * pad))
    for a in range(kernel):
        for b in range(kernel):
            contribution = np.tensordot(dout, w[:, :, a, b], axes=([1], [0])).transpose(0, 3, 1, 2)
            dxp[:, :, a:a + stride * (out_h - 1) + 1:stride, b:b + stride * (out_w - 1) + 1:stride] += contribution
    return dxp[:, :, pad:pad + h, pad:pad + width], dw


class BatchNormCache(NamedTuple):
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    train: bool


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
) -> tuple[np.ndarray, BatchNormCache, tuple[np.ndarray, np.ndarray] | None]:
    """y = gamma * (x - mean) / sqrt(var + eps) + beta per channel.

    In training mode the batch statistics are used and the updated running
    (mean, var) pair is returned as the third value; otherwise it is None.
    """
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        updated = (
            BN_MOMENTUM * running_mean + (1.0 - BN_MOMENTUM) * mean,
            BN_MOMENTUM * running_var + (1.0 - BN_MOMENTUM) * var,
        )
    else:
        mean, var, updated = running_mean, running_var, None
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    y = gamma[None, :, None, None] * x_hat + beta[None, :, None, None]
    return y, BatchNormCache(x_hat, inv_std, gamma, train), updated


def batchnorm_backward(dy: np.ndarray, cache: BatchNormCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (dx, dgamma, dbeta)."""
    dgamma = np.sum(dy * cache.x_hat, axis=(0, 2, 3))
    dbeta = np.sum(dy, axis=(0, 2, 3))
    dx_hat = dy * cache.gamma[None, :, None, None]
    scale = cache.inv_std[None, :, None, None]
    if not cache.train:
        return dx_hat * scale, dgamma, dbeta
    m = dy.shape[0] * dy.shape[2] * dy.shape[3]
    dx = scale / m * (
        m * dx_hat
        - np.sum(dx_hat, axis=(0, 2, 3))[None, :, None, None]
        - cache.x_hat * np.sum(dx_hat * cache.x_hat, axis=(0, 2, 3))[None, :, None, None]
    )
    return dx, dgamma, dbeta


def leaky_relu_forward(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def leaky_relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dy * np.where(x > 0, 1.0, LEAKY_SLOPE)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample losses and d(mean loss)/d logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    losses = -log_probs[np.arange(n), labels]
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return losses, dlogits / n
