"""
Two-layer stacked LSTM cell and the affine/softmax/Gaussian heads on top of it.

Gate rows of each weight matrix are ordered input, forget, output, candidate.
State arrays `c` and `h` have shape (LSTM_LAYERS, h_dim); row -1 is the top
layer whose hidden vector feeds the branch heads.
"""
import math
from typing import NamedTuple

import numpy as np

from .params import LSTM_LAYERS, ControllerParams

LOG_2PI = math.log(2.0 * math.pi)
RHO_MIN = -10.0
RHO_MAX = 2.0


class LayerCache(NamedTuple):
    x: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tanh_c: np.ndarray


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_step(
    params: ControllerParams,
    e: np.ndarray,
    c_prev: np.ndarray,
    h_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, list[LayerCache]]:
    h_dim = h_prev.shape[1]
    c = np.empty_like(c_prev)
    h = np.empty_like(h_prev)
    caches = []
    layer_input = e
    for layer in range(LSTM_LAYERS):
        x = np.concatenate([layer_input, h_prev[layer]])
        z = params[f"lstm.W{layer}"] @ x + params[f"lstm.b{layer}"]
        i = sigmoid(z[:h_dim])
        f = sigmoid(z[h_dim:2 * h_dim])
        o = sigmoid(z[2 * h_dim:3 * h_dim])
        g = np.tanh(z[3 * h_dim:])
        c[layer] = f * c_prev[layer] + i * g
        tanh_c = np.tanh(c[layer])
        h[layer] = o * tanh_c
        caches.append(LayerCache(x, c_prev[layer], i, f, o, g, tanh_c))
        layer_input = h[layer]
    return c, h, caches


def lstm_step_backward(
    params: ControllerParams,
    caches: list[LayerCache],
    dc: np.ndarray,
    dh: np.ndarray,
    grads: ControllerParams,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backpropagate one stacked step.

    `dc`, `dh` are the gradients w.r.t. this step's output state; `grads` is
    accumulated in place. Returns (d_e, d_c_prev, d_h_prev).
    """
    dc_prev = np.zeros_like(dc)
    dh_prev = np.zeros_like(dh)
    dh = dh.copy()
    d_input = None
    for layer in reversed(range(LSTM_LAYERS)):
        cache = caches[layer]
        dh_layer = dh[layer]
        d_o = dh_layer * cache.tanh_c
        dc_total = dc[layer] + dh_layer * cache.o * (1.0 - cache.tanh_c ** 2)
        d_i = dc_total * cache.g
        d_f = dc_total * cache.c_prev
        d_g = dc_total * cache.i
        dc_prev[layer] = dc_total * cache.f

        dz = np.concatenate([
            d_i * cache.i * (1.0 - cache.i),
            d_f * cache.f * (1.0 - cache.f),
            d_o * cache.o * (1.0 - cache.o),
            d_g * (1.0 - cache.g ** 2),
        ])
        W = params[f"lstm.W{layer}"]
        grads[f"lstm.W{layer}"] += np.outer(dz, cache.x)
        grads[f"lstm.b{layer}"] += dz
        dx = W.T @ dz
        in_width = cache.x.shape[0] - dh.shape[1]
        d_input = dx[:in_width]
        dh_prev[layer] = dx[in_width:]
        if layer > 0:
            dh[layer - 1] += d_input
    return d_input, dc_prev, dh_prev


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - np.max(logits))
    return shifted / shifted.sum()


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    return shifted - np.log(np.sum(np.exp(shifted)))


def clamp_rho(rho_raw: float) -> float:
    return min(max(rho_raw, RHO_MIN), RHO_MAX)


def gaussian_log_prob(x: float, mu: float, rho: float) -> float:
    """log N(x; mu, exp(rho)) with rho the log-variance."""
    return -0.5 * (LOG_2PI + rho + (x - mu) ** 2 * math.exp(-rho))
