#adam optimizer over a dict of named numpy arrays
#a pure function: returns new params and a new state instead of updating in place

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..utils.arrays import decode_arrays, encode_arrays


@dataclass(frozen=True)
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    #first and second moment estimates, keyed like the parameters
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def to_document(self) -> dict[str, Any]:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "t": self.t,
            "m": encode_arrays(self.m),
            "v": encode_arrays(self.v),
        }

    @classmethod
    def from_document(cls, document: dict[str, Any]) -> "AdamState":
        return cls(
            lr=document["lr"],
            beta1=document["beta1"],
            beta2=document["beta2"],
            epsilon=document["epsilon"],
            t=document["t"],
            m=decode_arrays(document["m"]),
            v=decode_arrays(document["v"]),
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One minimizing step: param -= (lr / bc1) * m / (sqrt(v / bc2) + eps)."""
    t = state.t + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    step_size = state.lr / bc1

    new_params, m, v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m_prev = state.m.get(k, np.zeros_like(p))
        v_prev = state.v.get(k, np.zeros_like(p))
        m[k] = state.beta1 * m_prev + (1.0 - state.beta1) * g
        v[k] = state.beta2 * v_prev + (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v[k] * (1.0 / bc2)) + state.epsilon
        new_params[k] = p - step_size * m[k] / denom

    return new_params, AdamState(state.lr, state.beta1, state.beta2, state.epsilon, t, m, v)
