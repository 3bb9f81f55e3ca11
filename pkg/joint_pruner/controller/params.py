import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..arch.action import DISCRETE_RATIOS
from ..arch.network import NetworkSpec
from ..utils.enum import LayerKind, RatioMode, SearchMode

logger = logging.getLogger(__name__)

LSTM_LAYERS = 2
RATIO_BINS = 10

ControllerParams = dict[str, np.ndarray]


class ControllerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    h_dim: int = Field(default=64, ge=1)
    e_dim: int = Field(default=64, ge=1)
    ratio_mode: RatioMode = RatioMode.Continuous
    search_mode: SearchMode = SearchMode.Joint
    init_range: float = Field(default=0.1, gt=0)

    @property
    def samples_blocks(self) -> bool:
        return self.search_mode != SearchMode.ChannelOnly

    @property
    def samples_ratios(self) -> bool:
        return self.search_mode != SearchMode.BlockOnly


def block_head_keys(i: int) -> tuple[str, str]:
    return f"block.{i}.W", f"block.{i}.b"


def discrete_head_keys(i: int) -> tuple[str, str]:
    return f"ratio.{i}.W", f"ratio.{i}.b"


def mu_head_keys(i: int) -> tuple[str, str]:
    return f"mu.{i}.W", f"mu.{i}.b"


def rho_head_keys(i: int) -> tuple[str, str]:
    return f"rho.{i}.W", f"rho.{i}.b"


def param_shapes(spec: NetworkSpec, config: ControllerConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape of every controller weight, in initialization order."""
    h, e = config.h_dim, config.e_dim
    shapes: dict[str, tuple[int, ...]] = {
        "lstm.W0": (4 * h, e + h),
        "lstm.b0": (4 * h,),
        "lstm.W1": (4 * h, 2 * h),
        "lstm.b1": (4 * h,),
        "embed.block": (2, e),
        "embed.ratio": (RATIO_BINS, e),
        "start": (e,),
    }
    for layer in spec.layers:
        i = layer.id
        if config.samples_blocks and layer.kind == LayerKind.BlockFirst:
            w, b = block_head_keys(i)
            shapes[w], shapes[b] = (2, h), (2,)
        if not config.samples_ratios:
            continue
        if config.ratio_mode == RatioMode.Discrete:
            w, b = discrete_head_keys(i)
            shapes[w], shapes[b] = (len(DISCRETE_RATIOS), h), (len(DISCRETE_RATIOS),)
        else:
            for w, b in (mu_head_keys(i), rho_head_keys(i)):
                shapes[w], shapes[b] = (1, h), (1,)
    return shapes


def init_params(spec: NetworkSpec, config: ControllerConfig, rng: np.random.Generator) -> ControllerParams:
    """Draw every scalar weight i.i.d. from U[-init_range, init_range]."""
    r = config.init_range
    params = {
        name: rng.uniform(-r, r, size=shape).astype(np.float64)
        for name, shape in param_shapes(spec, config).items()
    }
    logger.debug(f"Initialized controller with {sum(p.size for p in params.values())} weights")
    return params


def copy_params(params: ControllerParams) -> ControllerParams:
    return {name: value.copy() for name, value in params.items()}


def zeros_like_params(params: ControllerParams) -> ControllerParams:
    return {name: np.zeros_like(value) for name, value in params.items()}
