from .checkpoint import (
    CTRL_SCHEMA,
    ControllerCheckpoint,
    load_checkpoint,
    save_checkpoint,
)
from .gradients import grad_log_prob, score_action, trace_log_prob
from .params import ControllerConfig, ControllerParams, init_params, param_shapes
from .sampler import (
    HeadDraw,
    SampleTrace,
    TraceStep,
    embed_action,
    embed_bin,
    sample_action,
    sample_block_choice,
    sample_ratio_continuous,
    sample_ratio_discrete,
)

__all__ = [
    "CTRL_SCHEMA",
    "ControllerCheckpoint",
    "ControllerConfig",
    "ControllerParams",
    "HeadDraw",
    "SampleTrace",
    "TraceStep",
    "embed_action",
    "embed_bin",
    "grad_log_prob",
    "init_params",
    "load_checkpoint",
    "param_shapes",
    "sample_action",
    "sample_block_choice",
    "sample_ratio_continuous",
    "sample_ratio_discrete",
    "save_checkpoint",
    "score_action",
    "trace_log_prob",
]
