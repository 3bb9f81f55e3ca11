import math
from collections import defaultdict

import numpy as np

from ..arch.action import PruningAction, check_action
from ..arch.network import NetworkSpec
from ..errors import InvalidArgumentError
from ..utils.enum import BranchKind
from .lstm import RHO_MAX, RHO_MIN, LayerCache, lstm_step, lstm_step_backward
from .params import (
    LSTM_LAYERS,
    ControllerParams,
    block_head_keys,
    discrete_head_keys,
    mu_head_keys,
    rho_head_keys,
    zeros_like_params,
)
from .sampler import (
    ActionChooser,
    HeadDraw,
    SampleTrace,
    TraceStep,
    categorical_draw,
    embed_token,
    gaussian_draw,
    head_output,
    rollout,
)


def _step_keys(step: TraceStep) -> list[tuple[str, str]]:
    if step.branch == BranchKind.Block:
        return [block_head_keys(step.cell)]
    if step.branch == BranchKind.RatioDiscrete:
        return [discrete_head_keys(step.cell)]
    return [mu_head_keys(step.cell), rho_head_keys(step.cell)]


def _check_trace(params: ControllerParams, trace: SampleTrace) -> int:
    h_dim = params["lstm.b0"].shape[0] // 4
    executed = set(trace.executed_cells)
    for cell in trace.cells:
        if cell.h.shape != (LSTM_LAYERS, h_dim):
            raise InvalidArgumentError(
                f"trace cell {cell.cell} has state shape {cell.h.shape}, parameters use h_dim {h_dim}"
            )
    for step in trace.steps:
        if step.cell not in executed:
            raise InvalidArgumentError(f"trace step at cell {step.cell} has no executed cell")
        for keys in _step_keys(step):
            if keys[0] not in params or keys[1] not in params:
                raise InvalidArgumentError(f"trace step at cell {step.cell} needs head {keys[0]!r}")
    return h_dim


def _redraw(params: ControllerParams, step: TraceStep, top: np.ndarray) -> HeadDraw:
    """Re-evaluate a recorded decision under `params` without sampling."""
    keys = _step_keys(step)
    if step.branch == BranchKind.RatioContinuous:
        mu = float(head_output((params[keys[0][0]], params[keys[0][1]]), top)[0])
        rho_raw = float(head_output((params[keys[1][0]], params[keys[1][1]]), top)[0])
        return gaussian_draw(mu, rho_raw, step.draw.raw)
    logits = head_output((params[keys[0][0]], params[keys[0][1]]), top)
    return categorical_draw(logits, int(step.draw.raw), step.draw.value)


def _replay(
    params: ControllerParams,
    trace: SampleTrace,
) -> list[tuple[list[LayerCache], np.ndarray, list[tuple[TraceStep, HeadDraw]]]]:
    h_dim = _check_trace(params, trace)
    by_cell: dict[int, list[TraceStep]] = defaultdict(list)
    for step in trace.steps:
        by_cell[step.cell].append(step)

    c = np.zeros((LSTM_LAYERS, h_dim))
    h = np.zeros((LSTM_LAYERS, h_dim))
    replayed = []
    for cell in trace.cells:
        c, h, caches = lstm_step(params, embed_token(params, cell.token), c, h)
        draws = [(step, _redraw(params, step, h[-1])) for step in by_cell[cell.cell]]
        replayed.append((caches, h[-1].copy(), draws))
    return replayed


def trace_log_prob(params: ControllerParams, trace: SampleTrace) -> float:
    """log pi of the trace's executed path under `params`."""
    return math.fsum(draw.logp for _, _, draws in _replay(params, trace) for _, draw in draws)


def _head_backward(
    params: ControllerParams,
    step: TraceStep,
    draw: HeadDraw,
    top: np.ndarray,
    grads: ControllerParams,
) -> np.ndarray:
    """Accumulate d logp / d head weights; return d logp / d top hidden state."""
    keys = _step_keys(step)
    if step.branch == BranchKind.RatioContinuous:
        (mu_W, mu_b), (rho_W, rho_b) = keys
        x = step.draw.raw
        inv_var = math.exp(-draw.rho)
        d_mu = (x - draw.mu) * inv_var
        # rho outside [RHO_MIN, RHO_MAX] is clamped, so its gradient stops there
        d_rho = -0.5 * (1.0 - (x - draw.mu) ** 2 * inv_var) if RHO_MIN < draw.rho_raw < RHO_MAX else 0.0
        grads[mu_W][0] += d_mu * top
        grads[mu_b][0] += d_mu
        grads[rho_W][0] += d_rho * top
        grads[rho_b][0] += d_rho
        return d_mu * params[mu_W][0] + d_rho * params[rho_W][0]

    W, b = keys[0]
    d_logits = -draw.probs
    d_logits[int(step.draw.raw)] += 1.0
    grads[W] += np.outer(d_logits, top)
    grads[b] += d_logits
    return params[W].T @ d_logits


def grad_log_prob(params: ControllerParams, trace: SampleTrace) -> ControllerParams:
    """Exact gradient of the trace's summed log-probability w.r.t. every controller weight.

    Backpropagates through the executed cells only; skipped cells hand state
    across unchanged and receive nothing.
    """
    replayed = _replay(params, trace)
    grads = zeros_like_params(params)
    h_dim = params["lstm.b0"].shape[0] // 4
    dc_next = np.zeros((LSTM_LAYERS, h_dim))
    dh_next = np.zeros((LSTM_LAYERS, h_dim))

    for cell, (caches, top, draws) in zip(reversed(trace.cells), reversed(replayed)):
        dh = dh_next.copy()
        for step, draw in draws:
            dh[-1] += _head_backward(params, step, draw, top, grads)
        de, dc_next, dh_next = lstm_step_backward(params, caches, dc_next, dh, grads)

        table, row = cell.token
        if table == "start":
            grads["start"] += de
        else:
            grads[f"embed.{table}"][row] += de
    return grads


def score_action(params: ControllerParams, spec: NetworkSpec, action: PruningAction) -> float:
    """log pi(action) under `params`; continuous elements are taken as the raw samples."""
    check_action(spec, action)
    trace = rollout(params, spec, ActionChooser(action))
    same = all(type(a) is type(b) and a == b for a, b in zip(trace.action, action))
    if not same:
        raise InvalidArgumentError(
            f"action {action.to_json()} cannot be produced by this controller "
            f"(replay gives {trace.action.to_json()})"
        )
    return trace.log_prob
