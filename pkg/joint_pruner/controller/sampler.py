"""
The joint sample algorithm.

One LSTM step runs per layer. A BlockFirst cell first decides keep/prune; a
pruned block writes 1 into both of its positions, its BlockSecond cell is
skipped (state passes through untouched) and the choice embedding feeds the
cell after it. Every other cell samples its layer's pruning ratio.

Which branches exist is read off the parameters: block heads `block.{i}.*`
for BlockFirst cells, ratio heads `ratio.{i}.*` (discrete) or `mu.{i}.*` /
`rho.{i}.*` (continuous) for every layer. Cells without a ratio head emit 0.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np

from ..arch.action import (
    BLOCK_KEEP,
    BLOCK_PRUNE,
    DISCRETE_RATIOS,
    MAX_RATIO,
    Element,
    PruningAction,
)
from ..arch.network import LayerSpec, NetworkSpec
from ..errors import InvalidArgumentError, NumericalFaultError
from ..utils.enum import BranchKind, LayerKind
from .lstm import clamp_rho, gaussian_log_prob, log_softmax, lstm_step, softmax
from .params import (
    LSTM_LAYERS,
    RATIO_BINS,
    ControllerParams,
    block_head_keys,
    discrete_head_keys,
    mu_head_keys,
    rho_head_keys,
)

EmbedToken = tuple[str, int]
START_TOKEN: EmbedToken = ("start", 0)

Head = tuple[np.ndarray, np.ndarray]


class HeadDraw(NamedTuple):
    value: Element
    logp: float
    raw: float
    probs: np.ndarray | None = None
    mu: float | None = None
    rho: float | None = None
    rho_raw: float | None = None


@dataclass(frozen=True)
class TraceStep:
    cell: int
    branch: BranchKind
    draw: HeadDraw

    @property
    def logp(self) -> float:
        return self.draw.logp


@dataclass(frozen=True)
class CellRecord:
    """One executed LSTM step: its input embedding and state, and the state it produced."""
    cell: int
    token: EmbedToken
    e: np.ndarray
    c_in: np.ndarray
    h_in: np.ndarray
    c: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class SampleTrace:
    action: PruningAction
    cells: tuple[CellRecord, ...]
    steps: tuple[TraceStep, ...]

    @property
    def executed_cells(self) -> tuple[int, ...]:
        return tuple(cell.cell for cell in self.cells)

    @property
    def log_prob(self) -> float:
        return math.fsum(step.logp for step in self.steps)

    def state_after(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(c, h) after position i; a skipped cell holds its predecessor's state."""
        latest = None
        for cell in self.cells:
            if cell.cell > i:
                break
            latest = cell
        if latest is None:
            raise InvalidArgumentError(f"no cell executed at or before position {i}")
        return latest.c, latest.h


def embed_bin(ratio: float) -> int:
    """Index of the 0.1-wide bin holding `ratio` (floored, last bin closed)."""
    return min(math.floor(ratio * RATIO_BINS + 1e-9), RATIO_BINS - 1)


def token_for(element: Element) -> EmbedToken:
    if isinstance(element, int):
        return ("block", element)
    return ("ratio", embed_bin(element))


def embed_token(params: ControllerParams, token: EmbedToken) -> np.ndarray:
    table, row = token
    if table == "start":
        return params["start"]
    return params[f"embed.{table}"][row]


def embed_action(element: Element, params: ControllerParams) -> np.ndarray:
    return embed_token(params, token_for(element))


def head_output(head: Head, h: np.ndarray) -> np.ndarray:
    W, b = head
    out = W @ h + b
    if not np.all(np.isfinite(out)):
        raise NumericalFaultError(f"controller head produced non-finite output {out}")
    return out


def draw_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    return min(int(np.searchsorted(np.cumsum(probs), u, side="right")), len(probs) - 1)


def clip_ratio(x: float) -> float:
    return float(min(max(x, 0.0), MAX_RATIO))


def categorical_draw(logits: np.ndarray, index: int, value: Element) -> HeadDraw:
    return HeadDraw(value, float(log_softmax(logits)[index]), index, probs=softmax(logits))


def gaussian_draw(mu: float, rho_raw: float, x: float) -> HeadDraw:
    rho = clamp_rho(rho_raw)
    return HeadDraw(clip_ratio(x), gaussian_log_prob(x, mu, rho), x, mu=mu, rho=rho, rho_raw=rho_raw)


def sample_block_choice(h: np.ndarray, head: Head, rng: np.random.Generator) -> HeadDraw:
    """Keep (0) or prune (1) from the softmax over the head's two outputs."""
    logits = head_output(head, h)
    index = draw_index(softmax(logits), rng)
    return categorical_draw(logits, index, index)


def sample_ratio_discrete(h: np.ndarray, head: Head, rng: np.random.Generator) -> HeadDraw:
    logits = head_output(head, h)
    index = draw_index(softmax(logits), rng)
    return categorical_draw(logits, index, DISCRETE_RATIOS[index])


def sample_ratio_continuous(
    h: np.ndarray,
    heads: tuple[Head, Head],
    rng: np.random.Generator,
) -> HeadDraw:
    """Gaussian ratio; log-density of the raw sample, value clipped to [0, 0.9]."""
    mu_head, rho_head = heads
    mu = float(head_output(mu_head, h)[0])
    rho_raw = float(head_output(rho_head, h)[0])
    x = mu + math.exp(0.5 * clamp_rho(rho_raw)) * float(rng.standard_normal())
    return gaussian_draw(mu, rho_raw, x)


def _head(params: ControllerParams, keys: tuple[str, str]) -> Head:
    return params[keys[0]], params[keys[1]]


class Chooser(Protocol):
    def block(self, cell: int, h: np.ndarray, head: Head) -> HeadDraw: ...

    def discrete(self, cell: int, h: np.ndarray, head: Head) -> HeadDraw: ...

    def continuous(self, cell: int, h: np.ndarray, heads: tuple[Head, Head]) -> HeadDraw: ...


class RandomChooser:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def block(self, cell: int, h: np.ndarray, head: Head) -> HeadDraw:
        return sample_block_choice(h, head, self.rng)

    def discrete(self, cell: int, h: np.ndarray, head: Head) -> HeadDraw:
        return sample_ratio_discrete(h, head, self.rng)

    def continuous(self, cell: int, h: np.ndarray, heads: tuple[Head, Head]) -> HeadDraw:
        return sample_ratio_continuous(h, heads, self.rng)


class ActionChooser:
    """Replays the decisions encoded in a given action."""

    def __init__(self, action: PruningAction):
        self.action = action

    def block(self, cell: int, h: np.ndarray, head: Head) -> HeadDraw:
        index = BLOCK_PRUNE if self.action.is_pruned(cell) else BLOCK_KEEP
        return categorical_draw(head_output(head, h), index, index)

    def discrete(self, cell: int, h: np.ndarray, head: Head) -> HeadDraw:
        value = self.action.ratio(cell)
        if value not in DISCRETE_RATIOS:
            raise InvalidArgumentError(f"element {cell} = {value} is not one of {DISCRETE_RATIOS}")
        return categorical_draw(head_output(head, h), DISCRETE_RATIOS.index(value), value)

    def continuous(self, cell: int, h: np.ndarray, heads: tuple[Head, Head]) -> HeadDraw:
        mu_head, rho_head = heads
        mu = float(head_output(mu_head, h)[0])
        rho_raw = float(head_output(rho_head, h)[0])
        return gaussian_draw(mu, rho_raw, self.action.ratio(cell))


def _ratio_branch(params: ControllerParams, i: int) -> BranchKind | None:
    if discrete_head_keys(i)[0] in params:
        return BranchKind.RatioDiscrete
    if mu_head_keys(i)[0] in params:
        return BranchKind.RatioContinuous
    return None


def check_controller(params: ControllerParams, spec: NetworkSpec) -> int:
    """Return h_dim after checking that `params` carry a consistent head layout for `spec`."""
    for key in ("lstm.W0", "lstm.b0", "lstm.W1", "lstm.b1", "embed.block", "embed.ratio", "start"):
        if key not in params:
            raise InvalidArgumentError(f"controller parameters lack {key!r}")
    h_dim = params["lstm.b0"].shape[0] // 4
    ratio_branches = {_ratio_branch(params, layer.id) for layer in spec.layers}
    if len(ratio_branches) != 1:
        raise InvalidArgumentError("ratio heads must cover every layer with one kind, or none")
    first_ids = [layer.id for layer in spec.layers if layer.kind == LayerKind.BlockFirst]
    has_block_head = {block_head_keys(i)[0] in params for i in first_ids}
    if len(has_block_head) > 1:
        raise InvalidArgumentError("block heads must cover every BlockFirst layer, or none")
    return h_dim


def rollout(
    params: ControllerParams,
    spec: NetworkSpec,
    chooser: Chooser,
) -> SampleTrace:
    h_dim = check_controller(params, spec)
    layers = spec.layers
    c = np.zeros((LSTM_LAYERS, h_dim))
    h = np.zeros((LSTM_LAYERS, h_dim))
    token = START_TOKEN
    elements: list[Element] = []
    cells: list[CellRecord] = []
    steps: list[TraceStep] = []

    i = 0
    while i < len(layers):
        layer = layers[i]
        e = embed_token(params, token)
        c_in, h_in = c, h
        c, h, _ = lstm_step(params, e, c_in, h_in)
        cells.append(CellRecord(i, token, e, c_in, h_in, c, h))
        top = h[-1]

        if layer.kind == LayerKind.BlockFirst and block_head_keys(i)[0] in params:
            draw = chooser.block(i, top, _head(params, block_head_keys(i)))
            steps.append(TraceStep(i, BranchKind.Block, draw))
            if draw.value == BLOCK_PRUNE:
                elements += [BLOCK_PRUNE, BLOCK_PRUNE]
                token = ("block", BLOCK_PRUNE)
                i += 2
                continue

        branch = _ratio_branch(params, i)
        if branch is BranchKind.RatioDiscrete:
            draw = chooser.discrete(i, top, _head(params, discrete_head_keys(i)))
            steps.append(TraceStep(i, branch, draw))
            element = draw.value
        elif branch is BranchKind.RatioContinuous:
            heads = (_head(params, mu_head_keys(i)), _head(params, rho_head_keys(i)))
            draw = chooser.continuous(i, top, heads)
            steps.append(TraceStep(i, branch, draw))
            element = draw.value
        elif layer.is_block_layer and block_head_keys(_block_first(layer))[0] in params:
            element = BLOCK_KEEP
        else:
            element = 0.0
        elements.append(element)
        token = token_for(element)
        i += 1

    return SampleTrace(PruningAction(tuple(elements)), tuple(cells), tuple(steps))


def _block_first(layer: LayerSpec) -> int:
    return layer.id if layer.kind == LayerKind.BlockFirst else layer.id - 1


def sample_action(
    params: ControllerParams,
    spec: NetworkSpec,
    rng: np.random.Generator,
) -> tuple[PruningAction, SampleTrace]:
    trace = rollout(params, spec, RandomChooser(rng))
    return trace.action, trace
