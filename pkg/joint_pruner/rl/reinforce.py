import numpy as np

from ..controller.gradients import grad_log_prob
from ..controller.params import ControllerParams
from ..controller.sampler import SampleTrace
from ..errors import NumericalFaultError
from .adam import AdamState, adam_step
from .baseline import BaselineState


def reinforce_gradient(
    params: ControllerParams,
    trace: SampleTrace,
    reward: float,
    b: float,
) -> ControllerParams:
    """Single-sample estimate of grad J: grad log pi(trace) * (R - b)."""
    advantage = reward - b
    return {k: advantage * g for k, g in grad_log_prob(params, trace).items()}


def reinforce_step(
    params: ControllerParams,
    trace: SampleTrace,
    reward: float,
    baseline: BaselineState,
    adam: AdamState,
) -> tuple[ControllerParams, AdamState]:
    """Move params one Adam step up the REINFORCE estimate.

    A zero advantage leaves params and optimizer state untouched. Raises
    NumericalFaultError (nothing changed) when the estimate is not finite.
    """
    b = baseline.value_for(reward)
    if reward - b == 0.0:
        return params, adam

    ascent = reinforce_gradient(params, trace, reward, b)
    for k, g in ascent.items():
        if not np.all(np.isfinite(g)):
            raise NumericalFaultError(f"non-finite policy gradient for {k}")
    # Adam minimizes; feed it the negated ascent direction
    return adam_step(params, {k: -g for k, g in ascent.items()}, adam)
