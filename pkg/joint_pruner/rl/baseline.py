import math

from pydantic import BaseModel, ConfigDict, Field

from ..errors import NumericalFaultError


class BaselineState(BaseModel):
    model_config = ConfigDict(frozen=True)

    b: float = 0.0
    decay: float = Field(default=0.9, ge=0.0, lt=1.0)
    initialized: bool = False

    def value_for(self, reward: float) -> float:
        """Baseline to subtract from `reward`; before the first update that is the reward itself."""
        return self.b if self.initialized else reward


def update_baseline(state: BaselineState, reward: float) -> BaselineState:
    """Exponential moving average, seeded with the first reward."""
    if not math.isfinite(reward):
        raise NumericalFaultError(f"reward is not finite: {reward}")
    if not state.initialized:
        return state.model_copy(update={"b": reward, "initialized": True})
    return state.model_copy(update={"b": state.decay * state.b + (1.0 - state.decay) * reward})
