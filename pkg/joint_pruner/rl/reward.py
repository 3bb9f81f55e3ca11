import math

from pydantic import BaseModel, ConfigDict, Field

from ..errors import InvalidArgumentError, NumericalFaultError


class RewardConfig(BaseModel):
    """Trade-off between test loss and FLOPs.

    `lambda_` is read from and written as "lambda". FLOPs are divided by
    `flops_unit` before the trade-off applies (1e3: FLOPs counted in KFLOPs).
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(default=1e6, gt=0, alias="lambda")
    flops_unit: float = Field(default=1e3, gt=0)


def reward(loss: float, flops: int | float, cfg: RewardConfig) -> float:
    """R = -L_test - (F / flops_unit) / lambda."""
    if not math.isfinite(loss):
        raise NumericalFaultError(f"test loss is not finite: {loss}")
    if flops < 0:
        raise InvalidArgumentError(f"FLOPs must be >= 0, got {flops}")
    return -loss - (flops / cfg.flops_unit) / cfg.lambda_
