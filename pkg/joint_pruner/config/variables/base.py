from typing import List, Union

from typing_extensions import TypedDict


class BaseConfig(TypedDict):
    SPEC_PATH: Union[str, None]
    DATASET_PATH: Union[str, None]
    OUTPUT_DIR: str
    H_DIM: int
    E_DIM: int
    RATIO_MODE: str
    SEARCH_MODE: str
    INIT_RANGE: float
    LAMBDA: float
    FLOPS_UNIT: float
    EPISODES: int
    CONTROLLER_LR: float
    BASELINE_DECAY: float
    CHECKPOINT_EVERY: int
    CHILD_EPOCHS: int
    CHILD_BATCH_SIZE: int
    CHILD_LR: float
    FINE_TUNE_LR: float
    TRAIN_SAMPLES: int
    TEST_SAMPLES: int
    IMAGE_SIZE: int
    SEED: int
    EVALUATOR: str
    EVALUATOR_COMMAND: List[str]
    LOG_LEVEL: str
