from .base import BaseConfig

DEFAULT_CONFIG: BaseConfig = {
    "SPEC_PATH": None,  # None: the built-in reference child
    "DATASET_PATH": None,  # None: render synthetic shapes
    "OUTPUT_DIR": "./runs",
    "H_DIM": 64,
    "E_DIM": 64,
    "RATIO_MODE": "continuous",
    "SEARCH_MODE": "joint",
    "INIT_RANGE": 0.1,
    "LAMBDA": 1e6,
    "FLOPS_UNIT": 1e3,  # FLOPs enter the reward in KFLOPs
    "EPISODES": 310,
    "CONTROLLER_LR": 1e-3,
    "BASELINE_DECAY": 0.9,
    "CHECKPOINT_EVERY": 10,
    "CHILD_EPOCHS": 8,
    "CHILD_BATCH_SIZE": 32,
    "CHILD_LR": 3e-3,
    "FINE_TUNE_LR": 1e-2,
    "TRAIN_SAMPLES": 600,
    "TEST_SAMPLES": 300,
    "IMAGE_SIZE": 32,
    "SEED": 0,
    "EVALUATOR": "child",
    "EVALUATOR_COMMAND": [],
    "LOG_LEVEL": "INFO",
}
