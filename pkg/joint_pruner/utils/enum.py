from enum import Enum


class LayerKind(Enum):
    Ordinary = "ordinary"
    GroupFirst = "group_first"
    BlockFirst = "block_first"
    BlockSecond = "block_second"


class RatioMode(Enum):
    Continuous = "continuous"
    Discrete = "discrete"


class SearchMode(Enum):
    Joint = "joint"
    BlockOnly = "block-only"
    ChannelOnly = "channel-only"


class BranchKind(Enum):
    Block = "block"
    RatioContinuous = "ratio-continuous"
    RatioDiscrete = "ratio-discrete"


class EvaluatorKind(Enum):
    """Supported evaluation backends by name"""
    Child = "child"
    Synthetic = "synthetic"
    External = "external"
