"""
System constants for SpecTran
"""

from enum import Enum, IntEnum
from typing import Dict, Tuple


# =============================================================================
# Closed Vocabularies
# =============================================================================

class TransformKind(str, Enum):
    """Semantic embedding transforms selectable for a run"""
    SPECTRAN = "spectran"
    MLP = "mlp"
    SVD_TRUNCATE = "svd_truncate"
    SVD_IDENTITY = "svd_identity"
    NONE = "none"

    @property
    def is_static(self) -> bool:
        """Static transforms carry no trainable parameters"""
        return self in (TransformKind.SVD_TRUNCATE, TransformKind.SVD_IDENTITY)


class FusionMode(str, Enum):
    """How semantic embeddings are combined with ID embeddings"""
    ADD = "add"
    CONCAT_PROJECT = "concat_project"
    SEMANTIC_INIT = "semantic_init"


class Partition(str, Enum):
    """User-level split partitions"""
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"

    @property
    def code(self) -> int:
        return _PARTITION_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Partition":
        for partition, value in _PARTITION_CODES.items():
            if value == code:
                return partition
        raise ValueError(f"Unknown partition code: {code}")


_PARTITION_CODES: Dict[Partition, int] = {
    Partition.TRAIN: 0,
    Partition.VALID: 1,
    Partition.TEST: 2,
}


class Activation(str, Enum):
    """Pointwise activations available to the MLP adapter and feed-forward blocks"""
    GELU = "gelu"
    RELU = "relu"
    IDENTITY = "identity"


class EncodingKind(str, Enum):
    """Principal-block choices for the spectral positional encoding"""
    TAYLOR = "taylor"
    SIGMA = "sigma"
    IDENTITY = "identity"
    NONE = "none"


class StopDecision(str, Enum):
    """Outcome of an early-stopping update"""
    CONTINUE = "continue"
    STOP = "stop"


class ExitCode(IntEnum):
    """Process exit codes of the command-line tool"""
    SUCCESS = 0
    USAGE = 2
    DATA = 3
    NUMERICAL = 4


# =============================================================================
# Training Protocol Defaults
# =============================================================================

DEFAULT_LEARNING_RATE = 0.001
DEFAULT_BATCH_SIZE = 256
DEFAULT_EMBED_DIM = 128
DEFAULT_MAX_LEN = 10
DEFAULT_BLOCKS = 2
DEFAULT_HEADS = 1
DEFAULT_DROPOUT = 0.0
DEFAULT_WEIGHT_DECAY = 0.0
DEFAULT_NUM_NEGATIVES = 64
DEFAULT_TEMPERATURE = 1.0
DEFAULT_PATIENCE = 10
DEFAULT_MAX_EPOCHS = 200
DEFAULT_SEED = 42

DROPOUT_GRID: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
WEIGHT_DECAY_GRID: Tuple[float, ...] = (1e-4, 1e-5, 1e-6, 0.0)

# Adam
DEFAULT_ADAM_BETA1 = 0.9
DEFAULT_ADAM_BETA2 = 0.999
DEFAULT_ADAM_EPSILON = 1e-8

# Initialization
DEFAULT_QK_INIT_STD = 0.1
DEFAULT_EMBED_INIT_STD = 0.1


# =============================================================================
# Data Preparation
# =============================================================================

DEFAULT_SPLIT_RATIOS: Tuple[float, float, float] = (0.8, 0.1, 0.1)
DEFAULT_MIN_INTERACTIONS = 5
MIN_SEQUENCE_INTERACTIONS = 3
MIN_SPLIT_USERS = 10


# =============================================================================
# Spectral Constants
# =============================================================================

SVD_RANK_TOLERANCE = 1e-10
DEFAULT_TAYLOR_ORDER = 3
MAX_TAYLOR_ORDER = 8
COLLAPSE_MASS_THRESHOLD = 0.95
DEFAULT_SPECTRUM_TOP_K = 10


# =============================================================================
# Evaluation
# =============================================================================

METRIC_CUTOFFS: Tuple[int, ...] = (10, 20)


# =============================================================================
# Output File Names
# =============================================================================

class OutputFiles:
    """Fixed file names written under the output directory"""
    SPLITS = "splits.bin"
    STATS = "stats.json"
    TRAIN_LOG = "train_log.jsonl"
    METRICS_CSV = "metrics.csv"
    METRICS_JSON = "metrics.json"
    SPECTRUM = "spectrum.csv"
    WEIGHTS = "weights.csv"
    CHECKPOINT = "checkpoint.bin"
    EFFICIENCY = "efficiency.json"
    CONFIG_ECHO = "config_echo.json"
    GRID = "grid.csv"
    NAN_DUMP = "nan_dump.json"
    EMBEDDINGS = "embeddings.emb1"
    INTERACTIONS = "interactions.tsv"


# =============================================================================
# Reference Dataset Statistics
# =============================================================================

# Post-filter counts of the Amazon Toy dataset (users, items, interactions)
REFERENCE_DATASET_STATS: Dict[str, Tuple[int, int, int]] = {
    "toy": (19124, 11757, 141630),
}
