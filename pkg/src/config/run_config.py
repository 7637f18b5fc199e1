"""
Run configuration for SpecTran

A run is described by a TOML file with [run], [model], [train] and [synth]
sections. Every field has the protocol default pre-filled so an empty file is
a valid configuration.
"""

import itertools
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.config.constants import (
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ADAM_EPSILON,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BLOCKS,
    DEFAULT_DROPOUT,
    DEFAULT_EMBED_DIM,
    DEFAULT_EMBED_INIT_STD,
    DEFAULT_HEADS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_INTERACTIONS,
    DEFAULT_NUM_NEGATIVES,
    DEFAULT_PATIENCE,
    DEFAULT_QK_INIT_STD,
    DEFAULT_SEED,
    DEFAULT_SPLIT_RATIOS,
    DEFAULT_TAYLOR_ORDER,
    DEFAULT_TEMPERATURE,
    DEFAULT_WEIGHT_DECAY,
    DROPOUT_GRID,
    MAX_TAYLOR_ORDER,
    WEIGHT_DECAY_GRID,
    Activation,
    EncodingKind,
    FusionMode,
    TransformKind,
)
from src.utils.errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _on_grid(value: float, grid: Tuple[float, ...]) -> bool:
    return any(math.isclose(value, allowed, rel_tol=1e-9) for allowed in grid)


class RunSection(_Section):
    """Paths, seed and data preparation"""
    embeddings: Optional[Path] = None
    interactions: Optional[Path] = None
    output_dir: Path = Path("./runs/default")
    dataset_name: str = "synthetic"
    seed: int = DEFAULT_SEED
    deterministic: bool = True
    split_ratios: Tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
    min_interactions: int = Field(default=DEFAULT_MIN_INTERACTIONS, ge=1)
    max_len: int = Field(default=DEFAULT_MAX_LEN, ge=1)
    reference_stats: Optional[str] = None

    @field_validator("split_ratios")
    @classmethod
    def _ratios_sum_to_one(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(r < 0 for r in value) or abs(sum(value) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must be non-negative and sum to 1, got {value}")
        return value


class ModelSection(_Section):
    """Transform, fusion and backbone shape"""
    transform: TransformKind = TransformKind.SPECTRAN
    fusion: FusionMode = FusionMode.ADD
    d: int = Field(default=DEFAULT_EMBED_DIM, ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    taylor_order: int = Field(default=DEFAULT_TAYLOR_ORDER, ge=0, le=MAX_TAYLOR_ORDER)
    temperature: float = Field(default=DEFAULT_TEMPERATURE, gt=0)
    blocks: int = Field(default=DEFAULT_BLOCKS, ge=1)
    heads: int = Field(default=DEFAULT_HEADS, ge=1)
    hidden_act: Activation = Activation.GELU
    use_attention: bool = True
    encoding: EncodingKind = EncodingKind.TAYLOR
    per_component_alpha: bool = False
    mlp_hidden: List[int] = Field(default_factory=lambda: [256])
    mlp_activation: Activation = Activation.GELU
    embed_init_std: float = Field(default=DEFAULT_EMBED_INIT_STD, gt=0)
    qk_init_std: float = Field(default=DEFAULT_QK_INIT_STD, gt=0)

    @model_validator(mode="after")
    def _heads_divide_dim(self) -> "ModelSection":
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        return self

    @property
    def attention_dim(self) -> int:
        """Inner dimension m of the spectral attention (defaults to d)"""
        return self.m if self.m is not None else self.d


class TrainSection(_Section):
    """Optimizer and protocol settings"""
    lr: float = Field(default=DEFAULT_LEARNING_RATE, ge=0)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    weight_decay: Union[float, List[float]] = DEFAULT_WEIGHT_DECAY
    dropout: Union[float, List[float]] = DEFAULT_DROPOUT
    num_negatives: int = Field(default=DEFAULT_NUM_NEGATIVES, ge=1)
    max_epochs: int = Field(default=DEFAULT_MAX_EPOCHS, ge=1)
    patience: int = Field(default=DEFAULT_PATIENCE, ge=1)
    beta1: float = Field(default=DEFAULT_ADAM_BETA1, ge=0, lt=1)
    beta2: float = Field(default=DEFAULT_ADAM_BETA2, ge=0, lt=1)
    epsilon: float = Field(default=DEFAULT_ADAM_EPSILON, gt=0)
    exclude_history_negatives: bool = False
    exclude_history_eval: bool = True
    train_on_prefixes: bool = False

    @field_validator("dropout")
    @classmethod
    def _dropout_on_grid(cls, value: Union[float, List[float]]) -> Union[float, List[float]]:
        for rate in value if isinstance(value, list) else [value]:
            if not _on_grid(rate, DROPOUT_GRID):
                raise ValueError(f"dropout must be one of {list(DROPOUT_GRID)}, got {rate}")
        return value

    @field_validator("weight_decay")
    @classmethod
    def _weight_decay_on_grid(cls, value: Union[float, List[float]]) -> Union[float, List[float]]:
        for decay in value if isinstance(value, list) else [value]:
            if not _on_grid(decay, WEIGHT_DECAY_GRID):
                raise ValueError(f"weight decay must be one of {list(WEIGHT_DECAY_GRID)}, got {decay}")
        return value

    def grid(self) -> List[Tuple[float, float]]:
        """Expand (dropout, weight_decay) lists in declaration order"""
        dropouts = self.dropout if isinstance(self.dropout, list) else [self.dropout]
        decays = self.weight_decay if isinstance(self.weight_decay, list) else [self.weight_decay]
        return list(itertools.product(dropouts, decays))


class SynthSection(_Section):
    """Synthetic benchmark shape"""
    n_items: int = Field(default=2000, ge=2)
    n_users: int = Field(default=2000, ge=1)
    dim: int = Field(default=256, ge=1)
    rank: int = Field(default=32, ge=1)
    decay: float = Field(default=0.9, gt=0, le=1)
    top_singular_value: float = Field(default=10.0, gt=0)
    noise: float = Field(default=0.01, ge=0)
    min_seq_len: int = Field(default=5, ge=3)
    max_seq_len: int = Field(default=20, ge=3)
    preference_strength: float = Field(default=3.0, ge=0)
    drift: float = Field(default=0.0, ge=0, le=1)


class RunConfig(_Section):
    """Complete configuration of one run"""
    run: RunSection = Field(default_factory=RunSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    synth: SynthSection = Field(default_factory=SynthSection)

    def echo(self) -> Dict[str, Any]:
        """Resolved configuration with every default filled in"""
        data = self.model_dump(mode="json")
        data["model"]["m"] = self.model.attention_dim
        return data

    def with_overrides(
        self,
        seed: Optional[int] = None,
        deterministic: Optional[bool] = None,
        output_dir: Optional[Union[str, Path]] = None
    ) -> "RunConfig":
        """Apply command-line overrides"""
        run_updates: Dict[str, Any] = {}
        if seed is not None:
            run_updates["seed"] = seed
        if deterministic is not None:
            run_updates["deterministic"] = deterministic
        if output_dir is not None:
            run_updates["output_dir"] = Path(output_dir)
        if not run_updates:
            return self
        return self.model_copy(update={"run": self.run.model_copy(update=run_updates)})


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Load and validate a run configuration

    Args:
        path: TOML file; None yields the all-defaults configuration

    Raises:
        ConfigError: unreadable file, TOML syntax error, or invalid values
    """
    if path is None:
        return RunConfig()

    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")

    try:
        with open(config_path, "rb") as f:
            raw = tomllib.load(f)
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Invalid TOML in {config_path}: {e}") from e

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid configuration in {config_path}: {details}") from e
