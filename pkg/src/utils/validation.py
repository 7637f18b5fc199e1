"""
Input validation utilities for SpecTran
"""

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, List, Optional, Union

from src.config.constants import FusionMode, TransformKind
from src.utils.errors import ConfigError

if TYPE_CHECKING:
    from src.config.run_config import RunConfig, SynthSection


@dataclass
class ValidationResult:
    """Result of a validation check"""
    is_valid: bool
    errors: List[str]
    warnings: List[str]

    @classmethod
    def success(cls, warnings: Optional[List[str]] = None) -> "ValidationResult":
        return cls(is_valid=True, errors=[], warnings=warnings or [])

    @classmethod
    def failure(cls, errors: List[str], warnings: Optional[List[str]] = None) -> "ValidationResult":
        return cls(is_valid=False, errors=errors, warnings=warnings or [])

    def __bool__(self) -> bool:
        return self.is_valid


class ConfigValidator:
    """Cross-field checks that pydantic field validators cannot express"""

    @classmethod
    def validate_paths(
        cls,
        paths: Iterable[Optional[Union[str, Path]]],
        field_names: Iterable[str]
    ) -> ValidationResult:
        """Every named input path must be set and exist"""
        errors = []
        for path, field_name in zip(paths, field_names):
            if path is None:
                errors.append(f"{field_name} is required")
            elif not Path(path).exists():
                errors.append(f"{field_name} not found: {path}")
        if errors:
            return ValidationResult.failure(errors)
        return ValidationResult.success()

    @classmethod
    def validate_synth(cls, synth: "SynthSection") -> ValidationResult:
        """Latent rank must fit the matrix; sequence lengths must be ordered"""
        errors = []
        warnings = []
        limit = min(synth.n_items, synth.dim)
        if synth.rank > limit:
            errors.append(f"rank k={synth.rank} exceeds min(N, l)={limit}")
        if synth.min_seq_len > synth.max_seq_len:
            errors.append(
                f"min_seq_len={synth.min_seq_len} exceeds max_seq_len={synth.max_seq_len}"
            )
        if synth.n_users < 10:
            warnings.append(f"Only {synth.n_users} users; splitting needs at least 10")
        if errors:
            return ValidationResult.failure(errors, warnings)
        return ValidationResult.success(warnings)

    @classmethod
    def validate_model(cls, config: "RunConfig", rank: Optional[int] = None) -> ValidationResult:
        """Output dimension must fit the spectral rank when one is known"""
        errors = []
        model = config.model
        if rank is not None and model.transform not in (TransformKind.NONE, TransformKind.MLP):
            if model.d > rank:
                errors.append(f"d={model.d} exceeds spectral rank r={rank}")
        if model.fusion == FusionMode.SEMANTIC_INIT and model.transform == TransformKind.NONE:
            errors.append("semantic_init fusion needs a semantic transform")
        if errors:
            return ValidationResult.failure(errors)
        return ValidationResult.success()


def validate_and_raise(result: ValidationResult, context: str = "Configuration") -> None:
    """
    Convert a failed validation into ConfigError

    Raises:
        ConfigError: result is not valid
    """
    if not result.is_valid:
        raise ConfigError(f"{context} invalid: {'; '.join(result.errors)}")
