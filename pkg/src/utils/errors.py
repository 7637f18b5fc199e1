"""
Exception hierarchy for SpecTran

Every error carries the process exit code the command-line tool reports for it.
"""

from typing import Optional

from src.config.constants import ExitCode


class SpecTranError(Exception):
    """Base class for all SpecTran errors"""

    exit_code: ExitCode = ExitCode.DATA


class ConfigError(SpecTranError, ValueError):
    """Invalid run configuration, flags, or mismatched checkpoint"""

    exit_code = ExitCode.USAGE


class DimensionError(SpecTranError, ValueError):
    """Shape mismatch between operands"""

    exit_code = ExitCode.USAGE


class FormatError(SpecTranError, ValueError):
    """File does not follow the expected binary or text layout"""


class DataError(SpecTranError, ValueError):
    """Input values are unusable (non-finite entries, empty inputs)"""


class ParseError(DataError):
    """Malformed line in a text input"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class SplitError(DataError):
    """Interaction log cannot be partitioned"""


class SingularityError(SpecTranError, ArithmeticError):
    """A required singular value or normalizer is zero"""


class ContractError(SpecTranError, RuntimeError):
    """A caller violated an operation precondition"""


class SamplingError(SpecTranError, ValueError):
    """Negative sampling has no admissible candidates"""


class EvaluationError(SpecTranError, RuntimeError):
    """Evaluation produced or received unusable values"""


class NumericalAbort(SpecTranError, FloatingPointError):
    """Training diverged (non-finite loss)"""

    exit_code = ExitCode.NUMERICAL


class UnsupportedOperationError(SpecTranError, RuntimeError):
    """The requested operation does not apply to the given input"""

    exit_code = ExitCode.USAGE
