from typing import Any, Dict, Optional


class CrowdAggError(Exception):
    """Base error. `code` is stable and machine-readable, `exit_code` is what the CLI returns."""

    code = "error"
    exit_code = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"code": self.code, "message": self.message, "exit_code": self.exit_code}
        if self.context:
            data["context"] = self.context
        return data


# Usage / configuration

class UsageError(CrowdAggError):
    code = "usage_error"
    exit_code = 1


class ConfigError(UsageError):
    code = "config_error"


class UnsupportedKind(UsageError):
    code = "unsupported_kind"


# Data

class DataError(CrowdAggError):
    code = "data_error"
    exit_code = 2


class RowError(DataError):
    """Ingestion error tied to a CSV line (1-based, header is line 1)."""

    def __init__(self, message: str, line: Optional[int] = None, **context: Any):
        if line is not None:
            message = f"line {line}: {message}"
            context["line"] = line
        super().__init__(message, **context)
        self.line = line


class MalformedRow(RowError):
    code = "malformed_row"


class GradeOutOfRange(RowError):
    code = "grade_out_of_range"


class DuplicateResponse(RowError):
    code = "duplicate_response"


class UnknownCondition(RowError):
    code = "unknown_condition"


class NotEnoughEligibleWorkers(DataError):
    code = "not_enough_eligible_workers"


class MissingCoverage(DataError):
    code = "missing_coverage"


class EmptyCondition(DataError):
    code = "empty_condition"


# Numerics

class NumericalError(CrowdAggError):
    code = "numerical_error"
    exit_code = 3


class NonFiniteObjective(NumericalError):
    code = "non_finite_objective"


class ShapeMismatch(NumericalError):
    code = "shape_mismatch"


class LengthMismatch(NumericalError):
    code = "length_mismatch"


class DegenerateSample(NumericalError):
    code = "degenerate_sample"


class ConstantInput(NumericalError):
    code = "constant_input"
