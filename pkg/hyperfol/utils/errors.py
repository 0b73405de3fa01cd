"""
Exception hierarchy for the hyperboloidal foliation lab.

Every error carries the process exit code the CLI maps it to:
2 for usage/parse/domain problems, 3 for numerical breakdown.
Failed structural or verification checks are not exceptions; they
are reported and mapped to exit code 1 by the commands.
"""

from typing import Any, Dict, Optional, Tuple


class LabError(Exception):
    """Base class for all lab errors"""
    exit_code = 2

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, **self.context}


class UsageError(LabError):
    exit_code = 2


class SpecParseError(LabError):
    """Raised for malformed config/spec files, with line or field context"""
    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if path:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        prefix = ", ".join(location)
        full = f"{prefix}: {message}" if prefix else message
        super().__init__(full, path=path, line=line, field=field)


class DomainError(LabError):
    """Input outside the domain an operation accepts (off-cone point, s < 1, ...)"""
    exit_code = 2


class StencilMarginError(LabError):
    exit_code = 2


class MissingCoFieldError(LabError):
    exit_code = 2


class StructureError(LabError):
    """Coefficient arrays whose shapes disagree with n0 / j0"""
    exit_code = 2


class NumericalBreakdown(LabError):
    exit_code = 3

    def __init__(self, message: str, s: Optional[float] = None,
                 worst_point: Optional[Tuple[float, ...]] = None, **context: Any):
        super().__init__(message, s=s, worst_point=worst_point, **context)
        self.s = s
        self.worst_point = worst_point


class QuasilinearBreakdown(NumericalBreakdown):
    status = "quasilinear-breakdown"


class InstabilityDetected(NumericalBreakdown):
    status = "instability-detected"


class CadenceError(LabError):
    exit_code = 3


class DiagnosticsMismatch(LabError):
    """Equivalent energy integrands disagree beyond rounding"""
    exit_code = 3
