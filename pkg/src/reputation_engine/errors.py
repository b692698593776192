"""Exception hierarchy shared by every module of the engine."""
from typing import Any, Dict, List, Optional


class ReputationError(Exception):
    """Root of all engine errors."""

    def __init__(self, message: str, **extra: Any):
        super().__init__(message)
        self.message = message
        self.extra = extra

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable error object, as printed by the CLI."""
        payload: Dict[str, Any] = {"error": type(self).__name__, "message": self.message}
        payload.update(self.extra)
        return payload


class NonPositiveParameter(ReputationError, ValueError):
    pass


class ParameterOutOfRange(ReputationError, ValueError):
    pass


class TypeOrderViolation(ReputationError, ValueError):
    pass


class GammaOutOfRange(ReputationError, ValueError):
    pass


class AssumptionViolation(ReputationError):
    pass


class Infeasible(ReputationError, ArithmeticError):
    pass


class MeshOutOfRange(ReputationError, ValueError):
    pass


class DeltaTooLow(ReputationError):
    """Discount factor too small for the constructed equilibrium."""

    def __init__(self, message: str, failing: List[str], threshold: Optional[float] = None,
                 anchor: Optional[str] = None):
        super().__init__(message, failing=list(failing), threshold=threshold, anchor=anchor)
        self.failing = list(failing)
        self.threshold = threshold
        self.anchor = anchor


class StateOffPath(ReputationError):
    pass


class EpsilonTooSmallForDelta(ReputationError, ValueError):
    pass


class EmptyTrace(ReputationError):
    pass


class LengthTooLarge(ReputationError, ValueError):
    pass


class ConfigError(ReputationError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message, line=line, column=column)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message, field=field)
        self.field = field
