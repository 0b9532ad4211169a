"""
KeyLeak Exceptions

Every rejected input raises one of these. Most also derive from ValueError so
callers that only care about bad input can catch that.
"""
from typing import Optional


class KeyLeakError(Exception):
    """Base class for all keyleak errors"""


class ParameterRangeError(KeyLeakError, ValueError):
    """A numeric parameter is outside its documented range"""


class InvalidDistributionError(KeyLeakError, ValueError):
    """Probabilities are negative, do not sum to one, or domains disagree"""


class DistributionParseError(KeyLeakError, ValueError):
    """A distribution document could not be parsed"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ConfigError(KeyLeakError, ValueError):
    """Configuration file missing or malformed"""


class ConditioningError(KeyLeakError, ValueError):
    """Conditioning event has zero probability"""


class InfeasibleParameterError(KeyLeakError, ValueError):
    """Requested construction cannot exist; carries the feasible maximum"""

    def __init__(self, message: str, feasible_max: Optional[float] = None):
        self.feasible_max = feasible_max
        super().__init__(message)


class VacuousBoundError(KeyLeakError, ValueError):
    """The bound's right-hand side gives no information for these inputs"""


class BudgetExceededError(KeyLeakError, RuntimeError):
    """Exhaustive computation would exceed its budget"""


class DegenerateSeedError(KeyLeakError, ValueError):
    """LFSR seed produces a degenerate (period-1) stream"""


class UndefinedAttackError(KeyLeakError, ValueError):
    """The attack quantity is undefined for the given object"""
