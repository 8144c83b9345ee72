"""Exception hierarchy shared by the analysis and simulation modules."""

from __future__ import annotations


class SalvoConsensusError(Exception):
    """Base class for every error raised by this package."""


# -- graph construction ------------------------------------------------------

class GraphError(SalvoConsensusError, ValueError):
    pass


class SelfLoopError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class HalfZeroWeightPairError(GraphError):
    """Exactly one direction of an edge pair carries a zero weight."""


class DisconnectedError(GraphError):
    pass


# -- consensus ---------------------------------------------------------------

class ConsensusError(SalvoConsensusError, ArithmeticError):
    pass


class RankDeficientError(ConsensusError):
    pass


class NoUnitEigenvectorError(ConsensusError):
    pass


class ZeroWeightError(ConsensusError, ValueError):
    pass


class DegenerateWeightingError(ConsensusError):
    """The entries of the left null vector (nearly) sum to zero."""


class NotFoundError(ConsensusError):
    pass


# -- robustness --------------------------------------------------------------

class SingularAtZeroError(SalvoConsensusError, ArithmeticError):
    pass


# -- engagement --------------------------------------------------------------

class EngagementError(SalvoConsensusError):
    pass


class DeviationNearQuadratureError(EngagementError, ArithmeticError):
    pass


class RangeCollapsedError(EngagementError):
    pass


class SalvoFailure(EngagementError):
    """A salvo run ended without every interceptor reaching the target.

    The partially filled trace is attached as ``trace``.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class SalvoTimeoutError(SalvoFailure):
    pass


class SalvoDivergedError(SalvoFailure):
    pass


# -- scenario files ----------------------------------------------------------

class ScenarioError(SalvoConsensusError):
    pass


class ParseError(ScenarioError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class ValidationError(ScenarioError, ValueError):
    pass
