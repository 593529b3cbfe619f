"""Exception hierarchy with machine-readable codes.

Every error carries a short ``code`` string (its class name) that the CLI
maps to a distinct exit status and prints as ``error=<code> detail=<text>``.
"""


class PmeflowError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


class ConfigError(PmeflowError):
    exit_code = 2


class NotAQMatrix(PmeflowError):
    exit_code = 3


class NotIrreducible(PmeflowError):
    exit_code = 4


class NotReversible(PmeflowError):
    exit_code = 5


class ExponentOutOfRange(PmeflowError):
    exit_code = 6


class NonConvexF(PmeflowError):
    exit_code = 7


class BoundaryEvaluation(PmeflowError):
    exit_code = 8


class StepFailure(PmeflowError):
    exit_code = 9


class InvalidInitial(PmeflowError):
    exit_code = 10


class SingularSolve(PmeflowError):
    exit_code = 11


class InfeasibleEndpoints(PmeflowError):
    exit_code = 12


class NonConvergence(PmeflowError):
    exit_code = 13


class LeftInterior(PmeflowError):
    exit_code = 14


class NonPositive(PmeflowError):
    exit_code = 15


class InvalidDensity(PmeflowError):
    exit_code = 16
