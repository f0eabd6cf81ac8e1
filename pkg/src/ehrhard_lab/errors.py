"""Semantic exception hierarchy shared by every module.

Public functions never raise bare ValueError/RuntimeError: callers (the CLI in
particular) dispatch on these classes to pick exit codes.
"""


class LabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LabError, ValueError):
    """An argument left the mathematical domain of the operation.

    Carries the offending value in ``args`` so reports can show it.
    """


class ParameterError(LabError, ValueError):
    """A parameter violates the operation's contract (wrong interval, conflict)."""


class RegimeError(LabError):
    """Weight pair is in the wrong regime (parabolic vs elliptic vs infeasible)."""


class DegeneratePointError(LabError):
    """A partial derivative vanished where the operation needs it nonzero.

    The message directs the caller to the degenerate-case check.
    """


class HalfPlaneError(LabError):
    """(p, q) violates the half-plane condition required by the quadratic envelope."""


class PreconditionError(LabError):
    """A stated precondition failed; carries a witness when one exists."""


class PositivityError(LabError):
    """A quantity that must stay strictly positive was not."""


class PrecisionError(LabError):
    """A numerical tolerance or convergence gate could not be met."""


class EvaluationError(LabError):
    """An integrand or surface returned a non-finite value; carries the sample point."""


class ConfigError(LabError, ValueError):
    """Malformed run configuration; names the key and the expected form."""
