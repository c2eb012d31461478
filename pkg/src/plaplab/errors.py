"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`PlapLabError`, so callers
(and the command line driver, which maps exception classes to exit codes) can
distinguish our failures from genuine bugs.
"""

from __future__ import annotations


class PlapLabError(Exception):
    """Base class for all errors raised by plaplab."""


class ConfigurationError(PlapLabError):
    """Invalid grid, parameter, or option values (caller error)."""


class GridMismatchError(PlapLabError):
    """Two fields that must share a grid do not."""


class ProblemFileError(PlapLabError):
    """A problem file could not be read or is malformed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: "
            if line is not None:
                where = f"{path}:{line}: "
        super().__init__(where + message)


class HypothesisViolationError(PlapLabError):
    """The growth hypotheses failed at an actual iterate during a run.

    Carries the offending node index and the values that broke the bound,
    so the failure is reproducible.
    """

    def __init__(self, message, node=None, values=None):
        self.node = node
        self.values = values
        detail = message
        if node is not None:
            detail += f" at node {node}"
        if values:
            pairs = ", ".join(f"{k}={v:.6g}" for k, v in values.items()
                              if v is not None)
            if pairs:
                detail += f" ({pairs})"
        super().__init__(detail)


class SolveFailure(PlapLabError):
    """The nonlinear solver did not reach its residual tolerance.

    ``residual_history`` holds the sup-norm residual after each iteration of
    the failed solve.
    """

    def __init__(self, message, residual_history=()):
        self.residual_history = list(residual_history)
        super().__init__(message)


class EstimateFailure(PlapLabError):
    """A probe solve inside the gradient-constant estimate failed."""

    def __init__(self, message, probe=None):
        self.probe = probe
        super().__init__(message)


class EigenFailure(PlapLabError):
    """Inverse iteration for the first eigenpair did not converge."""


class OutOfRegionError(PlapLabError):
    """(lambda, beta) lies outside the existence region for the problem."""


class IterationFailure(PlapLabError):
    """An inner or outer fixed-point iteration exhausted its budget."""


class InvariantViolation(PlapLabError):
    """An internal certificate that should hold by construction failed.

    This is the loud-failure class: it signals that the implementation (or a
    stale empirical constant) is wrong, not that the problem is infeasible.
    """


class StaleGradConstantError(InvariantViolation):
    """A later solve exceeded the empirically estimated gradient constant."""


class MonotonicityError(InvariantViolation):
    """A monotone iteration produced an iterate on the wrong side."""
