"""Exception hierarchy.

Validation failures (bad input, violated structural preconditions) and
numerical failures (solver breakdown, divergence) are kept apart because the
command line maps them to different exit codes.
"""


class HetconsError(Exception):
    """Base class. ``stage`` names the pipeline stage that raised, if known."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ValidationError(HetconsError, ValueError):
    """Input or precondition violation."""


class GraphError(ValidationError):
    """The communication graph fails a connectivity requirement."""


class ParameterError(ValidationError):
    """A design parameter lies outside its admissible range."""


class UnsupportedError(ValidationError):
    """The requested method does not apply to this plant."""


class NumericalError(HetconsError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


class ConvergenceError(NumericalError):
    """An iterative refinement did not reach its tolerance."""


class DivergenceError(NumericalError):
    """A simulation produced non-finite values."""

    def __init__(self, message, time, stage=None):
        super().__init__(message, stage=stage)
        self.time = time
