"""Exception hierarchy.

Every error carries a stable ``name`` used by the command line front end
to report failures and pick an exit code.
"""


class QuantcatError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ValidationError(QuantcatError):
    exit_code = 2


class DimensionError(ValidationError):
    pass


class NotQuantizableError(ValidationError):
    pass


class AliasingError(ValidationError):
    pass


class CoverageError(ValidationError):
    pass


class RefinementAliasingError(ValidationError):
    pass


class BudgetError(QuantcatError):
    exit_code = 4


class IllConditionedSpectrumError(QuantcatError):
    pass


class UnsupportedFrameError(QuantcatError):
    pass


class ConsistencyError(QuantcatError):
    """No boundary-phase vector survived verification."""


class ConstructionError(QuantcatError):
    """A propagator failed its intertwining check."""


class DerivationError(QuantcatError):
    """Closed-form multiplier disagrees with quadrature."""


class DecompositionError(QuantcatError):
    pass


class PositivityError(QuantcatError):
    pass


class InvalidPartitionError(QuantcatError):
    pass


class CertificateError(QuantcatError):
    pass
