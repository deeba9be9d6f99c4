"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI prints
before the human message, and a ``kind`` used to pick the exit status.
"""


class MarkovFusionError(Exception):
    code = "E_GENERIC"
    kind = "numerical"


class ValidationError(MarkovFusionError, ValueError):
    code = "E_VALIDATION"
    kind = "usage"


class ShapeError(ValidationError):
    code = "E_SHAPE"


class RowSumError(ValidationError):
    code = "E_ROWSUM"


class PositivityError(ValidationError):
    code = "E_POSITIVITY"


class MismatchError(ValidationError):
    code = "E_MISMATCH"


class TooShortError(ValidationError):
    code = "E_TOO_SHORT"


class DegenerateError(ValidationError):
    code = "E_DEGENERATE"


class DomainError(MarkovFusionError, ValueError):
    code = "E_DOMAIN"


class ZeroRowError(MarkovFusionError, ValueError):
    code = "E_ZERO_ROW"


class InfeasibleError(MarkovFusionError):
    code = "E_INFEASIBLE"


class ConvergenceError(MarkovFusionError, RuntimeError):
    code = "E_CONVERGENCE"


class FileFormatError(MarkovFusionError):
    code = "E_FORMAT"
    kind = "io"
