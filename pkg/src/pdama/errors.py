"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the command line
front end can name the failed invariant in its diagnostic.
"""


class PdamaError(Exception):
    code = "error"


class ValidationError(PdamaError, ValueError):
    code = "invalid"


class DimensionMismatch(ValidationError):
    code = "DimensionMismatch"


class UnsupportedB(ValidationError):
    code = "UnsupportedB"


class UnboundedV(ValidationError):
    code = "UnboundedV"


class NotSmoothable(ValidationError):
    code = "NotSmoothable"


class UnboundedSet(ValidationError):
    code = "UnboundedSet"


class BadBounds(ValidationError):
    code = "BadBounds"


class NotStronglyConvex(ValidationError):
    code = "NotStronglyConvex"


class SingularB(ValidationError):
    code = "SingularB"


class UnattainedMin(ValidationError):
    code = "UnattainedMin"


class TooLarge(ValidationError):
    code = "TooLarge"


class SchemaError(ValidationError):
    code = "SchemaError"


class TraceVariantMismatch(ValidationError):
    code = "TraceVariantMismatch"


class NonConvergence(PdamaError, ArithmeticError):
    code = "NonConvergence"


class StepTooSmall(PdamaError, ArithmeticError):
    code = "StepTooSmall"


class Infeasible(PdamaError, ArithmeticError):
    code = "Infeasible"


class Unreachable(PdamaError, ArithmeticError):
    code = "Unreachable"
