"""Exception hierarchy shared across the package."""


class QWielandtError(Exception):
    """Base class for all errors raised by qwielandt."""

    code = "error"


class NotHermitian(QWielandtError, ValueError):
    code = "not_hermitian"


class DimensionMismatch(QWielandtError, ValueError):
    code = "dimension_mismatch"


class ShapeMismatch(QWielandtError, ValueError):
    code = "shape_mismatch"


class NotCompletelyPositive(QWielandtError, ValueError):
    code = "not_completely_positive"


class NotTracePreserving(QWielandtError, ValueError):
    code = "not_trace_preserving"


class NotPositive(QWielandtError, ValueError):
    code = "not_positive"


class NotPrimitive(QWielandtError, ValueError):
    code = "not_primitive"


class NotStochastic(QWielandtError, ValueError):
    code = "not_stochastic"


class PreconditionFailed(QWielandtError, ValueError):
    """An operation's hypothesis (TP, unital, Schwarz, ...) does not hold."""

    code = "precondition_failed"


class CapExceeded(QWielandtError, RuntimeError):
    """An iteration reached its hard cap without terminating.

    ``partial`` carries whatever was computed before the cap was hit.
    """

    code = "cap_exceeded"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ChainCapExceeded(CapExceeded):
    code = "chain_cap_exceeded"


class InconclusiveSpan(QWielandtError, RuntimeError):
    code = "inconclusive_span"


class RejectionCapExceeded(QWielandtError, RuntimeError):
    code = "rejection_cap_exceeded"


class UnknownName(QWielandtError, KeyError):
    code = "unknown_name"


class BadParams(QWielandtError, ValueError):
    code = "bad_params"


class SchemaError(QWielandtError, ValueError):
    """Malformed channel / matrix / config JSON."""

    code = "schema_error"
