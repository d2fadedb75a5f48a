"""Primitivity indices, multiplicative domains and Wielandt-type bounds for positive maps on M_d."""
from .errors import QWielandtError
from .mapmodel import SuperOperator, Verdict
from .numkernel import DEFAULT_TOL, OperatorSubspace, ToleranceConfig

__version__ = "0.1.0"

__all__ = ["DEFAULT_TOL", "OperatorSubspace", "QWielandtError", "SuperOperator", "ToleranceConfig", "Verdict", "__version__"]
