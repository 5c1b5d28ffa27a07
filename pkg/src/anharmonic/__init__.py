"""Perturbative and variational thermodynamics of the quartic anharmonic oscillator."""

__version__ = "0.1.0"

from .errors import (AnharmonicError, ConstraintViolation, DivergesAtZero, NoBracket,  # noqa: E402
                     NoCriterionRoot, NoFiniteLimit, NonElementaryIntegral, SymmetryViolation)
from .params import NATURAL, ModelParams  # noqa: E402
from .hypalg import HypExpr  # noqa: E402
from .bwrec import CoeffKey, CoeffTable, build_table, cached_table  # noqa: E402

__all__ = [
    "__version__", "ModelParams", "NATURAL", "HypExpr", "CoeffKey", "CoeffTable",
    "build_table", "cached_table", "AnharmonicError", "ConstraintViolation", "DivergesAtZero",
    "NoBracket", "NoCriterionRoot", "NoFiniteLimit", "NonElementaryIntegral", "SymmetryViolation",
]
