"""Exact modular polynomials by floating-point evaluation and interpolation."""

from .engine import (BivariatePolynomial, ComputationFailed, Options, compute_modular_polynomial,
                     holdout_residual, pilot_run)
from .modfunc import FunctionFamily
from .qexp import oracle_modular_polynomial
from .storage import read_modpoly, write_modpoly

__all__ = [
    "BivariatePolynomial", "ComputationFailed", "FunctionFamily", "Options",
    "compute_modular_polynomial", "holdout_residual", "oracle_modular_polynomial",
    "pilot_run", "read_modpoly", "write_modpoly",
]
