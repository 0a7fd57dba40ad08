"""Renormalised fractional Laplacian for polynomially growing functions."""

from .errors import (
    ExprSyntaxError,
    GrowthError,
    NonDifferentiableError,
    PolylapError,
    PreconditionError,
    QuadratureError,
    SolverError,
)
from .expr import ScalarField, differentiate, eval_field, parse_expression
from .kernel import KernelParams, psi, taylor_coefficients
from .poly import Grid, MultivariatePolynomial, SampledFunction, ball_grid, sharp_representative
from .quad import QuadratureConfig, cutoff_laplacian, decompose, pv_fraclap, tail_integral

__all__ = [
    "ExprSyntaxError",
    "GrowthError",
    "NonDifferentiableError",
    "PolylapError",
    "PreconditionError",
    "QuadratureError",
    "SolverError",
    "ScalarField",
    "differentiate",
    "eval_field",
    "parse_expression",
    "KernelParams",
    "psi",
    "taylor_coefficients",
    "Grid",
    "MultivariatePolynomial",
    "SampledFunction",
    "ball_grid",
    "sharp_representative",
    "QuadratureConfig",
    "cutoff_laplacian",
    "decompose",
    "pv_fraclap",
    "tail_integral",
]
