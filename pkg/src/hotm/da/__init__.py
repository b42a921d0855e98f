"""Truncated multivariate Taylor algebra."""
from .context import DaContext
from .domain import UNBOUNDED, DomainEstimate, estimate_domain, tail_radius, variable_norms
from .poly import (
    PolynomialMap,
    TruncatedPolynomial,
    antiderive,
    compose,
    derive,
    intrinsic,
    invert,
    make_variable,
    multiply,
    partial_invert,
)

__all__ = [
    "DaContext", "TruncatedPolynomial", "PolynomialMap", "DomainEstimate", "UNBOUNDED",
    "make_variable", "multiply", "intrinsic", "derive", "antiderive", "compose",
    "invert", "partial_invert", "estimate_domain", "tail_radius", "variable_norms",
]
