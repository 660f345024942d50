"""Numeric substrate: Gegenbauer polynomials and singular-endpoint quadrature."""

from .gegenbauer import (
    gegenbauer_at_one,
    gegenbauer_eval,
    gegenbauer_ratio,
    gegenbauer_ratio_taylor,
)
from .quadrature import (
    EndpointAnalysis,
    EndpointClass,
    QuadResult,
    classify_endpoint,
    cumulative_integral,
    endpoint_exponent,
    gk15,
    integrate_adaptive,
    integrate_panels,
)

__all__ = [
    "EndpointAnalysis",
    "EndpointClass",
    "QuadResult",
    "classify_endpoint",
    "cumulative_integral",
    "endpoint_exponent",
    "gegenbauer_at_one",
    "gegenbauer_eval",
    "gegenbauer_ratio",
    "gegenbauer_ratio_taylor",
    "gk15",
    "integrate_adaptive",
    "integrate_panels",
]
