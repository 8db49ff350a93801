"""Radii of the self-similar shrinking or expanding spheres."""

from __future__ import annotations

import numpy as np

from axiflow.errors import InvalidConfig, PastExtinction
from axiflow.schemes.flow import FlowSpec


def extinction_time(flow: FlowSpec, r0: float = 1.0) -> float:
    _check(flow)
    law = flow.law
    if law.kind == "inverse":
        return float("inf")
    beta = 1.0 if law.is_identity else law.beta
    return r0 ** (beta + 1) / (2.0**beta * (beta + 1))


def exact_solution_radius(flow: FlowSpec, t: float, r0: float = 1.0) -> float:
    """Radius at time t of a sphere of initial radius r0.

    Mean curvature flow: sqrt(r0^2 - 4t).  Power law with exponent beta:
    (r0^(beta+1) - 2^beta (beta+1) t)^(1/(beta+1)).  Inverse law: r0 e^(t/2).
    """
    _check(flow)
    if t < 0:
        raise ValueError("time must be non-negative")
    law = flow.law
    if law.kind == "inverse":
        return float(r0 * np.exp(t / 2))
    beta = 1.0 if law.is_identity else law.beta
    base = r0 ** (beta + 1) - 2.0**beta * (beta + 1) * t
    if base < 0:
        raise PastExtinction(f"t = {t:g} is past the extinction time {extinction_time(flow, r0):g}")
    return float(base ** (1.0 / (beta + 1)))


def _check(flow: FlowSpec):
    if flow.conserved or flow.speed is not None:
        raise InvalidConfig("no closed-form sphere solution for this flow")
