"""Fully discrete time steppers for axisymmetric curvature flows."""

from axiflow.schemes.flow import GENERAL_SPEEDS, SCHEMES, FlowSpec, SpeedLaw, gauss_speed
from axiflow.schemes.steppers import (
    StepProblem,
    StepResult,
    advance,
    axis_substitute,
    init_kappa0,
    initial_curvature,
    mean_curvature_of,
    oscillating,
    sign_alternations,
    step_A,
    step_A_f,
    step_B,
    step_C,
    step_C_star,
    step_D,
    step_D_star,
)

__all__ = [
    "GENERAL_SPEEDS",
    "SCHEMES",
    "FlowSpec",
    "SpeedLaw",
    "StepProblem",
    "StepResult",
    "advance",
    "axis_substitute",
    "gauss_speed",
    "init_kappa0",
    "initial_curvature",
    "mean_curvature_of",
    "oscillating",
    "sign_alternations",
    "step_A",
    "step_A_f",
    "step_B",
    "step_C",
    "step_C_star",
    "step_D",
    "step_D_star",
]
