"""Structural gravity estimation and general-equilibrium FTA counterfactuals."""

from ._core import (
    EstimationError,
    GeConvergenceError,
    InputError,
    estimate,
    fit_ppml,
    format_display,
    percent_effect,
    simulate,
    synth,
    verify,
)

__all__ = [
    "EstimationError",
    "GeConvergenceError",
    "InputError",
    "estimate",
    "fit_ppml",
    "format_display",
    "percent_effect",
    "simulate",
    "synth",
    "verify",
]
