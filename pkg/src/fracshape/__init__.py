"""Fractional-order partial cancellation of non-minimum-phase zeros and
low-damped poles: algebra, compensators, rational approximation, loop
analysis and time simulation."""

__version__ = "0.1.0"

from .approx import BandSpec, RationalTf, approximate_tf, oustaloup
from .compensate import CancellationPlan, plan_cancellation
from .errors import FracshapeError
from .focore import (
    ExplicitX,
    FactoredTf,
    Gain,
    ImplicitPower,
    IORational,
    Monomial,
    PseudoPoly,
    PseudoPolynomial,
    eval_freq,
    matignon_stable,
    pseudo_roots,
)
from .loopshape import LoopSpec, build_example_controllers, internal_stability, margins, sensitivities
from .simtime import response_metrics, simulate_gl, simulate_lti, step_response, to_state_space

__all__ = [
    "BandSpec", "CancellationPlan", "ExplicitX", "FactoredTf", "FracshapeError", "Gain", "IORational",
    "ImplicitPower", "LoopSpec", "Monomial", "PseudoPoly", "PseudoPolynomial", "RationalTf",
    "approximate_tf", "build_example_controllers", "eval_freq", "internal_stability", "margins",
    "matignon_stable", "oustaloup", "plan_cancellation", "pseudo_roots", "response_metrics",
    "sensitivities", "simulate_gl", "simulate_lti", "step_response", "to_state_space",
]
