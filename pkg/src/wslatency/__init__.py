"""Simulator and bounds for randomized work stealing with communication latency."""

from .analysis import bound_expectation, bound_tail, gamma, lemma1_probe, lemma2_bound_R
from .engine import divide_work, run, run_event, run_reference
from .model import RunTrace, SimConfig, validate

__all__ = [
    "RunTrace",
    "SimConfig",
    "bound_expectation",
    "bound_tail",
    "divide_work",
    "gamma",
    "lemma1_probe",
    "lemma2_bound_R",
    "run",
    "run_event",
    "run_reference",
    "validate",
]
