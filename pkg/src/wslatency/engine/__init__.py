"""Simulation engines for work stealing with communication latency."""

from .common import divide_work
from .event import run_event
from .reference import ReferenceSimulation, run_reference

__all__ = ["divide_work", "run", "run_event", "run_reference", "ReferenceSimulation"]


def run(config):
    """Run ``config`` on the engine it names."""
    return run_reference(config) if config.engine == "reference" else run_event(config)
