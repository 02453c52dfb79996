"""Event-triggered boundary damping of the 1D wave equation: certificates and simulation."""
from .certcore import Certificate, Multipliers, ProblemData, certify, synthesize
from .experiments import Scenario, benchmark_1d, run

__all__ = ["Certificate", "Multipliers", "ProblemData", "Scenario", "certify",
           "benchmark_1d", "run", "synthesize"]
