"""Nonlinear branching processes with immigration: criteria, simulation and oracles."""
from .model import ModelError, ModelSpec, Pmf, RateFunction, gen_fns, smallest_fixed_point
from .classify import ClassificationReport, Verdict
from .generator import GeneratorMatrix, build as build_generator
from .simulator import Path, simulate

__all__ = [
    "ModelError",
    "ModelSpec",
    "Pmf",
    "RateFunction",
    "gen_fns",
    "smallest_fixed_point",
    "ClassificationReport",
    "Verdict",
    "GeneratorMatrix",
    "build_generator",
    "Path",
    "simulate",
]

__version__ = "0.1.0"
