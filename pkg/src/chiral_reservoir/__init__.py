"""Generalized chiral symmetries and pure squeezed steady states of driven-dissipative lattices."""

from .chiral import (SymmetryReport, chiral_residual, is_valid_symmetry, predicted_steady_moments,
                     purity_deviation)
from .constraints import ConstraintSolution, HTemplate, InfeasibleError, Tag, sample, solve
from .model import (FormatError, GaussianMoments, Hamiltonian, LatticeSpec, SqueezeParams, SymmetryMatrix,
                    dumps, load, loads, save)
from .oracle import (MomentGenerator, NonRelaxingError, evolve, generator, moment_distance,
                     relaxation_time, steady_moments)
from .spectral import DarkModeMetrics, ScanResult, dark_mode_metrics, eigenmodes, scan

__version__ = "0.1.0"

__all__ = [
    "ConstraintSolution", "DarkModeMetrics", "FormatError", "GaussianMoments", "HTemplate", "Hamiltonian",
    "InfeasibleError", "LatticeSpec", "MomentGenerator", "NonRelaxingError", "ScanResult", "SqueezeParams",
    "SymmetryMatrix", "SymmetryReport", "Tag", "chiral_residual", "dark_mode_metrics", "dumps",
    "eigenmodes", "evolve", "generator", "is_valid_symmetry", "load", "loads", "moment_distance",
    "predicted_steady_moments", "purity_deviation", "relaxation_time", "sample", "save", "scan", "solve",
    "steady_moments",
]
