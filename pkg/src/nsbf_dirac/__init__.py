"""Regular solutions of the radial Dirac system by Neumann series of Bessel functions."""
from .evaluator import SolutionSample, SpectralPoint, evaluate, g_via_f, residuals, unit_f_at
from .grid import Grid, GridFunction, cumulative_integral, pointwise_combine
from .nsbf import (
    NsbfCoefficients,
    TruncationDiagnostics,
    compute_beta,
    compute_gamma,
    joint_truncation,
    load_coefficients,
    save_coefficients,
    select_truncation,
)
from .oscillator import OscillatorParams, exact_eigenfunction, exact_eigenvalues
from .pipeline import Prepared, prepare
from .potential import (
    AssumptionError,
    DerivedPotentials,
    DiracProblem,
    ParticularSolutions,
    derive_potentials,
    particular_solutions,
    spectral_shift,
)
from .spectral import EigenProblem, EigenResult, dispersion, find_eigenvalues

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "DerivedPotentials",
    "DiracProblem",
    "EigenProblem",
    "EigenResult",
    "Grid",
    "GridFunction",
    "NsbfCoefficients",
    "OscillatorParams",
    "ParticularSolutions",
    "Prepared",
    "SolutionSample",
    "SpectralPoint",
    "TruncationDiagnostics",
    "compute_beta",
    "compute_gamma",
    "cumulative_integral",
    "derive_potentials",
    "dispersion",
    "evaluate",
    "exact_eigenfunction",
    "exact_eigenvalues",
    "find_eigenvalues",
    "g_via_f",
    "joint_truncation",
    "load_coefficients",
    "particular_solutions",
    "pointwise_combine",
    "prepare",
    "residuals",
    "save_coefficients",
    "select_truncation",
    "spectral_shift",
    "unit_f_at",
]
