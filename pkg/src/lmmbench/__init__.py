"""Simulation and analysis tools for ridge regression under the Latent Metric Model."""

from .lmm import LmmDataset, TargetSpec, generate_dataset, make_test_point, make_test_points
from .ridge import RidgeSolution, fit_dual, fit_primal, predict
from .risk import RiskDecomposition, decomposition_exact, delta_matrix, excess_risk_mc
from .seeding import resolve_seed_tree, stream
from .spectrum import EigenSpectrum, kernel_eval, parse_spectrum, tail_stats

__all__ = [
    "EigenSpectrum",
    "LmmDataset",
    "RidgeSolution",
    "RiskDecomposition",
    "TargetSpec",
    "decomposition_exact",
    "delta_matrix",
    "excess_risk_mc",
    "fit_dual",
    "fit_primal",
    "generate_dataset",
    "kernel_eval",
    "make_test_point",
    "make_test_points",
    "parse_spectrum",
    "predict",
    "resolve_seed_tree",
    "stream",
    "tail_stats",
]

__version__ = "0.1.0"
