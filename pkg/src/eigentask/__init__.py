"""Resolvable expressive capacity and eigentasks of finitely sampled feature generators."""

__version__ = "0.1.0"

from .sampling import (INF_SHOTS, FeatureMatrix, InputEnsemble, ShotRecord, assemble_features,
                       sample_features, sample_multinomial, sample_poisson_counts)
from .spectral import (EigentaskTable, MomentEstimates, NsrSpectrum, RecCurve,
                       correct_finite_shots, eigentasks, estimate_moments, function_capacity,
                       gram_free_svd, k_cutoff, rec, rec_curve, rec_trace, solve_nsr)

__all__ = [
    "INF_SHOTS", "FeatureMatrix", "InputEnsemble", "ShotRecord", "assemble_features",
    "sample_features", "sample_multinomial", "sample_poisson_counts",
    "EigentaskTable", "MomentEstimates", "NsrSpectrum", "RecCurve", "correct_finite_shots",
    "eigentasks", "estimate_moments", "function_capacity", "gram_free_svd", "k_cutoff",
    "rec", "rec_curve", "rec_trace", "solve_nsr",
]
