"""Stability notions for randomized learners: TV indistinguishability,
replicability, global stability and differential privacy, with the
transformations between them."""

from .core import (Dataset, FiniteDistribution, Hypothesis, HypothesisClass, LearningRule,
                   empirical_loss, population_loss, posterior_mixture, sample_dataset, tv_distance)
from .coupling import (AbsoluteContinuityError, CouplingInconsistencyError, ReferenceMeasure,
                       coupled_sample, density, disagreement_bound, mixture_reference,
                       uniform_reference)
from .randomness import PoissonStripStream, Seed, Tape
from .transforms import (AlgorithmFailure, ListGlobalParams, SeededRule, derandomize,
                         global_to_replicable, listglobal_to_tv, tv_to_dp, verify_repl_implies_tv)

__all__ = [
    "AbsoluteContinuityError", "AlgorithmFailure", "CouplingInconsistencyError", "Dataset",
    "FiniteDistribution", "Hypothesis", "HypothesisClass", "LearningRule", "ListGlobalParams",
    "PoissonStripStream", "ReferenceMeasure", "Seed", "SeededRule", "Tape", "coupled_sample",
    "density", "derandomize", "disagreement_bound", "empirical_loss", "global_to_replicable",
    "listglobal_to_tv", "mixture_reference", "population_loss", "posterior_mixture",
    "sample_dataset", "tv_distance", "tv_to_dp", "uniform_reference", "verify_repl_implies_tv",
]
