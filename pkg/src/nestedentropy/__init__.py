"""Nested entropy sampling for autonomous experimental design.

The search core (:mod:`.search`) finds the maximum of an entropy field over
a grid of candidate experiments while evaluating only part of it.  The
remaining modules supply synthetic landscapes, a simulated circle-finding
instrument, nested-sampling inference, the design loop, and metrics.
"""

from .grid import GridSpace
from .landscape import (GaussianComponent, MixtureLandscape, brute_force_map,
                        random_landscape)
from .metrics import RunMetrics, compression_efficiency, expected_utility
from .search import NesConfig, NesResult, run_nes
from .circle import CircleModel, FieldSpec, Measurement, forward, measure
from .inference import (NestedSamplingConfig, PosteriorEnsemble, PriorSpec,
                        log_likelihood, nested_sampling_posterior)
from .design import (DesignPolicy, entropy_objective, predictive_distribution,
                     predictive_entropy, run_autonomous_loop,
                     search_optimum, select_experiment)
from .bench import GaussianFamily, SweepSummary, benchmark_sweep

__version__ = "0.1.0"

__all__ = [
    "GridSpace", "GaussianComponent", "MixtureLandscape", "brute_force_map",
    "random_landscape", "RunMetrics", "compression_efficiency",
    "expected_utility", "NesConfig", "NesResult", "run_nes", "CircleModel",
    "FieldSpec", "Measurement", "forward", "measure", "NestedSamplingConfig",
    "PosteriorEnsemble", "PriorSpec", "log_likelihood",
    "nested_sampling_posterior", "DesignPolicy", "entropy_objective",
    "predictive_distribution", "predictive_entropy", "run_autonomous_loop",
    "search_optimum", "select_experiment", "GaussianFamily", "SweepSummary", "benchmark_sweep",
]
