"""Consensus clustering with calibrated attribute weighting."""

from .bench import BenchmarkScenario, MethodSpec, run_benchmark, scenario_from_dict
from .calibration import (
    CalibrationResult,
    ScoreGrid,
    ScoreTallies,
    calibrate,
    cdf_area,
    consensus_cdf,
    consensus_score,
    delta_scores,
    pac_score,
    silhouette_score,
    tally,
)
from .cluster import (
    ClusterAssignment,
    Dendrogram,
    Merge,
    cut,
    hierarchical,
    pam,
    relabel_by_first_occurrence,
)
from .consensus import (
    SubsampleFit,
    SubsampleSet,
    accumulate_comembership,
    consensus_matrix,
    draw_subsamples,
    stable_clusters,
)
from .distance import (
    AttributeWeights,
    DataMatrix,
    PerAttributeDistance,
    cosa_distance,
    fit_cosa_weights,
    fit_sparse_weights,
    pairwise_distance,
    sparse_weighted_distance,
    standardize_columns,
)
from .estimator import ConsensusClustering
from .exceptions import (
    ClusteringError,
    ConvergenceWarning,
    CoverageWarning,
    InputError,
    NumericalError,
)
from .metrics import (
    PairConfusion,
    adjusted_rand_index,
    jaccard_index,
    pair_confusion,
    rand_index,
    selection_f1,
    top_attributes,
    weighting_f1,
)
from .pipeline import ConsensusRun, ConsensusState, consensus_run, default_penalties
from .simulate import (
    BlockCorrelation,
    SimulatedDataset,
    SimulationSpec,
    simulate_covariance,
    simulate_dataset,
    simulate_means,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeWeights",
    "BenchmarkScenario",
    "BlockCorrelation",
    "CalibrationResult",
    "ClusterAssignment",
    "ClusteringError",
    "ConsensusClustering",
    "ConsensusRun",
    "ConsensusState",
    "ConvergenceWarning",
    "CoverageWarning",
    "DataMatrix",
    "Dendrogram",
    "InputError",
    "Merge",
    "relabel_by_first_occurrence",
    "MethodSpec",
    "NumericalError",
    "PairConfusion",
    "PerAttributeDistance",
    "ScoreGrid",
    "ScoreTallies",
    "SimulatedDataset",
    "SimulationSpec",
    "SubsampleFit",
    "SubsampleSet",
    "accumulate_comembership",
    "adjusted_rand_index",
    "calibrate",
    "cdf_area",
    "consensus_cdf",
    "consensus_matrix",
    "consensus_run",
    "consensus_score",
    "cosa_distance",
    "cut",
    "default_penalties",
    "delta_scores",
    "draw_subsamples",
    "fit_cosa_weights",
    "fit_sparse_weights",
    "hierarchical",
    "jaccard_index",
    "pac_score",
    "pair_confusion",
    "pairwise_distance",
    "pam",
    "rand_index",
    "run_benchmark",
    "scenario_from_dict",
    "selection_f1",
    "silhouette_score",
    "simulate_covariance",
    "simulate_dataset",
    "simulate_means",
    "sparse_weighted_distance",
    "stable_clusters",
    "standardize_columns",
    "tally",
    "top_attributes",
    "weighting_f1",
]
