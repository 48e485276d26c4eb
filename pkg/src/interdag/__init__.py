"""Structure learning for linear Gaussian causal models from mixed
observational and interventional data.

The package covers the full pipeline: model representation and sampling
(:mod:`interdag.model`), exact likelihood evaluation and per-vertex scoring
(:mod:`interdag.likelihood`), interventional Markov equivalence and essential
graphs (:mod:`interdag.equivalence`), greedy and exact structure search
(:mod:`interdag.search`), structural accuracy metrics (:mod:`interdag.metrics`),
and seeded replicate experiments plus a command line (:mod:`interdag.cli`).
"""

from .equivalence import (
    EssentialGraph,
    Skeleton,
    VStructure,
    conservative,
    enumerate_class,
    essential_graph,
    format_essential_graph,
    markov_equivalent_interventional,
    parse_essential_graph,
    same_essential_graph,
    skeleton,
    v_structures,
)
from .errors import (
    CapacityError,
    DataError,
    DegenerateFitError,
    InterdagError,
    ParameterError,
)
from .experiments import (
    ExperimentConfig,
    ResultRow,
    run_consistency_experiment,
    run_fit,
)
from .likelihood import (
    FittedModel,
    LocalScoreCache,
    LocalStats,
    NaturalParams,
    SufficientStats,
    bic_score,
    decomposed_log_likelihood,
    local_score,
    local_stats,
    log_likelihood,
    mle_given_dag,
    natural_params,
    sufficient_stats,
)
from .metrics import (
    ConfusionCounts,
    adjacency,
    directed_confusion,
    shd,
    skeleton_confusion,
)
from .model import (
    Dag,
    Dataset,
    GaussianCausalModel,
    InterventionSpec,
    InterventionTarget,
    TargetFamily,
    derive_seed,
    format_model,
    intervention_dag,
    interventional_moments,
    observational_covariance,
    parse_model,
    sample_dataset,
    sample_normalized_model,
    sample_random_dag,
)
from .search import (
    SearchConfig,
    SearchTrace,
    TraceStep,
    estimate_essential_graph,
    exhaustive_dp,
    format_trace,
    greedy_search,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfusionCounts",
    "Dag",
    "DataError",
    "Dataset",
    "DegenerateFitError",
    "EssentialGraph",
    "ExperimentConfig",
    "FittedModel",
    "GaussianCausalModel",
    "InterdagError",
    "InterventionSpec",
    "InterventionTarget",
    "LocalScoreCache",
    "LocalStats",
    "NaturalParams",
    "ParameterError",
    "ResultRow",
    "SearchConfig",
    "SearchTrace",
    "Skeleton",
    "SufficientStats",
    "TargetFamily",
    "TraceStep",
    "VStructure",
    "adjacency",
    "bic_score",
    "conservative",
    "decomposed_log_likelihood",
    "derive_seed",
    "directed_confusion",
    "enumerate_class",
    "essential_graph",
    "estimate_essential_graph",
    "exhaustive_dp",
    "format_essential_graph",
    "format_model",
    "format_trace",
    "greedy_search",
    "intervention_dag",
    "interventional_moments",
    "local_score",
    "local_stats",
    "log_likelihood",
    "markov_equivalent_interventional",
    "mle_given_dag",
    "natural_params",
    "observational_covariance",
    "parse_essential_graph",
    "parse_model",
    "run_consistency_experiment",
    "run_fit",
    "same_essential_graph",
    "sample_dataset",
    "sample_normalized_model",
    "sample_random_dag",
    "shd",
    "skeleton",
    "skeleton_confusion",
    "sufficient_stats",
    "v_structures",
]
