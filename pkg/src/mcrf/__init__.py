"""Markov chain random field simulation of categorical raster maps."""

from .errors import FormatError, ValidationError
from .grid import (
    CategoricalGrid,
    GridSpec,
    SampleSet,
    load_grid,
    load_samples,
    random_sample,
    save_grid,
    save_samples,
)
from .transiogram import (
    ExperimentalTransiograms,
    LagBinning,
    TransiogramModel,
    estimate_experimental,
    fit_linear,
    load_model,
    make_detailed_balance_model,
    save_model,
)
from .neighborhood import (
    ConditioningIndex,
    NearestDatum,
    Neighborhood,
    NeighborhoodConfig,
    build_index,
    find_neighborhood,
    find_non_sectored,
    find_sectored,
)
from .engine import (
    RealizationEnsemble,
    SimulationConfig,
    factorization_oracle_cpd,
    local_cpd_marginal_prior,
    local_cpd_transition_prior,
    simulate_ensemble,
    simulate_realization,
)
from .evaluation import (
    AccuracyReport,
    OccurrenceProbabilityMap,
    SweepResult,
    accuracy,
    ensemble_accuracy,
    occurrence_probabilities,
    optimal_map,
    render_map,
    run_sweep,
)
from .synth import synth_reference

__version__ = "0.1.0"
