"""Wang-Landau sampling with deterministic and flat-histogram schedules, plus numerical checks of its convergence."""

from .analysis import (
    FrequencyTrace,
    HittingSummary,
    LimitPrediction,
    empirical_limit,
    fh_hitting_stats,
    frequency_trace,
    linear_limit,
    predict_limit,
    reconstruction_error,
    replay_z,
    z_over_t,
    z_trajectory,
)
from .bounding import (
    ConditionalLaw,
    CouplingProbabilities,
    TwoStateChain,
    coupled_pair_step,
    coupling_probabilities,
    expected_hitting_time,
    mc_hitting_time,
    simulate_bounding_chain,
    simulate_coupling,
    stationary_distribution,
)
from .core import (
    AssumptionReport,
    ChainState,
    PartitionedTarget,
    PenaltyState,
    ProposalKernel,
    bin_of,
    check_assumptions,
    gaussian_random_walk,
    mh_step,
    truncated_normal,
)
from .errors import (
    ConfigurationError,
    CouplingError,
    DomainError,
    DriftError,
    NumericalError,
    TraceFormatError,
    UnsupportedError,
    WangLandauError,
)
from .experiment import ExperimentConfig, load_experiment_config
from .lattice import (
    LatticePoint,
    RationalFrequencies,
    irreducibility_smoke_test,
    lattice_path,
    zero_return_path,
)
from .sampler import run_replicas, run_wl_deterministic, run_wl_fh
from .traces import RunTrace, TraceConfig, read_trace_csv
from .updates import DesiredFrequencies, ScheduleState, UpdateRule, apply_update, fh_met

__all__ = [
    "PartitionedTarget",
    "ProposalKernel",
    "PenaltyState",
    "ChainState",
    "AssumptionReport",
    "bin_of",
    "mh_step",
    "check_assumptions",
    "truncated_normal",
    "gaussian_random_walk",
    "UpdateRule",
    "DesiredFrequencies",
    "ScheduleState",
    "apply_update",
    "fh_met",
    "RunTrace",
    "TraceConfig",
    "read_trace_csv",
    "run_wl_deterministic",
    "run_wl_fh",
    "run_replicas",
    "FrequencyTrace",
    "LimitPrediction",
    "HittingSummary",
    "predict_limit",
    "linear_limit",
    "z_trajectory",
    "frequency_trace",
    "empirical_limit",
    "replay_z",
    "reconstruction_error",
    "z_over_t",
    "fh_hitting_stats",
    "TwoStateChain",
    "ConditionalLaw",
    "CouplingProbabilities",
    "stationary_distribution",
    "simulate_bounding_chain",
    "expected_hitting_time",
    "mc_hitting_time",
    "coupling_probabilities",
    "coupled_pair_step",
    "simulate_coupling",
    "RationalFrequencies",
    "LatticePoint",
    "zero_return_path",
    "lattice_path",
    "irreducibility_smoke_test",
    "ExperimentConfig",
    "load_experiment_config",
    "WangLandauError",
    "ConfigurationError",
    "UnsupportedError",
    "DomainError",
    "DriftError",
    "CouplingError",
    "TraceFormatError",
    "NumericalError",
]
