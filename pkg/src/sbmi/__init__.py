"""Dense stochastic block model toolkit.

Exact small-n Gibbs brackets, heat-bath MCMC, replica potential
analysis, and the adaptive interpolation machinery that ties the graph
model to scalar Gaussian channels.
"""

from .model import (
    ModelParams,
    ParametrizationError,
    check_dense_hypotheses,
    params_from_channel,
    params_from_degrees,
)
from .sampling import PlantedInstance, sample_instance
from .exact import (
    ENUM_CAP_DEFAULT,
    MI_TINY_CAP,
    EnumerationSizeError,
    GibbsReport,
    HamiltonianDomainError,
    exact_mi_tiny,
    gibbs_report,
    mi_via_free_energy,
)
from .ensemble import EnsembleMoments, ensemble_moments
from .mcmc import McmcConfig, TiEstimate, mcmc_brackets, ti_mutual_information, ti_t_grid
from .replica import (
    PhaseDiagram,
    R_STAR_TRICRITICAL,
    ReplicaSolution,
    TransitionReport,
    minimize_psi,
    phase_diagram,
    psi,
    psi_prime,
    state_evolution,
)
from .interpolation import (
    EstimatorConfig,
    FreeEnergyVariance,
    InterpolationPath,
    OverlapVarianceScan,
    SumRuleReport,
    approx_ibp_check,
    bracket_derivative_gap,
    channel_gap_identity,
    free_energy_variance,
    gibbs_edge_ibp_residual,
    liouville_monotonicity,
    overlap_variance_scan,
    solve_R_star,
    sum_rule_audit,
)

__version__ = "0.1.0"

__all__ = [
    "ENUM_CAP_DEFAULT",
    "EnsembleMoments",
    "EnumerationSizeError",
    "EstimatorConfig",
    "FreeEnergyVariance",
    "GibbsReport",
    "HamiltonianDomainError",
    "InterpolationPath",
    "MI_TINY_CAP",
    "ParametrizationError",
    "McmcConfig",
    "ModelParams",
    "OverlapVarianceScan",
    "PhaseDiagram",
    "PlantedInstance",
    "R_STAR_TRICRITICAL",
    "ReplicaSolution",
    "SumRuleReport",
    "TiEstimate",
    "TransitionReport",
    "approx_ibp_check",
    "bracket_derivative_gap",
    "channel_gap_identity",
    "check_dense_hypotheses",
    "ensemble_moments",
    "exact_mi_tiny",
    "free_energy_variance",
    "gibbs_edge_ibp_residual",
    "gibbs_report",
    "liouville_monotonicity",
    "mcmc_brackets",
    "mi_via_free_energy",
    "minimize_psi",
    "overlap_variance_scan",
    "params_from_channel",
    "params_from_degrees",
    "phase_diagram",
    "psi",
    "psi_prime",
    "sample_instance",
    "solve_R_star",
    "state_evolution",
    "sum_rule_audit",
    "ti_mutual_information",
    "ti_t_grid",
]
