"""Partial-clustering Bayesian multinomial logit for panel count data.

Units share global covariate coefficients while cluster-covariate
coefficients follow a Dirichlet-process mixture, so the data decide how
many coefficient profiles exist.  Sampling is exact conditional Gibbs:
auxiliary-cluster allocation moves, Pólya-Gamma-augmented Gaussian
coefficient updates, and the usual beta-augmented concentration draw.
"""

from .data import ClusterState, GlobalCoefficients, PanelData
from .diagnostics import (
    autocorrelation,
    chain_summary,
    effective_sample_size,
    integrated_autocorr_time,
)
from .dp import (
    ConcentrationState,
    DpConfig,
    allocation_sweep,
    compact_labels,
    crp_log_prior,
    sample_concentration,
)
from .effects import (
    EffectSummary,
    average_posterior_effects,
    effects_table,
    marginal_effect_point,
)
from .gauss import (
    BlockDesign,
    GaussianMoments,
    ModelPrior,
    PgAuxiliaries,
    PriorSpec,
    build_block_design,
    conditional_gaussian,
    draw_pg_auxiliaries,
    joint_posterior_moments,
    sample_beta_cluster,
    sample_gaussian,
    sample_theta,
)
from .geweke import GewekeResult, geweke_test
from .io import (
    IngestionSpec,
    StandardizationRecord,
    load_chain,
    load_chain_panel,
    load_panel,
    save_chain,
    write_panel,
)
from .mnl import (
    category_probabilities,
    leave_one_out_offset,
    linear_predictor,
    log_likelihood_unit,
)
from .partition import (
    SimilarityMatrix,
    adjusted_rand_index,
    binder_expected_loss,
    posterior_similarity,
    search_optimal_partition,
)
from .pg import PgParams, pg_laplace, pg_mean, sample_pg, sample_pg_array
from .sampler import ChainOutput, SamplerConfig, gibbs_iteration, run_mcmc, two_stage_fit
from .simulate import (
    Dimensions,
    GroundTruth,
    covariate_panel,
    draw_ground_truth,
    separated_truth,
    simulate_counts,
    simulate_panel,
)

__version__ = "0.1.0"

__all__ = [
    "PanelData",
    "ClusterState",
    "GlobalCoefficients",
    "PgParams",
    "sample_pg",
    "sample_pg_array",
    "pg_mean",
    "pg_laplace",
    "linear_predictor",
    "category_probabilities",
    "leave_one_out_offset",
    "log_likelihood_unit",
    "PriorSpec",
    "ModelPrior",
    "PgAuxiliaries",
    "GaussianMoments",
    "BlockDesign",
    "draw_pg_auxiliaries",
    "joint_posterior_moments",
    "conditional_gaussian",
    "sample_beta_cluster",
    "build_block_design",
    "sample_theta",
    "sample_gaussian",
    "DpConfig",
    "ConcentrationState",
    "crp_log_prior",
    "allocation_sweep",
    "sample_concentration",
    "compact_labels",
    "SamplerConfig",
    "ChainOutput",
    "run_mcmc",
    "two_stage_fit",
    "gibbs_iteration",
    "SimilarityMatrix",
    "posterior_similarity",
    "binder_expected_loss",
    "search_optimal_partition",
    "adjusted_rand_index",
    "EffectSummary",
    "marginal_effect_point",
    "average_posterior_effects",
    "effects_table",
    "Dimensions",
    "GroundTruth",
    "covariate_panel",
    "draw_ground_truth",
    "simulate_counts",
    "simulate_panel",
    "separated_truth",
    "autocorrelation",
    "integrated_autocorr_time",
    "effective_sample_size",
    "chain_summary",
    "GewekeResult",
    "geweke_test",
    "IngestionSpec",
    "StandardizationRecord",
    "load_panel",
    "write_panel",
    "save_chain",
    "load_chain",
    "load_chain_panel",
]
