"""Assumption-lean least squares: deterministic error bounds, sandwich inference,
bootstrap post-selection inference and a small simulation laboratory."""

from .errors import (
    BoundViolationError,
    CollectionSizeError,
    DegenerateVarianceError,
    DomainError,
    InvalidDataError,
    NotPositiveDefiniteError,
    RankError,
)
from .regress_core import (
    Dataset,
    DetIneqReport,
    GramPair,
    ModelId,
    OlsFit,
    compute_gram,
    d_sigma,
    det_inequality_report,
    extract_submodel,
    fit_model,
    full_model,
    load_csv,
    loo_gram_bound,
    save_csv,
    solve_ols,
    target_beta,
)
from .chisq import chisq_quantile
from .sandwich import (
    FullModelRegion,
    SandwichVariance,
    chi_square_region,
    fit_with_sandwich,
    max_t_region,
    meat_estimate,
    sandwich_variance,
)
from .model_space import ModelCollection, enumerate_up_to_k, from_list, size_share, stratum
from .posi_boot import (
    BootstrapDraws,
    PosiRegion,
    PosiSummary,
    build_region,
    covers,
    influence_scores,
    multiplier_draws,
    posi_analysis,
    summarize,
    thresholds,
)
from .maxnorm import MaxEstimate, qnorm_bounds, sampled_max_upper

__version__ = "0.1.0"
