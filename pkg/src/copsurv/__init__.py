"""Copula-based predictive inference for right-censored survival data.

Workflow: load or simulate a dataset (`dataio`), standardize and permute
it, impute censored records with the sequential importance sampler
(`censoring`), then draw survival curves, densities, and medians from the
martingale posterior by forward predictive resampling (`resampling`).
The conjugate exponential/inverse-gamma model (`parametric`) provides an
exact oracle for the whole pipeline, and `tune` selects kernel
hyperparameters by marginal likelihood.
"""

from .censoring import (
    Particle,
    ParticleEnsemble,
    ess,
    impute_smc,
    log_marginal_likelihood,
    systematic_resample,
)
from .copulas import (
    ClaytonFamily,
    CopulaFamily,
    GaussianFamily,
    alpha_regression,
    alpha_schedule,
    clayton_density,
    clayton_partial,
    gaussian_density,
    gaussian_partial,
)
from .dataio import (
    SurvivalDataset,
    load_csv,
    observed_first_order,
    permute,
    simulate_censored_exponential,
    standardize,
)
from .distributions import (
    LogNormalBaseParams,
    LomaxParams,
    lomax_cdf,
    lomax_inv_cdf,
    lomax_pdf,
)
from .errors import (
    ConfigurationError,
    CopsurvError,
    DataError,
    DegeneracyError,
    GridCoverageError,
    TuningError,
)
from .parametric import (
    ConjugateModel,
    ConjugateState,
    conjugate_smc,
    doob_demo,
    exact_log_marginal,
    posterior_predictive,
    posterior_update,
    tune_a0,
)
from .predictive import (
    EvalPoint,
    PredictiveFit,
    absorb,
    evaluate,
    fit_uncensored,
    new_fit,
    prequential_log_lik,
)
from .resampling import (
    CovariateResampler,
    GridSpec,
    PosteriorDraws,
    bootstrap_covariate,
    default_grid,
    martingale_posterior,
    median_from_cdf,
    predictive_resample,
    wasserstein1,
)
from .tune import TuneGrid, TuneResult, grid_search

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
