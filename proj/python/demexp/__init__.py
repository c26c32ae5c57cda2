"""Parametric-anchored nonparametric regression.

Conjugate GP posteriors, the spike-and-GP sampler, GBART, projection
summaries and the simulation studies, backed by the compiled ``_core``.
"""

from ._core import (
    BartPrior,
    ConvergenceError,
    DimensionError,
    Error,
    FactorizationError,
    GbartRunConfig,
    InvalidArgument,
    Kernel,
    ParseError,
    RankDeficientError,
    SpikeGpConfig,
    __version__,
    cart_summary,
    fit_gbart,
    fit_spike_gp,
    gp_posterior,
    gp_predict,
    gp_projection,
    kl_projection_logistic,
    linear_projection,
    run_bvm_experiment,
    run_rate_experiment,
    simulate_quadratic,
    split_seed,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
