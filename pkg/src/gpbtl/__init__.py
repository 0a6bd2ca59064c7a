"""Gaussian-process regression with robust transfer of source predictive
distributions, a fully modelled multitask baseline, maximum-likelihood
hyperparameter learning, and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from .gaussian import (
    BlockGaussian,
    FactorizationError,
    MultivariateGaussian,
    condition,
    jittered_cholesky,
    join_prior_noise,
    kl_divergence,
    marginalize,
    psd_solve,
    sample,
)
from .kernels import (
    FAMILIES,
    CoregionalizationSpec,
    KernelSpec,
    coreg_gram,
    coreg_matrix,
    gram,
)
from .regression import (
    SourcePredictor,
    TaskData,
    log_marginal_likelihood,
    posterior_at,
    predict_outputs,
)
from .transfer import (
    FpdTargetModel,
    JointPosterior,
    fpd_posterior,
    kld_pseudo_likelihood,
    tnt_posterior,
)
from .multitask import icm_posterior
from .synthesis import SynthesisConfig, sample_icm
from .experiments import aggregate, mae, run_kernel_grid, run_sweep
from .hyperlearn import ParamVector, nll_joint, nll_single, nll_transfer, optimize
from .jura import JuraDataset, load_jura, run_jura

__all__ = [
    "__version__",
    "BlockGaussian",
    "FactorizationError",
    "MultivariateGaussian",
    "condition",
    "jittered_cholesky",
    "join_prior_noise",
    "kl_divergence",
    "marginalize",
    "psd_solve",
    "sample",
    "FAMILIES",
    "CoregionalizationSpec",
    "KernelSpec",
    "coreg_gram",
    "coreg_matrix",
    "gram",
    "SourcePredictor",
    "TaskData",
    "log_marginal_likelihood",
    "posterior_at",
    "predict_outputs",
    "FpdTargetModel",
    "JointPosterior",
    "fpd_posterior",
    "kld_pseudo_likelihood",
    "tnt_posterior",
    "icm_posterior",
    "SynthesisConfig",
    "sample_icm",
    "aggregate",
    "mae",
    "run_kernel_grid",
    "run_sweep",
    "ParamVector",
    "nll_joint",
    "nll_single",
    "nll_transfer",
    "optimize",
    "JuraDataset",
    "load_jura",
    "run_jura",
]
