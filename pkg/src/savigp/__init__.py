"""Scalable black-box variational inference for latent Gaussian process models.

A mixture-of-Gaussians posterior over inducing variables, analytic
KL terms, Monte Carlo expected log likelihood with univariate-Gaussian
sampling, full gradient machinery, batch (L-BFGS) and stochastic
(AdaDelta) training, and Monte Carlo prediction.
"""

from .elbo import ElboReport, control_variate_correct, cross_entropy, elbo, ell_estimate, entropy_bound
from .exceptions import (
    ConfigurationError,
    DataError,
    IllConditionedKernelError,
    NumericalError,
    SavigpError,
)
from .datasets import Dataset, Standardization, kmeans_init, load_csv
from .kernels import SeArdKernel, gram, gram_grad_hyper, grad_inducing_bilinear, kernel_eval
from .likelihoods import (
    GaussianLikelihood,
    GprnLikelihood,
    LikelihoodModel,
    LogisticLikelihood,
    PoissonLgcpLikelihood,
    SoftmaxLikelihood,
    WarpedGaussianLikelihood,
    make_likelihood,
)
from .model import GpModel, init_model
from .optimizer import OptimizerConfig, ParameterPacking, fit_batch, fit_stochastic
from .oracles import ExactGpPosterior, analytic_gaussian_ell, exact_gp_regression, naive_joint_ell_grad
from .posterior import (
    DIAGONAL,
    FULL,
    InducingConfig,
    KernelState,
    MarginalMoment,
    MixturePosterior,
    build_kernel_state,
    marginal_moments,
    reparam_covariance,
)
from .predict import MetricsReport, PredictionResult, evaluate, predict, predictive_latent

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DataError",
    "Dataset",
    "DIAGONAL",
    "ElboReport",
    "ExactGpPosterior",
    "FULL",
    "GaussianLikelihood",
    "GpModel",
    "GprnLikelihood",
    "IllConditionedKernelError",
    "InducingConfig",
    "KernelState",
    "LikelihoodModel",
    "LogisticLikelihood",
    "MarginalMoment",
    "MetricsReport",
    "MixturePosterior",
    "NumericalError",
    "OptimizerConfig",
    "ParameterPacking",
    "PoissonLgcpLikelihood",
    "PredictionResult",
    "SavigpError",
    "SeArdKernel",
    "SoftmaxLikelihood",
    "Standardization",
    "WarpedGaussianLikelihood",
    "analytic_gaussian_ell",
    "build_kernel_state",
    "control_variate_correct",
    "cross_entropy",
    "elbo",
    "ell_estimate",
    "entropy_bound",
    "evaluate",
    "exact_gp_regression",
    "fit_batch",
    "fit_stochastic",
    "grad_inducing_bilinear",
    "gram",
    "gram_grad_hyper",
    "init_model",
    "kernel_eval",
    "kmeans_init",
    "load_csv",
    "make_likelihood",
    "marginal_moments",
    "naive_joint_ell_grad",
    "predict",
    "predictive_latent",
    "reparam_covariance",
]
