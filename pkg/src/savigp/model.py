"""Model bundle: kernels, inducing inputs, posterior, likelihood.

Ties the pieces together and applies the default initialization:
zero posterior means, identity-scale covariances, uniform weights,
length-scales from per-dimension input spread, signal variance from the
output variance (1 for discrete outputs), and likelihood parameters from
simple output statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .kernels import SeArdKernel
from .likelihoods import (
    GaussianLikelihood,
    GprnLikelihood,
    LikelihoodModel,
    PoissonLgcpLikelihood,
    WarpedGaussianLikelihood,
)
from .posterior import (
    FULL,
    InducingConfig,
    KernelState,
    MixturePosterior,
    build_kernel_state,
)


@dataclass
class GpModel:
    """Everything the trainer mutates, minus the data."""

    kernels: list[SeArdKernel]
    inducing: InducingConfig
    posterior: MixturePosterior
    likelihood: LikelihoodModel

    @property
    def num_latent(self) -> int:
        return len(self.kernels)

    def build_state(self, X: np.ndarray) -> KernelState:
        return build_kernel_state(self.kernels, self.inducing, X)

    def validate(self) -> None:
        q = self.likelihood.num_latent
        if self.num_latent != q or self.posterior.Q != q:
            raise ConfigurationError(
                f"likelihood needs Q={q} latent processes; model has "
                f"{self.num_latent} kernels and posterior Q={self.posterior.Q}"
            )
        if self.inducing.num_latent != q:
            raise ConfigurationError("inducing config disagrees on Q")


def init_model(
    X: np.ndarray,
    Y: np.ndarray,
    likelihood: LikelihoodModel,
    Z: np.ndarray,
    *,
    num_components: int = 1,
    structure: str = FULL,
    dense_mode: bool = False,
) -> GpModel:
    """Build a model with data-driven initial parameters.

    ``Z`` is a single (M, D) inducing-input matrix, replicated across the
    Q latent processes required by the likelihood.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    N, D = X.shape
    Q = likelihood.num_latent

    x_std = np.std(X, axis=0)
    log_ell = np.log(np.maximum(x_std, 1e-3))
    if likelihood.discrete:
        log_sf2 = 0.0
    else:
        log_sf2 = float(np.log(max(np.var(Y), 1e-3)))
    kernels = [SeArdKernel(log_ell.copy(), log_sf2) for _ in range(Q)]

    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    inducing = InducingConfig(
        Z=np.tile(Z[None, :, :], (Q, 1, 1)), dense_mode=dense_mode
    )
    posterior = MixturePosterior(num_components, Q, Z.shape[0], structure)

    _init_likelihood_params(likelihood, Y)

    model = GpModel(kernels, inducing, posterior, likelihood)
    model.validate()
    return model


def _init_likelihood_params(likelihood: LikelihoodModel, Y: np.ndarray) -> None:
    Y = np.asarray(Y, dtype=float)
    if isinstance(likelihood, GaussianLikelihood):
        likelihood.phi[0] = np.log(max(0.1 * np.var(Y), 1e-6))
    elif isinstance(likelihood, WarpedGaussianLikelihood):
        I = likelihood.num_terms
        likelihood.phi[0] = np.log(max(0.1 * np.var(Y), 1e-6))
        likelihood.phi[1 : 1 + I] = np.log(0.1)
        likelihood.phi[1 + I : 1 + 2 * I] = 0.0
        lo, hi = float(np.min(Y)), float(np.max(Y))
        likelihood.phi[1 + 2 * I :] = -np.linspace(lo, hi, I)
    elif isinstance(likelihood, PoissonLgcpLikelihood):
        likelihood.phi[0] = float(np.clip(np.log(np.mean(Y) + 1e-8), -10.0, 10.0))
    elif isinstance(likelihood, GprnLikelihood):
        likelihood.phi[0] = np.log(max(0.1 * np.var(Y), 1e-6))
