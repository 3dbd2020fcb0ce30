"""Independent reference implementations used by tests and `savigp verify`.

Everything here recomputes quantities through a route the main engine
never takes: closed-form GP regression, the closed-form Gaussian
expected log likelihood with raw mean/covariance gradients, a
joint-sample score-function gradient estimator, and central
finite-difference helpers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import ConfigurationError
from .kernels import SeArdKernel, gram, gram_diag
from .likelihoods import LikelihoodModel
from .posterior import DIAGONAL, KernelState, MixturePosterior

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class ExactGpPosterior:
    """Closed-form Gaussian regression posterior at the training inputs."""

    mean: np.ndarray  # Kxx (Kxx + s2 I)^{-1} y
    cov: np.ndarray  # Kxx - Kxx (Kxx + s2 I)^{-1} Kxx
    kernel: SeArdKernel
    X: np.ndarray
    y: np.ndarray
    noise_variance: float
    chol: tuple

    def predictive(self, x_star: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Latent predictive mean and variance at new inputs."""
        x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
        ks = gram(self.kernel, x_star, self.X)
        alpha = cho_solve(self.chol, self.y)
        mean = ks @ alpha
        half = cho_solve(self.chol, ks.T)
        var = gram_diag(self.kernel, x_star) - np.sum(ks * half.T, axis=1)
        return mean, np.maximum(var, 1e-12)

    def nlpd(self, x_star: np.ndarray, y_star: np.ndarray) -> float:
        """Mean negative log predictive density with observation noise."""
        mean, var = self.predictive(x_star)
        var = var + self.noise_variance
        y_star = np.ravel(np.asarray(y_star, dtype=float))
        ll = -0.5 * (LOG_2PI + np.log(var) + (y_star - mean) ** 2 / var)
        return float(-np.mean(ll))


def exact_gp_regression(
    X: np.ndarray, y: np.ndarray, kernel: SeArdKernel, noise_variance: float
) -> ExactGpPosterior:
    """Dense closed-form GP regression posterior (N limited to 2000)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.ravel(np.asarray(y, dtype=float))
    N = X.shape[0]
    if N > 2000:
        raise ConfigurationError("the dense oracle is limited to N <= 2000")
    Kxx = gram(kernel, X, X)
    chol = cho_factor(Kxx + noise_variance * np.eye(N), lower=True)
    alpha = cho_solve(chol, y)
    mean = Kxx @ alpha
    half = cho_solve(chol, Kxx)
    cov = Kxx - Kxx @ half
    cov = 0.5 * (cov + cov.T)
    return ExactGpPosterior(
        mean=mean,
        cov=cov,
        kernel=kernel,
        X=X,
        y=y,
        noise_variance=noise_variance,
        chol=chol,
    )


def analytic_gaussian_ell(
    m: np.ndarray, S: np.ndarray, noise_variance: float, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Closed-form dense Gaussian expected log likelihood and raw gradients.

    value  = log N(y; m, s2 I) - tr(S) / (2 s2)
    d/dm   = (y - m) / s2
    d/dS   = -I / (2 s2)
    """
    m = np.ravel(np.asarray(m, dtype=float))
    y = np.ravel(np.asarray(y, dtype=float))
    S = np.asarray(S, dtype=float)
    N = m.size
    resid = y - m
    value = (
        -0.5 * N * (LOG_2PI + np.log(noise_variance))
        - 0.5 * resid @ resid / noise_variance
        - 0.5 * np.trace(S) / noise_variance
    )
    grad_m = resid / noise_variance
    grad_S = -0.5 / noise_variance * np.eye(N)
    return float(value), grad_m, grad_S


def naive_joint_ell_grad(
    post: MixturePosterior,
    state: KernelState,
    Y: np.ndarray,
    model: LikelihoodModel,
    num_samples: int,
    rng: np.random.Generator,
    control_variates: bool = True,
) -> dict[str, np.ndarray]:
    """Score-function gradient sampling the full N*Q latent vector jointly.

    Dense mode, diagonal single-component posterior only.  Each draw uses
    one joint sample of all latent values and weighs every per-datapoint
    score with the total log likelihood, i.e. no per-datapoint
    marginalization; exists solely as the high-variance comparison point
    for the marginalized estimator.  Control variates receive the same
    per-component treatment as the engine's estimator.
    """
    if not state.dense_mode:
        raise ConfigurationError("the joint-sample oracle runs in dense mode only")
    if post.K != 1 or post.structure != DIAGONAL:
        raise ConfigurationError("joint-sample oracle expects K=1 diagonal posterior")
    N = state.num_data
    if N > 30:
        raise ConfigurationError("joint-sample oracle limited to N <= 30")
    Q = post.Q
    m = post.means[0]  # (Q, N) means per latent
    s = np.exp(post.cov_factors[0])  # (Q, N) variances

    eps = rng.standard_normal((num_samples, Q, N))
    F = m[None] + np.sqrt(s)[None] * eps  # (S, Q, N)
    Y = np.asarray(Y)
    totals = np.zeros(num_samples)
    for i in range(num_samples):
        for n in range(N):
            totals[i] += model.log_pdf(Y[n], F[i, :, n])
    score_m = eps / np.sqrt(s)[None]
    score_s = 0.5 * (eps * eps - 1.0) / s[None]
    g_m = score_m * totals[:, None, None]
    g_s = score_s * totals[:, None, None]
    if control_variates:
        from .elbo import control_variate_correct

        g_m, _ = control_variate_correct(g_m, score_m)
        g_s, _ = control_variate_correct(g_s, score_s)
    return {"means": g_m.mean(axis=0), "cov_diag": g_s.mean(axis=0)}


def finite_difference(func, x0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function on a flat vector."""
    x0 = np.asarray(x0, dtype=float)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        step = h * max(1.0, abs(x0[i]))
        xp = x0.copy()
        xp[i] += step
        xm = x0.copy()
        xm[i] -= step
        g[i] = (func(xp) - func(xm)) / (2.0 * step)
    return g


def finite_difference4(func, x0: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Fourth-order five-point differences; lower noise floor than central."""
    x0 = np.asarray(x0, dtype=float)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        step = h * max(1.0, abs(x0[i]))
        vals = []
        for mult in (2, 1, -1, -2):
            x = x0.copy()
            x[i] += mult * step
            vals.append(func(x))
        g[i] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12.0 * step)
    return g
