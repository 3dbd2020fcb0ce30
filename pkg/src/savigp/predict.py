"""Predictive latent moments, Monte Carlo predictive densities, metrics.

Predictions mix per-component latent Gaussians at a test input with the
trained mixture weights; observation-space quantities (point values,
densities at observed targets) come from Monte Carlo through the
likelihood, with density averaging done in probability space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp

from .exceptions import ConfigurationError
from .kernels import gram, gram_diag
from .likelihoods import LikelihoodModel
from .posterior import FULL, KernelState, MixturePosterior, VARIANCE_FLOOR


@dataclass
class PredictionResult:
    """Per-test-point latent moments, point predictions and log densities."""

    latent_mean: np.ndarray  # (T, K, Q)
    latent_var: np.ndarray  # (T, K, Q)
    point: np.ndarray  # (T, P) regression values or (T, C) class probs
    predicted_class: np.ndarray | None = None  # (T,) for discrete models
    log_density: np.ndarray | None = None  # (T,) at the observed targets
    predictive_var: np.ndarray | None = None  # (T, P) for regression models


@dataclass
class MetricsReport:
    sse: float | None = None
    nlpd: float | None = None
    rmse: float | None = None
    error_rate: float | None = None
    nlp: float | None = None

    def as_dict(self) -> dict:
        return {
            k: v
            for k, v in self.__dict__.items()
            if v is not None
        }


def predictive_latent(
    x_star: np.ndarray, post: MixturePosterior, state: KernelState
) -> tuple[np.ndarray, np.ndarray]:
    """Latent predictive moments per component and latent process.

    mean[t, k, j] = kappa(x_t, Z_j) Kzz^{-1} m_kj
    var[t, k, j]  = kappa(x_t, x_t) - a' kzx_t + a' S_kj a, floored.
    """
    x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    T = x_star.shape[0]
    K, Q = post.K, post.Q
    mean = np.empty((T, K, Q))
    var = np.empty((T, K, Q))
    for j in range(Q):
        kern = state.kernels[j]
        Ks = gram(kern, x_star, state.Z[j])  # (T, M)
        A = cho_solve((state.chol_kzz[j], True), Ks.T).T  # (T, M)
        prior_diag = gram_diag(kern, x_star)
        ktilde = prior_diag - np.sum(A * Ks, axis=1)
        for k in range(K):
            mean[:, k, j] = A @ post.means[k, j]
            if post.structure == FULL:
                AL = A @ post.cov_factors[k, j]
                quad = np.sum(AL * AL, axis=1)
            else:
                quad = (A * A) @ np.exp(post.cov_factors[k, j])
            var[:, k, j] = ktilde + quad
    np.maximum(var, VARIANCE_FLOOR, out=var)
    return mean, var


def predict(
    x_star: np.ndarray,
    post: MixturePosterior,
    state: KernelState,
    model: LikelihoodModel,
    num_samples: int = 1000,
    seed: int = 0,
    y_star: np.ndarray | None = None,
) -> PredictionResult:
    """Monte Carlo predictions for a batch of test inputs.

    Draws ``num_samples`` latent vectors per mixture component from the
    diagonal latent predictive at each point, then asks the likelihood
    for point summaries and per-sample densities.  Log densities at the
    observed targets are mixed in probability space with log-sum-exp.
    """
    if num_samples < 1:
        raise ConfigurationError("need at least one predictive sample")
    x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    T = x_star.shape[0]
    K, Q = post.K, post.Q
    pi = post.weights()
    lat_mean, lat_var = predictive_latent(x_star, post, state)

    discrete = model.discrete
    P = model.num_outputs
    point = None
    pred_var = np.zeros((T, P)) if not discrete else None
    log_density = np.empty(T) if y_star is not None else None
    y_star_arr = None if y_star is None else np.asarray(y_star)

    for t in range(T):
        comp_points = []
        comp_logdens = []
        cond_means = []
        cond_vars = []
        # One stream per test point, shared across mixture components, so
        # duplicated components reproduce the single-component result.
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=[int(seed) & 0xFFFFFFFF, t])
        )
        eps = rng.standard_normal((num_samples, Q))
        for k in range(K):
            F = lat_mean[t, k] + np.sqrt(lat_var[t, k]) * eps
            y_t = None if y_star_arr is None else y_star_arr[t]
            summary, dens = model.predictive_point(F, y_t)
            comp_points.append(summary)
            if dens is not None:
                comp_logdens.append(dens)
            if not discrete:
                cm = model.conditional_moments(F)
                if cm is not None:
                    cond_means.append(cm[0])
                    cond_vars.append(cm[1])
        mixed = np.einsum("k,kp->p", pi, np.asarray(comp_points))
        if point is None:
            point = np.empty((T, mixed.size))
        point[t] = mixed
        if log_density is not None:
            # log sum_k pi_k (1/S) sum_i p(y* | f_ki)
            stacked = np.stack(comp_logdens)  # (K, S)
            log_density[t] = logsumexp(
                stacked + np.log(pi)[:, None] - np.log(num_samples)
            )
        if not discrete:
            if cond_means:
                cm = np.stack(cond_means)  # (K, S, P)
                cv = np.stack(cond_vars)
                w = pi[:, None, None] / num_samples
                ey = np.sum(w * cm, axis=(0, 1))
                second = np.sum(w * (cv + cm * cm), axis=(0, 1))
                pred_var[t] = np.maximum(second - ey * ey, 0.0)
            else:
                # No closed conditional moments (warped): mix the point
                # summaries per component around the mixed point value.
                samples = np.asarray(comp_points)
                pred_var[t] = np.maximum(
                    np.einsum("k,kp->p", pi, samples * samples) - mixed * mixed,
                    0.0,
                )

    predicted_class = None
    if discrete:
        predicted_class = np.argmax(point, axis=1)
    return PredictionResult(
        latent_mean=lat_mean,
        latent_var=lat_var,
        point=point,
        predicted_class=predicted_class,
        log_density=log_density,
        predictive_var=pred_var,
    )


def evaluate(
    predictions: PredictionResult,
    targets: np.ndarray,
    task: str,
    train_variance: np.ndarray | float | None = None,
) -> MetricsReport:
    """Standard metrics: SSE/NLPD/RMSE for regression, ER/NLP otherwise.

    SSE standardizes per-output squared errors by the training-target
    variance (falling back to the test-target variance when that is not
    available) and averages across outputs.  NLPD and NLP are averaged
    over test points.
    """
    targets = np.asarray(targets)
    if targets.size == 0:
        raise ConfigurationError("empty test set")
    if task == "regression":
        Y = targets.reshape(targets.shape[0], -1).astype(float)
        point = predictions.point
        if point.shape != Y.shape:
            raise ConfigurationError(
                f"prediction shape {point.shape} does not match targets {Y.shape}"
            )
        if train_variance is None:
            train_variance = np.var(Y, axis=0)
        tv = np.maximum(np.atleast_1d(np.asarray(train_variance, float)), 1e-12)
        err2 = (Y - point) ** 2
        sse = float(np.mean(np.mean(err2, axis=0) / tv))
        rmse = float(np.sqrt(np.mean(err2)))
        nlpd = None
        if predictions.log_density is not None:
            nlpd = float(-np.mean(predictions.log_density))
        return MetricsReport(sse=sse, rmse=rmse, nlpd=nlpd)
    if task == "classification":
        labels = np.ravel(targets).astype(int)
        pred = predictions.predicted_class
        if pred is None:
            raise ConfigurationError("predictions carry no class decisions")
        error_rate = float(np.mean(pred != labels))
        nlp = None
        if predictions.log_density is not None:
            nlp = float(-np.mean(predictions.log_density))
        return MetricsReport(error_rate=error_rate, nlp=nlp)
    raise ConfigurationError(f"unknown task {task!r}")
