"""Estimated evidence lower bound and its gradients.

The objective splits into three terms: a Jensen lower bound on the
mixture entropy, an analytic negative cross-entropy against the inducing
prior, and a Monte Carlo estimate of the expected log likelihood built
from the per-datapoint latent marginals.  Every gradient the trainer
needs (variational, kernel, likelihood, inducing inputs) is produced
here, already mapped into the unconstrained packed parametrization.

Monte Carlo streams are keyed by (seed, epoch, datapoint, component), so
a datapoint's samples do not depend on which minibatch it lands in; the
per-minibatch gradients then average exactly to the full-batch gradient
over a disjoint cover.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp

from .exceptions import ConfigurationError, NumericalError
from .kernels import (
    SeArdKernel,
    gram,
    gram_diag,
    gram_grad_hyper,
    grad_inducing_bilinear,
    grad_z_gram_weighted,
)
from .likelihoods import GaussianLikelihood, LikelihoodModel
from .posterior import DIAGONAL, FULL, KernelState, MixturePosterior

CV_VARIANCE_GUARD = 1e-12
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class ElboReport:
    """Value and per-parameter-group gradients of the estimated bound."""

    ent: float
    cross: float
    ell: float
    total: float
    grads: dict[str, np.ndarray] = field(default_factory=dict)
    mc_std_err: float = 0.0


@dataclass
class MixturePairWorkspace:
    """Pairwise component quantities reused by the entropy bound.

    ``log_pair[k, l]`` holds log N(m_k; m_l, S_k + S_l) over the full
    block-diagonal covariance; ``log_z[k]`` is log sum_l pi_l exp(log_pair).
    ``chols[k][l][j]`` (full structure) keeps the per-latent factor of
    S_kj + S_lj, and ``diag_sums`` holds the diagonal analogue.
    """

    log_pair: np.ndarray
    log_z: np.ndarray
    chols: list | None = None
    diag_sums: np.ndarray | None = None


@dataclass
class ControlVariateState:
    """Fitted per-component control-variate coefficients a_hat."""

    a_hat: np.ndarray


def control_variate_correct(
    g_samples: np.ndarray, h_samples: np.ndarray
) -> tuple[np.ndarray, ControlVariateState]:
    """Subtract the fitted multiple of the score from each sample.

    ``g_samples`` and ``h_samples`` share shape (S, ...) with the sample
    axis first.  For each trailing component, a_hat = Cov(g, h) / Var(h)
    estimated from the same batch (zero when Var(h) < 1e-12), and the
    corrected samples g - a_hat * h keep the expectation up to the usual
    O(1/S) same-batch bias.
    """
    g = np.asarray(g_samples, dtype=float)
    h = np.asarray(h_samples, dtype=float)
    if g.shape != h.shape or g.shape[0] < 2:
        raise ConfigurationError("need >= 2 paired samples of matching shape")
    gc = g - np.mean(g, axis=0, keepdims=True)
    hc = h - np.mean(h, axis=0, keepdims=True)
    var_h = np.mean(hc * hc, axis=0)
    cov_gh = np.mean(gc * hc, axis=0)
    a_hat = np.where(var_h < CV_VARIANCE_GUARD, 0.0, cov_gh / np.maximum(var_h, CV_VARIANCE_GUARD))
    return g - a_hat * h, ControlVariateState(a_hat=np.atleast_1d(a_hat))


def sample_stream(seed: int, epoch: int, n: int, k: int) -> np.random.Generator:
    """Deterministic per-(datapoint, component) random stream."""
    ss = np.random.SeedSequence(
        entropy=[int(seed) & 0xFFFFFFFF, int(epoch), int(n), int(k)]
    )
    return np.random.default_rng(ss)


class _DrawCache:
    """Memo for the frozen standard-normal draws.

    Batch optimization re-evaluates the objective under identical streams
    hundreds of times; regenerating identical normals dominates small-M
    runs, so the most recent (seed, epoch) generation is kept around.
    """

    def __init__(self, max_entries: int = 4096):
        self.key: tuple | None = None
        self.draws: dict = {}
        self.max_entries = max_entries

    def get(self, seed: int, epoch: int, n: int, k: int, shape) -> np.ndarray:
        outer = (seed, epoch, shape)
        if self.key != outer:
            self.key = outer
            self.draws = {}
        inner = (n, k)
        eps = self.draws.get(inner)
        if eps is None:
            eps = sample_stream(seed, epoch, n, k).standard_normal(shape)
            if len(self.draws) < self.max_entries:
                self.draws[inner] = eps
        return eps


_draw_cache = _DrawCache()


def _hermite_controls(eps: np.ndarray) -> np.ndarray:
    """First four zero-mean Hermite polynomials of standard-normal draws.

    Shape (S, 4, Q) for eps of shape (S, Q); every column has exact zero
    expectation under the sampling distribution, so subtracting any fitted
    combination leaves the estimator's expectation unchanged.
    """
    e2 = eps * eps
    return np.stack(
        [
            eps,
            (e2 - 1.0) / np.sqrt(2.0),
            (e2 - 3.0) * eps / np.sqrt(6.0),
            (e2 * e2 - 6.0 * e2 + 3.0) / np.sqrt(24.0),
        ],
        axis=1,
    )


def _corrected_score_means(
    score_mu: np.ndarray, score_v: np.ndarray, logp: np.ndarray, eps: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Control-corrected means of the two score estimators, per latent.

    Regresses score * logp onto the zero-mean Hermite controls of the same
    draws (one shared 4x4 factorization per latent) and subtracts the fit;
    the same-batch coefficients introduce only the usual O(1/S) bias.
    Returns the corrected means of shape (Q,).
    """
    S, Q = score_mu.shape
    controls = _hermite_controls(eps)  # (S, 4, Q)
    h_mean = np.mean(controls, axis=0)  # (4, Q)
    hc = controls - h_mean[None]
    out_mu = np.empty(Q)
    out_v = np.empty(Q)
    g_mu = score_mu * logp[:, None]
    g_v = score_v * logp[:, None]
    gm_mean = np.mean(g_mu, axis=0)
    gv_mean = np.mean(g_v, axis=0)
    for j in range(Q):
        H = hc[:, :, j]
        gram_h = H.T @ H / S + 1e-12 * np.eye(4)
        rhs = np.stack(
            [H.T @ (g_mu[:, j] - gm_mean[j]), H.T @ (g_v[:, j] - gv_mean[j])],
            axis=1,
        ) / S
        a_hat = np.linalg.solve(gram_h, rhs)  # (4, 2)
        out_mu[j] = gm_mean[j] - a_hat[:, 0] @ h_mean[:, j]
        out_v[j] = gv_mean[j] - a_hat[:, 1] @ h_mean[:, j]
    return out_mu, out_v


def _chol_psd(C: np.ndarray) -> np.ndarray:
    """Cholesky with a tiny escalating jitter rescue for PSD-but-degenerate
    matrices (pairwise covariance sums can sit at the float PD boundary)."""
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        scale = max(float(np.mean(np.diag(C))), 1e-300)
        jitter = 1e-12 * scale
        eye = np.eye(C.shape[0])
        while jitter <= 1e-6 * scale:
            try:
                return np.linalg.cholesky(C + jitter * eye)
            except np.linalg.LinAlgError:
                jitter *= 10.0
        raise NumericalError("pairwise covariance factorization failed")


# ---------------------------------------------------------------------------
# entropy bound
# ---------------------------------------------------------------------------


def _pair_workspace(post: MixturePosterior) -> MixturePairWorkspace:
    K, Q = post.K, post.Q
    log_pi = np.log(post.weights())
    log_pair = np.zeros((K, K))
    chols: list | None = None
    diag_sums: np.ndarray | None = None
    if post.structure == FULL:
        chols = [[None] * K for _ in range(K)]
        for k in range(K):
            for l in range(k, K):
                facs = []
                total = 0.0
                for j in range(Q):
                    C = post.cov(k, j) + post.cov(l, j)
                    L = _chol_psd(C)
                    d = post.means[k, j] - post.means[l, j]
                    half = np.linalg.solve(L, d)
                    total += -0.5 * (
                        post.M * LOG_2PI
                        + 2.0 * np.sum(np.log(np.diag(L)))
                        + half @ half
                    )
                    facs.append(L)
                log_pair[k, l] = log_pair[l, k] = total
                chols[k][l] = facs
                if l != k:
                    chols[l][k] = facs
    else:
        s = np.exp(post.cov_factors)  # (K, Q, M)
        diag_sums = s[:, None] + s[None, :]  # (K, K, Q, M)
        d = post.means[:, None] - post.means[None, :]
        log_pair = -0.5 * np.sum(
            LOG_2PI + np.log(diag_sums) + d * d / diag_sums, axis=(2, 3)
        )
    log_z = logsumexp(log_pair + log_pi[None, :], axis=1)
    return MixturePairWorkspace(
        log_pair=log_pair, log_z=log_z, chols=chols, diag_sums=diag_sums
    )


def entropy_bound(post: MixturePosterior) -> tuple[float, dict[str, np.ndarray]]:
    """Jensen lower bound on the mixture entropy, with natural gradients.

    Returns the bound -sum_k pi_k log sum_l pi_l N(m_k; m_l, S_k + S_l)
    and gradients w.r.t. the means, the covariance entries (dense pages
    for full structure, diagonals otherwise) and the mixture weights.
    """
    K, Q, M = post.K, post.Q, post.M
    pi = post.weights()
    ws = _pair_workspace(post)
    value = -float(np.dot(pi, ws.log_z))

    grad_m = np.zeros((K, Q, M))
    if post.structure == FULL:
        grad_cov = np.zeros((K, Q, M, M))
    else:
        grad_cov = np.zeros((K, Q, M))
    # r[k, l] = pi_k pi_l (N_kl / z_k + N_kl / z_l)
    ratio = np.exp(ws.log_pair - ws.log_z[:, None]) + np.exp(
        ws.log_pair - ws.log_z[None, :]
    )
    r = pi[:, None] * pi[None, :] * ratio

    for k in range(K):
        for l in range(K):
            if r[k, l] == 0.0:
                continue
            for j in range(Q):
                d = post.means[k, j] - post.means[l, j]
                if post.structure == FULL:
                    L = ws.chols[k][l][j] if l >= k else ws.chols[l][k][j]
                    cinv_d = cho_solve((L, True), d)
                    cinv = cho_solve((L, True), np.eye(M))
                    grad_m[k, j] += r[k, l] * cinv_d
                    grad_cov[k, j] += (0.5 * r[k, l]) * (
                        cinv - np.outer(cinv_d, cinv_d)
                    )
                else:
                    c = ws.diag_sums[k, l, j]
                    grad_m[k, j] += r[k, l] * d / c
                    grad_cov[k, j] += (0.5 * r[k, l]) * (1.0 / c - d * d / (c * c))

    grad_pi = -ws.log_z - np.sum(
        pi[None, :] * np.exp(ws.log_pair - ws.log_z[None, :]), axis=1
    )
    return value, {"means": grad_m, "covs": grad_cov, "pi": grad_pi}


# ---------------------------------------------------------------------------
# cross-entropy
# ---------------------------------------------------------------------------


def cross_entropy(
    post: MixturePosterior,
    state: KernelState,
    compute_hyper: bool = True,
    compute_inducing: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Analytic expectation of the inducing-prior log density under q.

    Value: -1/2 sum_k pi_k sum_j [M log 2pi + log|Kzz| + m' Kzz^{-1} m
    + tr(Kzz^{-1} S)], evaluated from the cached Cholesky factors.  Also
    returns gradients w.r.t. means, covariance entries, weights, the
    log-hyperparameters, and (optionally) the inducing inputs.
    """
    K, Q, M = post.K, post.Q, post.M
    pi = post.weights()
    D = state.kernels[0].input_dim

    grad_m = np.zeros((K, Q, M))
    if post.structure == FULL:
        grad_cov = np.zeros((K, Q, M, M))
    else:
        grad_cov = np.zeros((K, Q, M))
    brackets = np.zeros(K)
    grad_hyper = np.zeros((Q, D + 1))
    grad_z = np.zeros((Q, M, D))

    for j in range(Q):
        L = state.chol_kzz[j]
        kinv = state.kzz_inv(j)
        kinv_diag = np.diag(kinv)
        P = np.zeros((M, M))  # sum_k pi_k (m m' + S)
        for k in range(K):
            m = post.means[k, j]
            kinv_m = cho_solve((L, True), m)
            if post.structure == FULL:
                S = post.cov(k, j)
                trace = float(np.sum(kinv * S))
                grad_cov[k, j] += -0.5 * pi[k] * kinv
            else:
                s = np.exp(post.cov_factors[k, j])
                S = np.diag(s)
                trace = float(kinv_diag @ s)
                grad_cov[k, j] += -0.5 * pi[k] * kinv_diag
            brackets[k] += (
                M * LOG_2PI + state.logdet_kzz[j] + m @ kinv_m + trace
            )
            grad_m[k, j] = -pi[k] * kinv_m
            P += pi[k] * (np.outer(m, m) + S)

        if compute_hyper or compute_inducing:
            B = kinv - kinv @ P @ kinv
            if compute_hyper:
                kern = state.kernels[j]
                Zj = state.Z[j]
                for p in range(D + 1):
                    dK = gram_grad_hyper(kern, Zj, Zj, p)
                    if p == D:
                        dK = dK + state.jitter[j] * np.eye(M)
                    grad_hyper[j, p] = -0.5 * float(np.sum(B * dK))
            if compute_inducing and not state.dense_mode:
                kern = state.kernels[j]
                Zj = state.Z[j]
                kzz_raw = gram(kern, Zj, Zj)
                grad_z[j] = grad_z_gram_weighted(kern, Zj, -0.5 * B, kzz_raw)

    value = -0.5 * float(np.dot(pi, brackets))
    grads = {
        "means": grad_m,
        "covs": grad_cov,
        "pi": -0.5 * brackets,
        "hyper": grad_hyper,
        "inducing": grad_z,
    }
    return value, grads


# ---------------------------------------------------------------------------
# expected log likelihood
# ---------------------------------------------------------------------------


def _batch_moments(state: KernelState, post: MixturePosterior, batch: np.ndarray):
    """Latent marginal moments restricted to the batch rows, (K, Q, B)."""
    K, Q = post.K, post.Q
    B = batch.size
    means = np.empty((K, Q, B))
    variances = np.empty((K, Q, B))
    for j in range(Q):
        Aj = state.A[j][batch]
        kt = state.ktilde_diag[j][batch]
        for k in range(K):
            means[k, j] = Aj @ post.means[k, j]
            if post.structure == FULL:
                AL = Aj @ post.cov_factors[k, j]
                quad = np.sum(AL * AL, axis=1)
            else:
                quad = (Aj * Aj) @ np.exp(post.cov_factors[k, j])
            variances[k, j] = kt + quad
    np.maximum(variances, 1e-10, out=variances)
    return means, variances


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SAVIGP_THREADS", "1")))
    except ValueError:
        return 1


def ell_estimate(
    post: MixturePosterior,
    state: KernelState,
    Y: np.ndarray,
    model: LikelihoodModel,
    num_samples: int,
    seed: int,
    batch: np.ndarray | None = None,
    *,
    epoch: int = 0,
    method: str = "mc",
    control_variates: bool = True,
    compute_hyper: bool = True,
    compute_inducing: bool = False,
) -> tuple[float, dict[str, np.ndarray], float]:
    """Monte Carlo estimate of the expected log likelihood and gradients.

    For each batched datapoint and mixture component, draws ``num_samples``
    latent vectors from the diagonal Q-dimensional marginal and averages
    the pointwise conditional log likelihood.  Variational gradients use
    the score-function form with per-datapoint control variates; kernel
    and inducing-input gradients chain score coefficients through the
    marginal moments.  With a partial batch, the value and gradients are
    scaled by N / |batch| so the estimate stays unbiased for the full sum.

    ``method="analytic"`` replaces sampling with the closed-form Gaussian
    expectation (Gaussian likelihood only); the gradient chains are
    identical with exact coefficients.
    """
    N = state.num_data
    if batch is None:
        batch = np.arange(N)
    batch = np.asarray(batch, dtype=int)
    B = batch.size
    if method == "mc" and num_samples < 2:
        raise ConfigurationError("need at least 2 samples for control variates")
    if method == "analytic" and not isinstance(model, GaussianLikelihood):
        raise ConfigurationError("analytic expected-log-likelihood needs the Gaussian model")

    K, Q, M = post.K, post.Q, post.M
    D = state.kernels[0].input_dim
    pi = post.weights()
    Y = np.asarray(Y)
    means, variances = _batch_moments(state, post, batch)

    est = np.zeros((B, K))
    est_var = np.zeros((B, K))
    gmu = np.zeros((B, K, Q))
    gs2 = np.zeros((B, K, Q))
    n_phi = model.n_params
    phi_acc = np.zeros((B, n_phi)) if n_phi else None

    if method == "analytic":
        var_noise = model.noise_variance
        for k in range(K):
            mu = means[k]  # (Q=1, B)
            v = variances[k]
            resid = Y[batch].reshape(1, B) - mu
            est[:, k] = (
                -0.5 * LOG_2PI
                - 0.5 * np.log(var_noise)
                - 0.5 * (resid**2 + v) / var_noise
            )[0]
            gmu[:, k, 0] = (resid / var_noise)[0]
            gs2[:, k, 0] = -0.5 / var_noise
            if phi_acc is not None:
                phi_acc[:, 0] += pi[k] * (
                    -0.5 + 0.5 * (resid**2 + v) / var_noise
                )[0]
    else:

        def _one_point(n_pos: int) -> None:
            n = int(batch[n_pos])
            y_n = Y[n]
            for k in range(K):
                mu = means[k, :, n_pos]
                v = variances[k, :, n_pos]
                eps = _draw_cache.get(seed, epoch, n, k, (num_samples, Q))
                F = mu[None, :] + np.sqrt(v)[None, :] * eps
                logp = model.log_pdf_samples(y_n, F)
                est[n_pos, k] = np.mean(logp)
                est_var[n_pos, k] = np.var(logp, ddof=1) / num_samples
                score_mu = eps / np.sqrt(v)[None, :]
                score_v = 0.5 * (eps * eps - 1.0) / v[None, :]
                if control_variates:
                    gmu[n_pos, k], gs2[n_pos, k] = _corrected_score_means(
                        score_mu, score_v, logp, eps
                    )
                else:
                    gmu[n_pos, k] = np.mean(score_mu * logp[:, None], axis=0)
                    gs2[n_pos, k] = np.mean(score_v * logp[:, None], axis=0)
                if phi_acc is not None:
                    pg = model.grad_phi_log_pdf_samples(y_n, F)
                    phi_acc[n_pos] += pi[k] * np.mean(pg, axis=0)

        workers = _worker_count()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                list(ex.map(_one_point, range(B)))
        else:
            for n_pos in range(B):
                _one_point(n_pos)

    value = float(np.sum(est @ pi))
    std_err = float(np.sqrt(np.sum(est_var @ (pi * pi))))

    grad_m = np.zeros((K, Q, M))
    if post.structure == FULL:
        grad_cov = np.zeros((K, Q, M, M))
    else:
        grad_cov = np.zeros((K, Q, M))
    for j in range(Q):
        Aj = state.A[j][batch]
        for k in range(K):
            wm = pi[k] * gmu[:, k, j]
            grad_m[k, j] = Aj.T @ wm
            ws = pi[k] * gs2[:, k, j]
            if post.structure == FULL:
                grad_cov[k, j] = Aj.T @ (Aj * ws[:, None])
            else:
                grad_cov[k, j] = (Aj * Aj).T @ ws
    grad_pi = np.sum(est, axis=0)
    grad_phi = (
        np.sum(phi_acc, axis=0) if phi_acc is not None else np.zeros(0)
    )

    grad_hyper = np.zeros((Q, D + 1))
    if compute_hyper and not state.dense_mode:
        X_b = state.X[batch]
        for j in range(Q):
            kern = state.kernels[j]
            Zj = state.Z[j]
            L = state.chol_kzz[j]
            Aj = state.A[j][batch]
            Kxz_b = state.kxz[j][batch]
            for p in range(D + 1):
                dKzz = gram_grad_hyper(kern, Zj, Zj, p)
                if p == D:
                    dKzz = dKzz + state.jitter[j] * np.eye(M)
                dKxz = gram_grad_hyper(kern, X_b, Zj, p)
                dA = cho_solve((L, True), (dKxz - Aj @ dKzz).T).T
                if p == D:
                    dkxx = gram_diag(kern, X_b)
                else:
                    dkxx = np.zeros(B)
                dktilde = dkxx - np.sum(dA * Kxz_b + Aj * dKxz, axis=1)
                total = 0.0
                for k in range(K):
                    dmu = dA @ post.means[k, j]
                    if post.structure == FULL:
                        S = post.cov(k, j)
                        dquad = 2.0 * np.sum((dA @ S) * Aj, axis=1)
                    else:
                        dquad = 2.0 * (dA * Aj) @ np.exp(post.cov_factors[k, j])
                    dv = dktilde + dquad
                    total += pi[k] * (gmu[:, k, j] @ dmu + gs2[:, k, j] @ dv)
                grad_hyper[j, p] = total

    grad_z = np.zeros((Q, M, D))
    if compute_inducing and not state.dense_mode:
        X_b = state.X[batch]
        for j in range(Q):
            kern = state.kernels[j]
            Zj = state.Z[j]
            L = state.chol_kzz[j]
            Aj_t = state.A[j][batch].T  # (M, B)
            Kxz_b = state.kxz[j][batch]
            kzz_raw = gram(kern, Zj, Zj)
            V2 = np.zeros((M, B))
            W1 = np.zeros((M, B))
            for k in range(K):
                c1 = pi[k] * gmu[:, k, j]
                c2 = pi[k] * gs2[:, k, j]
                km = cho_solve((L, True), post.means[k, j])
                if post.structure == FULL:
                    KSA = cho_solve((L, True), post.cov(k, j) @ Aj_t)
                else:
                    KSA = cho_solve(
                        (L, True), np.exp(post.cov_factors[k, j])[:, None] * Aj_t
                    )
                V2 += np.outer(km, c1) + c2[None, :] * (-2.0 * Aj_t + 2.0 * KSA)
                W1 += np.outer(km, -c1) + c2[None, :] * (Aj_t - 2.0 * KSA)
            t1, t2 = grad_inducing_bilinear(kern, Zj, X_b, Aj_t, W1, kzz_raw, Kxz_b)
            # t2's V slot carries the combined coefficient columns.
            _, t2b = grad_inducing_bilinear(kern, Zj, X_b, V2, V2, kzz_raw, Kxz_b)
            grad_z[j] = np.sum(t1 + t2b, axis=2).T

    scale = N / B
    grads = {
        "means": scale * grad_m,
        "covs": scale * grad_cov,
        "pi": scale * grad_pi,
        "phi": scale * grad_phi,
        "hyper": scale * grad_hyper,
        "inducing": scale * grad_z,
    }
    return scale * value, grads, scale * std_err


# ---------------------------------------------------------------------------
# assembled bound with packed gradients
# ---------------------------------------------------------------------------


def chain_cov_gradient(post: MixturePosterior, grad_cov: np.ndarray) -> np.ndarray:
    """Map elementwise covariance gradients onto the stored factors.

    Full structure: dL = (G + G') L restricted to the lower triangle.
    Diagonal structure: chain through the log-diagonal, g * exp(r).
    """
    K, Q, M = post.K, post.Q, post.M
    out = np.zeros_like(post.cov_factors)
    if post.structure == FULL:
        tril = np.tril_indices(M)
        mask = np.zeros((M, M))
        mask[tril] = 1.0
        for k in range(K):
            for j in range(Q):
                G = grad_cov[k, j]
                out[k, j] = ((G + G.T) @ post.cov_factors[k, j]) * mask
    else:
        out = grad_cov * np.exp(post.cov_factors)
    return out


def _zero_natural_grads(post: MixturePosterior) -> dict[str, np.ndarray]:
    if post.structure == FULL:
        covs = np.zeros((post.K, post.Q, post.M, post.M))
    else:
        covs = np.zeros((post.K, post.Q, post.M))
    return {"means": np.zeros_like(post.means), "covs": covs, "pi": np.zeros(post.K)}


def elbo(
    post: MixturePosterior,
    state: KernelState,
    Y: np.ndarray,
    model: LikelihoodModel,
    num_samples: int,
    seed: int,
    batch: np.ndarray | None = None,
    *,
    epoch: int = 0,
    method: str = "mc",
    control_variates: bool = True,
    compute_hyper: bool = True,
    compute_inducing: bool = False,
) -> ElboReport:
    """Assemble the three bound terms and merge gradients per group.

    The returned gradients are in the unconstrained training coordinates:
    softmax inputs for the weights, Cholesky / log-diagonal factors for
    covariances, log-hyperparameters, the stored likelihood vector, and
    raw inducing inputs.
    """
    ent_val, ent_g = entropy_bound(post)
    cross_val, cross_g = cross_entropy(
        post, state, compute_hyper=compute_hyper, compute_inducing=compute_inducing
    )
    ell_val, ell_g, std_err = ell_estimate(
        post,
        state,
        Y,
        model,
        num_samples,
        seed,
        batch,
        epoch=epoch,
        method=method,
        control_variates=control_variates,
        compute_hyper=compute_hyper,
        compute_inducing=compute_inducing,
    )

    means_g = ent_g["means"] + cross_g["means"] + ell_g["means"]
    covs_g = ent_g["covs"] + cross_g["covs"] + ell_g["covs"]
    pi_g = ent_g["pi"] + cross_g["pi"] + ell_g["pi"]
    hyper_g = cross_g["hyper"] + ell_g["hyper"]
    inducing_g = cross_g["inducing"] + ell_g["inducing"]

    grads = {
        "raw_weights": post.weight_chain(pi_g),
        "means": means_g,
        "cov_factors": chain_cov_gradient(post, covs_g),
        "hyper": hyper_g,
        "likelihood": ell_g["phi"],
        "inducing": inducing_g,
    }
    total = ent_val + cross_val + ell_val
    return ElboReport(
        ent=ent_val,
        cross=cross_val,
        ell=ell_val,
        total=total,
        grads=grads,
        mc_std_err=std_err,
    )


def kl_bound(
    post: MixturePosterior,
    state: KernelState,
    compute_hyper: bool = True,
    compute_inducing: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Entropy bound plus cross-entropy, gradients in packed coordinates.

    This is the analytic part of the objective (an upper bound on the
    negative KL to the prior, hence always <= 0).
    """
    ent_val, ent_g = entropy_bound(post)
    cross_val, cross_g = cross_entropy(
        post, state, compute_hyper=compute_hyper, compute_inducing=compute_inducing
    )
    grads = {
        "raw_weights": post.weight_chain(ent_g["pi"] + cross_g["pi"]),
        "means": ent_g["means"] + cross_g["means"],
        "cov_factors": chain_cov_gradient(post, ent_g["covs"] + cross_g["covs"]),
        "hyper": cross_g["hyper"],
        "inducing": cross_g["inducing"],
    }
    return ent_val + cross_val, grads
