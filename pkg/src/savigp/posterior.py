"""Variational family over inducing variables and cached kernel state.

The posterior over the M inducing values of each latent process is a
K-component Gaussian mixture that factorizes across processes.  Mixture
weights live behind a softmax, full covariances behind their Cholesky
factors and diagonal covariances behind log-diagonals, so every stored
parameter is unconstrained.

KernelState caches, per latent process, the factorized inducing Gram
matrix, the projection A_j = K_xz K_zz^{-1} and the diagonal of the
conditional covariance; the N x N conditional covariance itself is never
materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .exceptions import ConfigurationError, IllConditionedKernelError
from .kernels import SeArdKernel, chol_with_jitter, gram, gram_diag

FULL = "full"
DIAGONAL = "diag"

VARIANCE_FLOOR = 1e-10
KTILDE_TOLERANCE_JITTERS = 10.0


@dataclass
class InducingConfig:
    """Inducing-input locations, one M x D matrix per latent process."""

    Z: np.ndarray  # (Q, M, D)
    dense_mode: bool = False

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=float)
        if self.Z.ndim != 3:
            raise ConfigurationError("Z must have shape (Q, M, D)")

    @property
    def num_latent(self) -> int:
        return self.Z.shape[0]

    @property
    def num_inducing(self) -> int:
        return self.Z.shape[1]

    @property
    def input_dim(self) -> int:
        return self.Z.shape[2]

    def validate_against(self, X: np.ndarray) -> None:
        if self.input_dim != X.shape[1]:
            raise ConfigurationError("inducing inputs and data disagree on D")
        if self.dense_mode:
            if self.num_inducing != X.shape[0]:
                raise ConfigurationError("dense mode requires M = N")
            if not all(np.array_equal(self.Z[j], X) for j in range(self.num_latent)):
                raise ConfigurationError(
                    "dense mode requires every Z_j to equal the training inputs"
                )


class MixturePosterior:
    """Mixture-of-Gaussians posterior over inducing variables.

    Parameters are stored unconstrained: ``raw_weights`` (softmax to the
    simplex), ``means[k, j]`` of length M, and per-(k, j) covariance
    factors: a lower-triangular Cholesky factor for FULL structure or a
    log-diagonal vector for DIAGONAL structure.
    """

    def __init__(
        self,
        num_components: int,
        num_latent: int,
        num_inducing: int,
        structure: str = FULL,
    ):
        if structure not in (FULL, DIAGONAL):
            raise ConfigurationError(f"unknown covariance structure {structure!r}")
        self.K = num_components
        self.Q = num_latent
        self.M = num_inducing
        self.structure = structure
        self.raw_weights = np.zeros(num_components)
        self.means = np.zeros((num_components, num_latent, num_inducing))
        if structure == FULL:
            self.cov_factors = np.tile(
                np.eye(num_inducing), (num_components, num_latent, 1, 1)
            )
        else:
            self.cov_factors = np.zeros((num_components, num_latent, num_inducing))
        self.lambda_log: np.ndarray | None = None  # (Q, N) when reparametrized

    # -- weights ---------------------------------------------------------

    def weights(self) -> np.ndarray:
        w = self.raw_weights - np.max(self.raw_weights)
        e = np.exp(w)
        return e / np.sum(e)

    def weight_chain(self, grad_pi: np.ndarray) -> np.ndarray:
        """Pull a gradient w.r.t. pi back through the softmax."""
        pi = self.weights()
        return pi * (grad_pi - np.dot(pi, grad_pi))

    # -- covariances -----------------------------------------------------

    def cov(self, k: int, j: int) -> np.ndarray:
        """Dense covariance S_kj (M x M)."""
        if self.structure == FULL:
            L = self.cov_factors[k, j]
            return L @ L.T
        return np.diag(np.exp(self.cov_factors[k, j]))

    def cov_diag(self, k: int, j: int) -> np.ndarray:
        if self.structure == FULL:
            L = self.cov_factors[k, j]
            return np.sum(L * L, axis=1)
        return np.exp(self.cov_factors[k, j])

    def covariance_parameter_count(self) -> int:
        """Free covariance parameters in the active representation."""
        if self.lambda_log is not None:
            return self.lambda_log.size  # Q * N
        if self.structure == FULL:
            return self.K * self.Q * (self.M * (self.M + 1)) // 2
        return self.K * self.Q * self.M

    # -- efficient reparametrization --------------------------------------

    def activate_lambda_reparam(self, lambda_log: np.ndarray) -> None:
        """Represent the covariance through per-datapoint precisions.

        Restricted to a single full-covariance component; ``lambda_log``
        has shape (Q, N) and parametrizes Lambda_j = exp(lambda_log[j]).
        """
        if self.structure != FULL or self.K != 1:
            raise ConfigurationError(
                "the efficient reparametrization requires K=1 with FULL structure"
            )
        lambda_log = np.asarray(lambda_log, dtype=float)
        if lambda_log.ndim != 2 or lambda_log.shape[0] != self.Q:
            raise ConfigurationError("lambda_log must have shape (Q, N)")
        self.lambda_log = lambda_log

    def sync_from_lambda(self, state: "KernelState") -> None:
        """Recompute the stored Cholesky factors from the active Lambda."""
        if self.lambda_log is None:
            raise ConfigurationError("lambda reparametrization is not active")
        for j in range(self.Q):
            S = reparam_covariance(state, np.exp(self.lambda_log[j]), j)
            S = S + VARIANCE_FLOOR * np.eye(self.M)
            self.cov_factors[0, j] = np.linalg.cholesky(S)

    def copy(self) -> "MixturePosterior":
        out = MixturePosterior(self.K, self.Q, self.M, self.structure)
        out.raw_weights = self.raw_weights.copy()
        out.means = self.means.copy()
        out.cov_factors = self.cov_factors.copy()
        if self.lambda_log is not None:
            out.lambda_log = self.lambda_log.copy()
        return out


@dataclass
class KernelState:
    """Cached per-latent kernel quantities for a fixed (kernels, Z, X)."""

    kernels: list[SeArdKernel]
    Z: np.ndarray  # (Q, M, D)
    X: np.ndarray  # (N, D)
    dense_mode: bool
    chol_kzz: np.ndarray  # (Q, M, M) lower factors of Kzz + jitter I
    logdet_kzz: np.ndarray  # (Q,)
    A: np.ndarray  # (Q, N, M) = Kxz Kzz^{-1}
    ktilde_diag: np.ndarray  # (Q, N), clamped at 0
    kxz: np.ndarray  # (Q, N, M)
    jitter: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def num_latent(self) -> int:
        return len(self.kernels)

    @property
    def num_inducing(self) -> int:
        return self.Z.shape[1]

    @property
    def num_data(self) -> int:
        return self.X.shape[0]

    def kzz_inv(self, j: int) -> np.ndarray:
        return cho_solve((self.chol_kzz[j], True), np.eye(self.num_inducing))

    def solve_kzz(self, j: int, B: np.ndarray) -> np.ndarray:
        return cho_solve((self.chol_kzz[j], True), B)


def build_kernel_state(
    kernels: list[SeArdKernel], inducing: InducingConfig, X: np.ndarray
) -> KernelState:
    """Factor each inducing Gram matrix and cache projections.

    In dense mode A_j = I and the conditional variance is identically zero
    by construction, which is what makes the expected-log-likelihood term
    independent of the kernel hyperparameters there.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(kernels) != inducing.num_latent:
        raise ConfigurationError("one kernel per latent process is required")
    inducing.validate_against(X)
    Q, M, _ = inducing.Z.shape
    N = X.shape[0]

    chols = np.empty((Q, M, M))
    logdets = np.empty(Q)
    A = np.empty((Q, N, M))
    ktilde = np.empty((Q, N))
    kxz = np.empty((Q, N, M))
    jitters = np.empty(Q)

    for j, kern in enumerate(kernels):
        Zj = inducing.Z[j]
        Kzz = gram(kern, Zj, Zj)
        L, jit = chol_with_jitter(Kzz, kern.signal_variance)
        chols[j] = L
        jitters[j] = jit
        logdets[j] = 2.0 * np.sum(np.log(np.diag(L)))
        if inducing.dense_mode:
            kxz[j] = Kzz
            A[j] = np.eye(N)
            ktilde[j] = 0.0
            continue
        Kxz = gram(kern, X, Zj)
        kxz[j] = Kxz
        A[j] = cho_solve((L, True), Kxz.T).T
        diag = gram_diag(kern, X) - np.sum(A[j] * Kxz, axis=1)
        tol = KTILDE_TOLERANCE_JITTERS * jit
        if np.any(diag < -tol):
            raise IllConditionedKernelError(
                "conditional variance fell below the jitter tolerance band; "
                "the inducing Gram matrix is too ill-conditioned"
            )
        ktilde[j] = np.maximum(diag, 0.0)

    return KernelState(
        kernels=[k for k in kernels],
        Z=inducing.Z,
        X=X,
        dense_mode=inducing.dense_mode,
        chol_kzz=chols,
        logdet_kzz=logdets,
        A=A,
        ktilde_diag=ktilde,
        kxz=kxz,
        jitter=jitters,
    )


@dataclass
class MarginalMoment:
    """Per-datapoint marginal of the latent posterior: Q means, Q variances."""

    mean: np.ndarray
    var: np.ndarray


def marginal_moments_all(
    state: KernelState, post: MixturePosterior
) -> tuple[np.ndarray, np.ndarray]:
    """Means and variances of the per-datapoint latent marginals.

    Returns arrays of shape (K, Q, N):
      mean[k, j, n] = a_jn . m_kj
      var[k, j, n]  = ktilde_j[n] + a_jn . S_kj a_jn   (floored)
    """
    K, Q, N = post.K, post.Q, state.num_data
    means = np.empty((K, Q, N))
    variances = np.empty((K, Q, N))
    for j in range(Q):
        Aj = state.A[j]
        for k in range(K):
            means[k, j] = Aj @ post.means[k, j]
            if post.structure == FULL:
                AL = Aj @ post.cov_factors[k, j]
                quad = np.sum(AL * AL, axis=1)
            else:
                quad = (Aj * Aj) @ np.exp(post.cov_factors[k, j])
            variances[k, j] = state.ktilde_diag[j] + quad
    np.maximum(variances, VARIANCE_FLOOR, out=variances)
    return means, variances


def marginal_moments(
    state: KernelState, post: MixturePosterior, n: int, k: int
) -> MarginalMoment:
    """Marginal latent moments for datapoint ``n`` under component ``k``."""
    if not 0 <= n < state.num_data:
        raise ConfigurationError(f"datapoint index {n} out of range")
    if not 0 <= k < post.K:
        raise ConfigurationError(f"component index {k} out of range")
    Q = post.Q
    mean = np.empty(Q)
    var = np.empty(Q)
    for j in range(Q):
        a = state.A[j, n]
        mean[j] = a @ post.means[k, j]
        if post.structure == FULL:
            v = post.cov_factors[k, j].T @ a
            quad = v @ v
        else:
            quad = (a * a) @ np.exp(post.cov_factors[k, j])
        var[j] = max(state.ktilde_diag[j, n] + quad, VARIANCE_FLOOR)
    return MarginalMoment(mean=mean, var=var)


def reparam_covariance(
    state: KernelState, lam: np.ndarray, j: int = 0
) -> np.ndarray:
    """Optimal-form covariance Kzz (Kzz + Kzx Lambda Kxz)^{-1} Kzz.

    ``lam`` is the length-N nonnegative diagonal of Lambda_j.  The result
    is symmetric positive definite for any nonnegative Lambda; lam = 0
    returns the prior covariance.  In dense mode this reduces to
    (Kxx^{-1} + Lambda)^{-1}.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (state.num_data,):
        raise ConfigurationError("Lambda must be a length-N vector")
    if np.any(lam < 0):
        raise ConfigurationError("Lambda must be elementwise nonnegative")
    kern = state.kernels[j]
    Zj = state.Z[j]
    Kzz = gram(kern, Zj, Zj)
    Kzx = state.kxz[j].T if not state.dense_mode else Kzz
    inner = Kzz + (Kzx * lam[None, :]) @ Kzx.T
    try:
        L = np.linalg.cholesky(inner)
    except np.linalg.LinAlgError:
        L, _ = chol_with_jitter(inner, kern.signal_variance)
    half = solve_triangular(L, Kzz, lower=True)  # L^{-1} Kzz
    S = half.T @ half
    return 0.5 * (S + S.T)
