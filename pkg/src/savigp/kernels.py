"""Squared-exponential ARD covariance: Gram matrices and gradients.

All positive hyperparameters are stored in log space so downstream
optimization is unconstrained; every gradient returned here is already
with respect to the log-parameters.

Gradients with respect to inducing-input locations come in two batched
forms, one for terms of the shape ``v_n^T (dK_zz) w_n`` and one for
``v_n^T (d kappa(Z, x_n))``, built from per-dimension pairwise-difference
matrices so no per-entry loop over Z is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, IllConditionedKernelError

JITTER_RELATIVE = 1e-6
JITTER_MAX_RELATIVE = 1e-2


@dataclass
class SeArdKernel:
    """Squared-exponential kernel with one length-scale per input dimension.

    k(x, x') = sigma_f^2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)
    """

    log_lengthscales: np.ndarray
    log_signal_variance: float = 0.0

    def __post_init__(self):
        self.log_lengthscales = np.atleast_1d(
            np.asarray(self.log_lengthscales, dtype=float)
        )
        self.log_signal_variance = float(self.log_signal_variance)
        if not np.all(np.isfinite(self.log_lengthscales)):
            raise ConfigurationError("length-scales must be finite and positive")
        if not np.isfinite(self.log_signal_variance):
            raise ConfigurationError("signal variance must be finite and positive")

    @property
    def input_dim(self) -> int:
        return self.log_lengthscales.shape[0]

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def signal_variance(self) -> float:
        return float(np.exp(self.log_signal_variance))

    @property
    def n_params(self) -> int:
        """Number of log-hyperparameters (D length-scales + 1 variance)."""
        return self.input_dim + 1

    def log_params(self) -> np.ndarray:
        return np.concatenate([self.log_lengthscales, [self.log_signal_variance]])

    def set_log_params(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_params,):
            raise ConfigurationError(
                f"expected {self.n_params} kernel parameters, got {values.shape}"
            )
        self.log_lengthscales = values[:-1].copy()
        self.log_signal_variance = float(values[-1])

    def copy(self) -> "SeArdKernel":
        return SeArdKernel(self.log_lengthscales.copy(), self.log_signal_variance)


def _check_dims(k: SeArdKernel, *arrays: np.ndarray) -> None:
    for a in arrays:
        if a.shape[-1] != k.input_dim:
            raise ConfigurationError(
                f"input dimension {a.shape[-1]} does not match kernel D={k.input_dim}"
            )


def kernel_eval(k: SeArdKernel, x: np.ndarray, x2: np.ndarray) -> float:
    """Evaluate the covariance between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    _check_dims(k, x, x2)
    r = (x - x2) / k.lengthscales
    return k.signal_variance * float(np.exp(-0.5 * np.dot(r, r)))


def _sq_dist(k: SeArdKernel, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Scaled squared distances sum_d (x_d - x'_d)^2 / l_d^2, shape (n1, n2)."""
    A = X1 / k.lengthscales
    B = X2 / k.lengthscales
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    return np.maximum(sq, 0.0)


def gram(k: SeArdKernel, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Covariance matrix between the rows of X1 and X2."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    _check_dims(k, X1, X2)
    K = k.signal_variance * np.exp(-0.5 * _sq_dist(k, X1, X2))
    if X1 is X2 or (X1.shape == X2.shape and np.array_equal(X1, X2)):
        K = 0.5 * (K + K.T)
    return K


def gram_diag(k: SeArdKernel, X: np.ndarray) -> np.ndarray:
    """diag(gram(X, X)) without building the matrix; equals sigma_f^2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_dims(k, X)
    return np.full(X.shape[0], k.signal_variance)


def gram_grad_hyper(
    k: SeArdKernel, X1: np.ndarray, X2: np.ndarray, param_index: int
) -> np.ndarray:
    """Elementwise derivative of gram(X1, X2) w.r.t. one log-hyperparameter.

    Index 0..D-1 addresses log l_d, index D addresses log sigma_f^2.  The
    chain rule through exp is already applied, so for the signal variance
    the derivative is the Gram matrix itself.
    """
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    _check_dims(k, X1, X2)
    if not 0 <= param_index < k.n_params:
        raise ConfigurationError(
            f"param_index {param_index} out of range for D+1={k.n_params}"
        )
    K = gram(k, X1, X2)
    if param_index == k.input_dim:
        return K
    d = param_index
    diff = (X1[:, d][:, None] - X2[:, d][None, :]) / k.lengthscales[d]
    return K * diff * diff


def pairwise_scaled_diff(
    k: SeArdKernel, A: np.ndarray, B: np.ndarray, d: int
) -> np.ndarray:
    """(A[o, d] - B[p, d]) / l_d^2 for all pairs, shape (len(A), len(B))."""
    ell2 = k.lengthscales[d] ** 2
    return (A[:, d][:, None] - B[:, d][None, :]) / ell2


def grad_z_gram_weighted(
    k: SeArdKernel, Z: np.ndarray, G: np.ndarray, Kzz: np.ndarray | None = None
) -> np.ndarray:
    """Gradient of sum_pq G[p,q] * Kzz[p,q] with respect to Z, shape (M, D).

    G must be symmetric.  Uses dK[p,q]/dZ[o,d] = -K[p,q] * ztilde_d[p,q]
    * (delta_po - delta_qo) and the antisymmetry of the weighted pages.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Kzz is None:
        Kzz = gram(k, Z, Z)
    M, D = Z.shape
    out = np.empty((M, D))
    GK = G * Kzz
    for d in range(D):
        zt = pairwise_scaled_diff(k, Z, Z, d)
        out[:, d] = -2.0 * np.sum(GK * zt, axis=1)
    return out


def grad_inducing_bilinear(
    k: SeArdKernel,
    Z: np.ndarray,
    X: np.ndarray,
    V: np.ndarray,
    W: np.ndarray,
    Kzz: np.ndarray,
    Kxz: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched inducing-input gradients of the two bilinear term families.

    For each datapoint n (columns of V, W):

      t1_n = v_n^T (dKzz/dZ) w_n          -> pages ``t1[d][o, n]``
      t2_n = v_n^T (d kappa(Z, x_n)/dZ)   -> pages ``t2[d][o, n]``

    Returns two arrays of shape (D, M, N).  Kzz and Kxz must be the
    precomputed Gram matrices for the same Z, X.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M, D = Z.shape
    N = X.shape[0]
    if V.shape != (M, N) or W.shape != (M, N):
        raise ConfigurationError(
            f"V and W must be (M, N)=({M}, {N}); got {V.shape}, {W.shape}"
        )
    if Kzz.shape != (M, M) or Kxz.shape != (N, M):
        raise ConfigurationError("Kzz/Kxz shapes do not match Z, X")
    t1 = np.empty((D, M, N))
    t2 = np.empty((D, M, N))
    for d in range(D):
        zt = pairwise_scaled_diff(k, Z, Z, d)
        ztK = zt * Kzz
        t1[d] = -(ztK @ W) * V - (ztK @ V) * W
        xt = pairwise_scaled_diff(k, X, Z, d)
        # dkappa(z_o, x_n)/dZ[o,d] = Kxz[n,o] * xt[n,o]; pages follow directly.
        t2[d] = (Kxz * xt).T * V
    return t1, t2


def chol_with_jitter(
    K: np.ndarray, scale: float, base_relative: float = JITTER_RELATIVE
) -> tuple[np.ndarray, float]:
    """Cholesky factor of K + jitter*I, escalating jitter x10 on failure.

    ``scale`` sets the jitter unit (the kernel's signal variance).  Raises
    IllConditionedKernelError once the jitter would exceed 1e-2 * scale.
    """
    jitter = base_relative * scale
    eye = np.eye(K.shape[0])
    while True:
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > JITTER_MAX_RELATIVE * scale:
                raise IllConditionedKernelError(
                    "Cholesky failed after jitter escalation "
                    f"(final jitter {jitter:.2e}, scale {scale:.2e})"
                )
