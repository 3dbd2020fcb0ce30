"""Conditional likelihood models evaluated in a black-box fashion.

The inference engine only ever needs log p(y_n | f_n, phi) for single
datapoints; no gradients with respect to f are required anywhere.  Each
model also provides the same evaluation vectorized over Monte Carlo
samples of f_n (``log_pdf_samples``), which is an implementation
convenience, not a change of contract.

Learnable parameters phi are stored as a flat vector in an unconstrained
(log-space where positive) parametrization.  Gradients with respect to
phi default to central finite differences on the stored vector, keeping
the black-box contract; the Gaussian noise and Poisson offset have cheap
analytic overrides.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import ConfigurationError, DataError

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_FD_STEP = 1e-6


def _gauss_logpdf(resid: np.ndarray, var: float) -> np.ndarray:
    return -HALF_LOG_2PI - 0.5 * np.log(var) - 0.5 * resid * resid / var


class LikelihoodModel:
    """Base class; subclasses define a variant of p(y | f, phi)."""

    #: number of latent processes the variant consumes
    num_latent: int = 1
    #: output dimensionality of a single observation
    num_outputs: int = 1
    #: True for classification-style discrete outputs
    discrete: bool = False

    def __init__(self, phi: np.ndarray):
        self.phi = np.asarray(phi, dtype=float)

    @property
    def n_params(self) -> int:
        return self.phi.size

    # -- evaluation --------------------------------------------------------

    def log_pdf(self, y, f) -> float:
        """Exact log density/mass of one observation given one latent draw."""
        raise NotImplementedError

    def log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        """log p(y | f_i) for S latent draws F of shape (S, Q)."""
        return np.array([self.log_pdf(y, f) for f in F])

    # -- phi gradients -------------------------------------------------------

    def grad_phi_log_pdf(self, y, f) -> np.ndarray:
        """d log p / d phi in the stored parametrization (central differences)."""
        return self.grad_phi_log_pdf_samples(y, np.atleast_2d(f))[0]

    def grad_phi_log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        """Per-sample phi-gradients, shape (S, n_params)."""
        out = np.zeros((F.shape[0], self.n_params))
        base = self.phi.copy()
        try:
            for i, p in enumerate(base):
                if not np.isfinite(p):
                    # log-parametrized value pinned at exactly zero: the
                    # chain rule through exp gives a zero derivative.
                    continue
                h = _FD_STEP * max(1.0, abs(p))
                self.phi = base.copy()
                self.phi[i] = p + h
                hi = self.log_pdf_samples(y, F)
                self.phi[i] = p - h
                lo = self.log_pdf_samples(y, F)
                out[:, i] = (hi - lo) / (2.0 * h)
        finally:
            self.phi = base
        return out

    # -- prediction ----------------------------------------------------------

    def predictive_point(
        self, latent_samples: np.ndarray, y_star=None
    ) -> tuple[np.ndarray, np.ndarray | None]:
        """Point summary over latent samples plus per-sample densities.

        Regression variants return the average conditional point value;
        classification variants return averaged class probabilities.  When
        ``y_star`` is given, the second element holds log p(y_star | f_i)
        per sample (log densities for continuous outputs, log probabilities
        for discrete ones).
        """
        raise NotImplementedError

    def conditional_moments(self, latent_samples: np.ndarray):
        """Per-sample conditional mean/variance of y, or None if unavailable."""
        return None


class GaussianLikelihood(LikelihoodModel):
    """y | f ~ N(f, sigma^2); phi = [log sigma^2]."""

    def __init__(self, log_noise_variance: float = np.log(0.1)):
        super().__init__(np.array([log_noise_variance]))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.phi[0]))

    def log_pdf(self, y, f) -> float:
        f = np.atleast_1d(f)
        return float(_gauss_logpdf(float(y) - f[0], self.noise_variance))

    def log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        return _gauss_logpdf(float(y) - F[:, 0], self.noise_variance)

    def grad_phi_log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        r = float(y) - F[:, 0]
        var = self.noise_variance
        return (-0.5 + 0.5 * r * r / var)[:, None]

    def predictive_point(self, latent_samples, y_star=None):
        point = np.array([np.mean(latent_samples[:, 0])])
        dens = None
        if y_star is not None:
            dens = _gauss_logpdf(
                float(np.ravel(y_star)[0]) - latent_samples[:, 0],
                self.noise_variance,
            )
        return point, dens

    def conditional_moments(self, latent_samples):
        mean = latent_samples[:, 0]
        var = np.full_like(mean, self.noise_variance)
        return mean[:, None], var[:, None]


class WarpedGaussianLikelihood(LikelihoodModel):
    """Warped observation model t(y) | f ~ N(f, sigma^2).

    t(y) = y + sum_i a_i tanh(b_i (y + c_i)) with a_i, b_i > 0, so t is
    strictly increasing and the density picks up the log t'(y) Jacobian.
    phi = [log sigma^2, log a_1..I, log b_1..I, c_1..I].
    """

    def __init__(self, log_noise_variance=np.log(0.1), log_a=None, log_b=None, c=None,
                 num_terms: int = 3):
        if log_a is None:
            log_a = np.full(num_terms, np.log(0.1))
        if log_b is None:
            log_b = np.zeros(num_terms)
        if c is None:
            c = np.linspace(-1.0, 1.0, num_terms)
        log_a, log_b, c = (np.atleast_1d(np.asarray(v, float)) for v in (log_a, log_b, c))
        if not (log_a.size == log_b.size == c.size):
            raise ConfigurationError("warp terms a, b, c must have equal lengths")
        self.num_terms = log_a.size
        super().__init__(np.concatenate([[log_noise_variance], log_a, log_b, c]))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.phi[0]))

    def _abc(self):
        I = self.num_terms
        a = np.exp(self.phi[1 : 1 + I])
        b = np.exp(self.phi[1 + I : 1 + 2 * I])
        c = self.phi[1 + 2 * I :]
        return a, b, c

    def warp(self, y):
        a, b, c = self._abc()
        y = np.asarray(y, dtype=float)
        return y + np.tanh(np.multiply.outer(y, b) + b * c) @ a

    def warp_deriv(self, y):
        a, b, c = self._abc()
        y = np.asarray(y, dtype=float)
        t = np.tanh(np.multiply.outer(y, b) + b * c)
        return 1.0 + (1.0 - t * t) @ (a * b)

    def warp_inverse(self, g, tol: float = 1e-10):
        """Invert the warp by bisection; exact to ``tol`` in y."""
        g = np.asarray(g, dtype=float)
        a, _, _ = self._abc()
        pad = np.sum(a) + 1.0
        lo = g - pad
        hi = g + pad
        # t(y) - y is bounded by sum(a), so the bracket always contains the root.
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            too_low = self.warp(mid) < g
            lo = np.where(too_low, mid, lo)
            hi = np.where(too_low, hi, mid)
            if np.max(hi - lo) < tol:
                break
        return 0.5 * (lo + hi)

    def log_pdf(self, y, f) -> float:
        f = np.atleast_1d(f)
        y = float(np.ravel(y)[0])
        resid = self.warp(y) - f[0]
        return float(np.log(self.warp_deriv(y)) + _gauss_logpdf(resid, self.noise_variance))

    def log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        y = float(np.ravel(y)[0])
        resid = self.warp(y) - F[:, 0]
        return np.log(self.warp_deriv(y)) + _gauss_logpdf(resid, self.noise_variance)

    def predictive_point(self, latent_samples, y_star=None):
        medians = self.warp_inverse(latent_samples[:, 0])
        point = np.array([np.mean(medians)])
        dens = None
        if y_star is not None:
            dens = self.log_pdf_samples(y_star, latent_samples)
        return point, dens

    def conditional_moments(self, latent_samples):
        # E[y | f] has no closed form; push Gauss-Hermite nodes of the
        # latent Gaussian back through the inverse warp.
        from scipy.special import roots_hermitenorm

        nodes, weights = roots_hermitenorm(9)
        weights = weights / np.sqrt(2.0 * np.pi)
        f = latent_samples[:, 0]
        sd = np.sqrt(self.noise_variance)
        ys = self.warp_inverse(f[:, None] + sd * nodes[None, :])  # (S, H)
        mean = ys @ weights
        second = (ys * ys) @ weights
        var = np.maximum(second - mean * mean, 0.0)
        return mean[:, None], var[:, None]


class LogisticLikelihood(LikelihoodModel):
    """Binary labels in {0, 1} through p(y=1 | f) = 1 / (1 + exp(-f))."""

    discrete = True

    def __init__(self):
        super().__init__(np.zeros(0))

    def _check(self, y) -> float:
        y = float(np.ravel(y)[0])
        if y not in (0.0, 1.0):
            raise DataError(f"logistic labels must be 0 or 1, got {y}")
        return y

    def log_pdf(self, y, f) -> float:
        y = self._check(y)
        f = np.atleast_1d(f)
        return float(-np.logaddexp(0.0, -(2.0 * y - 1.0) * f[0]))

    def log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        y = self._check(y)
        return -np.logaddexp(0.0, -(2.0 * y - 1.0) * F[:, 0])

    def predictive_point(self, latent_samples, y_star=None):
        p1 = np.mean(1.0 / (1.0 + np.exp(-latent_samples[:, 0])))
        probs = np.array([1.0 - p1, p1])
        dens = None
        if y_star is not None:
            dens = self.log_pdf_samples(y_star, latent_samples)
        return probs, dens


class SoftmaxLikelihood(LikelihoodModel):
    """C-class labels through p(y=c | f) = exp(f_c) / sum_i exp(f_i)."""

    discrete = True

    def __init__(self, num_classes: int):
        if num_classes < 2:
            raise ConfigurationError("softmax needs at least two classes")
        self.num_classes = int(num_classes)
        self.num_latent = self.num_classes
        super().__init__(np.zeros(0))

    def _class_index(self, y) -> int:
        arr = np.ravel(np.asarray(y, dtype=float))
        if arr.size == self.num_classes and arr.max() == 1.0 and arr.sum() == 1.0:
            return int(np.argmax(arr))  # one-hot accepted at ingestion
        c = arr[0]
        if c != int(c) or not 0 <= int(c) < self.num_classes:
            raise DataError(
                f"class index {c} outside 0..{self.num_classes - 1}"
            )
        return int(c)

    def log_pdf(self, y, f) -> float:
        c = self._class_index(y)
        f = np.atleast_1d(f)
        return float(f[c] - logsumexp(f))

    def log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        c = self._class_index(y)
        return F[:, c] - logsumexp(F, axis=1)

    def predictive_point(self, latent_samples, y_star=None):
        logp = latent_samples - logsumexp(latent_samples, axis=1, keepdims=True)
        probs = np.mean(np.exp(logp), axis=0)
        dens = None
        if y_star is not None:
            dens = self.log_pdf_samples(y_star, latent_samples)
        return probs, dens


class PoissonLgcpLikelihood(LikelihoodModel):
    """Counts with log-intensity f + m: y | f ~ Poisson(exp(f + m))."""

    def __init__(self, offset: float = 0.0):
        super().__init__(np.array([offset]))

    @property
    def offset(self) -> float:
        return float(self.phi[0])

    def _check(self, y) -> float:
        y = float(np.ravel(y)[0])
        if y < 0 or y != np.floor(y):
            raise DataError(f"Poisson counts must be nonnegative integers, got {y}")
        return y

    def log_pdf(self, y, f) -> float:
        y = self._check(y)
        f = np.atleast_1d(f)
        eta = f[0] + self.offset
        return float(y * eta - np.exp(eta) - gammaln(y + 1.0))

    def log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        y = self._check(y)
        eta = F[:, 0] + self.offset
        return y * eta - np.exp(eta) - gammaln(y + 1.0)

    def grad_phi_log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        y = self._check(y)
        return (y - np.exp(F[:, 0] + self.offset))[:, None]

    def predictive_point(self, latent_samples, y_star=None):
        rates = np.exp(latent_samples[:, 0] + self.offset)
        point = np.array([np.mean(rates)])
        dens = None
        if y_star is not None:
            dens = self.log_pdf_samples(y_star, latent_samples)
        return point, dens

    def conditional_moments(self, latent_samples):
        rates = np.exp(latent_samples[:, 0] + self.offset)
        return rates[:, None], rates[:, None]


class GprnLikelihood(LikelihoodModel):
    """Regression network: y = W(x) g(x) + sigma_y eps.

    The latent vector is laid out nodes first, then the weight matrix in
    row-major order: f = [g_1..g_q, W_11..W_Pq], so Q = q (P + 1).  Weight
    noise is optional; when enabled the conditional covariance becomes
    sigma_y^2 I + sigma_w^2 W W^T.
    """

    def __init__(self, num_outputs: int, num_nodes: int,
                 log_noise_variance=np.log(0.1), log_weight_variance=None):
        self.num_outputs = int(num_outputs)
        self.num_nodes = int(num_nodes)
        self.num_latent = self.num_nodes * (self.num_outputs + 1)
        self.has_weight_noise = log_weight_variance is not None
        phi = [log_noise_variance]
        if self.has_weight_noise:
            phi.append(log_weight_variance)
        super().__init__(np.array(phi, dtype=float))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.phi[0]))

    @property
    def weight_variance(self) -> float:
        return float(np.exp(self.phi[1])) if self.has_weight_noise else 0.0

    def _split(self, F: np.ndarray):
        q, P = self.num_nodes, self.num_outputs
        g = F[:, :q]
        W = F[:, q:].reshape(F.shape[0], P, q)
        return g, W

    def log_pdf(self, y, f) -> float:
        return float(self.log_pdf_samples(y, np.atleast_2d(f))[0])

    def log_pdf_samples(self, y, F: np.ndarray) -> np.ndarray:
        y = np.ravel(np.asarray(y, dtype=float))
        if y.size != self.num_outputs:
            raise DataError(
                f"expected {self.num_outputs}-dimensional outputs, got {y.size}"
            )
        g, W = self._split(F)
        mean = np.einsum("spq,sq->sp", W, g)
        resid = y[None, :] - mean
        if not self.has_weight_noise:
            return np.sum(_gauss_logpdf(resid, self.noise_variance), axis=1)
        sy2, sw2 = self.noise_variance, self.weight_variance
        out = np.empty(F.shape[0])
        eye = np.eye(self.num_outputs)
        for i in range(F.shape[0]):
            C = sy2 * eye + sw2 * (W[i] @ W[i].T)
            L = np.linalg.cholesky(C)
            half = np.linalg.solve(L, resid[i])
            out[i] = (
                -0.5 * self.num_outputs * np.log(2.0 * np.pi)
                - np.sum(np.log(np.diag(L)))
                - 0.5 * half @ half
            )
        return out

    def predictive_point(self, latent_samples, y_star=None):
        g, W = self._split(latent_samples)
        mean = np.einsum("spq,sq->sp", W, g)
        point = np.mean(mean, axis=0)
        dens = None
        if y_star is not None:
            dens = self.log_pdf_samples(y_star, latent_samples)
        return point, dens

    def conditional_moments(self, latent_samples):
        g, W = self._split(latent_samples)
        mean = np.einsum("spq,sq->sp", W, g)
        var = self.noise_variance + self.weight_variance * np.sum(W * W, axis=2)
        return mean, var


LIKELIHOOD_NAMES = {
    "gaussian": GaussianLikelihood,
    "warped": WarpedGaussianLikelihood,
    "logistic": LogisticLikelihood,
    "softmax": SoftmaxLikelihood,
    "lgcp": PoissonLgcpLikelihood,
    "gprn": GprnLikelihood,
}


def make_likelihood(name: str, config: dict | None = None) -> LikelihoodModel:
    """Build a likelihood from its CLI name and variant config keys."""
    config = dict(config or {})
    if name == "gaussian":
        return GaussianLikelihood()
    if name == "warped":
        return WarpedGaussianLikelihood(num_terms=int(config.get("warped.terms", 3)))
    if name == "logistic":
        return LogisticLikelihood()
    if name == "softmax":
        if "softmax.classes" not in config:
            raise ConfigurationError("softmax requires the softmax.classes key")
        return SoftmaxLikelihood(int(config["softmax.classes"]))
    if name == "lgcp":
        return PoissonLgcpLikelihood(offset=float(config.get("lgcp.offset", 0.0)))
    if name == "gprn":
        if "gprn.outputs" not in config or "gprn.nodes" not in config:
            raise ConfigurationError("gprn requires gprn.outputs and gprn.nodes keys")
        lw = config.get("gprn.weight_variance")
        return GprnLikelihood(
            int(config["gprn.outputs"]),
            int(config["gprn.nodes"]),
            log_weight_variance=None if lw is None else float(np.log(float(lw))),
        )
    raise ConfigurationError(
        f"unknown likelihood {name!r}; choose from {sorted(LIKELIHOOD_NAMES)}"
    )
