"""Batch and stochastic training loops over parameter groups.

Batch mode alternates L-BFGS over the groups (variational, hyper,
likelihood, inducing) under frozen Monte Carlo streams, so each inner
line search sees a deterministic objective and the global stopping rule
(objective change below tolerance) is exact.  Stochastic mode runs
AdaDelta jointly over all groups on shuffled disjoint minibatches.

ParameterPacking is the lossless bridge between the structured model
parameters and the flat vectors the optimizers consume; gradient packing
applies each segment's chain rule, which is already done by the elbo
module, so packing gradients is pure concatenation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .elbo import ElboReport, elbo
from .exceptions import ConfigurationError, NumericalError
from .model import GpModel
from .posterior import FULL

GROUP_NAMES = ("variational", "hyper", "likelihood", "inducing")


@dataclass
class OptimizerConfig:
    mode: str = "batch"  # "batch" | "stochastic"
    group_tol: float = 1e-6
    max_global_iters: int = 200
    lbfgs_memory: int = 10
    lbfgs_inner_iters: int = 100
    adadelta_rho: float = 0.95
    adadelta_eps: float = 1e-6
    batch_size: int | None = None
    num_samples: int = 2000
    seed: int = 0
    learn_inducing: bool = False
    ell_method: str = "mc"  # "mc" | "analytic"
    epochs: int = 50
    groups: tuple[str, ...] = GROUP_NAMES

    def validate(self, n_data: int) -> None:
        if self.group_tol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.batch_size is not None and self.batch_size > n_data:
            raise ConfigurationError("batch_size cannot exceed N")
        bad = [g for g in self.groups if g not in GROUP_NAMES]
        if bad:
            raise ConfigurationError(f"unknown parameter groups: {bad}")


@dataclass
class TraceRecord:
    iteration: int
    ent: float
    cross: float
    ell: float
    total: float
    wall_time: float
    group: str


@dataclass
class TrainingTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, **kw) -> None:
        self.records.append(TraceRecord(**kw))

    def objectives(self) -> np.ndarray:
        return np.array([r.total for r in self.records])


class ParameterPacking:
    """Flatten/restore model parameters segment by segment.

    Segment order: raw_weights | means | cov factors | log-theta | phi |
    flattened Z.  All segments are already unconstrained (softmax inputs,
    Cholesky / log-diagonal factors, log hyperparameters), so pack/unpack
    is a reshape and gradients concatenate without extra transforms.
    """

    def __init__(self, model: GpModel, groups: tuple[str, ...] = GROUP_NAMES):
        self.model = model
        self.groups = groups
        post = model.posterior
        K, Q, M = post.K, post.Q, post.M
        D = model.kernels[0].input_dim
        if post.structure == FULL:
            self._tril = np.tril_indices(M)
            cov_size = K * Q * len(self._tril[0])
        else:
            self._tril = None
            cov_size = K * Q * M
        sizes = {
            "raw_weights": K,
            "means": K * Q * M,
            "cov_factors": cov_size,
            "hyper": Q * (D + 1),
            "likelihood": model.likelihood.n_params,
            "inducing": Q * M * D,
        }
        group_segments = {
            "variational": ("raw_weights", "means", "cov_factors"),
            "hyper": ("hyper",),
            "likelihood": ("likelihood",),
            "inducing": ("inducing",),
        }
        self.segments: list[str] = []
        for g in groups:
            self.segments.extend(group_segments[g])
        self.sizes = {s: sizes[s] for s in self.segments}
        self.total_size = sum(self.sizes.values())

    def _segment_value(self, name: str) -> np.ndarray:
        m = self.model
        post = m.posterior
        if name == "raw_weights":
            return post.raw_weights.ravel()
        if name == "means":
            return post.means.ravel()
        if name == "cov_factors":
            if self._tril is not None:
                return post.cov_factors[:, :, self._tril[0], self._tril[1]].ravel()
            return post.cov_factors.ravel()
        if name == "hyper":
            return np.concatenate([k.log_params() for k in m.kernels])
        if name == "likelihood":
            return m.likelihood.phi.ravel()
        if name == "inducing":
            return m.inducing.Z.ravel()
        raise ConfigurationError(f"unknown segment {name}")

    def pack(self) -> np.ndarray:
        return np.concatenate(
            [self._segment_value(s) for s in self.segments]
        ) if self.segments else np.zeros(0)

    def unpack(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.total_size,):
            raise ConfigurationError(
                f"expected a flat vector of size {self.total_size}, got {vec.shape}"
            )
        m = self.model
        post = m.posterior
        i = 0
        for name in self.segments:
            chunk = vec[i : i + self.sizes[name]]
            i += self.sizes[name]
            if name == "raw_weights":
                post.raw_weights = chunk.copy()
            elif name == "means":
                post.means = chunk.reshape(post.means.shape).copy()
            elif name == "cov_factors":
                if self._tril is not None:
                    K, Q, M = post.K, post.Q, post.M
                    out = np.zeros((K, Q, M, M))
                    out[:, :, self._tril[0], self._tril[1]] = chunk.reshape(
                        K, Q, -1
                    )
                    post.cov_factors = out
                else:
                    post.cov_factors = chunk.reshape(post.cov_factors.shape).copy()
            elif name == "hyper":
                D1 = m.kernels[0].n_params
                for j, kern in enumerate(m.kernels):
                    kern.set_log_params(chunk[j * D1 : (j + 1) * D1])
            elif name == "likelihood":
                m.likelihood.phi = chunk.copy()
            elif name == "inducing":
                m.inducing.Z = chunk.reshape(m.inducing.Z.shape).copy()

    def pack_gradient(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        parts = []
        for name in self.segments:
            g = grads[name]
            if name == "cov_factors" and self._tril is not None:
                parts.append(g[:, :, self._tril[0], self._tril[1]].ravel())
            else:
                parts.append(np.asarray(g, dtype=float).ravel())
        return np.concatenate(parts) if parts else np.zeros(0)


def _needs_state_rebuild(groups: tuple[str, ...]) -> bool:
    return any(g in ("hyper", "inducing") for g in groups)


class _Objective:
    """Negated, packed ELBO with caching of the last evaluation."""

    def __init__(self, model, X, Y, config, packing, epoch, batch=None):
        self.model = model
        self.X = X
        self.Y = Y
        self.config = config
        self.packing = packing
        self.epoch = epoch
        self.batch = batch
        self.rebuild = _needs_state_rebuild(packing.groups)
        self.state = None if self.rebuild else model.build_state(X)
        self.last_report: ElboReport | None = None

    def __call__(self, vec: np.ndarray) -> tuple[float, np.ndarray]:
        self.packing.unpack(vec)
        state = self.model.build_state(self.X) if self.rebuild else self.state
        report = elbo(
            self.model.posterior,
            state,
            self.Y,
            self.model.likelihood,
            self.config.num_samples,
            self.config.seed,
            self.batch,
            epoch=self.epoch,
            method=self.config.ell_method,
            compute_hyper="hyper" in self.packing.groups,
            compute_inducing="inducing" in self.packing.groups,
        )
        self.last_report = report
        if not np.isfinite(report.total):
            raise NumericalError(
                f"objective became non-finite (ent={report.ent}, "
                f"cross={report.cross}, ell={report.ell})"
            )
        return -report.total, -self.packing.pack_gradient(report.grads)


def evaluate_objective(model, X, Y, config, epoch: int = 0) -> ElboReport:
    """One full-batch bound evaluation under the run's random streams."""
    state = model.build_state(X)
    return elbo(
        model.posterior,
        state,
        Y,
        model.likelihood,
        config.num_samples,
        config.seed,
        epoch=epoch,
        method=config.ell_method,
        compute_hyper=False,
        compute_inducing=False,
    )


def fit_batch(
    model: GpModel, X: np.ndarray, Y: np.ndarray, config: OptimizerConfig
) -> TrainingTrace:
    """Alternate L-BFGS over parameter groups until the bound stalls.

    Monte Carlo streams are frozen for the whole run (epoch key 0), so
    the trace is monotone and the 1e-6 objective-change rule is an exact
    test rather than a race against sampling noise.
    """
    config.validate(X.shape[0])
    trace = TrainingTrace()
    start = time.perf_counter()
    groups = list(config.groups)
    if not config.learn_inducing or model.inducing.dense_mode:
        groups = [g for g in groups if g != "inducing"]
    if model.likelihood.n_params == 0:
        groups = [g for g in groups if g != "likelihood"]

    prev = evaluate_objective(model, X, Y, config).total
    for it in range(config.max_global_iters):
        for group in groups:
            packing = ParameterPacking(model, (group,))
            if packing.total_size == 0:
                continue
            objective = _Objective(model, X, Y, config, packing, epoch=0)
            x0 = packing.pack()
            res = minimize(
                objective,
                x0,
                jac=True,
                method="L-BFGS-B",
                options={
                    "maxiter": config.lbfgs_inner_iters,
                    "maxcor": config.lbfgs_memory,
                    "ftol": 1e-12,
                    "gtol": 1e-9,
                },
            )
            packing.unpack(res.x)
            report = evaluate_objective(model, X, Y, config)
            trace.append(
                iteration=it,
                ent=report.ent,
                cross=report.cross,
                ell=report.ell,
                total=report.total,
                wall_time=time.perf_counter() - start,
                group=group,
            )
        current = trace.records[-1].total if trace.records else prev
        if abs(current - prev) < config.group_tol:
            break
        prev = current
    return trace


def fit_stochastic(
    model: GpModel, X: np.ndarray, Y: np.ndarray, config: OptimizerConfig
) -> TrainingTrace:
    """AdaDelta over shuffled disjoint minibatches, all groups jointly."""
    config.validate(X.shape[0])
    N = X.shape[0]
    batch_size = config.batch_size or N
    trace = TrainingTrace()
    start = time.perf_counter()

    groups = list(config.groups)
    if not config.learn_inducing or model.inducing.dense_mode:
        groups = [g for g in groups if g != "inducing"]
    if model.likelihood.n_params == 0:
        groups = [g for g in groups if g != "likelihood"]
    packing = ParameterPacking(model, tuple(groups))

    x = packing.pack()
    acc_grad = np.zeros_like(x)
    acc_step = np.zeros_like(x)
    rho, eps = config.adadelta_rho, config.adadelta_eps
    shuffle_rng = np.random.default_rng(config.seed)

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(N)
        for lo in range(0, N, batch_size):
            batch = order[lo : lo + batch_size]
            objective = _Objective(
                model, X, Y, config, packing, epoch=epoch, batch=batch
            )
            _, neg_grad = objective(x)
            g = neg_grad  # descending on the negated bound
            acc_grad = rho * acc_grad + (1.0 - rho) * g * g
            step = -np.sqrt(acc_step + eps) / np.sqrt(acc_grad + eps) * g
            acc_step = rho * acc_step + (1.0 - rho) * step * step
            x = x + step
            if not np.all(np.isfinite(x)):
                raise NumericalError("parameters became non-finite during AdaDelta")
        packing.unpack(x)
        report = evaluate_objective(model, X, Y, config, epoch=epoch)
        trace.append(
            iteration=epoch,
            ent=report.ent,
            cross=report.cross,
            ell=report.ell,
            total=report.total,
            wall_time=time.perf_counter() - start,
            group="all",
        )
    return trace
