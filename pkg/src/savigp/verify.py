"""Self-contained verification suites runnable from the command line.

Each check returns (name, passed, detail) and pins its own tolerance;
the acceptance test suite runs them at full size, the `savigp verify`
subcommand groups them into gradients / exactgp / variance suites.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .datasets import kmeans_init
from .elbo import elbo, ell_estimate, entropy_bound, kl_bound
from .kernels import SeArdKernel, gram
from .likelihoods import (
    GaussianLikelihood,
    LogisticLikelihood,
    PoissonLgcpLikelihood,
    WarpedGaussianLikelihood,
)
from .model import GpModel, init_model
from .optimizer import OptimizerConfig, ParameterPacking, fit_batch, fit_stochastic
from .oracles import (
    analytic_gaussian_ell,
    exact_gp_regression,
    finite_difference,
    finite_difference4,
    naive_joint_ell_grad,
)
from .posterior import DIAGONAL, FULL, InducingConfig, MixturePosterior, reparam_covariance
from .predict import evaluate, predict

CheckResult = tuple[str, bool, str]


def _random_model(rng, K, Q, M, D, N, structure, dense=False, likelihood=None):
    kernels = [
        SeArdKernel(rng.normal(size=D) * 0.3, rng.normal() * 0.3) for _ in range(Q)
    ]
    X = rng.normal(size=(N, D))
    Z = np.tile(X[None], (Q, 1, 1)) if dense else rng.normal(size=(Q, M, D)) * 1.5
    inducing = InducingConfig(Z=Z, dense_mode=dense)
    post = MixturePosterior(K, Q, M if not dense else N, structure)
    post.raw_weights = rng.normal(size=K) * 0.5
    post.means = rng.normal(size=post.means.shape)
    if structure == FULL:
        M_eff = post.M
        for k in range(K):
            for j in range(Q):
                post.cov_factors[k, j] = np.tril(
                    rng.normal(size=(M_eff, M_eff)) * 0.3
                ) + np.eye(M_eff) * (1.0 + 0.2 * rng.uniform())
    else:
        post.cov_factors = rng.normal(size=post.cov_factors.shape) * 0.4
    likelihood = likelihood or GaussianLikelihood(np.log(0.3))
    return GpModel(kernels, inducing, post, likelihood), X


def check_kl_gradients(n_instances: int = 100, seed: int = 0) -> CheckResult:
    """Criterion 1: analytic KL-part gradients vs central finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_instances):
        structure = FULL if i % 2 == 0 else DIAGONAL
        model, X = _random_model(
            rng,
            K=int(rng.integers(1, 3)),
            Q=int(rng.integers(1, 3)),
            M=int(rng.integers(1, 5)),
            D=int(rng.integers(1, 3)),
            N=4,
            structure=structure,
        )
        packing = ParameterPacking(model, ("variational", "hyper", "inducing"))
        x0 = packing.pack()

        def objective(vec):
            packing.unpack(vec)
            value, _ = kl_bound(model.posterior, model.build_state(X))
            return value

        packing.unpack(x0)
        _, grads = kl_bound(
            model.posterior,
            model.build_state(X),
            compute_hyper=True,
            compute_inducing=True,
        )
        analytic = packing.pack_gradient(grads)
        numeric = finite_difference4(objective, x0)
        packing.unpack(x0)
        # relative per component, floored at 1% of the largest entry so the
        # finite-difference noise floor does not masquerade as error
        scale = np.maximum(np.abs(numeric), 1e-2 * np.max(np.abs(numeric)) + 1e-12)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    passed = worst <= 1e-5
    return ("kl-gradient-suite", passed, f"worst relative error {worst:.2e} (tol 1e-5)")


def check_kl_sign(n_instances: int = 200, seed: int = 1) -> CheckResult:
    """Criterion 2: entropy bound + cross-entropy is never positive."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for i in range(n_instances):
        structure = FULL if i % 2 == 0 else DIAGONAL
        model, X = _random_model(
            rng,
            K=int(rng.integers(1, 3)),
            Q=int(rng.integers(1, 3)),
            M=int(rng.integers(1, 5)),
            D=int(rng.integers(1, 3)),
            N=4,
            structure=structure,
        )
        value, _ = kl_bound(
            model.posterior, model.build_state(X), compute_hyper=False
        )
        worst = max(worst, value)
    passed = worst <= 1e-9
    return ("kl-sign-property", passed, f"max value {worst:.3e} (must be <= 0)")


def check_entropy_bound(n_instances: int = 20, mc_samples: int = 1_000_000,
                        seed: int = 2) -> CheckResult:
    """Criterion 3: K=1 bound below exact entropy; K=2 below MC entropy."""
    rng = np.random.default_rng(seed)
    ok = True
    detail = []
    for i in range(n_instances):
        if i % 2 == 0:
            M = int(rng.integers(1, 4))
            post = MixturePosterior(1, 1, M, FULL)
            L = np.tril(rng.normal(size=(M, M)) * 0.4) + np.eye(M)
            post.cov_factors[0, 0] = L
            post.means[0, 0] = rng.normal(size=M)
            bound, _ = entropy_bound(post)
            S = L @ L.T
            exact = 0.5 * (M * np.log(2 * np.pi * np.e) + np.linalg.slogdet(S)[1])
            if bound > exact + 1e-12:
                ok = False
                detail.append(f"K=1 instance {i}: bound {bound} > exact {exact}")
        else:
            M = 2
            post = MixturePosterior(2, 1, M, DIAGONAL)
            post.raw_weights = rng.normal(size=2)
            post.means = rng.normal(size=(2, 1, M)) * 1.5
            post.cov_factors = rng.normal(size=(2, 1, M)) * 0.5
            bound, _ = entropy_bound(post)
            pi = post.weights()
            comp = rng.choice(2, size=mc_samples, p=pi)
            s = np.exp(post.cov_factors[:, 0, :])
            draws = post.means[comp, 0, :] + rng.standard_normal(
                (mc_samples, M)
            ) * np.sqrt(s[comp])
            log_comp = np.stack(
                [
                    -0.5
                    * np.sum(
                        np.log(2 * np.pi * s[k])
                        + (draws - post.means[k, 0]) ** 2 / s[k],
                        axis=1,
                    )
                    for k in range(2)
                ]
            )
            log_q = logsumexp(log_comp + np.log(pi)[:, None], axis=0)
            est = -float(np.mean(log_q))
            se = float(np.std(log_q, ddof=1) / np.sqrt(mc_samples))
            if bound > est + 3 * se:
                ok = False
                detail.append(f"K=2 instance {i}: bound {bound} > MC {est} +- {se}")
    return (
        "entropy-bound-property",
        ok,
        "; ".join(detail) if detail else f"{n_instances} instances within bounds",
    )


def check_mc_vs_analytic_ell(num_samples: int = 1_000_000, n_chunks: int = 10,
                             seed: int = 3) -> CheckResult:
    """Criterion 4: sampled Gaussian ELL and m/S gradients vs closed form."""
    rng = np.random.default_rng(seed)
    N = 5
    model, X = _random_model(rng, K=1, Q=1, M=N, D=1, N=N, structure=FULL,
                             dense=True)
    post = model.posterior
    state = model.build_state(X)
    Y = rng.normal(size=N)
    s2 = model.likelihood.noise_variance

    exact, exact_gm, exact_gS = analytic_gaussian_ell(
        post.means[0, 0], post.cov(0, 0), s2, Y
    )

    chunk = num_samples // n_chunks
    vals = np.empty(n_chunks)
    gms = np.empty((n_chunks, N))
    gSs = np.empty((n_chunks, N, N))
    for c in range(n_chunks):
        v, grads, _ = ell_estimate(
            post, state, Y, model.likelihood, chunk, seed=seed, epoch=c + 1,
            compute_hyper=False,
        )
        vals[c] = v
        gms[c] = grads["means"][0, 0]
        gSs[c] = grads["covs"][0, 0]

    def within(est_mean, est_se, target):
        return np.all(np.abs(est_mean - target) <= 3 * est_se + 1e-12)

    ok = True
    msgs = []
    v_mean, v_se = vals.mean(), vals.std(ddof=1) / np.sqrt(n_chunks)
    if not within(v_mean, v_se, exact):
        ok = False
        msgs.append(f"value {v_mean:.5f} vs {exact:.5f} (se {v_se:.2e})")
    gm_mean = gms.mean(axis=0)
    gm_se = gms.std(axis=0, ddof=1) / np.sqrt(n_chunks)
    if not within(gm_mean, gm_se + 1e-6, exact_gm):
        ok = False
        msgs.append("mean-gradient outside 3 MC standard errors")
    gS_mean = gSs.mean(axis=0)
    gS_se = gSs.std(axis=0, ddof=1) / np.sqrt(n_chunks)
    if not within(gS_mean, gS_se + 1e-6, exact_gS):
        ok = False
        msgs.append("covariance-gradient outside 3 MC standard errors")
    return (
        "mc-vs-analytic-ell",
        ok,
        "; ".join(msgs) if msgs else
        f"value {v_mean:.6f} vs exact {exact:.6f} within 3 se",
    )


def _fit_dense_gaussian(seed: int, method: str, num_samples: int,
                        max_iters: int = 40, inner_iters: int = 400):
    rng = np.random.default_rng(seed)
    N = 50
    X = np.sort(rng.uniform(-3, 3, size=(N, 1)), axis=0)
    kern = SeArdKernel(np.log([0.7]), np.log(1.0))
    K = gram(kern, X, X)
    f = np.linalg.cholesky(K + 1e-10 * np.eye(N)) @ rng.standard_normal(N)
    noise = 0.1
    Y = f + np.sqrt(noise) * rng.standard_normal(N)
    model = init_model(X, Y, GaussianLikelihood(np.log(noise)), X, dense_mode=True)
    model.kernels[0] = kern.copy()
    model.likelihood.phi[0] = np.log(noise)
    config = OptimizerConfig(
        max_global_iters=max_iters,
        num_samples=num_samples,
        seed=seed,
        ell_method=method,
        groups=("variational",),
        lbfgs_inner_iters=inner_iters,
    )
    fit_batch(model, X, Y, config)
    oracle = exact_gp_regression(X, Y, kern, noise)
    m_err = np.max(np.abs(model.posterior.means[0, 0] - oracle.mean)) / np.max(
        np.abs(oracle.mean)
    )
    S_err = np.max(np.abs(model.posterior.cov(0, 0) - oracle.cov)) / np.max(
        np.abs(oracle.cov)
    )
    return float(m_err), float(S_err)


def check_exact_gp_recovery(seed: int = 4) -> CheckResult:
    """Criterion 5: dense FG + Gaussian converges to the closed-form posterior."""
    m_err, S_err = _fit_dense_gaussian(seed, "analytic", 8)
    ok = m_err < 1e-3 and S_err < 1e-3
    msgs = [f"analytic mode rel errors mean {m_err:.2e} cov {S_err:.2e} (tol 1e-3)"]
    # one long inner run keeps the sampled stage inside the time budget
    m_err2, S_err2 = _fit_dense_gaussian(seed, "mc", 10_000, max_iters=1,
                                         inner_iters=1500)
    ok = ok and m_err2 < 1e-2 and S_err2 < 1e-2
    msgs.append(f"mc mode rel errors mean {m_err2:.2e} cov {S_err2:.2e} (tol 1e-2)")
    return ("exact-gp-recovery", ok, "; ".join(msgs))


def check_dense_hyper_gradients(seed: int = 5) -> CheckResult:
    """Criterion 6: dense-mode sampled hyper-gradients are exact zeros and
    the analytic cross-entropy hyper-gradient matches finite differences."""
    rng = np.random.default_rng(seed)
    model, X = _random_model(rng, K=1, Q=1, M=6, D=2, N=6, structure=FULL,
                             dense=True)
    state = model.build_state(X)
    Y = rng.normal(size=6)
    _, ell_grads, _ = ell_estimate(
        model.posterior, state, Y, model.likelihood, 64, seed=seed,
        compute_hyper=True,
    )
    zeros_ok = not ell_grads["hyper"].any()

    packing = ParameterPacking(model, ("hyper",))
    x0 = packing.pack()

    def objective(vec):
        packing.unpack(vec)
        model.inducing.Z = np.tile(X[None], (1, 1, 1))
        report = elbo(
            model.posterior, model.build_state(X), Y, model.likelihood, 64,
            seed=seed, compute_hyper=True,
        )
        return report.total

    packing.unpack(x0)
    report = elbo(
        model.posterior, model.build_state(X), Y, model.likelihood, 64,
        seed=seed, compute_hyper=True,
    )
    analytic = packing.pack_gradient(report.grads)
    numeric = finite_difference4(objective, x0)
    packing.unpack(x0)
    scale = np.maximum(np.abs(numeric), 1e-2 * np.max(np.abs(numeric)) + 1e-12)
    rel = float(np.max(np.abs(analytic - numeric) / scale))
    ok = zeros_ok and rel <= 1e-5
    return (
        "dense-hyperparameter-gradients",
        ok,
        f"sampled part exactly zero: {zeros_ok}; analytic vs FD rel err {rel:.2e}",
    )


def check_control_variate_reduction(reps: int = 50, num_samples: int = 200,
                                    seed: int = 6) -> CheckResult:
    """Criterion 7: corrected mean-gradient variance below uncorrected."""
    rng = np.random.default_rng(seed)
    model, X = _random_model(rng, K=1, Q=1, M=3, D=1, N=1, structure=FULL,
                             likelihood=LogisticLikelihood())
    state = model.build_state(X)
    Y = np.array([1.0])
    corrected = np.empty((reps, 3))
    plain = np.empty((reps, 3))
    for r in range(reps):
        _, g1, _ = ell_estimate(
            model.posterior, state, Y, model.likelihood, num_samples,
            seed=r, epoch=1, control_variates=True, compute_hyper=False,
        )
        _, g0, _ = ell_estimate(
            model.posterior, state, Y, model.likelihood, num_samples,
            seed=r, epoch=1, control_variates=False, compute_hyper=False,
        )
        corrected[r] = g1["means"][0, 0]
        plain[r] = g0["means"][0, 0]
    frac = float(np.mean(np.var(corrected, axis=0) < np.var(plain, axis=0)))
    ok = frac >= 0.9
    return (
        "control-variate-reduction",
        ok,
        f"{frac:.0%} of components reduced (need >= 90%)",
    )


def check_variance_ordering(trials: int = 50, num_samples: int = 100,
                            seed: int = 7) -> CheckResult:
    """Criterion 8: per-datapoint estimator variance below joint-sample."""
    rng = np.random.default_rng(seed)
    N = 5
    model, X = _random_model(rng, K=1, Q=1, M=N, D=1, N=N, structure=DIAGONAL,
                             dense=True, likelihood=LogisticLikelihood())
    post = model.posterior
    post.cov_factors[:] = rng.normal(size=post.cov_factors.shape) * 0.2
    state = model.build_state(X)
    Y = (rng.uniform(size=N) > 0.5).astype(float)
    joint = np.empty((trials, N))
    marg = np.empty((trials, N))
    for t in range(trials):
        g = naive_joint_ell_grad(
            post, state, Y, model.likelihood, num_samples,
            np.random.default_rng(9000 + t), control_variates=False,
        )
        joint[t] = g["means"][0]
        _, gm, _ = ell_estimate(
            post, state, Y, model.likelihood, num_samples, seed=t, epoch=4,
            control_variates=False, compute_hyper=False,
        )
        marg[t] = gm["means"][0, 0]
    frac = float(np.mean(np.var(marg, axis=0) <= np.var(joint, axis=0)))
    ok = frac >= 0.9
    return (
        "rao-blackwell-variance-ordering",
        ok,
        f"{frac:.0%} of components ordered (need >= 90%)",
    )


def check_minibatch_identity(seed: int = 8) -> CheckResult:
    """Criterion 9: minibatch gradients average to the full-batch gradient."""
    rng = np.random.default_rng(seed)
    model, X = _random_model(rng, K=2, Q=1, M=3, D=2, N=12, structure=DIAGONAL)
    state = model.build_state(X)
    Y = rng.normal(size=12)
    full = elbo(
        model.posterior, state, Y, model.likelihood, 32, seed=seed,
        compute_hyper=True,
    )
    batches = [np.arange(0, 4), np.arange(4, 8), np.arange(8, 12)]
    partial = [
        elbo(model.posterior, state, Y, model.likelihood, 32, seed=seed,
             batch=b, compute_hyper=True)
        for b in batches
    ]
    worst = 0.0
    for key in full.grads:
        avg = sum(p.grads[key] for p in partial) / len(partial)
        if avg.size:
            worst = max(worst, float(np.max(np.abs(avg - full.grads[key]))))
    ok = worst <= 1e-10
    return ("minibatch-identity", ok, f"max abs deviation {worst:.2e} (tol 1e-10)")


def check_reparam_representation(n_instances: int = 100, seed: int = 9) -> CheckResult:
    """Criterion 10: optimal-form covariance is PSD, exact at Lambda = 0,
    and carries Q*N free parameters."""
    rng = np.random.default_rng(seed)
    ok = True
    msgs = []
    model, X = _random_model(rng, K=1, Q=1, M=3, D=1, N=6, structure=FULL)
    state = model.build_state(X)
    for _ in range(n_instances):
        lam = rng.uniform(0, 5, size=6)
        S = reparam_covariance(state, lam)
        if np.min(np.linalg.eigvalsh(0.5 * (S + S.T))) <= 0:
            ok = False
            msgs.append("non-PSD output")
            break
    S0 = reparam_covariance(state, np.zeros(6))
    Kzz = gram(state.kernels[0], state.Z[0], state.Z[0])
    err0 = float(np.max(np.abs(S0 - Kzz)))
    if err0 > 1e-10:
        ok = False
        msgs.append(f"Lambda=0 deviation {err0:.2e}")
    post = MixturePosterior(1, 2, 4, FULL)
    post.activate_lambda_reparam(np.zeros((2, 7)))
    if post.covariance_parameter_count() != 2 * 7:
        ok = False
        msgs.append("parameter count is not Q*N")
    return (
        "reparam-representation",
        ok,
        "; ".join(msgs) if msgs else
        f"{n_instances} PSD draws, Lambda=0 max dev {err0:.1e}, count = Q*N",
    )


def _two_blobs(rng, n_per: int = 100):
    X0 = rng.normal(size=(n_per, 2)) * 0.4 + np.array([-2.0, 0.0])
    X1 = rng.normal(size=(n_per, 2)) * 0.4 + np.array([2.0, 0.0])
    X = np.vstack([X0, X1])
    Y = np.concatenate([np.zeros(n_per), np.ones(n_per)])
    order = rng.permutation(2 * n_per)
    return X[order], Y[order]


def check_end_to_end_smoke(seed: int = 10) -> CheckResult:
    """Criterion 11: logistic blobs via AdaDelta, warped Gaussian slice,
    and a monotone frozen-seed LGCP batch objective."""
    msgs = []
    ok = True

    # logistic blobs, stochastic training
    rng = np.random.default_rng(seed)
    X, Y = _two_blobs(rng)
    X_test, Y_test = _two_blobs(rng, 50)
    Z = kmeans_init(X, 10, seed=seed)
    model = init_model(X, Y, LogisticLikelihood(), Z, structure=DIAGONAL)
    config = OptimizerConfig(
        mode="stochastic", epochs=50, batch_size=20, num_samples=200, seed=seed
    )
    fit_stochastic(model, X, Y, config)
    state = model.build_state(X)
    result = predict(X_test, model.posterior, state, model.likelihood,
                     200, seed=seed)
    metrics = evaluate(result, Y_test, "classification")
    if metrics.error_rate > 0.05:
        ok = False
    msgs.append(f"blob error rate {metrics.error_rate:.3f} (need <= 0.05)")

    # warped likelihood with zero amplitudes equals the Gaussian model
    rng = np.random.default_rng(seed + 1)
    N = 40
    Xr = np.sort(rng.uniform(-2, 2, size=(N, 1)), axis=0)
    Yr = np.sin(2 * Xr[:, 0]) + 0.2 * rng.standard_normal(N)
    model_g = init_model(Xr, Yr, GaussianLikelihood(np.log(0.1)), Xr,
                         dense_mode=True)
    cfg = OptimizerConfig(
        max_global_iters=10, num_samples=16, seed=seed, ell_method="analytic",
        groups=("variational", "hyper", "likelihood"), lbfgs_inner_iters=100,
    )
    fit_batch(model_g, Xr, Yr, cfg)
    state_g = model_g.build_state(Xr)
    x_test = np.linspace(-2, 2, 30).reshape(-1, 1)
    y_test = np.sin(2 * x_test[:, 0])
    res_g = predict(x_test, model_g.posterior, state_g, model_g.likelihood,
                    3000, seed=seed, y_star=y_test.reshape(-1, 1))
    warped = WarpedGaussianLikelihood(
        log_noise_variance=model_g.likelihood.phi[0],
        log_a=np.full(3, -np.inf),
        log_b=np.zeros(3),
        c=np.zeros(3),
    )
    res_w = predict(x_test, model_g.posterior, state_g, warped,
                    3000, seed=seed, y_star=y_test.reshape(-1, 1))
    nlpd_gap = abs(
        -np.mean(res_g.log_density) - -np.mean(res_w.log_density)
    )
    if nlpd_gap > 1e-3:
        ok = False
    msgs.append(f"warped a=0 NLPD gap {nlpd_gap:.2e} (need <= 1e-3)")

    # LGCP on a piecewise-constant rate series: frozen-seed batch training
    rng = np.random.default_rng(seed + 2)
    Nc = 60
    t = np.linspace(0, 6, Nc).reshape(-1, 1)
    rate = np.where(t[:, 0] < 3, 2.0, 6.0)
    counts = rng.poisson(rate).astype(float)
    Zc = kmeans_init(t, 12, seed=seed)
    model_c = init_model(t, counts, PoissonLgcpLikelihood(), Zc,
                         structure=FULL)
    cfg_c = OptimizerConfig(
        max_global_iters=4, num_samples=300, seed=seed,
        groups=("variational", "likelihood"), lbfgs_inner_iters=25,
    )
    trace = fit_batch(model_c, t, counts, cfg_c)
    objs = trace.objectives()
    monotone = bool(np.all(np.diff(objs) >= -1e-8))
    if not monotone:
        ok = False
    msgs.append(f"lgcp monotone objective: {monotone}")
    return ("end-to-end-smoke", ok, "; ".join(msgs))


def check_small_scale_replication(seed: int = 11) -> CheckResult:
    """Criterion 12: regression protocol at N_train=300, D=13; the dense
    full-Gaussian run must sit within 0.1 NLPD of the exact-GP oracle."""
    rng = np.random.default_rng(seed)
    N_train, N_test, D = 300, 206, 13
    X_all = rng.normal(size=(N_train + N_test, D))
    true_kern = SeArdKernel(np.log(np.full(D, 2.0)), np.log(1.0))
    K = gram(true_kern, X_all, X_all)
    f = np.linalg.cholesky(K + 1e-8 * np.eye(N_train + N_test)) @ \
        rng.standard_normal(N_train + N_test)
    noise = 0.05
    Y_all = f + np.sqrt(noise) * rng.standard_normal(N_train + N_test)
    X, Y = X_all[:N_train], Y_all[:N_train]
    X_test, Y_test = X_all[N_train:], Y_all[N_train:]

    msgs = []
    ok = True

    # dense full-Gaussian run with hyperparameter learning
    model = init_model(X, Y, GaussianLikelihood(np.log(0.1)), X, dense_mode=True)
    config = OptimizerConfig(
        max_global_iters=8, num_samples=8, seed=seed, ell_method="analytic",
        groups=("variational", "hyper", "likelihood"), lbfgs_inner_iters=60,
    )
    fit_batch(model, X, Y, config)
    state = model.build_state(X)
    res = predict(X_test, model.posterior, state, model.likelihood, 1000,
                  seed=seed, y_star=Y_test.reshape(-1, 1))
    nlpd_dense = float(-np.mean(res.log_density))
    oracle = exact_gp_regression(
        X, Y, model.kernels[0], model.likelihood.noise_variance
    )
    nlpd_oracle = oracle.nlpd(X_test, Y_test)
    gap = abs(nlpd_dense - nlpd_oracle)
    if gap > 0.1:
        ok = False
    msgs.append(
        f"dense NLPD {nlpd_dense:.4f} vs oracle {nlpd_oracle:.4f} "
        f"(gap {gap:.4f}, tol 0.1)"
    )

    # sparse companion run at a 0.1 sparsity factor
    M = 30
    Z = kmeans_init(X, M, seed=seed)
    model_s = init_model(X, Y, GaussianLikelihood(np.log(0.1)), Z)
    config_s = OptimizerConfig(
        max_global_iters=6, num_samples=8, seed=seed, ell_method="analytic",
        groups=("variational", "hyper", "likelihood"), lbfgs_inner_iters=60,
    )
    fit_batch(model_s, X, Y, config_s)
    state_s = model_s.build_state(X)
    res_s = predict(X_test, model_s.posterior, state_s, model_s.likelihood,
                    1000, seed=seed, y_star=Y_test.reshape(-1, 1))
    nlpd_sparse = float(-np.mean(res_s.log_density))
    if not np.isfinite(nlpd_sparse):
        ok = False
    msgs.append(f"sparse (SF=0.1) NLPD {nlpd_sparse:.4f}")
    return ("small-scale-replication", ok, "; ".join(msgs))


SUITES = {
    "gradients": (
        check_kl_gradients,
        check_dense_hyper_gradients,
        check_minibatch_identity,
    ),
    "exactgp": (
        check_mc_vs_analytic_ell,
        check_exact_gp_recovery,
        check_reparam_representation,
    ),
    "variance": (
        check_kl_sign,
        check_entropy_bound,
        check_control_variate_reduction,
        check_variance_ordering,
    ),
}


def run_suite(name: str = "all") -> list[CheckResult]:
    if name == "all":
        checks = [c for suite in SUITES.values() for c in suite]
    elif name in SUITES:
        checks = list(SUITES[name])
    else:
        raise ValueError(f"unknown suite {name!r}; choose from "
                         f"{sorted(SUITES) + ['all']}")
    return [check() for check in checks]
