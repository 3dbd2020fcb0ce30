"""Binary classification with the logistic likelihood and AdaDelta.

A black-box likelihood in action: the trainer never sees logistic
gradients with respect to the latent values, only pointwise evaluations
of log p(y | f).  Stochastic optimization runs AdaDelta over shuffled
minibatches with all parameter groups updated jointly.
"""

import numpy as np

from savigp import (
    DIAGONAL,
    LogisticLikelihood,
    OptimizerConfig,
    evaluate,
    fit_stochastic,
    init_model,
    kmeans_init,
    predict,
)


def two_moons(rng, n):
    angles = rng.uniform(0, np.pi, size=n)
    upper = np.column_stack([np.cos(angles), np.sin(angles)])
    lower = np.column_stack([1 - np.cos(angles), 0.5 - np.sin(angles)])
    X = np.vstack([upper, lower]) + rng.normal(size=(2 * n, 2)) * 0.08
    Y = np.concatenate([np.zeros(n), np.ones(n)])
    order = rng.permutation(2 * n)
    return X[order], Y[order]


rng = np.random.default_rng(2)
X, Y = two_moons(rng, 120)
X_test, Y_test = two_moons(rng, 60)

Z = kmeans_init(X, 20, seed=2)
model = init_model(X, Y, LogisticLikelihood(), Z, structure=DIAGONAL)
config = OptimizerConfig(
    mode="stochastic",
    epochs=40,
    batch_size=24,
    num_samples=300,
    seed=2,
)
trace = fit_stochastic(model, X, Y, config)
print(f"bound after epoch 1:  {trace.records[0].total:9.2f}")
print(f"bound after epoch 40: {trace.records[-1].total:9.2f}")

state = model.build_state(X)
result = predict(X_test, model.posterior, state, model.likelihood,
                 num_samples=500, seed=2)
metrics = evaluate(result, Y_test, "classification")
print(f"held-out error rate: {metrics.error_rate:.3f}")
