"""Three-class classification with the softmax likelihood.

One latent process per class; the predictive mixes Monte Carlo softmax
probabilities over the latent posterior.
"""

import numpy as np

from savigp import (
    DIAGONAL,
    OptimizerConfig,
    SoftmaxLikelihood,
    evaluate,
    fit_batch,
    init_model,
    kmeans_init,
    predict,
)

rng = np.random.default_rng(3)
centers = np.array([[0.0, 2.0], [-2.0, -1.0], [2.0, -1.0]])
n_per = 50
X = np.vstack([rng.normal(size=(n_per, 2)) * 0.5 + c for c in centers])
Y = np.repeat(np.arange(3.0), n_per)
order = rng.permutation(3 * n_per)
X, Y = X[order], Y[order]

Z = kmeans_init(X, 12, seed=3)
model = init_model(X, Y, SoftmaxLikelihood(3), Z, structure=DIAGONAL)
config = OptimizerConfig(
    max_global_iters=3,
    num_samples=300,
    seed=3,
    groups=("variational", "hyper"),
    lbfgs_inner_iters=40,
)
fit_batch(model, X, Y, config)

state = model.build_state(X)
result = predict(X, model.posterior, state, model.likelihood,
                 num_samples=300, seed=3)
metrics = evaluate(result, Y, "classification")
print(f"training error rate: {metrics.error_rate:.3f}")
for c in range(3):
    probe = centers[c].reshape(1, -1)
    r = predict(probe, model.posterior, state, model.likelihood, 300, seed=3)
    probs = ", ".join(f"{p:.2f}" for p in r.point[0])
    print(f"class probabilities at center {c}: [{probs}]")
