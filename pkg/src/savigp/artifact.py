"""Versioned JSON model artifact.

The document stores everything needed to rebuild a trained model:
per-latent kernel parameters (log space), inducing inputs, posterior
structure and raw parameters, the likelihood variant and its phi vector,
standardization statistics, a config echo and the RNG seed.  Keys are
sorted and floats use the shortest round-trip representation, so
save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json

import numpy as np

from .datasets import Standardization
from .exceptions import ConfigurationError, DataError
from .kernels import SeArdKernel
from .likelihoods import (
    GaussianLikelihood,
    GprnLikelihood,
    LogisticLikelihood,
    PoissonLgcpLikelihood,
    SoftmaxLikelihood,
    WarpedGaussianLikelihood,
)
from .model import GpModel
from .posterior import DIAGONAL, FULL, InducingConfig, MixturePosterior

SCHEMA_VERSION = 1


def _likelihood_record(lik) -> dict:
    if isinstance(lik, GaussianLikelihood):
        return {"variant": "gaussian"}
    if isinstance(lik, WarpedGaussianLikelihood):
        return {"variant": "warped", "terms": lik.num_terms}
    if isinstance(lik, LogisticLikelihood):
        return {"variant": "logistic"}
    if isinstance(lik, SoftmaxLikelihood):
        return {"variant": "softmax", "classes": lik.num_classes}
    if isinstance(lik, PoissonLgcpLikelihood):
        return {"variant": "lgcp"}
    if isinstance(lik, GprnLikelihood):
        return {
            "variant": "gprn",
            "outputs": lik.num_outputs,
            "nodes": lik.num_nodes,
            "weight_noise": lik.has_weight_noise,
        }
    raise ConfigurationError(f"cannot serialize likelihood {type(lik).__name__}")


def _likelihood_from_record(rec: dict, phi: np.ndarray):
    variant = rec["variant"]
    if variant == "gaussian":
        lik = GaussianLikelihood()
    elif variant == "warped":
        lik = WarpedGaussianLikelihood(num_terms=int(rec["terms"]))
    elif variant == "logistic":
        lik = LogisticLikelihood()
    elif variant == "softmax":
        lik = SoftmaxLikelihood(int(rec["classes"]))
    elif variant == "lgcp":
        lik = PoissonLgcpLikelihood()
    elif variant == "gprn":
        lik = GprnLikelihood(
            int(rec["outputs"]),
            int(rec["nodes"]),
            log_weight_variance=0.0 if rec.get("weight_noise") else None,
        )
    else:
        raise DataError(f"unknown likelihood variant {variant!r} in artifact")
    if phi.shape != lik.phi.shape:
        raise DataError(
            f"artifact phi has shape {phi.shape}, expected {lik.phi.shape}"
        )
    lik.phi = phi
    return lik


def model_to_document(
    model: GpModel,
    x_stats: Standardization,
    y_stats: Standardization,
    task: str,
    config_echo: dict,
    seed: int,
) -> dict:
    post = model.posterior
    doc = {
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "seed": seed,
        "config": config_echo,
        "kernels": [
            {
                "log_lengthscales": k.log_lengthscales.tolist(),
                "log_signal_variance": k.log_signal_variance,
            }
            for k in model.kernels
        ],
        "inducing": {
            "Z": model.inducing.Z.tolist(),
            "dense_mode": model.inducing.dense_mode,
        },
        "posterior": {
            "structure": post.structure,
            "raw_weights": post.raw_weights.tolist(),
            "means": post.means.tolist(),
            "cov_factors": post.cov_factors.tolist(),
        },
        "likelihood": {
            **_likelihood_record(model.likelihood),
            "phi": model.likelihood.phi.tolist(),
        },
        "standardization": {
            "x_mean": x_stats.mean.tolist(),
            "x_std": x_stats.std.tolist(),
            "y_mean": y_stats.mean.tolist(),
            "y_std": y_stats.std.tolist(),
        },
    }
    return doc


def save_model(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str) -> tuple[GpModel, Standardization, Standardization, str, dict, int]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DataError(
            f"unsupported artifact schema version {doc.get('schema_version')!r}"
        )
    kernels = [
        SeArdKernel(
            np.asarray(k["log_lengthscales"], dtype=float),
            float(k["log_signal_variance"]),
        )
        for k in doc["kernels"]
    ]
    inducing = InducingConfig(
        Z=np.asarray(doc["inducing"]["Z"], dtype=float),
        dense_mode=bool(doc["inducing"]["dense_mode"]),
    )
    prec = doc["posterior"]
    structure = prec["structure"]
    if structure not in (FULL, DIAGONAL):
        raise DataError(f"unknown posterior structure {structure!r}")
    means = np.asarray(prec["means"], dtype=float)
    K, Q, M = means.shape
    post = MixturePosterior(K, Q, M, structure)
    post.raw_weights = np.asarray(prec["raw_weights"], dtype=float)
    post.means = means
    post.cov_factors = np.asarray(prec["cov_factors"], dtype=float)
    if post.cov_factors.shape != (
        (K, Q, M, M) if structure == FULL else (K, Q, M)
    ):
        raise DataError("posterior covariance factors have the wrong shape")

    phi = np.asarray(doc["likelihood"]["phi"], dtype=float)
    likelihood = _likelihood_from_record(doc["likelihood"], phi)

    st = doc["standardization"]
    x_stats = Standardization(
        mean=np.asarray(st["x_mean"], dtype=float),
        std=np.asarray(st["x_std"], dtype=float),
    )
    y_stats = Standardization(
        mean=np.asarray(st["y_mean"], dtype=float),
        std=np.asarray(st["y_std"], dtype=float),
    )
    model = GpModel(kernels, inducing, post, likelihood)
    model.validate()
    return model, x_stats, y_stats, doc["task"], doc.get("config", {}), int(doc["seed"])
