"""Command-line surface: train, predict, evaluate, verify.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import verify as verify_mod
from .artifact import load_model, model_to_document, save_model
from .datasets import kmeans_init, load_csv, task_for_likelihood
from .exceptions import ConfigurationError, DataError, NumericalError
from .likelihoods import LIKELIHOOD_NAMES, make_likelihood
from .model import init_model
from .optimizer import OptimizerConfig, fit_batch, fit_stochastic
from .posterior import DIAGONAL, FULL
from .predict import PredictionResult, evaluate
from .predict import predict as run_predict

LOG_2PI = np.log(2.0 * np.pi)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="savigp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a model and write a JSON artifact")
    train.add_argument("--x", required=True, help="feature CSV")
    train.add_argument("--y", required=True, help="target CSV")
    train.add_argument(
        "--likelihood", required=True, choices=sorted(LIKELIHOOD_NAMES)
    )
    group = train.add_mutually_exclusive_group(required=True)
    group.add_argument("--num-inducing", type=int)
    group.add_argument("--sparsity-factor", type=float)
    group.add_argument("--dense", action="store_true")
    train.add_argument("--posterior", default="fg",
                       help="fg | diag | diag:K (mixture of K diagonals)")
    train.add_argument("--optimizer", default="batch",
                       choices=("batch", "adadelta"))
    train.add_argument("--samples", type=int, default=2000)
    train.add_argument("--batch-size", type=int, default=None)
    train.add_argument("--epochs", type=int, default=50)
    train.add_argument("--max-iters", type=int, default=200)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--learn-inducing", action="store_true")
    train.add_argument("--analytic-ell", action="store_true",
                       help="closed-form Gaussian expected log likelihood")
    train.add_argument("--inducing-from-data", action="store_true",
                       help="place inducing inputs on training rows instead of k-means")
    train.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="variant config, e.g. softmax.classes=3, gprn.nodes=2")
    train.add_argument("--out", required=True, help="output model JSON path")

    pred = sub.add_parser("predict", help="predict with a trained artifact")
    pred.add_argument("--model", required=True)
    pred.add_argument("--x", required=True)
    pred.add_argument("--y", default=None, help="observed targets (for densities)")
    pred.add_argument("--out", required=True, help="output CSV path")
    pred.add_argument("--pred-samples", type=int, default=1000)

    ev = sub.add_parser("evaluate", help="metrics from a prediction CSV")
    ev.add_argument("--preds", required=True)
    ev.add_argument("--y", required=True)
    ev.add_argument("--task", required=True,
                    choices=("regression", "classification"))

    ver = sub.add_parser("verify", help="run the oracle acceptance suites")
    ver.add_argument("--suite", default="all",
                     choices=("gradients", "exactgp", "variance", "all"))
    return parser


def _parse_config(items: list[str]) -> dict:
    config = {}
    for item in items:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def _parse_posterior(spec: str) -> tuple[str, int]:
    if spec == "fg":
        return FULL, 1
    if spec == "diag":
        return DIAGONAL, 1
    if spec.startswith("diag:"):
        return DIAGONAL, int(spec.split(":", 1)[1])
    raise ConfigurationError(f"unknown posterior {spec!r}; use fg or diag[:K]")


def _cmd_train(args) -> int:
    task = task_for_likelihood(args.likelihood)
    ds = load_csv(args.x, args.y, task)
    config_keys = _parse_config(args.set)
    if args.likelihood == "softmax" and "softmax.classes" not in config_keys:
        config_keys["softmax.classes"] = int(np.max(ds.Y)) + 1
    if args.likelihood == "gprn":
        config_keys.setdefault("gprn.outputs", ds.Y.shape[1])
        config_keys.setdefault("gprn.nodes", 1)
    likelihood = make_likelihood(args.likelihood, config_keys)

    N = ds.num_data
    dense = bool(args.dense)
    if args.sparsity_factor is not None:
        if not 0 < args.sparsity_factor <= 1:
            raise ConfigurationError("sparsity factor must be in (0, 1]")
        if args.sparsity_factor == 1.0:
            dense = True
        else:
            M = max(1, int(round(args.sparsity_factor * N)))
    if dense:
        Z = ds.X
    elif args.num_inducing is not None:
        M = args.num_inducing
        if M > N:
            raise ConfigurationError("cannot use more inducing points than data")
        Z = _initial_inducing(ds.X, M, args)
    else:
        Z = _initial_inducing(ds.X, M, args)
    if dense and args.learn_inducing:
        raise ConfigurationError("dense mode pins the inducing inputs to the data")

    structure, K = _parse_posterior(args.posterior)
    model = init_model(
        ds.X, ds.Y, likelihood, Z,
        num_components=K, structure=structure, dense_mode=dense,
    )
    opt = OptimizerConfig(
        mode="batch" if args.optimizer == "batch" else "stochastic",
        max_global_iters=args.max_iters,
        batch_size=args.batch_size,
        num_samples=args.samples,
        seed=args.seed,
        learn_inducing=args.learn_inducing,
        ell_method="analytic" if args.analytic_ell else "mc",
        epochs=args.epochs,
    )
    if opt.ell_method == "analytic" and args.likelihood != "gaussian":
        raise ConfigurationError("--analytic-ell applies to the Gaussian likelihood")
    Y_flat = ds.Y[:, 0] if ds.Y.shape[1] == 1 else ds.Y
    if args.optimizer == "batch":
        trace = fit_batch(model, ds.X, Y_flat, opt)
    else:
        trace = fit_stochastic(model, ds.X, Y_flat, opt)

    doc = model_to_document(
        model, ds.x_stats, ds.y_stats, task,
        config_echo={
            "likelihood": args.likelihood,
            "posterior": args.posterior,
            "optimizer": args.optimizer,
            "samples": args.samples,
            "learn_inducing": args.learn_inducing,
            **{k: str(v) for k, v in config_keys.items()},
        },
        seed=args.seed,
    )
    save_model(args.out, doc)
    trace_path = f"{args.out}.trace.csv"
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "ent", "cross", "ell", "total", "wall_time", "group"]
        )
        for r in trace.records:
            writer.writerow(
                [r.iteration, r.ent, r.cross, r.ell, r.total, r.wall_time, r.group]
            )
    final = trace.records[-1].total if trace.records else float("nan")
    print(f"trained {args.likelihood} model: bound {final:.6f}; "
          f"saved {args.out} and {trace_path}")
    return 0


def _initial_inducing(X: np.ndarray, M: int, args) -> np.ndarray:
    if args.inducing_from_data:
        order = np.random.default_rng(args.seed).permutation(X.shape[0])
        return X[order[:M]].copy()
    return kmeans_init(X, M, seed=args.seed)


def _cmd_predict(args) -> int:
    model, x_stats, y_stats, task, _, seed = load_model(args.model)
    X_raw = _read_csv_matrix(args.x)
    X = x_stats.apply(X_raw)
    y_star = None
    if args.y is not None:
        y_raw = _read_csv_matrix(args.y)
        y_star = y_stats.apply(y_raw) if task == "regression" else y_raw
    state = model.build_state(X) if model.inducing.dense_mode is False else None
    if state is None:
        # Dense artifacts keep Z = training inputs; rebuild against those.
        from .posterior import build_kernel_state

        state = build_kernel_state(model.kernels, model.inducing, model.inducing.Z[0])
        state.dense_mode = True
    result = run_predict(
        X, model.posterior, state, model.likelihood,
        num_samples=args.pred_samples, seed=seed, y_star=y_star,
    )
    _write_predictions(args.out, result, model, task, y_stats, y_star is not None)
    print(f"wrote predictions for {X.shape[0]} points to {args.out}")
    return 0


def _read_csv_matrix(path: str) -> np.ndarray:
    from .datasets import _read_numeric_csv

    return _read_numeric_csv(path)


def _write_predictions(path, result: PredictionResult, model, task, y_stats,
                       have_targets) -> None:
    discrete = model.likelihood.discrete
    with open(path, "w", newline="") as fh:
        if not discrete:
            # back to raw units
            point = y_stats.invert(result.point)
            var = result.predictive_var * y_stats.std**2
            logdens = None
            if result.log_density is not None:
                logdens = result.log_density - np.sum(np.log(y_stats.std))
            fh.write(
                "# train_var: "
                + ",".join(repr(float(v)) for v in y_stats.std**2)
                + "\n"
            )
            writer = csv.writer(fh)
            P = point.shape[1]
            header = (
                ["index"]
                + [f"pred_{p}" for p in range(P)]
                + [f"var_{p}" for p in range(P)]
            )
            if logdens is not None:
                header.append("log_density")
            writer.writerow(header)
            for i in range(point.shape[0]):
                row = [i, *point[i], *var[i]]
                if logdens is not None:
                    row.append(logdens[i])
                writer.writerow(row)
        else:
            writer = csv.writer(fh)
            C = result.point.shape[1]
            header = ["index", "pred_class"] + [f"prob_{c}" for c in range(C)]
            if result.log_density is not None:
                header.append("log_density")
            writer.writerow(header)
            for i in range(result.point.shape[0]):
                row = [i, int(result.predicted_class[i]), *result.point[i]]
                if result.log_density is not None:
                    row.append(result.log_density[i])
                writer.writerow(row)


def _cmd_evaluate(args) -> int:
    train_var = None
    with open(args.preds) as fh:
        first = fh.readline()
        if first.startswith("# train_var:"):
            train_var = np.array(
                [float(v) for v in first.split(":", 1)[1].split(",")]
            )
            header = fh.readline()
        else:
            header = first
        names = [h.strip() for h in header.strip().split(",")]
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = {name: np.array([float(r[i]) for r in rows])
            for i, name in enumerate(names)}
    targets = _read_csv_matrix(args.y)
    if targets.shape[0] != len(rows):
        raise DataError(
            f"prediction rows ({len(rows)}) and target rows "
            f"({targets.shape[0]}) differ"
        )

    logdens = data.get("log_density")
    if args.task == "regression":
        pred_cols = sorted(n for n in names if n.startswith("pred_"))
        point = np.column_stack([data[n] for n in pred_cols])
        result = PredictionResult(
            latent_mean=np.zeros((len(rows), 1, 1)),
            latent_var=np.ones((len(rows), 1, 1)),
            point=point,
            log_density=logdens,
        )
        metrics = evaluate(result, targets, "regression", train_variance=train_var)
    else:
        prob_cols = sorted(n for n in names if n.startswith("prob_"))
        probs = np.column_stack([data[n] for n in prob_cols])
        result = PredictionResult(
            latent_mean=np.zeros((len(rows), 1, 1)),
            latent_var=np.ones((len(rows), 1, 1)),
            point=probs,
            predicted_class=data["pred_class"].astype(int),
            log_density=logdens,
        )
        metrics = evaluate(result, targets, "classification")
    width = max(len(k) for k in metrics.as_dict())
    for key, value in metrics.as_dict().items():
        print(f"{key.rjust(width)}  {value:.6f}")
    return 0


def _cmd_verify(args) -> int:
    results = verify_mod.run_suite(args.suite)
    all_ok = True
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        print(f"[{status}] {name}: {detail}")
        all_ok &= passed
    return 0 if all_ok else 3


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "predict":
            return _cmd_predict(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "verify":
            return _cmd_verify(args)
        parser.error(f"unknown command {args.command!r}")
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 1


if __name__ == "__main__":
    sys.exit(main())
