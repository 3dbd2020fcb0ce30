"""CSV ingestion, k-means initialization, artifact round-trips and the CLI."""

import json
import os

import numpy as np
import pytest

from savigp.artifact import load_model, model_to_document, save_model
from savigp.cli import main
from savigp.datasets import Standardization, kmeans_init, load_csv
from savigp.exceptions import ConfigurationError, DataError
from savigp.elbo import elbo
from savigp.likelihoods import GaussianLikelihood
from savigp.model import init_model


@pytest.fixture
def tmp_csv(tmp_path):
    def write(name, array, header=None):
        path = tmp_path / name
        with open(path, "w") as fh:
            if header:
                fh.write(header + "\n")
            for row in np.atleast_2d(array):
                fh.write(",".join(str(v) for v in np.atleast_1d(row)) + "\n")
        return str(path)

    return write


class TestLoadCsv:
    def test_zero_variance_guard(self, tmp_csv):
        x = tmp_csv("x.csv", np.zeros((3, 2)))
        y = tmp_csv("y.csv", np.zeros((3, 1)))
        ds = load_csv(x, y, "regression")
        np.testing.assert_array_equal(ds.X, 0.0)
        np.testing.assert_array_equal(ds.x_stats.std, 1.0)

    def test_header_skipped(self, tmp_csv):
        x = tmp_csv("x.csv", np.array([[1.0], [2.0]]), header="a")
        y = tmp_csv("y.csv", np.array([[0.0], [1.0]]), header="b")
        ds = load_csv(x, y, "regression")
        assert ds.num_data == 2

    def test_nan_cell_reports_location(self, tmp_csv, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0,NaN\n")
        y = tmp_csv("y.csv", np.zeros((2, 1)))
        with pytest.raises(DataError, match="line 2"):
            load_csv(str(path), y, "regression")

    def test_ragged_row(self, tmp_path, tmp_csv):
        path = tmp_path / "ragged.csv"
        path.write_text("1.0,2.0\n3.0\n")
        y = tmp_csv("y.csv", np.zeros((2, 1)))
        with pytest.raises(DataError, match="line 2"):
            load_csv(str(path), y, "regression")

    def test_class_labels_validated(self, tmp_csv):
        x = tmp_csv("x.csv", np.zeros((2, 1)))
        y = tmp_csv("y.csv", np.array([[0.5], [1.0]]))
        with pytest.raises(DataError):
            load_csv(x, y, "classification")

    def test_counts_validated(self, tmp_csv):
        x = tmp_csv("x.csv", np.zeros((2, 1)))
        y = tmp_csv("y.csv", np.array([[-1.0], [2.0]]))
        with pytest.raises(DataError):
            load_csv(x, y, "counts")

    def test_standardization_round_trip(self, tmp_csv):
        rng = np.random.default_rng(0)
        Y = rng.normal(size=(20, 1)) * 3 + 5
        x = tmp_csv("x.csv", rng.normal(size=(20, 2)))
        y = tmp_csv("y.csv", Y)
        ds = load_csv(x, y, "regression")
        np.testing.assert_allclose(ds.y_stats.invert(ds.Y), Y, atol=1e-12)

    def test_warped_targets_not_standardized(self, tmp_csv):
        rng = np.random.default_rng(1)
        Y = rng.normal(size=(10, 1)) * 4 + 7
        x = tmp_csv("x.csv", rng.normal(size=(10, 1)))
        y = tmp_csv("y.csv", Y)
        ds = load_csv(x, y, "warped-regression")
        np.testing.assert_array_equal(ds.Y, Y)


class TestKmeansInit:
    def test_full_assignment_is_permutation(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(6, 2))
        centers = kmeans_init(X, 6, seed=0)
        # every row appears exactly once
        matched = set()
        for c in centers:
            idx = int(np.argmin(np.sum((X - c) ** 2, axis=1)))
            assert np.allclose(X[idx], c)
            matched.add(idx)
        assert len(matched) == 6

    def test_two_separated_blobs(self):
        rng = np.random.default_rng(3)
        blob_a = rng.normal(size=(30, 2)) * 0.1 + np.array([-10.0, 0.0])
        blob_b = rng.normal(size=(30, 2)) * 0.1 + np.array([10.0, 0.0])
        X = np.vstack([blob_a, blob_b])
        centers = kmeans_init(X, 2, seed=1)
        signs = sorted(np.sign(centers[:, 0]))
        assert signs == [-1.0, 1.0]
        for c in centers:
            blob = blob_a if c[0] < 0 else blob_b
            assert np.min(np.abs(blob[:, 0] - c[0])) < 1.0

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        c1 = kmeans_init(X, 5, seed=7)
        c2 = kmeans_init(X, 5, seed=7)
        np.testing.assert_array_equal(c1, c2)

    def test_m_exceeds_n(self):
        with pytest.raises(ConfigurationError):
            kmeans_init(np.zeros((3, 1)), 4)


class TestArtifact:
    def _trained_doc(self, tmp_path):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(8, 2))
        Y = rng.normal(size=8)
        model = init_model(X, Y, GaussianLikelihood(), X[:3])
        model.posterior.means += rng.normal(size=model.posterior.means.shape)
        x_stats = Standardization.fit(X)
        y_stats = Standardization.fit(Y.reshape(-1, 1))
        return model_to_document(
            model, x_stats, y_stats, "regression", {"note": "test"}, seed=3
        )

    def test_save_load_save_is_byte_identical(self, tmp_path):
        doc = self._trained_doc(tmp_path)
        p1 = tmp_path / "m1.json"
        p2 = tmp_path / "m2.json"
        save_model(str(p1), doc)
        model, x_stats, y_stats, task, config, seed = load_model(str(p1))
        doc2 = model_to_document(model, x_stats, y_stats, task, config, seed)
        save_model(str(p2), doc2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_loading_validates_invariants(self, tmp_path):
        doc = self._trained_doc(tmp_path)
        doc["posterior"]["cov_factors"] = [[[0.0]]]
        path = tmp_path / "broken.json"
        save_model(str(path), doc)
        with pytest.raises(DataError):
            load_model(str(path))

    def test_unknown_schema_version(self, tmp_path):
        doc = self._trained_doc(tmp_path)
        doc["schema_version"] = 99
        path = tmp_path / "v99.json"
        save_model(str(path), doc)
        with pytest.raises(DataError):
            load_model(str(path))

    def test_round_trip_preserves_bound(self, tmp_path):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(8, 2))
        Y = rng.normal(size=8)
        model = init_model(X, Y, GaussianLikelihood(), X[:3])
        model.posterior.means += rng.normal(size=model.posterior.means.shape)
        x_stats = Standardization.fit(X)
        y_stats = Standardization.identity(1)
        doc = model_to_document(model, x_stats, y_stats, "regression", {}, 0)
        path = tmp_path / "m.json"
        save_model(str(path), doc)
        loaded, *_ = load_model(str(path))
        r1 = elbo(model.posterior, model.build_state(X), Y, model.likelihood,
                  32, seed=0)
        r2 = elbo(loaded.posterior, loaded.build_state(X), Y, loaded.likelihood,
                  32, seed=0)
        assert r1.total == r2.total


class TestCli:
    def _write_regression(self, tmp_path, N=30, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-2, 2, size=(N, 1))
        Y = np.sin(2 * X[:, 0]) + 0.1 * rng.standard_normal(N)
        xp = tmp_path / "x.csv"
        yp = tmp_path / "y.csv"
        np.savetxt(xp, X, delimiter=",")
        np.savetxt(yp, Y.reshape(-1, 1), delimiter=",")
        return str(xp), str(yp)

    def test_train_predict_evaluate_pipeline(self, tmp_path):
        xp, yp = self._write_regression(tmp_path)
        out = str(tmp_path / "model.json")
        code = main([
            "train", "--x", xp, "--y", yp, "--likelihood", "gaussian",
            "--num-inducing", "6", "--posterior", "fg", "--optimizer", "batch",
            "--samples", "64", "--seed", "1", "--max-iters", "2",
            "--analytic-ell", "--out", out,
        ])
        assert code == 0
        assert os.path.exists(out)
        assert os.path.exists(out + ".trace.csv")
        preds = str(tmp_path / "preds.csv")
        code = main([
            "predict", "--model", out, "--x", xp, "--y", yp,
            "--out", preds, "--pred-samples", "200",
        ])
        assert code == 0
        code = main([
            "evaluate", "--preds", preds, "--y", yp, "--task", "regression",
        ])
        assert code == 0

    def test_sparsity_factor_one_is_dense(self, tmp_path):
        xp, yp = self._write_regression(tmp_path, N=12)
        out = str(tmp_path / "dense.json")
        code = main([
            "train", "--x", xp, "--y", yp, "--likelihood", "gaussian",
            "--sparsity-factor", "1.0", "--posterior", "fg",
            "--samples", "16", "--max-iters", "1", "--analytic-ell",
            "--out", out,
        ])
        assert code == 0
        with open(out) as fh:
            doc = json.load(fh)
        assert doc["inducing"]["dense_mode"] is True
        assert len(doc["inducing"]["Z"][0]) == 12

    def test_unknown_likelihood_is_usage_error(self, tmp_path, capsys):
        xp, yp = self._write_regression(tmp_path, N=5)
        code = main([
            "train", "--x", xp, "--y", yp, "--likelihood", "student-t",
            "--num-inducing", "2", "--out", str(tmp_path / "m.json"),
        ])
        assert code == 1
        err = capsys.readouterr().err
        assert "gaussian" in err  # allowed list is printed

    def test_missing_file_is_data_error(self, tmp_path):
        code = main([
            "train", "--x", str(tmp_path / "nope.csv"),
            "--y", str(tmp_path / "nope.csv"), "--likelihood", "gaussian",
            "--num-inducing", "2", "--out", str(tmp_path / "m.json"),
        ])
        assert code == 2

    def test_dense_with_learned_inducing_rejected(self, tmp_path):
        xp, yp = self._write_regression(tmp_path, N=6)
        code = main([
            "train", "--x", xp, "--y", yp, "--likelihood", "gaussian",
            "--dense", "--learn-inducing", "--samples", "8",
            "--out", str(tmp_path / "m.json"),
        ])
        assert code == 1

    def test_classification_pipeline(self, tmp_path):
        rng = np.random.default_rng(7)
        X = np.vstack([
            rng.normal(size=(20, 2)) * 0.3 + [-2, 0],
            rng.normal(size=(20, 2)) * 0.3 + [2, 0],
        ])
        Y = np.concatenate([np.zeros(20), np.ones(20)])
        xp = tmp_path / "cx.csv"
        yp = tmp_path / "cy.csv"
        np.savetxt(xp, X, delimiter=",")
        np.savetxt(yp, Y.reshape(-1, 1), delimiter=",")
        out = str(tmp_path / "cmodel.json")
        code = main([
            "train", "--x", str(xp), "--y", str(yp),
            "--likelihood", "logistic", "--num-inducing", "5",
            "--posterior", "diag", "--optimizer", "adadelta",
            "--samples", "64", "--epochs", "5", "--batch-size", "10",
            "--seed", "2", "--out", out,
        ])
        assert code == 0
        preds = str(tmp_path / "cpreds.csv")
        assert main([
            "predict", "--model", out, "--x", str(xp), "--y", str(yp),
            "--out", preds, "--pred-samples", "100",
        ]) == 0
        assert main([
            "evaluate", "--preds", preds, "--y", str(yp),
            "--task", "classification",
        ]) == 0

    def test_inducing_from_data(self, tmp_path):
        xp, yp = self._write_regression(tmp_path, N=15)
        out = str(tmp_path / "nested.json")
        code = main([
            "train", "--x", xp, "--y", yp, "--likelihood", "gaussian",
            "--num-inducing", "4", "--inducing-from-data",
            "--samples", "16", "--max-iters", "1", "--analytic-ell",
            "--out", out,
        ])
        assert code == 0
        with open(out) as fh:
            doc = json.load(fh)
        Z = np.asarray(doc["inducing"]["Z"][0])
        X = np.loadtxt(xp, delimiter=",").reshape(-1, 1)
        Xs = (X - X.mean(0)) / X.std(0)
        for z in Z:
            assert np.min(np.abs(Xs[:, 0] - z[0])) < 1e-12
