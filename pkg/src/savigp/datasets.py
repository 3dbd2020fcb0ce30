"""CSV ingestion, standardization bookkeeping, k-means inducing init."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DataError

STD_FLOOR = 1.0  # zero-variance columns keep unit scale


@dataclass
class Standardization:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, A: np.ndarray) -> np.ndarray:
        return (A - self.mean) / self.std

    def invert(self, A: np.ndarray) -> np.ndarray:
        return A * self.std + self.mean

    @staticmethod
    def fit(A: np.ndarray) -> "Standardization":
        mean = np.mean(A, axis=0)
        std = np.std(A, axis=0)
        std = np.where(std < 1e-12, STD_FLOOR, std)
        return Standardization(mean=mean, std=std)

    @staticmethod
    def identity(width: int) -> "Standardization":
        return Standardization(mean=np.zeros(width), std=np.ones(width))


@dataclass
class Dataset:
    """Parsed, validated and (where appropriate) standardized data."""

    X: np.ndarray  # (N, D) standardized features
    Y: np.ndarray  # (N, P) targets; standardized only for plain regression
    x_stats: Standardization
    y_stats: Standardization
    task: str  # "regression" | "classification" | "counts"
    raw_Y: np.ndarray = field(default=None)

    @property
    def num_data(self) -> int:
        return self.X.shape[0]


def _read_numeric_csv(path: str) -> np.ndarray:
    """Rectangular numeric CSV with optional auto-detected header row."""
    rows: list[list[float]] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                try:
                    rows.append([_parse_cell(c, lineno, i) for i, c in enumerate(row)])
                except DataError:
                    # Non-numeric first row: treat as header and move on.
                    continue
                continue
            if len(row) != width:
                raise DataError(
                    f"{path}: ragged row at line {lineno} "
                    f"({len(row)} cells, expected {width})"
                )
            rows.append([_parse_cell(c, lineno, i) for i, c in enumerate(row)])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def _parse_cell(cell: str, lineno: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric cell at line {lineno}, column {col + 1}: {cell!r}")
    if not np.isfinite(value):
        raise DataError(f"non-finite cell at line {lineno}, column {col + 1}: {cell!r}")
    return value


def task_for_likelihood(name: str) -> str:
    if name in ("gaussian", "gprn"):
        return "regression"
    if name == "warped":
        return "warped-regression"
    if name == "lgcp":
        return "counts"
    return "classification"


def load_csv(features_path: str, targets_path: str, task: str) -> Dataset:
    """Load feature/target CSVs and apply the task's standardization.

    Features are always standardized.  Targets are standardized only for
    plain regression; warped targets keep their scale (the warp learns
    it), counts and class labels are validated instead.
    """
    X = _read_numeric_csv(features_path)
    Y = _read_numeric_csv(targets_path)
    if X.shape[0] != Y.shape[0]:
        raise DataError(
            f"feature rows ({X.shape[0]}) and target rows ({Y.shape[0]}) differ"
        )
    x_stats = Standardization.fit(X)
    Xs = x_stats.apply(X)
    raw_Y = Y.copy()
    if task == "regression":
        y_stats = Standardization.fit(Y)
        Ys = y_stats.apply(Y)
    elif task in ("warped-regression", "counts"):
        y_stats = Standardization.identity(Y.shape[1])
        Ys = Y
        if task == "counts":
            if np.any(Y < 0) or np.any(Y != np.floor(Y)):
                bad = int(np.argwhere((Y < 0) | (Y != np.floor(Y)))[0][0]) + 1
                raise DataError(f"count targets must be nonnegative integers (row {bad})")
    elif task == "classification":
        y_stats = Standardization.identity(Y.shape[1])
        labels = np.ravel(Y)
        if np.any(labels != np.floor(labels)) or np.any(labels < 0):
            raise DataError("class labels must be nonnegative integers")
        Ys = Y
    else:
        raise ConfigurationError(f"unknown task {task!r}")
    return Dataset(X=Xs, Y=Ys, x_stats=x_stats, y_stats=y_stats, task=task, raw_Y=raw_Y)


def kmeans_init(X: np.ndarray, M: int, seed: int = 0) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding, used to place inducing inputs.

    Runs at most 50 iterations or until the centroid shift drops below
    1e-8; an empty cluster is re-seeded to the point farthest from its
    current centroid.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    if M > N:
        raise ConfigurationError(f"cannot place M={M} centroids on N={N} points")
    rng = np.random.default_rng(seed)

    centers = np.empty((M, X.shape[1]))
    first = int(rng.integers(N))
    centers[0] = X[first]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for m in range(1, M):
        total = np.sum(closest)
        if total <= 0:
            centers[m] = X[int(rng.integers(N))]
            continue
        probs = closest / total
        idx = int(rng.choice(N, p=probs))
        centers[m] = X[idx]
        closest = np.minimum(closest, np.sum((X - centers[m]) ** 2, axis=1))

    for _ in range(50):
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ centers.T
            + np.sum(centers * centers, axis=1)[None, :]
        )
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        dist_to_own = d2[np.arange(N), assign]
        for m in range(M):
            members = assign == m
            if not np.any(members):
                far = int(np.argmax(dist_to_own))
                new_centers[m] = X[far]
                dist_to_own[far] = 0.0
                continue
            new_centers[m] = np.mean(X[members], axis=0)
        shift = float(np.max(np.abs(new_centers - centers)))
        centers = new_centers
        if shift < 1e-8:
            break
    return centers
