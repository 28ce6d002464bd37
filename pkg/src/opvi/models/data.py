"""Dataset loading and the bundled synthetic generators.

CSV convention: comma-separated, optional header (auto-detected), last
column is the regression target or the integer class label, all other
columns are features. Rows with non-numeric fields are rejected.
"""
from __future__ import annotations

import math

import numpy as np

from opvi.core import ConfigError, RngStream


def load_csv(path: str, task: str = "regression"):
    """Parse a dataset file into (features, targets)."""
    if task not in ("regression", "classification"):
        raise ConfigError(f"unknown task {task!r}")
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ConfigError(f"dataset {path} is empty")

    first = lines[0].split(",")
    start = 0
    if not all(_is_number(tok) for tok in first):
        start = 1
        if len(lines) == 1:
            raise ConfigError(f"dataset {path} has a header but no data rows")

    n_cols = len(first)
    rows = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        toks = line.split(",")
        if len(toks) != n_cols:
            raise ConfigError(f"{path}:{lineno}: expected {n_cols} fields, got {len(toks)}")
        try:
            rows.append([float(tok) for tok in toks])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: non-numeric field ({exc})") from exc
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[1] < 2:
        raise ConfigError(f"dataset {path} needs at least one feature column plus the target")
    x, y = data[:, :-1], data[:, -1]
    if task == "classification":
        labels = y.astype(np.int64)
        if not np.all(labels == y):
            raise ConfigError(f"dataset {path}: class labels must be integers")
        if labels.min() < 0:
            raise ConfigError(f"dataset {path}: class labels must be nonnegative")
        return x, labels
    return x, y


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def synthetic_regression(n: int, rng: RngStream, noise_sd: float = 0.1):
    """Smooth nonlinear 8-feature regression task, standardized targets.

    A stand-in for tabular regression benchmarks of the same shape; the
    target mixes additive and interaction terms a small network can fit,
    with a noise floor of roughly noise_sd after standardization.
    """
    gen = rng.generator("synthetic-regression")
    x = gen.uniform(-1.0, 1.0, size=(n, 8))
    f = (
        np.sin(math.pi * x[:, 0])
        + 2.0 * x[:, 1] * x[:, 2]
        + x[:, 3] ** 2
        + np.tanh(2.0 * x[:, 4])
        - 0.5 * x[:, 5]
        + 0.5 * x[:, 6] * x[:, 7]
    )
    y = f + noise_sd * gen.standard_normal(n)
    y = (y - y.mean()) / y.std()
    return x, y


def synthetic_classification(n: int, rng: RngStream, n_classes: int = 3, n_features: int = 4):
    """Gaussian blobs with unit spread around random class centers."""
    gen = rng.generator("synthetic-classification")
    centers = 2.0 * gen.standard_normal((n_classes, n_features))
    labels = gen.integers(0, n_classes, size=n)
    x = centers[labels] + gen.standard_normal((n, n_features))
    return x, labels.astype(np.int64)


def train_test_split(x, y, test_fraction: float, rng: RngStream):
    """Random split; returns (x_train, y_train, x_test, y_test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test fraction must lie in (0, 1), got {test_fraction}")
    n = x.shape[0]
    n_test = max(1, int(round(n * test_fraction)))
    if n_test >= n:
        raise ConfigError("split leaves no training data")
    perm = rng.generator("train-test-split").permutation(n)
    test, train = perm[:n_test], perm[n_test:]
    return x[train], y[train], x[test], y[test]
