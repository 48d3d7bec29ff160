"""Bagged decision-tree ensemble with hard majority voting."""

from __future__ import annotations

import math

import numpy as np
from sklearn.tree import DecisionTreeClassifier


class SingleClassError(ValueError):
    pass


class RandomForest:
    """Trees fitted on bootstrap resamples, each split drawn from ``ceil(sqrt(d))`` features.

    ``predict`` returns True for Changed; a tied vote counts as Changed.
    """

    def __init__(self, n_trees: int = 50, seed: int = 0, max_features: int | None = None):
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = n_trees
        self.seed = seed
        self.max_features = max_features
        self.trees: list[DecisionTreeClassifier] = []
        self.bootstraps: list[np.ndarray] = []
        self.n_features: int | None = None

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=np.uint8)
        y = np.asarray(y).astype(bool)
        if len(X) != len(y) or len(X) == 0:
            raise ValueError("X and y must be non-empty and aligned")
        if y.all() or not y.any():
            raise SingleClassError("training data holds a single class")
        d = X.shape[1]
        m = self.max_features or max(1, math.ceil(math.sqrt(d)))
        rng = np.random.Generator(np.random.Philox(self.seed))
        self.trees, self.bootstraps = [], []
        for _ in range(self.n_trees):
            idx = rng.integers(0, len(X), size=len(X))
            tree = DecisionTreeClassifier(
                criterion="gini", max_features=m, random_state=int(rng.integers(0, 2**31 - 1))
            )
            tree.fit(X[idx], y[idx])
            self.trees.append(tree)
            self.bootstraps.append(idx)
        self.n_features = d
        return self

    def votes(self, X) -> np.ndarray:
        if not self.trees:
            raise RuntimeError("forest is not trained")
        X = np.asarray(X, dtype=np.uint8)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features per row")
        total = np.zeros(len(X), dtype=np.int64)
        for t in self.trees:
            p = t.predict(X)
            total += p.astype(bool)
        return total

    def predict(self, X) -> np.ndarray:
        return 2 * self.votes(X) >= self.n_trees


class ConstantModel:
    """Change model for a corpus in which every sample had the same label."""

    def __init__(self, changed: bool):
        self.changed = bool(changed)

    def predict(self, X) -> np.ndarray:
        return np.full(len(np.asarray(X)), self.changed, dtype=bool)


def train_rf(X, y, n_trees: int = 50, seed: int = 0) -> RandomForest:
    return RandomForest(n_trees, seed).fit(X, y)


def train_change_model(X, y, n_trees: int = 50, seed: int = 0):
    """A forest, or a constant model when the corpus holds one class only."""
    y = np.asarray(y).astype(bool)
    if len(y) and (y.all() or not y.any()):
        return ConstantModel(bool(y[0]))
    return train_rf(X, y, n_trees, seed)
