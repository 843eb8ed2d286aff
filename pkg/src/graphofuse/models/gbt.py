"""Gradient-boosted regression trees with logistic loss.

Standard second-order boosting: each round fits an axis-aligned regression
tree to the current residuals (label minus predicted probability), choosing
splits by the gain G^2/(H + lambda) criterion and assigning each leaf the
value sum(residuals) / (sum(p(1-p)) + lambda) with lambda = 1. The model
score starts from the log-odds of the training prevalence and accumulates
learning_rate * tree output per round.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import SingleClassInput
from ..ingest import LABEL_DYG
from .standardize import Standardizer
from .svm import ProbabilityPair, _sigmoid, probability_pair

LAMBDA = 1.0
MIN_GAIN = 1e-12


@dataclass(frozen=True)
class TreeNode:
    """One node; leaves have feature == -1 and carry the leaf value."""

    feature: int
    threshold: float
    left: int
    right: int
    value: float

    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True)
class Tree:
    nodes: tuple[TreeNode, ...]

    def predict_one(self, x: np.ndarray) -> float:
        idx = 0
        while True:
            node = self.nodes[idx]
            if node.is_leaf():
                return node.value
            idx = node.left if x[node.feature] <= node.threshold else node.right

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in X])

    def depth(self) -> int:
        def walk(idx: int) -> int:
            node = self.nodes[idx]
            if node.is_leaf():
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(0)


@dataclass(frozen=True)
class GbtModel:
    trees: tuple[Tree, ...]
    learning_rate: float
    base_score: float
    max_depth: int
    standardizer: Standardizer
    loss_history: tuple[float, ...] = field(default=(), compare=False)

    def raw_score(self, x: np.ndarray) -> float:
        z = self.standardizer.transform(np.asarray(x, dtype=np.float64))
        return self.base_score + self.learning_rate * sum(t.predict_one(z) for t in self.trees)

    def predict_proba(self, x: np.ndarray) -> ProbabilityPair:
        return probability_pair(_sigmoid(self.raw_score(x)))


def _best_split(X: np.ndarray, g: np.ndarray, h: np.ndarray) -> tuple[float, int, float]:
    """Exact greedy split search; returns (gain, feature, threshold).

    Gain ties resolve to the lowest feature index, then the lowest threshold.
    g is the residual sum component (y - p) and h the hessian p(1-p).
    """
    n, d = X.shape
    G, H = g.sum(), h.sum()
    base = G * G / (H + LAMBDA)
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    gl = np.cumsum(g[order], axis=0)[:-1]
    hl = np.cumsum(h[order], axis=0)[:-1]
    valid = Xs[:-1] < Xs[1:]
    gr = G - gl
    hr = H - hl
    gains = gl**2 / (hl + LAMBDA) + gr**2 / (hr + LAMBDA) - base
    gains = np.where(valid, gains, -np.inf)
    if not np.isfinite(gains).any():
        return -np.inf, -1, 0.0
    # Feature-major argmax for the deterministic tie rule.
    flat = np.argmax(gains.T)
    feature, pos = divmod(int(flat), n - 1)
    threshold = (Xs[pos, feature] + Xs[pos + 1, feature]) / 2.0
    return float(gains[pos, feature]), feature, threshold


def _build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, max_depth: int) -> Tree:
    nodes: list[TreeNode] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        idx = len(nodes)
        nodes.append(TreeNode(-1, 0.0, -1, -1, 0.0))  # placeholder
        leaf_value = float(g[rows].sum() / (h[rows].sum() + LAMBDA))
        if depth >= max_depth or len(rows) < 2:
            nodes[idx] = TreeNode(-1, 0.0, -1, -1, leaf_value)
            return idx
        gain, feature, threshold = _best_split(X[rows], g[rows], h[rows])
        if gain <= MIN_GAIN:
            nodes[idx] = TreeNode(-1, 0.0, -1, -1, leaf_value)
            return idx
        mask = X[rows, feature] <= threshold
        left = grow(rows[mask], depth + 1)
        right = grow(rows[~mask], depth + 1)
        nodes[idx] = TreeNode(feature, threshold, left, right, 0.0)
        return idx

    grow(np.arange(len(X)), 0)
    return Tree(nodes=tuple(nodes))


def _log_loss(y01: np.ndarray, scores: np.ndarray) -> float:
    # -[y log p + (1-y) log(1-p)] in the numerically stable log1p form
    return float(np.mean(np.log1p(np.exp(-np.abs(scores))) + np.maximum(scores, 0.0) - y01 * scores))


def train_gbt(X: np.ndarray, y: Sequence[str], hp: dict, seed: int) -> GbtModel:
    """Train with hp keys: rounds, max_depth, learning_rate, subsample."""
    X = np.asarray(X, dtype=np.float64)
    y01 = np.array([1.0 if label == LABEL_DYG else 0.0 for label in y])
    if len(np.unique(y01)) < 2:
        raise SingleClassInput("need both classes to train")

    rounds = int(hp.get("rounds", 100))
    max_depth = int(hp.get("max_depth", 3))
    learning_rate = float(hp.get("learning_rate", 0.1))
    subsample = float(hp.get("subsample", 1.0))

    standardizer = Standardizer.fit(X)
    Z = standardizer.transform(X)
    n = len(y01)
    prevalence = y01.mean()
    base_score = float(np.log(prevalence / (1.0 - prevalence)))
    scores = np.full(n, base_score)
    rng = np.random.default_rng(seed)

    trees: list[Tree] = []
    losses = [_log_loss(y01, scores)]
    for _ in range(rounds):
        p = np.where(scores >= 0, 1.0 / (1.0 + np.exp(-np.abs(scores))), np.exp(-np.abs(scores)) / (1.0 + np.exp(-np.abs(scores))))
        g = y01 - p
        h = p * (1.0 - p)
        if subsample < 1.0:
            size = max(1, int(round(subsample * n)))
            rows = np.sort(rng.choice(n, size=size, replace=False))
        else:
            rows = np.arange(n)
        tree = _build_tree(Z[rows], g[rows], h[rows], max_depth)
        trees.append(tree)
        scores = scores + learning_rate * np.array([tree.predict_one(z) for z in Z])
        losses.append(_log_loss(y01, scores))

    return GbtModel(
        trees=tuple(trees),
        learning_rate=learning_rate,
        base_score=base_score,
        max_depth=max_depth,
        standardizer=standardizer,
        loss_history=tuple(losses),
    )


def predict_proba_gbt(model: GbtModel, x: np.ndarray) -> ProbabilityPair:
    return model.predict_proba(x)
