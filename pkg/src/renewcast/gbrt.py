"""Gradient-boosted regression trees built from squared-error CART learners.

Trees are grown greedily and deterministically. Inside each node the samples are
ordered by (feature value, target) before the cumulative sums are taken, so the
chosen split and leaf means do not depend on the order of the training rows.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .core import InputError, ModelError
from .dataset import SOUTH_AMERICA, Dataset

MIN_GAIN = 1e-12
FORMAT = "renewcast.gbrt"
FORMAT_VERSION = 1

# Ordinal encoding over the alphabetically sorted member codes.
COUNTRY_CODES = {iso: float(i) for i, iso in enumerate(sorted(SOUTH_AMERICA))}


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class Hyperparams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 5
    min_samples_split: int = 2
    seed: int = 42

    def __post_init__(self):
        if self.n_estimators < 1:
            raise InputError("n_estimators must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise InputError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise InputError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise InputError("min_samples_split must be >= 2")


def encode(year: float, country_iso: str) -> tuple[float, float]:
    """Feature row (year, ordinal country code)."""
    try:
        return (float(year), COUNTRY_CODES[country_iso])
    except KeyError:
        raise InputError(f"country {country_iso!r} has no encoding") from None


def _sorted_mean(values: np.ndarray) -> float:
    return float(np.mean(np.sort(values)))


def _best_split(X: np.ndarray, y: np.ndarray):
    """Return (gain, feature, threshold) of the best split, or None."""
    n = y.size
    total = float(np.sum(np.sort(y)))
    parent_term = total * total / n
    best = None
    for feature in range(X.shape[1]):
        x = X[:, feature]
        order = np.lexsort((y, x))
        xs, ys = x[order], y[order]
        boundaries = np.nonzero(xs[1:] != xs[:-1])[0]
        if boundaries.size == 0:
            continue
        csum = np.cumsum(ys)
        n_left = boundaries + 1.0
        s_left = csum[boundaries]
        s_right = csum[-1] - s_left
        # SSE_parent - SSE_left - SSE_right, the sum-of-squares terms cancel.
        gains = s_left ** 2 / n_left + s_right ** 2 / (n - n_left) - parent_term
        i = int(np.argmax(gains))  # first maximum = lowest threshold
        gain = float(gains[i])
        if best is None or gain > best[0]:
            threshold = (xs[boundaries[i]] + xs[boundaries[i] + 1]) / 2.0
            best = (gain, feature, float(threshold))
    return best


def fit_tree(rows, targets, max_depth: int, min_samples_split: int = 2) -> TreeNode:
    """Grow a least-squares regression tree."""
    X = np.asarray(rows, dtype=float)
    y = np.asarray(targets, dtype=float)
    if y.size == 0:
        raise InputError("cannot fit a tree on empty input")
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size:
        raise InputError("rows and targets differ in length")
    return _grow(X, y, 0, max_depth, min_samples_split)


def _grow(X, y, depth, max_depth, min_samples_split) -> TreeNode:
    if depth >= max_depth or y.size < min_samples_split:
        return Leaf(_sorted_mean(y))
    found = _best_split(X, y)
    if found is None or found[0] <= MIN_GAIN:
        return Leaf(_sorted_mean(y))
    _, feature, threshold = found
    go_left = X[:, feature] <= threshold
    return Split(feature, threshold,
                 _grow(X[go_left], y[go_left], depth + 1, max_depth, min_samples_split),
                 _grow(X[~go_left], y[~go_left], depth + 1, max_depth, min_samples_split))


def tree_predict(node: TreeNode, row) -> float:
    while isinstance(node, Split):
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.value


def tree_predict_many(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    _fill(node, X, np.arange(X.shape[0]), out)
    return out


def _fill(node, X, idx, out):
    if isinstance(node, Leaf):
        out[idx] = node.value
        return
    left = X[idx, node.feature] <= node.threshold
    _fill(node.left, X, idx[left], out)
    _fill(node.right, X, idx[~left], out)


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


@dataclass
class BoostedEnsemble:
    base_prediction: float
    hyper: Hyperparams
    trees: list = field(default_factory=list)

    def predict(self, row) -> float:
        return self.base_prediction + self.hyper.learning_rate * sum(
            tree_predict(t, row) for t in self.trees)

    def predict_many(self, rows) -> np.ndarray:
        X = np.atleast_2d(np.asarray(rows, dtype=float))
        out = np.full(X.shape[0], self.base_prediction)
        for t in self.trees:
            out += self.hyper.learning_rate * tree_predict_many(t, X)
        return out

    # ------------------------------------------------------------ persistence

    def to_dict(self) -> dict:
        return {"format": FORMAT, "version": FORMAT_VERSION,
                "base_prediction": self.base_prediction,
                "hyper": asdict(self.hyper),
                "trees": [_node_to_dict(t) for t in self.trees]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "BoostedEnsemble":
        if doc.get("format") != FORMAT or doc.get("version") != FORMAT_VERSION:
            raise InputError("not a version-1 renewcast.gbrt document")
        return cls(float(doc["base_prediction"]), Hyperparams(**doc["hyper"]),
                   [_node_from_dict(t) for t in doc["trees"]])

    @classmethod
    def from_json(cls, text: str) -> "BoostedEnsemble":
        return cls.from_dict(json.loads(text))


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"value": node.value}
    return {"feature": node.feature, "threshold": node.threshold,
            "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}


def _node_from_dict(d: Mapping) -> TreeNode:
    if "value" in d:
        return Leaf(float(d["value"]))
    return Split(int(d["feature"]), float(d["threshold"]),
                 _node_from_dict(d["left"]), _node_from_dict(d["right"]))


def fit_ensemble(rows, targets, hyper: Optional[Hyperparams] = None,
                 trace: Optional[list] = None) -> BoostedEnsemble:
    """Fit a boosted ensemble. If ``trace`` is a list, training RMSE per round is appended."""
    hyper = hyper or Hyperparams()
    X = np.asarray(rows, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if y.size < 2 or X.shape[0] != y.size:
        raise InputError("boosting needs at least 2 rows with matching targets")
    ensemble = BoostedEnsemble(_sorted_mean(y), hyper)
    fitted = np.full(y.size, ensemble.base_prediction)
    if trace is not None:
        trace.append(float(np.sqrt(np.mean((y - fitted) ** 2))))
    for _ in range(hyper.n_estimators):
        tree = fit_tree(X, y - fitted, hyper.max_depth, hyper.min_samples_split)
        ensemble.trees.append(tree)
        fitted = fitted + hyper.learning_rate * tree_predict_many(tree, X)
        if trace is not None:
            trace.append(float(np.sqrt(np.mean((y - fitted) ** 2))))
    return ensemble


def predict(ensemble: BoostedEnsemble, row) -> float:
    return ensemble.predict(row)


def predict_year(ensemble: BoostedEnsemble, year: int,
                 countries: Sequence[str]) -> dict[str, float]:
    """Per-country prediction at ``year``, clamped at zero."""
    out = {}
    for iso in countries:
        if iso not in COUNTRY_CODES:
            raise ModelError(f"country {iso!r} is not in the training encoding")
        out[iso] = max(0.0, ensemble.predict(encode(year, iso)))
    return out


def country_year_table(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, list]:
    """Rows (year, country code) and total renewable generation targets."""
    rows, targets, keys = [], [], []
    for iso, totals in dataset.country_totals().items():
        for year, value in zip(dataset.years, totals):
            rows.append(encode(year, iso))
            targets.append(float(value))
            keys.append((iso, year))
    return np.asarray(rows), np.asarray(targets), keys
