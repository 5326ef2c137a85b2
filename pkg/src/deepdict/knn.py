"""Exact nearest-neighbor classification over deep features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledSet
from .exceptions import ShapeError
from .model import DdlModel

_BLOCK = 256


@dataclass
class EvalReport:
    accuracy: float
    n_test: int
    confusion: np.ndarray
    predictions: np.ndarray

    def format(self) -> str:
        lines = [f"accuracy: {self.accuracy:.4f} ({int(np.trace(self.confusion))}/{self.n_test})"]
        k = self.confusion.shape[0]
        width = max(5, len(str(int(self.confusion.max(initial=0)))) + 1)
        lines.append("true\\pred" + "".join(f"{c:>{width}}" for c in range(k)))
        for r in range(k):
            lines.append(f"{r:>9}" + "".join(f"{v:>{width}}" for v in self.confusion[r]))
        return "\n".join(lines)


def squared_distances(train: np.ndarray, test: np.ndarray) -> np.ndarray:
    """``out[i, j] = ||test[:, i] - train[:, j]||^2`` from explicit differences."""
    out = np.empty((test.shape[1], train.shape[1]))
    # keeps the (dim, block, n_train) temporary bounded
    block = max(1, min(_BLOCK, int(2**24 // max(1, train.size))))
    for start in range(0, test.shape[1], block):
        t = test[:, start:start + block]
        diff = t[:, :, None] - train[:, None, :]
        out[start:start + block] = np.einsum("dij,dij->ij", diff, diff)
    return out


def knn_predict(train: LabeledSet, test_features, k: int = 1) -> np.ndarray:
    """Majority label among the ``k`` nearest training columns (Euclidean).

    Distance ties go to the lower training index, vote ties to the smaller
    class id.
    """
    test_features = np.asarray(test_features, dtype=np.float64)
    if train.labels is None:
        raise ValueError("training set has no labels")
    if train.n_samples == 0:
        raise ShapeError("empty training set")
    if test_features.ndim != 2 or test_features.shape[0] != train.features.shape[0]:
        raise ShapeError(
            f"test features have shape {test_features.shape}, training dimension is {train.features.shape[0]}"
        )
    if not 1 <= k <= train.n_samples:
        raise ValueError(f"k={k} outside [1, {train.n_samples}]")
    dist = squared_distances(train.features, test_features)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    votes = train.labels[nearest]
    n_classes = int(train.labels.max()) + 1
    counts = np.zeros((votes.shape[0], n_classes), dtype=np.int64)
    np.add.at(counts, (np.arange(votes.shape[0])[:, None], votes), 1)
    return np.argmax(counts, axis=1)


def confusion_matrix(true: np.ndarray, pred: np.ndarray, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


def evaluate(model: DdlModel, train: LabeledSet, test: LabeledSet, k: int = 1) -> EvalReport:
    """Extract deep features for both splits and score ``k``-NN on the test split."""
    if train.labels is None or test.labels is None:
        raise ValueError("evaluation needs labels on both splits")
    extractor = model.freeze()
    train_feats = LabeledSet(extractor.transform(train.features), train.labels)
    pred = knn_predict(train_feats, extractor.transform(test.features), k)
    n_classes = int(max(train.labels.max(initial=0), test.labels.max(initial=0))) + 1
    cm = confusion_matrix(test.labels, pred, n_classes)
    n = test.n_samples
    return EvalReport(float(np.trace(cm)) / n if n else 0.0, n, cm, pred)
