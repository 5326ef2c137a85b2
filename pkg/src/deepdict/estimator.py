"""scikit-learn compatible wrapper around the deep dictionary trainers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .model import synthesize
from .trainers import TrainConfig, train_greedy, train_mm


class DeepDictionaryLearning(TransformerMixin, BaseEstimator):
    """Unsupervised deep dictionary learning as a transformer.

    Inputs follow the scikit-learn layout (rows are samples); the
    transposed, column-sample convention is used internally. ``transform``
    returns the deepest-level coefficients from the pseudoinverse cascade,
    so the estimator drops into a :class:`~sklearn.pipeline.Pipeline`
    ahead of any classifier.

    Parameters
    ----------
    layer_atoms : tuple of int, default=(200, 100, 50)
        Number of atoms per dictionary level, shallowest first.
    activation : {"tanh", "sigmoid", "identity"}, default="tanh"
    solver : {"mm", "greedy"}, default="mm"
        Joint majorization-minimization or greedy layer-wise MOD.
    outer_iters, deepest_iters, middle_iters, mod_iters : int
        Iteration schedule, see :class:`deepdict.trainers.TrainConfig`.
    tol : float, default=1e-6
        Relative objective change that stops the outer loop.
    rcond : float, default=1e-2
        Relative singular-value cutoff of the least-squares solves.

    Attributes
    ----------
    model_ : DdlModel
    dictionaries_ : list of ndarray
        ``D_1 .. D_N``, each of shape ``(rows, atoms)``.
    trace_ : TrainTrace
    n_iter_ : int
    n_features_in_ : int
    """

    def __init__(self, layer_atoms=(200, 100, 50), activation="tanh", solver="mm",
                 outer_iters=100, deepest_iters=10, middle_iters=1, mod_iters=10,
                 tol=1e-6, rcond=1e-2):
        self.layer_atoms = layer_atoms
        self.activation = activation
        self.solver = solver
        self.outer_iters = outer_iters
        self.deepest_iters = deepest_iters
        self.middle_iters = middle_iters
        self.mod_iters = mod_iters
        self.tol = tol
        self.rcond = rcond

    def _config(self) -> TrainConfig:
        return TrainConfig(
            layer_atoms=self.layer_atoms,
            activation=self.activation,
            outer_iters=self.outer_iters,
            deepest_iters=self.deepest_iters,
            middle_iters=self.middle_iters,
            mod_iters=self.mod_iters,
            stop_rel_tol=self.tol,
            rcond=self.rcond,
        )

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        if self.solver not in ("mm", "greedy"):
            raise ValueError(f"solver must be 'mm' or 'greedy', got {self.solver!r}")
        trainer = train_mm if self.solver == "mm" else train_greedy
        result = trainer(X.T, self._config())
        self.model_ = result.model
        self.dictionaries_ = list(result.model.dicts)
        self.trace_ = result.trace
        self.n_iter_ = result.trace.iters_run
        self._extractor = result.model.freeze()
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self._extractor.transform(X.T).T

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        X = np.asarray(X, dtype=np.float64)
        return synthesize(self.model_, X.T).T

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = True
        return tags
