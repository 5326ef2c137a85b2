"""The learned dictionary stack and its test-phase feature extractor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import activation as act
from .activation import Activation
from .exceptions import ShapeError
from .linalg import as_matrix, pinv


@dataclass(frozen=True)
class DdlModel:
    """Dictionaries ``D_1 .. D_N`` and the activation placed between them.

    The forward model is ``X = D_1 phi(D_2 phi(... phi(D_N Z)))``.
    """

    dicts: tuple[np.ndarray, ...]
    activation: Activation = Activation.TANH

    def __post_init__(self):
        dicts = tuple(as_matrix(d, f"D_{i + 1}") for i, d in enumerate(self.dicts))
        if not dicts:
            raise ShapeError("a model needs at least one dictionary")
        for i in range(len(dicts) - 1):
            if dicts[i].shape[1] != dicts[i + 1].shape[0]:
                raise ShapeError(
                    f"D_{i + 1} has {dicts[i].shape[1]} columns but "
                    f"D_{i + 2} has {dicts[i + 1].shape[0]} rows"
                )
        object.__setattr__(self, "dicts", dicts)
        object.__setattr__(self, "activation", Activation.parse(self.activation))

    @property
    def n_levels(self) -> int:
        return len(self.dicts)

    @property
    def input_dim(self) -> int:
        return self.dicts[0].shape[0]

    @property
    def feature_dim(self) -> int:
        return self.dicts[-1].shape[1]

    def freeze(self) -> "FeatureExtractor":
        return FeatureExtractor(self)


def inner_representation(dicts: Sequence[np.ndarray], kind, z: np.ndarray, level: int) -> np.ndarray:
    """``phi(D_level phi(... phi(D_N Z)))`` with 0-based ``level``; ``Z`` itself past the end."""
    out = z
    for d in reversed(dicts[level:]):
        out = act.apply(kind, d @ out)
    return out


def synthesize(model: DdlModel, z) -> np.ndarray:
    z = as_matrix(z, "z")
    if z.shape[0] != model.feature_dim:
        raise ShapeError(f"z has {z.shape[0]} rows, deepest dictionary has {model.feature_dim} atoms")
    return model.dicts[0] @ inner_representation(model.dicts, model.activation, z, 1)


def objective(model: DdlModel, z, x) -> float:
    """Squared Frobenius reconstruction error ``||X - synthesize(model, Z)||_F^2``."""
    x = as_matrix(x, "x")
    xhat = synthesize(model, z)
    if xhat.shape != x.shape:
        raise ShapeError(f"x has shape {x.shape}, reconstruction has shape {xhat.shape}")
    r = x - xhat
    return float(np.vdot(r, r))


@dataclass(frozen=True)
class FeatureExtractor:
    """Inference handle holding the precomputed pseudoinverse of every level."""

    model: DdlModel
    pinvs: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "pinvs", tuple(pinv(d) for d in self.model.dicts))

    def transform(self, x) -> np.ndarray:
        x = as_matrix(x, "x_test")
        if x.shape[0] != self.model.input_dim:
            raise ShapeError(f"x_test has {x.shape[0]} rows, model expects {self.model.input_dim}")
        z = self.pinvs[0] @ x
        for p in self.pinvs[1:]:
            z = p @ act.invert(self.model.activation, z)
        return z


def extract_features(model: DdlModel, x_test) -> np.ndarray:
    """Deepest-level coefficients of ``x_test`` via the pseudoinverse cascade.

    ``z_1 = D_1^+ x`` and ``z_i = D_i^+ phi^{-1}(z_{i-1})``. For repeated
    calls build the handle once with :meth:`DdlModel.freeze`.
    """
    return FeatureExtractor(model).transform(x_test)
