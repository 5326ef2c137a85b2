"""Elementwise invertible activations used between dictionary levels."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .exceptions import NumericError

#: Inputs to the inverse are clamped this far inside the open range.
EPS_CLAMP = 1e-7


class Activation(str, Enum):
    IDENTITY = "identity"
    TANH = "tanh"
    SIGMOID = "sigmoid"

    @classmethod
    def parse(cls, value: "Activation | str") -> "Activation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown activation {value!r}; expected one of {names}") from None


def _check_finite(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise NumericError("activation input contains non-finite values")
    return m


def apply(kind, m) -> np.ndarray:
    """Elementwise ``phi(m)``."""
    kind = Activation.parse(kind)
    m = _check_finite(m)
    if kind is Activation.IDENTITY:
        return m.copy()
    if kind is Activation.TANH:
        return np.tanh(m)
    # exp(-|x|) form avoids overflow for large negative inputs
    e = np.exp(-np.abs(m))
    return np.where(m >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def clamp(kind, m) -> np.ndarray:
    """Clip ``m`` into the safe interior of the activation's range."""
    kind = Activation.parse(kind)
    m = _check_finite(m)
    if kind is Activation.TANH:
        return np.clip(m, -1.0 + EPS_CLAMP, 1.0 - EPS_CLAMP)
    if kind is Activation.SIGMOID:
        return np.clip(m, EPS_CLAMP, 1.0 - EPS_CLAMP)
    return m.copy()


def invert(kind, m) -> np.ndarray:
    """Elementwise ``phi^{-1}(m)``, total over the reals thanks to clamping."""
    kind = Activation.parse(kind)
    c = clamp(kind, m)
    if kind is Activation.TANH:
        return np.arctanh(c)
    if kind is Activation.SIGMOID:
        return np.log(c) - np.log1p(-c)
    return c
