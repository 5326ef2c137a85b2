"""Greedy layer-wise MOD and the joint majorization-minimization trainer."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import activation as act
from .activation import Activation
from .exceptions import NumericError, ShapeError
from .linalg import (
    RCOND,
    as_matrix,
    lstsq_coef,
    lstsq_dict,
    normalize_columns,
    spectral_bound,
    truncated_svd,
)
from .model import DdlModel, inner_representation, objective

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Layer widths and iteration schedule shared by both trainers.

    ``middle_iters`` repeats each intermediate level update, ``deepest_iters``
    is the number of ALS passes on the last level per outer iteration and
    ``mod_iters`` is the per-level ALS budget of the greedy baseline.
    ``rcond`` is the relative singular-value cutoff of every least-squares
    solve made by the trainers. Coefficient matrices such as
    ``phi(D_2 Z)`` are close to rank deficient once tanh saturates, and an
    unregularized ``X Z^+`` then explodes before column normalization
    discards its scale; ``1e-2`` keeps both trainers stable.
    Training is deterministic; ``seed`` only feeds synthetic data helpers.
    """

    layer_atoms: Sequence[int] = (200, 100, 50)
    activation: Activation | str = Activation.TANH
    outer_iters: int = 100
    deepest_iters: int = 10
    middle_iters: int = 1
    mod_iters: int = 10
    stop_rel_tol: float = 1e-6
    rcond: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        self.layer_atoms = tuple(int(k) for k in self.layer_atoms)
        self.activation = Activation.parse(self.activation)
        if not self.layer_atoms or min(self.layer_atoms) < 1:
            raise ShapeError(f"layer_atoms must be a non-empty list of positive counts, got {self.layer_atoms}")
        if self.middle_iters < 1:
            raise ValueError("middle_iters must be >= 1")
        for name in ("outer_iters", "deepest_iters", "mod_iters"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.rcond < 1:
            raise ValueError("rcond must lie in [0, 1)")
        if self.stop_rel_tol < 0:
            raise ValueError("stop_rel_tol must be >= 0")


@dataclass
class TrainTrace:
    objective_init: float = float("nan")
    objective_per_outer: list[float] = field(default_factory=list)
    seconds_per_outer: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0
    iters_run: int = 0


class TrainResult(NamedTuple):
    model: DdlModel
    z: np.ndarray
    trace: TrainTrace


def check_feasible(x: np.ndarray, layer_atoms: Sequence[int]) -> None:
    rows, n = x.shape
    for i, k in enumerate(layer_atoms):
        limit = min(rows, n)
        if k > limit:
            raise ShapeError(
                f"level {i + 1} asks for {k} atoms but its input is {rows} x {n} (max {limit})"
            )
        rows = k


def _finite(m: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise NumericError(f"non-finite values in {what}")
    return m


def init_deterministic(x, cfg: TrainConfig) -> tuple[list[np.ndarray], np.ndarray]:
    """Layer-wise SVD initialization.

    Each level's dictionary is the top-``k_i`` left singular vectors of its
    input; the next input is ``phi^{-1}`` of ``S V^T``. The last ``S V^T``
    is the initial coefficient matrix.
    """
    x = as_matrix(x, "x")
    check_feasible(x, cfg.layer_atoms)
    dicts = []
    y = x
    coef = x
    for i, k in enumerate(cfg.layer_atoms):
        u, s, vt = truncated_svd(y, k)
        dicts.append(u)
        coef = s[:, None] * vt
        if i < len(cfg.layer_atoms) - 1:
            y = act.invert(cfg.activation, coef)
    return dicts, coef


def mm_target(y, d, u_k, a: float) -> np.ndarray:
    """Minimizer of the quadratic majorizer built around ``u_k``.

    ``B = u_k + D^T (Y - D u_k) / a``, a Landweber step on ``||Y - D u||``.
    """
    y = as_matrix(y, "y")
    d = as_matrix(d, "d")
    u_k = as_matrix(u_k, "u_k")
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if d.shape[0] != y.shape[0] or d.shape[1] != u_k.shape[0] or y.shape[1] != u_k.shape[1]:
        raise ShapeError(f"incompatible shapes y{y.shape}, d{d.shape}, u_k{u_k.shape}")
    return u_k + (d.T @ (y - d @ u_k)) / a


def majorizer_value(y, d, u, u_k, a: float) -> float:
    """``||Y - D u||^2 + sum_cols (u - u_k)^T (a I - D^T D) (u - u_k)``."""
    y = as_matrix(y, "y")
    d = as_matrix(d, "d")
    u = as_matrix(u, "u")
    u_k = as_matrix(u_k, "u_k")
    smax = np.linalg.norm(d, 2) if d.size else 0.0
    if a < smax * smax * (1.0 - 1e-12):
        raise ValueError(f"a={a} is below the largest eigenvalue {smax * smax} of D^T D")
    if u.shape != u_k.shape or d.shape[1] != u.shape[0] or y.shape != (d.shape[0], u.shape[1]):
        raise ShapeError(f"incompatible shapes y{y.shape}, d{d.shape}, u{u.shape}, u_k{u_k.shape}")
    r = y - d @ u
    delta = u - u_k
    dd = d @ delta
    return float(np.vdot(r, r) + a * np.vdot(delta, delta) - np.vdot(dd, dd))


def _residual(y, d, z) -> float:
    r = y - d @ z
    return float(np.vdot(r, r))


def mod_als(y, atoms: int, iters: int, d_init, residuals: list | None = None,
            rcond: float = RCOND):
    """Method of optimal directions: alternate exact least squares for Z and D.

    Every pass solves ``Z = D^+ Y`` and then ``D = Y Z^+`` followed by
    column normalization. The returned ``Z`` is refit to the returned,
    normalized ``D``. If ``residuals`` is given, the squared residual after
    every half-step is appended to it. ``rcond`` is the relative
    singular-value cutoff of both solves.
    """
    y = as_matrix(y, "y")
    d = as_matrix(d_init, "d_init")
    if not 1 <= atoms <= min(y.shape):
        raise ShapeError(f"{atoms} atoms infeasible for a {y.shape[0]} x {y.shape[1]} input")
    if d.shape != (y.shape[0], atoms):
        raise ShapeError(f"d_init has shape {d.shape}, expected {(y.shape[0], atoms)}")
    for _ in range(iters):
        z = lstsq_coef(y, d, rcond)
        if residuals is not None:
            residuals.append(_residual(y, d, z))
        d = lstsq_dict(y, z, rcond)
        if residuals is not None:
            residuals.append(_residual(y, d, z))
        d = normalize_columns(d)
    d = normalize_columns(d)
    return d, lstsq_coef(y, d, rcond)


def train_greedy(x, cfg: TrainConfig) -> TrainResult:
    """Greedy layer-wise training: level ``i+1`` fits ``phi^{-1}`` of level ``i``'s coefficients."""
    start = time.perf_counter()
    x = as_matrix(x, "x")
    check_feasible(x, cfg.layer_atoms)
    trace = TrainTrace()
    dicts: list[np.ndarray] = []
    y = x
    coef = x
    for i, k in enumerate(cfg.layer_atoms):
        d0 = truncated_svd(y, k).u
        d, coef = mod_als(y, k, cfg.mod_iters, d0, rcond=cfg.rcond)
        _finite(coef, f"level {i + 1} coefficients")
        dicts.append(d)
        partial = DdlModel(tuple(dicts), cfg.activation)
        j = objective(partial, coef, x)
        if i == 0:
            trace.objective_init = j
        trace.objective_per_outer.append(j)
        trace.seconds_per_outer.append(time.perf_counter() - start)
        logger.debug("greedy level %d: J=%.6g", i + 1, j)
        if i < len(cfg.layer_atoms) - 1:
            y = act.invert(cfg.activation, coef)
    trace.iters_run = len(cfg.layer_atoms)
    trace.wall_seconds = time.perf_counter() - start
    return TrainResult(DdlModel(tuple(dicts), cfg.activation), coef, trace)


def train_mm(x, cfg: TrainConfig, init: tuple[Sequence[np.ndarray], np.ndarray] | None = None) -> TrainResult:
    """Jointly train all levels by majorization-minimization.

    Each outer iteration refits ``D_1`` by least squares, updates every
    intermediate dictionary against the majorizer target ``B`` of the level
    above, and finishes with ALS on the deepest dictionary and ``Z``.
    Stops early once the relative objective change drops below
    ``cfg.stop_rel_tol``. ``init`` overrides the SVD starting point with
    explicit ``(dicts, z)``.
    """
    start = time.perf_counter()
    x = as_matrix(x, "x")
    kind = cfg.activation
    if init is None:
        dicts, z = init_deterministic(x, cfg)
    else:
        start_model = DdlModel(tuple(init[0]), kind)
        if tuple(d.shape[1] for d in start_model.dicts) != cfg.layer_atoms:
            raise ShapeError("init dictionaries do not match cfg.layer_atoms")
        dicts, z = list(start_model.dicts), as_matrix(init[1], "z")
    n_levels = len(dicts)
    trace = TrainTrace()
    j_prev = objective(DdlModel(tuple(dicts), kind), z, x)
    trace.objective_init = j_prev

    for it in range(cfg.outer_iters):
        if n_levels == 1:
            target = x
        else:
            z1 = inner_representation(dicts, kind, z, 1)
            dicts[0] = normalize_columns(lstsq_dict(x, z1, cfg.rcond))
            target = x
            for i in range(1, n_levels - 1):
                upper = dicts[i - 1]
                for _ in range(cfg.middle_iters):
                    zi = inner_representation(dicts, kind, z, i + 1)
                    u_k = act.apply(kind, dicts[i] @ zi)
                    b = mm_target(target, upper, u_k, spectral_bound(upper))
                    level_target = _finite(act.invert(kind, b), f"level {i + 1} target, outer iteration {it}")
                    dicts[i] = normalize_columns(lstsq_dict(level_target, zi, cfg.rcond))
                target = level_target
            upper = dicts[-2]
            u_k = act.apply(kind, dicts[-1] @ z)
            b = mm_target(target, upper, u_k, spectral_bound(upper))
            target = _finite(act.invert(kind, b), f"level {n_levels} target, outer iteration {it}")
        dicts[-1], z = mod_als(target, cfg.layer_atoms[-1], cfg.deepest_iters, dicts[-1], rcond=cfg.rcond)
        _finite(z, f"coefficients, outer iteration {it}")

        j = objective(DdlModel(tuple(dicts), kind), z, x)
        if not np.isfinite(j):
            raise NumericError(f"objective became non-finite at outer iteration {it}")
        trace.objective_per_outer.append(j)
        trace.seconds_per_outer.append(time.perf_counter() - start)
        trace.iters_run = it + 1
        logger.debug("mm outer %d: J=%.6g", it, j)
        if abs(j_prev - j) < cfg.stop_rel_tol * max(abs(j_prev), np.finfo(float).tiny):
            break
        j_prev = j

    trace.wall_seconds = time.perf_counter() - start
    return TrainResult(DdlModel(tuple(dicts), kind), z, trace)
