"""Side-by-side comparison of the greedy and MM trainers."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .data import LabeledSet
from .knn import EvalReport, knn_predict, confusion_matrix
from .model import DdlModel
from .trainers import TrainConfig, train_greedy, train_mm

TRAINERS = {"greedy": train_greedy, "mm": train_mm}


@dataclass
class BenchRow:
    method: str
    accuracy: float
    train_seconds: float
    extract_seconds: float
    objective: float
    objective_init: float
    iters: int
    model: DdlModel
    report: EvalReport


def time_extraction(model: DdlModel, x: np.ndarray, repeats: int = 5) -> tuple[float, np.ndarray]:
    """Best-of-``repeats`` wall time of building the inference handle and extracting ``x``."""
    best = np.inf
    feats = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        feats = model.freeze().transform(x)
        best = min(best, time.perf_counter() - t0)
    return best, feats


def run_bench(train: LabeledSet, test: LabeledSet, cfg: TrainConfig, k: int = 1,
              methods=("greedy", "mm"), repeats: int = 5) -> list[BenchRow]:
    rows = []
    for method in methods:
        result = TRAINERS[method](train.features, replace(cfg))
        train_feats = result.model.freeze().transform(train.features)
        seconds, test_feats = time_extraction(result.model, test.features, repeats)
        pred = knn_predict(LabeledSet(train_feats, train.labels), test_feats, k)
        n_classes = int(max(train.labels.max(), test.labels.max())) + 1
        cm = confusion_matrix(test.labels, pred, n_classes)
        report = EvalReport(float(np.trace(cm)) / test.n_samples, test.n_samples, cm, pred)
        rows.append(BenchRow(
            method, report.accuracy, result.trace.wall_seconds, seconds,
            result.trace.objective_per_outer[-1], result.trace.objective_init, result.trace.iters_run,
            result.model, report,
        ))
    return rows


def format_bench(rows: list[BenchRow]) -> str:
    lines = [f"{'method':<8}{'accuracy %':>12}{'train s':>10}{'extract s':>12}{'objective':>14}{'iters':>7}"]
    for r in rows:
        lines.append(
            f"{r.method:<8}{100 * r.accuracy:>12.2f}{r.train_seconds:>10.3f}"
            f"{r.extract_seconds:>12.5f}{r.objective:>14.6g}{r.iters:>7d}"
        )
    return "\n".join(lines)
