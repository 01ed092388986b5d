"""Evaluation measures: Hoyer sparseness, accuracy, confusion and timing."""

from __future__ import annotations

import statistics
import time
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DimMismatch, LabelOutOfRange, LengthMismatch
from .trainer import stack_forward


def hoyer_sparseness(v):
    """Hoyer's sparseness ``(sqrt(n) - |v|_1 / |v|_2) / (sqrt(n) - 1)``.

    1 for a vector with a single nonzero entry, 0 for a constant vector. The
    zero vector is given sparseness 0 so fully inactive layers do not abort
    an evaluation.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    n = v.size
    if n < 2:
        raise ValueError("Hoyer sparseness needs at least 2 components")
    l2 = np.linalg.norm(v)
    if l2 == 0:
        return 0.0
    root = np.sqrt(n)
    s = (root - np.abs(v).sum() / l2) / (root - 1.0)
    return float(min(max(s, 0.0), 1.0))


def column_sparseness(H):
    """Hoyer sparseness of every column of ``H`` (vectorized)."""
    H = np.asarray(H, dtype=np.float64)
    n = H.shape[0]
    if n < 2:
        raise ValueError("Hoyer sparseness needs at least 2 components")
    l1 = np.abs(H).sum(axis=0)
    l2 = np.sqrt((H * H).sum(axis=0))
    root = np.sqrt(n)
    ratio = np.divide(l1, l2, out=np.full_like(l1, root), where=l2 > 0)
    return np.clip((root - ratio) / (root - 1.0), 0.0, 1.0)


def mean_hidden_sparseness(model, X, layer):
    """Mean per-column Hoyer sparseness of hidden layer ``layer`` (1-based)."""
    if not 1 <= layer <= model.layers:
        raise DimMismatch(f"layer must be in [1, {model.layers}]", found=layer)
    hiddens, _ = stack_forward(model, X)
    return float(column_sparseness(hiddens[layer - 1]).mean())


def accuracy(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size < 1:
        raise LengthMismatch(f"LengthMismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(pred == truth))


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # counts[true, predicted]

    @property
    def total(self):
        return int(self.counts.sum())

    def normalized(self):
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def accuracy(self):
        return np.trace(self.counts) / self.total


def confusion(pred, truth, C):
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"LengthMismatch: {pred.shape} vs {truth.shape}")
    for name, v in (("prediction", pred), ("label", truth)):
        if v.size and (v.min() < 0 or v.max() >= C):
            raise LabelOutOfRange(f"LabelOutOfRange: {name} outside [0, {C})")
    counts = np.zeros((C, C), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    return ConfusionMatrix(counts)


def time_inference(model, X, repeats=5, single_thread=True):
    """Median per-example forward time in milliseconds.

    Each repeat times one batched forward pass over all columns of ``X`` and
    divides by N; one untimed warm-up pass precedes the measurements. BLAS is
    pinned to one thread unless ``single_thread`` is False (throughput mode).
    """
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    limit = threadpool_limits(limits=1) if single_thread else nullcontext()
    with limit:
        stack_forward(model, X)
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            stack_forward(model, X)
            samples.append((time.perf_counter() - t0) * 1e3 / n)
    return statistics.median(samples)
