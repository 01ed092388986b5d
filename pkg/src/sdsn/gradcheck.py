"""Finite-difference oracles for the lower-weight gradients.

The oracle side only ever evaluates objectives; it never calls the analytic
gradient code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Activation, GradVariant, Penalty, _enum, make_group_partition, one_hot_encode
from .errors import DimMismatch, KinkAvoidanceFailed
from .snnm import grad_f1, grad_f2, objective_f1, objective_f2

DEFAULT_STEP = 1e-5
KINK_MARGIN = 0.1
MAX_RESAMPLES = 100
THRESHOLDS = {GradVariant.F1: 1e-6, GradVariant.F2: 1e-4}


def finite_diff_grad(f, W, h=DEFAULT_STEP):
    """Central differences ``(f(W + h E) - f(W - h E)) / 2h`` for every entry."""
    if not h > 0:
        raise ValueError("step must be positive")
    W = np.array(W, dtype=np.float64)
    grad = np.empty_like(W)
    for idx in np.ndindex(W.shape):
        w0 = W[idx]
        W[idx] = w0 + h
        fp = f(W)
        W[idx] = w0 - h
        fm = f(W)
        W[idx] = w0
        grad[idx] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(A, B, tiny=1e-300):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DimMismatch("relative_error needs equal shapes", expected=A.shape, found=B.shape)
    return float(np.linalg.norm(A - B) / max(np.linalg.norm(A), np.linalg.norm(B), tiny))


@dataclass(frozen=True)
class GradCheckReport:
    """``max_rel_error`` is the Frobenius relative error of the whole gradient,
    an upper bound on every entry's error scaled by the gradient norm;
    ``mean_rel_error`` averages those per-entry scaled errors."""

    max_rel_error: float
    mean_rel_error: float
    worst_entry: tuple
    step: float
    variant: str
    activation: str
    resamples: int = 0

    def passed(self, threshold=None):
        limit = THRESHOLDS[GradVariant(self.variant)] if threshold is None else threshold
        return self.max_rel_error < limit

    def lines(self):
        return [
            f"variant: {self.variant}",
            f"activation: {self.activation}",
            f"step: {self.step:g}",
            f"max_rel_error: {self.max_rel_error:.3e}",
            f"mean_rel_error: {self.mean_rel_error:.3e}",
            f"worst_entry: {self.worst_entry[0]},{self.worst_entry[1]}",
            f"resamples: {self.resamples}",
        ]


def random_instance(D, L, N, C, activation, seed, w_scale=None):
    """Random ``(W, U, X, T)``; ReLU instances are resampled until every
    preactivation is at least ``KINK_MARGIN`` away from 0."""
    activation = _enum(Activation, activation)
    rng = np.random.default_rng(seed)
    if w_scale is None:
        w_scale = 2.0 if activation is Activation.RELU else 1.0
    for attempt in range(MAX_RESAMPLES + 1):
        W = w_scale * rng.standard_normal((D, L))
        X = rng.standard_normal((D, N))
        if activation is Activation.SIGMOID or np.abs(W.T @ X).min() > KINK_MARGIN:
            break
    else:
        raise KinkAvoidanceFailed(f"no kink-free ReLU instance after {MAX_RESAMPLES} resamples")
    U = rng.standard_normal((L, C))
    T = one_hot_encode(rng.integers(0, C, size=N), C).onehot
    return W, U, X, T, attempt


def run_gradcheck(D=6, L=8, N=10, C=3, groups=4, beta=0.01, variant=GradVariant.F1,
                  activation=Activation.SIGMOID, seed=0, step=DEFAULT_STEP,
                  penalty_kind=Penalty.MIXED, corrupt=False):
    """Compare the analytic gradient with central differences on a random instance.

    Keep ``D * L`` small (up to ~1e4): the oracle costs ``2 D L`` objective
    evaluations. ``corrupt`` scales the analytic gradient's first row by 1.01,
    a negative control for the check itself.
    """
    variant = _enum(GradVariant, variant)
    activation = _enum(Activation, activation)
    part = make_group_partition(L, groups)
    W, U, X, T, resamples = random_instance(D, L, N, C, activation, seed)

    if variant is GradVariant.F1:
        analytic = grad_f1(W, U, X, T, beta, part, activation, penalty_kind)
        numeric = finite_diff_grad(
            lambda w: objective_f1(w, U, X, T, beta, part, activation, penalty_kind), W, step)
    else:
        analytic = grad_f2(W, X, T, beta, part, activation, penalty_kind)
        numeric = finite_diff_grad(
            lambda w: objective_f2(w, X, T, beta, part, activation, penalty_kind), W, step)
    if corrupt:
        analytic = analytic.copy()
        analytic[0] *= 1.01

    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-300)
    entry = np.abs(analytic - numeric) / scale
    worst = np.unravel_index(np.argmax(entry), entry.shape)
    return GradCheckReport(
        max_rel_error=relative_error(analytic, numeric),
        mean_rel_error=float(entry.mean()),
        worst_entry=(int(worst[0]), int(worst[1])),
        step=step,
        variant=variant.value,
        activation=activation.value,
        resamples=resamples,
    )
