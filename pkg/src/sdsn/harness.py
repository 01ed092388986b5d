"""Evaluation protocols: repeated random splits, sparseness comparison and
depth/width ablations.

Every run trains a ``K``-layer stack once and reads off all layers: because
stacks are trained bottom-up with fixed per-layer seeds, layer ``k`` of a
``K``-layer stack is exactly the ``k``-layer stack.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import HyperParams, one_hot_encode
from .data_io import split
from .metrics import accuracy, column_sparseness
from .trainer import stack_forward, train_stack

# Hyperparameter grids searched by hand in the original experiments.
EPSILON_GRID = (20, 15, 5, 2, 1, 0.2, 0.1, 0.05, 0.01, 0.001)
ALPHA_GRID = (1, 0.5, 0.1)
BETA_GRID = (0.1, 0.05, 0.01, 0.001, 0.0001)
GROUP_GRID = (2, 4, 5, 10, 20)
EPOCHS = 5
HIDDEN = 500
LAYERS = 2


@dataclass(frozen=True)
class SplitResult:
    seed: int
    test_accuracy: tuple  # per layer
    train_accuracy: tuple
    hidden_sparseness: tuple  # mean per-column HSM on the test split, per layer


def run_split(bundle, hp, seed, train_per_class=None, train_fraction=None):
    train, test = split(bundle, train_per_class=train_per_class,
                        train_fraction=train_fraction, seed=seed)
    T = one_hot_encode(train.labels, bundle.class_count).onehot
    model, report = train_stack(train.features, T, hp, seed=seed)
    hiddens, outputs = stack_forward(model, test.features)
    return SplitResult(
        seed=seed,
        test_accuracy=tuple(accuracy(np.argmax(Y, axis=0), test.labels) for Y in outputs),
        train_accuracy=tuple(r.train_accuracy for r in report.layers),
        hidden_sparseness=tuple(float(column_sparseness(H).mean()) for H in hiddens),
    )


def repeated_splits(bundle, hp, seeds=range(10), **split_kw):
    """One :class:`SplitResult` per seed; ``split_kw`` goes to :func:`split`."""
    return [run_split(bundle, hp, s, **split_kw) for s in seeds]


def summarize(results):
    """Means over splits: per-layer test/train accuracy and HSM."""
    return {
        "test_accuracy": np.mean([r.test_accuracy for r in results], axis=0).tolist(),
        "train_accuracy": np.mean([r.train_accuracy for r in results], axis=0).tolist(),
        "hidden_sparseness": np.mean([r.hidden_sparseness for r in results], axis=0).tolist(),
        "splits": len(results),
    }


def sparseness_comparison(make_bundle, hp, betas, seeds=range(10), **split_kw):
    """Mean HSM (averaged over layers) and accuracy per sparsity weight.

    ``make_bundle(seed)`` supplies the dataset for each repetition, so a
    synthetic generator can be redrawn per seed.
    """
    out = {}
    for beta in betas:
        hpb = dataclasses.replace(hp, beta=beta)
        res = [run_split(make_bundle(s), hpb, s, **split_kw) for s in seeds]
        s = summarize(res)
        s["mean_hsm"] = float(np.mean(s["hidden_sparseness"]))
        out[beta] = s
    return out


def width_ablation(bundle, hp, widths, seeds=range(10), **split_kw):
    """Mean per-layer test accuracy for each hidden width (must be divisible by G)."""
    return {L: summarize(repeated_splits(bundle, dataclasses.replace(hp, hidden=L), seeds, **split_kw))
            for L in widths}
