"""Module training (gradient descent on W, closed-form U) and stacking."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    GradVariant,
    HyperParams,
    SnnmModule,
    StackModel,
    check_features,
    validate_stack,
)
from .errors import DimMismatch, DivergedTraining, SingularSystem
from .snnm import (
    activate,
    grad_f1,
    grad_f2,
    hidden_forward,
    module_output,
    penalty,
    solve_upper,
)

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
INIT_STD = 0.01


def init_weights(D, L, seed):
    """``D x L`` matrix of i.i.d. N(0, 0.01^2) draws, reproducible from ``seed``."""
    return np.random.default_rng(seed).normal(0.0, INIT_STD, size=(int(D), int(L)))


def layer_seed(seed, k):
    """Seed for the k-th module (1-based); layer 1 uses ``seed`` unchanged."""
    if k == 1:
        return seed
    return int(np.random.SeedSequence([int(seed), int(k)]).generate_state(1)[0])


@dataclass
class LayerReport:
    input_dim: int
    initial_objective: float
    objectives: list = field(default_factory=list)
    train_accuracy: float = float("nan")
    seconds: float = 0.0


@dataclass
class TrainReport:
    hyperparams: dict
    seed: int
    layers: list = field(default_factory=list)
    # Y^K on the training set; not serialized.
    train_outputs: np.ndarray = field(default=None, repr=False)

    def as_dict(self):
        return {
            "hyperparams": dict(self.hyperparams),
            "seed": self.seed,
            "layers": [
                {
                    "layer": k,
                    "input_dim": r.input_dim,
                    "initial_objective": r.initial_objective,
                    "objectives": list(r.objectives),
                    "train_accuracy": r.train_accuracy,
                    "seconds": r.seconds,
                }
                for k, r in enumerate(self.layers, start=1)
            ],
        }


def _objective(h, U, T, hp, partition):
    R = module_output(U, h.H) - T
    value = float(np.sum(R * R)) + hp.alpha * float(np.sum(U * U))
    if hp.beta:
        value += hp.beta * penalty(h.H, partition, hp.penalty)
    return value


def _check_targets(X, T):
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 2 or T.shape[1] != X.shape[1]:
        raise DimMismatch("T must be C x N with N matching X", expected=X.shape[1],
                          found=T.shape[1] if T.ndim == 2 else None)
    return T


def _accuracy(Y, T):
    return float(np.mean(np.argmax(Y, axis=0) == np.argmax(T, axis=0)))


def train_module(X, T, hp: HyperParams, seed=None, *, layer=1, callback=None):
    """Train one sparse module.

    Runs exactly ``hp.epochs`` full-batch gradient steps on ``W``. For the F1
    variant ``U`` is refreshed by the closed-form solve before every step.
    After the loop ``U`` is the ridge solution for the final hidden layer.

    ``callback(epoch, W)``, if given, sees the weights after every update.

    Returns
    -------
    W, U, TrainReport
        The report holds one :class:`LayerReport`; objective values are the
        full regularized objective after each update.
    """
    X = check_features(X)
    T = _check_targets(X, T)
    seed = hp.seed if seed is None else seed
    partition = hp.partition()
    t0 = time.perf_counter()

    W = init_weights(X.shape[0], hp.hidden, seed)
    h = hidden_forward(W, X, hp.activation)
    U = solve_upper(h.H, T, hp.alpha)
    rep = LayerReport(input_dim=X.shape[0], initial_objective=_objective(h, U, T, hp, partition))

    for epoch in range(1, hp.epochs + 1):
        if hp.grad_variant is GradVariant.F1:
            grad = grad_f1(W, U, X, T, hp.beta, partition, hp.activation, hp.penalty, hidden=h)
        else:
            grad = grad_f2(W, X, T, hp.beta, partition, hp.activation, hp.penalty, hidden=h)
        W = W - hp.epsilon * grad
        if not np.all(np.isfinite(W)):
            raise DivergedTraining(layer, epoch, float("nan"), "weights")
        h = hidden_forward(W, X, hp.activation)
        try:
            U = solve_upper(h.H, T, hp.alpha)
        except SingularSystem:
            if not hp.alpha:
                raise
            # a ridge Gram matrix only loses definiteness once activations overflow
            raise DivergedTraining(layer, epoch, float(np.abs(h.H).max()),
                                   "peak activation") from None
        value = _objective(h, U, T, hp, partition)
        if not np.isfinite(value) or value > DIVERGENCE_LIMIT:
            raise DivergedTraining(layer, epoch, value)
        rep.objectives.append(value)
        if callback is not None:
            callback(epoch, W)
        log.debug("layer %d epoch %d objective %.6g", layer, epoch, value)

    Y = module_output(U, h.H)
    rep.train_accuracy = _accuracy(Y, T)
    rep.seconds = time.perf_counter() - t0
    report = TrainReport(hyperparams=hp.as_dict(), seed=seed, layers=[rep], train_outputs=Y)
    return W, U, report


def train_stack(X, T, hp: HyperParams, seed=None):
    """Train ``hp.layers`` modules, feeding ``[X; Y^k]`` to module ``k + 1``."""
    X = check_features(X)
    T = _check_targets(X, T)
    seed = hp.seed if seed is None else seed
    report = TrainReport(hyperparams=hp.as_dict(), seed=seed)
    modules = []
    Xk = X
    for k in range(1, hp.layers + 1):
        W, U, sub = train_module(Xk, T, hp, layer_seed(seed, k), layer=k)
        modules.append(SnnmModule(W, U, hp.activation))
        report.layers.extend(sub.layers)
        report.train_outputs = sub.train_outputs
        Xk = np.vstack([X, sub.train_outputs])
    model = StackModel(input_dim=X.shape[0], class_count=T.shape[0], modules=modules)
    validate_stack(model)
    return model, report


def stack_forward(model: StackModel, X):
    """Replay the stacking wiring; return per-layer hidden activations and outputs."""
    X = check_features(X)
    if X.shape[0] != model.input_dim:
        raise DimMismatch("input features do not match model", layer=1,
                          expected=model.input_dim, found=X.shape[0])
    D = model.input_dim
    # Work example-major (N x L): BLAS keeps its per-example throughput at
    # small batch sizes far better with N on the long side of the product.
    Xt = X.T
    hiddens, outputs = [], []
    Yt = None
    for mod in model.modules:
        if Yt is None:
            A = Xt @ mod.W
        else:
            # same as [X; Y]^T W without materializing the stacked input
            A = Xt @ mod.W[:D]
            A += Yt @ mod.W[D:]
        Ht = activate(A, mod.activation)
        Yt = Ht @ mod.U
        hiddens.append(Ht.T)
        outputs.append(Yt.T)
    return hiddens, outputs


def predict(model, X):
    """Argmax of the last module's output; ties go to the lowest class index."""
    _, outputs = stack_forward(model, X)
    return np.argmax(outputs[-1], axis=0)


def train_dsn_module(X, T, hidden, epsilon, alpha, epochs, seed):
    """Plain sigmoid DSN module with no sparsity term.

    Self-contained baseline: explicit ridge solve for ``U`` and the classic
    sigmoid gradient ``2 X [H^T o (1 - H^T) o (U U^T H - U T)^T]``, with ``U``
    refreshed before every step. Returns ``W``, ``U`` and the ``W`` iterates.
    """
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)

    def upper(H):
        return np.linalg.solve(H @ H.T + alpha * np.eye(H.shape[0]), H @ T.T)

    W = init_weights(X.shape[0], hidden, seed)
    iterates = []
    for _ in range(epochs):
        H = 1.0 / (1.0 + np.exp(-(W.T @ X)))
        U = upper(H)
        Ht = H.T
        W = W - epsilon * 2.0 * X @ (Ht * (1.0 - Ht) * (U @ U.T @ H - U @ T).T)
        iterates.append(W)
    H = 1.0 / (1.0 + np.exp(-(W.T @ X)))
    return W, upper(H), iterates
