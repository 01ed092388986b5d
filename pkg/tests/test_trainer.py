import numpy as np
import pytest

from sdsn.core import HyperParams, SnnmModule, StackModel, one_hot_encode, validate_stack
from sdsn.data_io import split, synth_blobs
from sdsn.errors import ConfigError, DimMismatch, DivergedTraining
from sdsn.metrics import accuracy
from sdsn.snnm import grad_f1, hidden_forward, solve_upper
from sdsn.trainer import (
    init_weights,
    layer_seed,
    predict,
    stack_forward,
    train_dsn_module,
    train_module,
    train_stack,
)


@pytest.fixture(scope="module")
def blobs3():
    b = synth_blobs(3, 10, 50, 4.0, 1.0, seed=3)
    return b.features, one_hot_encode(b.labels, 3).onehot


def test_init_deterministic():
    np.testing.assert_array_equal(init_weights(7, 5, 11), init_weights(7, 5, 11))


def test_init_statistics():
    W = init_weights(500, 500, 0)
    assert -0.001 < W.mean() < 0.001
    assert 0.009 < W.std() < 0.011


def test_init_seeds_differ():
    assert np.mean(init_weights(50, 50, 1) != init_weights(50, 50, 2)) >= 0.99


def test_zero_epochs_rejected():
    with pytest.raises(ConfigError):
        HyperParams(epochs=0)


def test_single_epoch_is_one_update(blobs3):
    X, T = blobs3
    hp = HyperParams(epsilon=0.1, alpha=0.5, beta=0.001, groups=4, hidden=20, epochs=1)
    seen = []
    W, U, rep = train_module(X, T, hp, seed=5, callback=lambda e, w: seen.append(e))
    assert seen == [1] and len(rep.layers[0].objectives) == 1
    W0 = init_weights(10, 20, 5)
    U0 = solve_upper(hidden_forward(W0, X, "sigmoid").H, T, 0.5)
    expected = W0 - 0.1 * grad_f1(W0, U0, X, T, 0.001, hp.partition(), "sigmoid")
    np.testing.assert_array_equal(W, expected)


def test_beta_zero_matches_dsn_baseline(blobs3):
    X, T = blobs3
    hp = HyperParams(epsilon=0.1, alpha=0.5, beta=0.0, groups=4, hidden=20, epochs=5)
    iterates = []
    W, U, _ = train_module(X, T, hp, seed=9, callback=lambda e, w: iterates.append(w))
    Wd, Ud, ref = train_dsn_module(X, T, 20, 0.1, 0.5, 5, seed=9)
    for a, b in zip(iterates, ref):
        assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-12
    assert np.linalg.norm(U - Ud) / np.linalg.norm(Ud) < 1e-10


def test_training_descends(blobs3):
    X, T = blobs3
    hp = HyperParams(epsilon=0.1, alpha=0.5, beta=0.001, groups=4, hidden=20, epochs=5)
    _, _, rep = train_module(X, T, hp, seed=0)
    layer = rep.layers[0]
    assert len(layer.objectives) == 5
    assert layer.objectives[-1] < layer.initial_objective


def test_stored_upper_is_closed_form(blobs3):
    X, T = blobs3
    hp = HyperParams(alpha=0.5, hidden=20, groups=4, layers=2)
    model, _ = train_stack(X, T, hp)
    hiddens, _ = stack_forward(model, X)
    for mod, H in zip(model.modules, hiddens):
        np.testing.assert_allclose(mod.U, solve_upper(H, T, 0.5), rtol=1e-10, atol=1e-12)


def test_single_layer_stack_equals_module(blobs3):
    X, T = blobs3
    hp = HyperParams(hidden=20, groups=4, layers=1)
    model, _ = train_stack(X, T, hp, seed=4)
    W, U, _ = train_module(X, T, hp, seed=4)
    np.testing.assert_array_equal(model.modules[0].W, W)
    np.testing.assert_array_equal(model.modules[0].U, U)


def test_second_layer_sees_input_and_output(blobs3):
    X, T = blobs3
    model, rep = train_stack(X, T, HyperParams(hidden=20, groups=4, layers=2))
    assert model.modules[1].input_dim == 10 + 3
    assert [r.input_dim for r in rep.layers] == [10, 13]
    validate_stack(model)


def test_stack_deterministic(blobs3):
    X, T = blobs3
    hp = HyperParams(hidden=20, groups=4, layers=2, activation="relu", epsilon=0.01)
    a, _ = train_stack(X, T, hp, seed=8)
    b, _ = train_stack(X, T, hp, seed=8)
    for ma, mb in zip(a.modules, b.modules):
        assert ma.W.tobytes() == mb.W.tobytes() and ma.U.tobytes() == mb.U.tobytes()
    assert layer_seed(8, 1) == 8 and layer_seed(8, 2) != 8


def test_layer_two_training_accuracy_not_worse():
    # same blob protocol as the acceptance suite (ReLU S-DSN, eps=0.01)
    hp = HyperParams(epsilon=0.01, alpha=0.5, beta=0.05, groups=4, hidden=40, layers=2,
                     activation="relu")
    acc1, acc2 = [], []
    for seed in range(10):
        b = synth_blobs(5, 20, 100, 4.0, 1.0, seed)
        tr, _ = split(b, train_per_class=50, seed=seed)
        _, rep = train_stack(tr.features, one_hot_encode(tr.labels, 5).onehot, hp, seed=seed)
        acc1.append(rep.layers[0].train_accuracy)
        acc2.append(rep.layers[1].train_accuracy)
    assert np.mean(acc2) >= np.mean(acc1)


def test_forward_replays_training(blobs3):
    X, T = blobs3
    model, rep = train_stack(X, T, HyperParams(hidden=20, groups=4, layers=2))
    _, outputs = stack_forward(model, X)
    np.testing.assert_allclose(outputs[-1], rep.train_outputs, rtol=0, atol=1e-12)


def test_forward_single_column_and_batching(blobs3):
    X, T = blobs3
    model, _ = train_stack(X, T, HyperParams(hidden=20, groups=4, layers=3))
    hiddens, outputs = stack_forward(model, X[:, :1])
    assert [Y.shape for Y in outputs] == [(3, 1)] * 3
    _, batch = stack_forward(model, X)
    cols = np.hstack([stack_forward(model, X[:, [i]])[1][-1] for i in range(X.shape[1])])
    np.testing.assert_allclose(batch[-1], cols, rtol=1e-12, atol=1e-12)


def test_forward_dim_mismatch(blobs3):
    X, T = blobs3
    model, _ = train_stack(X, T, HyperParams(hidden=20, groups=4, layers=1))
    with pytest.raises(DimMismatch):
        stack_forward(model, X[:5])


def _passthrough_model():
    # relu with identity weights returns its (nonnegative) input unchanged
    return StackModel(3, 3, [SnnmModule(np.eye(3), np.eye(3), "relu")])


def test_predict_argmax_and_ties():
    X = np.array([[0.1, 0.5], [0.9, 0.5], [0.3, 0.0]])
    np.testing.assert_array_equal(predict(_passthrough_model(), X), [1, 0])


def test_predict_blobs_with_defaults():
    b = synth_blobs(5, 20, 100, 4.0, 1.0, seed=0)
    tr, te = split(b, train_per_class=50, seed=0)
    model, _ = train_stack(tr.features, one_hot_encode(tr.labels, 5).onehot, HyperParams())
    assert accuracy(predict(model, te.features), te.labels) > 0.9


def test_f2_training_uses_ridge_for_final_upper(blobs3):
    X, T = blobs3
    hp = HyperParams(hidden=20, groups=4, layers=1, grad_variant="F2", alpha=0.5, epsilon=0.01)
    W, U, rep = train_module(X, T, hp)
    np.testing.assert_allclose(U, solve_upper(hidden_forward(W, X, "sigmoid").H, T, 0.5), rtol=1e-12)
    assert np.all(np.isfinite(rep.layers[0].objectives))


def test_divergence_detected(blobs3):
    X, T = blobs3
    hp = HyperParams(epsilon=1e6, beta=0.1, hidden=500, groups=4, activation="relu")
    with pytest.raises(DivergedTraining):
        train_stack(X, T, hp)
