import numpy as np
import pytest

from sdsn.core import make_group_partition, one_hot_encode


def scalar_objective(W, U, X, T, alpha, beta, groups, kind, penalty="mixed"):
    """Loop-by-loop reference for the full regularized module objective."""
    D, L = len(W), len(W[0])
    C, N = len(T), len(T[0])
    size = L // groups
    H = [[0.0] * N for _ in range(L)]
    for j in range(L):
        for i in range(N):
            a = 0.0
            for d in range(D):
                a += W[d][j] * X[d][i]
            H[j][i] = 1.0 / (1.0 + np.exp(-a)) if kind == "sigmoid" else max(a, 0.0)
    err = 0.0
    for c in range(C):
        for i in range(N):
            y = 0.0
            for j in range(L):
                y += U[j][c] * H[j][i]
            err += (y - T[c][i]) ** 2
    ridge = sum(U[j][c] ** 2 for j in range(L) for c in range(C))
    pen = 0.0
    for i in range(N):
        if penalty == "l1":
            pen += sum(abs(H[j][i]) for j in range(L))
        else:
            for g in range(groups):
                pen += np.sqrt(sum(H[j][i] ** 2 for j in range(g * size, (g + 1) * size)))
    return err + alpha * ridge + beta * pen


@pytest.fixture
def instance():
    """Random small module problem (D=6, L=8, N=10, C=3, G=4)."""
    rng = np.random.default_rng(7)
    D, L, N, C = 6, 8, 10, 3
    W = rng.standard_normal((D, L))
    U = rng.standard_normal((L, C))
    X = rng.standard_normal((D, N))
    T = one_hot_encode(rng.integers(0, C, N), C).onehot
    return W, U, X, T, make_group_partition(L, 4)


def interleaved_times(cases, rounds=7, repeats=5):
    """Per-example ms for each ``(model, X)`` case: the fastest of several
    round-robin rounds, so background load on a busy machine hits every case
    alike and transient stalls drop out."""
    from sdsn.metrics import time_inference

    samples = {k: [] for k in cases}
    for _ in range(rounds):
        for k, (model, X) in cases.items():
            samples[k].append(time_inference(model, X, repeats=repeats))
    return {k: min(v) for k, v in samples.items()}


def timing_model(D, L, C, K=2, seed=0):
    from sdsn.core import SnnmModule, StackModel

    rng = np.random.default_rng(seed)
    mods = []
    for k in range(K):
        d = D if k == 0 else D + C
        mods.append(SnnmModule(0.01 * rng.standard_normal((d, L)), rng.standard_normal((L, C)), "relu"))
    return StackModel(D, C, mods)
