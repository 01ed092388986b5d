"""Per-module mathematics: forward maps, objectives, the closed-form upper
solve and the two lower-weight gradients.

Shapes follow the column-per-example convention::

    X : D x N     W : D x L     A = W.T @ X, H = phi(A) : L x N
    T : C x N     U : L x C     Y = U.T @ H : C x N
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.special import expit

from .core import Activation, Penalty, _enum
from .errors import DimMismatch, SingularSystem

JITTER = 1e-10


def activate(A, kind):
    kind = _enum(Activation, kind)
    if kind is Activation.SIGMOID:
        return expit(A)
    return np.maximum(A, 0.0)


def activate_grad(A, kind):
    """Elementwise derivative of the activation, evaluated on preactivations.

    The ReLU derivative is 0 at exactly ``a = 0``.
    """
    kind = _enum(Activation, kind)
    if kind is Activation.SIGMOID:
        s = expit(A)
        return s * (1.0 - s)
    return (A > 0).astype(np.float64)


@dataclass(frozen=True)
class HiddenActivations:
    A: np.ndarray  # preactivations, kept so the derivative never has to invert phi
    H: np.ndarray
    kind: Activation

    def dphi(self):
        return activate_grad(self.A, self.kind)


def hidden_forward(W, X, kind):
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if W.ndim != 2 or X.ndim != 2 or W.shape[0] != X.shape[0]:
        raise DimMismatch("W rows must equal X rows", expected=X.shape[0] if X.ndim == 2 else None,
                          found=W.shape[0] if W.ndim == 2 else None)
    A = W.T @ X
    kind = _enum(Activation, kind)
    return HiddenActivations(A=A, H=activate(A, kind), kind=kind)


def _gram_factor(H, alpha):
    """Cholesky factor of ``H @ H.T + alpha * I``.

    With ``alpha == 0`` a failed factorization is retried once with a jitter of
    ``1e-10 * trace / L`` on the diagonal before giving up.
    """
    gram = H @ H.T
    L = gram.shape[0]
    if alpha:
        gram[np.diag_indices(L)] += alpha
    try:
        return la.cho_factor(gram, lower=True, check_finite=False)
    except la.LinAlgError:
        if alpha:
            raise SingularSystem(f"ridge Gram matrix not positive definite (alpha={alpha})")
    jitter = JITTER * np.trace(gram) / L
    if not jitter > 0:
        raise SingularSystem("Gram matrix is zero")
    gram[np.diag_indices(L)] += jitter
    try:
        return la.cho_factor(gram, lower=True, check_finite=False)
    except la.LinAlgError:
        raise SingularSystem(f"Gram matrix singular even with jitter {jitter:.3g}") from None


def solve_upper(H, T, alpha):
    """Closed-form ridge solution ``U = (H H^T + alpha I)^{-1} H T^T``."""
    H = np.asarray(H, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if H.shape[1] != T.shape[1]:
        raise DimMismatch("H and T must have the same number of columns",
                          expected=H.shape[1], found=T.shape[1])
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return la.cho_solve(_gram_factor(H, alpha), H @ T.T, check_finite=False)


def pseudo_inverse(H):
    """Right pseudo-inverse ``H^T (H H^T)^{-1}`` (N x L) of a full-row-rank ``H``."""
    return la.cho_solve(_gram_factor(H, 0.0), H, check_finite=False).T


def group_norms(H, partition):
    """Matrix of group norms, broadcast back to every unit of the group."""
    H = np.asarray(H, dtype=np.float64)
    if H.shape[0] != partition.hidden_units:
        raise DimMismatch("hidden units do not match partition",
                          expected=partition.hidden_units, found=H.shape[0])
    G, s = partition.group_count, partition.group_size
    norms = np.sqrt(np.sum((H * H).reshape(G, s, -1), axis=1))
    return np.repeat(norms, s, axis=0)


def penalty(H, partition, kind=Penalty.MIXED):
    """Mixed l1/l2 norm summed over groups and examples, or plain l1."""
    H = np.asarray(H, dtype=np.float64)
    if H.shape[0] != partition.hidden_units:
        raise DimMismatch("hidden units do not match partition",
                          expected=partition.hidden_units, found=H.shape[0])
    if _enum(Penalty, kind) is Penalty.L1:
        return float(np.abs(H).sum())
    G, s = partition.group_count, partition.group_size
    return float(np.sqrt(np.sum((H * H).reshape(G, s, -1), axis=1)).sum())


def penalty_grad(H, partition, kind=Penalty.MIXED):
    """Derivative of the penalty with respect to ``H``.

    Entries of all-zero groups (and zero entries for l1) get 0, a valid
    subgradient, so dead ReLU groups never produce NaN.
    """
    if _enum(Penalty, kind) is Penalty.L1:
        return np.sign(H)
    norms = group_norms(H, partition)
    out = np.zeros_like(H)
    np.divide(H, norms, out=out, where=norms > 0)
    return out


def module_output(U, H):
    U = np.asarray(U, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if U.shape[0] != H.shape[0]:
        raise DimMismatch("U rows must equal hidden units", expected=H.shape[0], found=U.shape[0])
    return U.T @ H


def _squared_error(U, H, T):
    R = module_output(U, H) - T
    return float(np.sum(R * R))


def objective_f1(W, U, X, T, beta, partition, kind, penalty_kind=Penalty.MIXED):
    """Squared error plus sparsity penalty, with ``U`` held fixed."""
    h = hidden_forward(W, X, kind)
    value = _squared_error(U, h.H, T)
    if beta:
        value += beta * penalty(h.H, partition, penalty_kind)
    return value


def objective_full(W, U, X, T, hp, partition=None):
    partition = partition or hp.partition()
    value = objective_f1(W, U, X, T, hp.beta, partition, hp.activation, hp.penalty)
    return value + hp.alpha * float(np.sum(np.asarray(U) ** 2))


def objective_f2(W, X, T, beta, partition, kind, penalty_kind=Penalty.MIXED):
    """Objective with ``U`` replaced by its unregularized closed form."""
    h = hidden_forward(W, X, kind)
    U = solve_upper(h.H, T, 0.0)
    value = _squared_error(U, h.H, T)
    if beta:
        value += beta * penalty(h.H, partition, penalty_kind)
    return value


def _lower_grad(X, h, dH, beta, partition, penalty_kind):
    if beta:
        dH = dH + beta * penalty_grad(h.H, partition, penalty_kind)
    return X @ (h.dphi() * dH).T


def grad_f1(W, U, X, T, beta, partition, kind, penalty_kind=Penalty.MIXED, hidden=None):
    """Gradient of :func:`objective_f1` with respect to ``W`` (D x L).

    ``hidden`` may carry a precomputed forward pass for ``(W, X)``.
    """
    X = np.asarray(X, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    h = hidden if hidden is not None else hidden_forward(W, X, kind)
    if U.shape[0] != h.H.shape[0] or U.shape[1] != np.shape(T)[0]:
        raise DimMismatch("U must be L x C", expected=(h.H.shape[0], np.shape(T)[0]), found=U.shape)
    dH = 2.0 * (U @ (U.T @ h.H) - U @ T)
    return _lower_grad(X, h, dH, beta, partition, penalty_kind)


def grad_f2(W, X, T, beta, partition, kind, penalty_kind=Penalty.MIXED, hidden=None):
    """Gradient of :func:`objective_f2` with respect to ``W`` (D x L).

    The data term is ``2 X [dphi(H^T) o (P (H T^T)(T P) - T^T (T P))]`` with
    ``P`` the right pseudo-inverse of ``H``, evaluated left to right.
    """
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    h = hidden if hidden is not None else hidden_forward(W, X, kind)
    if T.shape[1] != h.H.shape[1]:
        raise DimMismatch("T must have N columns", expected=h.H.shape[1], found=T.shape[1])
    P = pseudo_inverse(h.H)
    TP = T @ P
    R = (P @ (h.H @ T.T)) @ TP - T.T @ TP  # N x L
    return _lower_grad(X, h, 2.0 * R.T, beta, partition, penalty_kind)
