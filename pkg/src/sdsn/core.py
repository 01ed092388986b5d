"""Data model shared by the rest of the package.

All matrices are stored column-per-example: a feature matrix is ``D x N``,
hidden activations are ``L x N`` and targets are ``C x N``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DimMismatch,
    InvariantViolation,
    LabelOutOfRange,
    NonDivisible,
    NonFinite,
)


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"


class GradVariant(str, enum.Enum):
    F1 = "F1"  # U held fixed
    F2 = "F2"  # U replaced by its closed form (alpha = 0)


class Penalty(str, enum.Enum):
    MIXED = "mixed"
    L1 = "l1"


def _enum(cls, value):
    if isinstance(value, cls):
        return value
    for member in cls:
        if str(value).lower() == member.value.lower():
            return member
    choices = ", ".join(m.value for m in cls)
    raise ConfigError(f"unknown {cls.__name__} {value!r}; choose from {choices}")


def check_features(X, name="X"):
    """Return ``X`` as a 2-D float64 array, rejecting empty or non-finite input."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimMismatch(f"{name} must be a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        r, c = np.argwhere(~np.isfinite(X))[0]
        raise NonFinite(f"{name} has a non-finite value at row {r}, column {c}")
    return X


@dataclass(frozen=True)
class GroupPartition:
    """Contiguous, equal-size, non-overlapping groups of hidden units."""

    hidden_units: int
    group_count: int

    def __post_init__(self):
        if self.hidden_units < 1 or self.group_count < 1:
            raise ConfigError("hidden units and group count must be >= 1")
        if self.hidden_units % self.group_count:
            raise NonDivisible(self.hidden_units, self.group_count)

    @property
    def group_size(self):
        return self.hidden_units // self.group_count

    @property
    def assignment(self):
        s = self.group_size
        return [range(g * s, (g + 1) * s) for g in range(self.group_count)]

    def group_of(self):
        """Group index of every hidden unit, as an ``L``-vector."""
        return np.arange(self.hidden_units) // self.group_size


def make_group_partition(L, G):
    return GroupPartition(int(L), int(G))


@dataclass(frozen=True)
class LabelMatrix:
    onehot: np.ndarray
    labels: np.ndarray

    @property
    def classes(self):
        return self.onehot.shape[0]

    @property
    def cols(self):
        return self.onehot.shape[1]


def one_hot_encode(labels, C):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimMismatch(f"labels must be a vector, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        bad = labels[(labels < 0) | (labels >= C)][0]
        raise LabelOutOfRange(f"LabelOutOfRange: label {bad} not in [0, {C})")
    labels = labels.astype(np.int64)
    T = np.zeros((C, labels.size))
    T[labels, np.arange(labels.size)] = 1.0
    return LabelMatrix(onehot=T, labels=labels)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SnnmModule:
    """One stacking module: lower weights ``W`` (D_k x L), upper weights ``U`` (L x C)."""

    W: np.ndarray
    U: np.ndarray
    activation: Activation = Activation.SIGMOID

    def __post_init__(self):
        object.__setattr__(self, "W", _frozen(self.W))
        object.__setattr__(self, "U", _frozen(self.U))
        object.__setattr__(self, "activation", _enum(Activation, self.activation))

    @property
    def input_dim(self):
        return self.W.shape[0]

    @property
    def hidden(self):
        return self.W.shape[1]

    @property
    def classes(self):
        return self.U.shape[1]


@dataclass(frozen=True)
class StackModel:
    input_dim: int
    class_count: int
    modules: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))

    @property
    def layers(self):
        return len(self.modules)


def validate_stack(model):
    """Check the wiring invariants of a stack; raise on the first violation.

    Layer numbers in errors are 1-based.
    """
    if model.layers < 1:
        raise InvariantViolation("at least one module")
    D, C = model.input_dim, model.class_count
    for k, mod in enumerate(model.modules, start=1):
        if mod.W.ndim != 2 or mod.U.ndim != 2:
            raise DimMismatch("weights must be matrices", layer=k)
        expected = D if k == 1 else D + C
        if mod.W.shape[0] != expected:
            raise DimMismatch("input dimension", layer=k, expected=expected, found=mod.W.shape[0])
        if mod.U.shape[0] != mod.W.shape[1]:
            raise DimMismatch("U rows must equal W columns", layer=k,
                              expected=mod.W.shape[1], found=mod.U.shape[0])
        if mod.U.shape[1] != C:
            raise DimMismatch("class count", layer=k, expected=C, found=mod.U.shape[1])
        if not (np.all(np.isfinite(mod.W)) and np.all(np.isfinite(mod.U))):
            raise InvariantViolation("finiteness", layer=k)


@dataclass(frozen=True)
class HyperParams:
    """Training configuration for a whole stack.

    ``alpha`` is the ridge weight of the closed-form upper solve. The F2
    gradient always uses ``alpha = 0`` internally; ``alpha`` still applies to
    the final upper solve of each module.
    """

    epsilon: float = 0.1
    alpha: float = 0.5
    beta: float = 0.001
    groups: int = 4
    epochs: int = 5
    layers: int = 2
    hidden: int = 500
    activation: Activation = Activation.SIGMOID
    grad_variant: GradVariant = GradVariant.F1
    penalty: Penalty = Penalty.MIXED
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "activation", _enum(Activation, self.activation))
        object.__setattr__(self, "grad_variant", _enum(GradVariant, self.grad_variant))
        object.__setattr__(self, "penalty", _enum(Penalty, self.penalty))
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        for name in ("groups", "epochs", "layers", "hidden"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden % self.groups:
            raise NonDivisible(self.hidden, self.groups)

    def partition(self):
        return GroupPartition(self.hidden, self.groups)

    def as_dict(self):
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "beta": self.beta,
            "groups": self.groups,
            "epochs": self.epochs,
            "layers": self.layers,
            "hidden": self.hidden,
            "activation": self.activation.value,
            "variant": self.grad_variant.value,
            "penalty": self.penalty.value,
            "seed": self.seed,
        }
