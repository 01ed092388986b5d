"""Sparse deep stacking networks: stacked single-hidden-layer modules with a
closed-form ridge upper layer and group-sparse hidden representations."""

__version__ = "0.1.0"

from .core import (
    Activation,
    GradVariant,
    GroupPartition,
    HyperParams,
    LabelMatrix,
    Penalty,
    SnnmModule,
    StackModel,
    make_group_partition,
    one_hot_encode,
    validate_stack,
)
from .data_io import load_dataset, load_model, save_model, split, synth_blobs
from .errors import *  # noqa: F401,F403
from .metrics import accuracy, confusion, hoyer_sparseness, mean_hidden_sparseness, time_inference
from .trainer import init_weights, predict, stack_forward, train_module, train_stack

__all__ = [
    "Activation", "GradVariant", "GroupPartition", "HyperParams", "LabelMatrix", "Penalty",
    "SnnmModule", "StackModel", "make_group_partition", "one_hot_encode", "validate_stack",
    "accuracy", "confusion", "hoyer_sparseness", "mean_hidden_sparseness", "time_inference",
    "load_dataset", "load_model", "save_model", "split", "synth_blobs",
    "init_weights", "predict", "stack_forward", "train_module", "train_stack",
]
