"""Run configuration: flat ``key = value`` files with ``#`` comments.

Precedence is built-in defaults < config file < command-line flags.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .core import HyperParams
from .errors import ConfigError


@dataclass
class RunConfig:
    # hyperparameters
    epsilon: float = 0.1
    alpha: float = 0.5
    beta: float = 0.001
    groups: int = 4
    epochs: int = 5
    layers: int = 2
    hidden: int = 500
    activation: str = "sigmoid"
    variant: str = "F1"
    penalty: str = "mixed"
    seed: int = 42
    # data and outputs
    data: str = None
    labels: str = None
    model: str = None
    out: str = "."
    format: str = None
    classes: int = None
    repeats: int = 5
    # synthetic data
    dim: int = 20
    per_class: int = 100
    separation: float = 4.0
    noise_sd: float = 1.0

    def hyperparams(self):
        return HyperParams(
            epsilon=self.epsilon, alpha=self.alpha, beta=self.beta, groups=self.groups,
            epochs=self.epochs, layers=self.layers, hidden=self.hidden,
            activation=self.activation, grad_variant=self.variant, penalty=self.penalty,
            seed=self.seed,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_TYPES = {"epsilon": float, "alpha": float, "beta": float, "separation": float,
          "noise_sd": float, "groups": int, "epochs": int, "layers": int, "hidden": int,
          "seed": int, "classes": int, "repeats": int, "dim": int, "per_class": int}


def _coerce(key, raw):
    conv = _TYPES.get(key, str)
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {conv.__name__}") from None


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides=None):
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(parse_config_text(fh.read(), str(path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, val) if isinstance(val, str) else val
    return RunConfig(**values)
