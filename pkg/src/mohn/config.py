"""Training configuration and its YAML file form.

The file mirrors :class:`TrainConfig` field names exactly, with nested
sections ``loss``, ``encoder``, ``data`` and ``knn``. Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .encoder import EncoderSpec
from .errors import ConfigInvalid, InvalidSpec, IoFailure, MissingFile
from .evaluation import KnnConfig
from .objective import LossConfig


@dataclass(frozen=True)
class DataConfig:
    kind: str = "synthetic"  # synthetic | csv | cifar10
    path: str = ""
    classes: int = 10
    per_class: int = 100
    dim: int = 64
    spread: float = 0.1
    seed: int = 3
    holdout_fraction: float = 0.1
    dropout_prob: float = 0.1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    sgd_momentum: float = 0.9
    weight_decay: float = 5e-4
    epochs: int = 20
    batch_size: int = 64
    queue_capacity: int = 512
    momentum_coefficient: float = 0.99
    seed: int = 0
    eval_interval: int = 1  # epochs; 0 evaluates only after the last epoch
    checkpoint_interval: int = 0  # steps; 0 keeps only the initial and final checkpoints
    output_dir: str = "runs/default"
    loss: LossConfig = field(default_factory=LossConfig)
    encoder: EncoderSpec = field(default_factory=EncoderSpec)
    data: DataConfig = field(default_factory=DataConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)

    def validate(self) -> "TrainConfig":
        if self.batch_size < 1 or self.queue_capacity < 1:
            raise ConfigInvalid("batch_size and queue_capacity must be >= 1")
        if self.queue_capacity % self.batch_size:
            raise ConfigInvalid(
                f"queue_capacity {self.queue_capacity} not divisible by batch_size {self.batch_size}")
        for name in ("learning_rate", "sgd_momentum", "weight_decay"):
            if getattr(self, name) < 0:
                raise ConfigInvalid(f"{name} must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigInvalid("learning_rate must be > 0")
        if not 0.0 <= self.momentum_coefficient <= 1.0:
            raise ConfigInvalid("momentum_coefficient must lie in [0, 1]")
        if self.epochs < 0 or self.eval_interval < 0 or self.checkpoint_interval < 0:
            raise ConfigInvalid("epochs, eval_interval, checkpoint_interval must be >= 0")
        if self.data.kind not in ("synthetic", "csv", "cifar10"):
            raise ConfigInvalid(f"data.kind {self.data.kind!r} not in synthetic|csv|cifar10")
        return self


SECTIONS = {"loss": LossConfig, "encoder": EncoderSpec, "data": DataConfig, "knn": KnnConfig}


def _coerce(name, value, default):
    if isinstance(default, bool) or default is None:
        return value
    try:
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(int(v) for v in value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"bad value for {name}: {value!r}") from None


def _build(cls, data, prefix=""):
    if not isinstance(data, dict):
        raise ConfigInvalid(f"section {prefix.rstrip('.') or '<root>'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigInvalid(f"unknown config key: {prefix}{key}")
        if cls is TrainConfig and key in SECTIONS:
            kwargs[key] = _build(SECTIONS[key], value, f"{key}.")
        else:
            kwargs[key] = _coerce(prefix + key, value, getattr(defaults, key))
    try:
        return cls(**kwargs)
    except (ValueError, InvalidSpec) as exc:
        raise ConfigInvalid(f"{prefix.rstrip('.') or 'config'}: {exc}") from exc


def from_dict(data: dict) -> TrainConfig:
    return _build(TrainConfig, data or {}).validate()


def to_dict(cfg: TrainConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["encoder"]["layer_dims"] = list(cfg.encoder.layer_dims)
    return out


def load_config(path) -> TrainConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise MissingFile(f"config file not found: {path}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config {path} is not valid YAML: {exc}") from exc
    return from_dict(data)


def dump_config(cfg: TrainConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(to_dict(cfg), fh, sort_keys=False)


def override(cfg: TrainConfig, dotted: dict) -> TrainConfig:
    """Apply ``{"loss.temperature": 0.1, "epochs": 3}``-style overrides."""
    data = to_dict(cfg)
    for key, value in dotted.items():
        head, _, tail = key.partition(".")
        if tail:
            if head not in SECTIONS or not isinstance(data.get(head), dict):
                raise ConfigInvalid(f"unknown config key: {key}")
            data[head][tail] = value
        else:
            data[head] = value
    return from_dict(data)


def paper_scale_config(**overrides) -> TrainConfig:
    """Large-scale settings: batch 256, queue 4096 (8192 for larger batches), 200 epochs."""
    return dataclasses.replace(
        TrainConfig(batch_size=256, queue_capacity=4096, epochs=200,
                    data=DataConfig(kind="cifar10", path="data/cifar-10-batches-bin"),
                    encoder=EncoderSpec((3072, 512, 128))),
        **overrides)
