"""Experiment configuration: one dataclass tree, JSON round-trippable."""

from __future__ import annotations

import dataclasses
import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .channel import ChannelParams, ComputeModel
from .data import PartitionSpec
from .nn import ModelSpec, SgdConfig

ARMS = ("soul", "retrain", "fedau_like")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def derive_seed(*keys: int | str) -> int:
    """Stable 32-bit seed from a tuple of ints/strings."""
    words = [k if isinstance(k, int) else zlib.crc32(k.encode()) for k in keys]
    return int(np.random.SeedSequence([abs(int(w)) for w in words]).generate_state(1)[0])


@dataclass(frozen=True)
class DataConfig:
    n_samples: int = 2000
    n_test: int = 500
    spread: float = 1.0
    unlearn_mode: str = "sample"
    relabel_exclude_original: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec = ModelSpec(input_dim=16, hidden_dims=(32,), num_classes=4)
    sgd: SgdConfig = SgdConfig()
    partition: PartitionSpec = PartitionSpec(num_clients=10)
    data: DataConfig = DataConfig()
    rounds: int = 60
    unlearn_clients: int = 5
    unlearn_ratio: float = 0.10
    alpha: float = 0.2
    beta: float = 0.20
    l1_fraction: float = 0.75
    prune_scope: str = "layer"
    prune_granularity: str = "weight"
    unlearn_weighting: str = "by_unlearn_count"
    unlearn_init: str = "global"
    aggregation: str = "uniform"
    distribute_unlearned: bool = False
    channel: ChannelParams = ChannelParams()
    compute: ComputeModel = ComputeModel()
    field_size: float = 10_000.0
    drone_height: float = 100.0
    tx_power: float = 3.0
    retrain_charge: str = "per_request"
    master_seed: int = 0
    seeds: int = 5
    arms: tuple[str, ...] = ARMS

    def validate(self) -> "ExperimentConfig":
        k = self.partition.num_clients
        checks = [
            (self.rounds >= 0, "rounds must be >= 0"),
            (0 <= self.unlearn_clients <= k, f"unlearn_clients must be in [0, {k}]"),
            (0 < self.unlearn_ratio < 1, "unlearn_ratio must be in (0, 1)"),
            (0 <= self.alpha <= 1, "alpha must be in [0, 1]"),
            (0 < self.beta <= 1, "beta must be in (0, 1]"),
            (0 <= self.l1_fraction < 1, "l1_fraction must be in [0, 1)"),
            (self.prune_scope in ("layer", "global"), "prune_scope must be layer|global"),
            (self.prune_granularity in ("weight", "neuron"), "prune_granularity must be weight|neuron"),
            (self.unlearn_weighting in ("by_unlearn_count", "uniform"),
             "unlearn_weighting must be by_unlearn_count|uniform"),
            (self.unlearn_init in ("global", "per_client"), "unlearn_init must be global|per_client"),
            (self.aggregation in ("uniform", "weighted"), "aggregation must be uniform|weighted"),
            (self.retrain_charge in ("per_request", "single"), "retrain_charge must be per_request|single"),
            (self.data.unlearn_mode in ("sample", "class"), "unlearn_mode must be sample|class"),
            (self.data.n_samples >= k, "fewer samples than clients"),
            (self.data.n_test >= 1, "n_test must be >= 1"),
            (self.field_size > 0 and self.drone_height > 0, "field_size and drone_height must be positive"),
            (self.tx_power > 0, "tx_power must be positive"),
            (self.seeds >= 1, "seeds must be >= 1"),
            (bool(self.arms) and set(self.arms) <= set(ARMS), f"arms must be a nonempty subset of {ARMS}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self

    def replace(self, **changes: Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        nested = {
            "model": ModelSpec,
            "sgd": SgdConfig,
            "partition": PartitionSpec,
            "data": DataConfig,
            "channel": ChannelParams,
            "compute": ComputeModel,
        }
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        base = cls()
        try:
            for key, value in raw.items():
                if key in nested:
                    merged = {**dataclasses.asdict(getattr(base, key)), **value}
                    for tuple_field in ("hidden_dims", "capacities"):
                        if tuple_field in merged:
                            merged[tuple_field] = tuple(merged[tuple_field])
                    kwargs[key] = nested[key](**merged)
                elif key == "arms":
                    kwargs[key] = tuple(value)
                else:
                    kwargs[key] = value
            return cls(**kwargs).validate()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)


def paper_config(**overrides: Any) -> ExperimentConfig:
    """Published settings: 50 drones, 200 rounds, batch 32, lr 1e-2,
    weight decay 4e-5, two local episodes, beta 0.20, 1 - alpha = 0.80.

    The model and data stay synthetic; only the published constants change.
    """
    cfg = ExperimentConfig(
        sgd=SgdConfig(learning_rate=1e-2, weight_decay=4e-5, batch_size=32, local_episodes=2),
        partition=PartitionSpec(num_clients=50),
        data=DataConfig(n_samples=10_000, n_test=2000),
        rounds=200,
        unlearn_clients=5,
        unlearn_ratio=0.10,
        alpha=0.20,
        beta=0.20,
        channel=ChannelParams(),
        field_size=10_000.0,
        drone_height=100.0,
        tx_power=3.0,
    )
    return cfg.replace(**overrides).validate()
