"""Run/sweep configuration and its TOML file format.

A config file is flat TOML with one table per concern::

    seed = 0
    epochs = 10
    output_dir = "runs/train"

    [dataset]        # kind = "teacher" | "csv"
    [network]        # hidden widths, activation, loss
    [optimizer]      # OptimizerConfig fields
    [schedule]       # phases = [[start_epoch, batch_size, lr], ...]
    [discard]        # ratio, start_epoch, stop_epoch (optional table)
    [sweep]          # batch-size sweep settings
    [discard_sweep]  # ratios for the one-step discard experiment
    [theory]         # Monte-Carlo grid for theory-check

Every key is optional; missing ones take the dataclass defaults below.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import DiscardPolicy, ScheduleSpec, Dataset, gen_teacher_dataset, load_csv_dataset
from .optim import OptimizerConfig
from .tensor import ACTIVATIONS, LOSSES, Network, init_network


class ConfigError(ValueError):
    pass


@dataclass
class DatasetSpec:
    kind: str = "teacher"
    seed: int = 0
    n_samples: int = 8192
    input_dim: int = 256
    n_classes: int = 10
    teacher: str = "square"
    path: str = ""

    def build(self) -> Dataset:
        if self.kind == "teacher":
            return gen_teacher_dataset(self.seed, self.n_samples, self.input_dim, self.n_classes,
                                       activation=self.teacher)
        if self.kind == "csv":
            if not self.path:
                raise ConfigError("dataset.kind = 'csv' needs dataset.path")
            return load_csv_dataset(self.path)
        raise ConfigError(f"unknown dataset kind {self.kind!r}")


@dataclass
class NetworkSpec:
    hidden: list = field(default_factory=lambda: [64, 64])
    activation: str = "tanh"
    loss: str = "softmax_cross_entropy"

    def __post_init__(self):
        self.hidden = [int(h) for h in self.hidden]
        if any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be positive: {self.hidden}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")

    def build(self, n_in, n_out, seed) -> Network:
        import numpy as np

        widths = [n_in, *self.hidden, n_out]
        rng = np.random.default_rng([seed, 0])
        return init_network(widths, self.activation, self.loss, rng=rng)


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: ScheduleSpec = field(default_factory=lambda: ScheduleSpec.constant(256, 0.05))
    discard: DiscardPolicy | None = None
    epochs: int = 10
    seed: int = 0
    output_dir: str = "runs/train"
    record_stats: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "seed": self.seed,
            "epochs": self.epochs,
            "output_dir": self.output_dir,
            "record_stats": self.record_stats,
            "dataset": dataclasses.asdict(self.dataset),
            "network": dataclasses.asdict(self.network),
            "optimizer": self.optimizer.to_dict(),
            "schedule": {"phases": [list(p) for p in self.schedule.phases]},
            "discard": None if self.discard is None else dataclasses.asdict(self.discard),
        }

    @classmethod
    def from_dict(cls, raw) -> "RunConfig":
        raw = dict(raw)
        known = {"seed", "epochs", "output_dir", "record_stats", "dataset", "network",
                 "optimizer", "schedule", "discard", "sweep", "discard_sweep", "theory"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        try:
            optimizer = OptimizerConfig(**raw.get("optimizer", {}))
            phases = raw.get("schedule", {}).get("phases")
            schedule = (ScheduleSpec(tuple(tuple(p) for p in phases)) if phases
                        else ScheduleSpec.constant(256, optimizer.lr))
            discard = raw.get("discard")
            return cls(
                dataset=DatasetSpec(**raw.get("dataset", {})),
                network=NetworkSpec(**raw.get("network", {})),
                optimizer=optimizer,
                schedule=schedule,
                discard=DiscardPolicy(**discard) if discard else None,
                epochs=int(raw.get("epochs", 10)),
                seed=int(raw.get("seed", 0)),
                output_dir=str(raw.get("output_dir", "runs/train")),
                record_stats=bool(raw.get("record_stats", True)),
            )
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class SweepConfig:
    base: RunConfig = field(default_factory=RunConfig)
    batch_sizes: list = field(default_factory=lambda: [32, 64, 128, 256, 512, 1024, 2048, 4096])
    lr_rule: str = "fixed"
    repeats: int = 1
    layer: int = 0
    jobs: int = 1

    def __post_init__(self):
        self.batch_sizes = [int(b) for b in self.batch_sizes]
        if not self.batch_sizes:
            raise ConfigError("sweep needs at least one batch size")
        if any(b < 1 for b in self.batch_sizes):
            raise ConfigError("batch sizes must be positive")
        if any(b1 <= b0 for b0, b1 in zip(self.batch_sizes, self.batch_sizes[1:])):
            raise ConfigError("sweep batch sizes must be strictly increasing")
        if self.lr_rule not in ("fixed", "linear_in_n"):
            raise ConfigError(f"unknown lr_rule {self.lr_rule!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")

    def to_dict(self):
        return {"base": self.base.to_dict(), "batch_sizes": list(self.batch_sizes),
                "lr_rule": self.lr_rule, "repeats": self.repeats, "layer": self.layer,
                "jobs": self.jobs}


@dataclass
class DiscardSweepConfig:
    base: RunConfig = field(default_factory=RunConfig)
    ratios: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    batch_size: int = 1024
    layer: int = 1


@dataclass
class TheoryConfig:
    sigmas: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    ns: list = field(default_factory=lambda: [1, 16, 256])
    k: int = 1_000_000
    seed: int = 0
    lr: float = 0.1
    a: float = 0.5


def read_raw(path) -> dict:
    """Load a TOML config, or the ``config`` echo inside a run's summary.json."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if path.suffix == ".json":
        raw = json.loads(text)
        return raw.get("config", raw)
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_run_config(raw) -> RunConfig:
    return RunConfig.from_dict(raw)


def load_sweep_config(raw) -> SweepConfig:
    if "base" in raw:  # echo written by a previous sweep
        base, sweep = raw["base"], raw
    else:
        base, sweep = raw, raw.get("sweep", {})
    try:
        return SweepConfig(base=RunConfig.from_dict(base), **{k: v for k, v in sweep.items() if k != "base"})
    except TypeError as exc:
        raise ConfigError(f"bad [sweep] table: {exc}") from None


def load_discard_sweep_config(raw) -> DiscardSweepConfig:
    try:
        return DiscardSweepConfig(base=RunConfig.from_dict(raw), **raw.get("discard_sweep", {}))
    except TypeError as exc:
        raise ConfigError(f"bad [discard_sweep] table: {exc}") from None


def load_theory_config(raw) -> TheoryConfig:
    try:
        return TheoryConfig(**raw.get("theory", {}))
    except TypeError as exc:
        raise ConfigError(f"bad [theory] table: {exc}") from None
