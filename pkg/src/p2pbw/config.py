"""Run configuration for the command-line tools.

A config file is a JSON object holding one command's block.  Unknown keys
are rejected, numeric fields are range-checked by building the model types
they feed, and every block carries ``schema_version``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .exceptions import ConfigError, InvalidArgument
from .ou import Grid, OuParams
from .synthesis import AggregateSpec, BandwidthSpec, MultiserviceSpec
from .traffic import PowerLawParams

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "ModelConfig",
    "GridConfig",
    "GenerateConfig",
    "EstimateConfig",
    "AnalyzeConfig",
    "QueueConfig",
    "load_config_file",
]


def _build(cls, data, where):
    if data is None:
        return cls()
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        nested = f.metadata.get("nested")
        if nested is not None and value is not None:
            value = _build(nested, value, f"{where}.{f.name}")
        kwargs[f.name] = value
    return cls(**kwargs)


def _check_version(version):
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")


@dataclass
class ModelConfig:
    a: float = 1.0
    n: float = 2.5
    gamma: float = 1.0
    sigma: float = 1.0
    s0: float = 0.0
    kprime: float = 0.0
    epsilon: float = 0.0
    burn_in: int = 0

    def merged(self, overrides: dict | None) -> "ModelConfig":
        if not overrides:
            return self
        base = dataclasses.asdict(self)
        unknown = sorted(set(overrides) - set(base))
        if unknown:
            raise ConfigError(f"model override: unknown field(s) {', '.join(unknown)}")
        base.update(overrides)
        return ModelConfig(**base)

    def to_spec(self, grid: Grid) -> BandwidthSpec:
        try:
            return BandwidthSpec(
                traffic=PowerLawParams(self.a, self.n),
                ou=OuParams(self.gamma, 0.0, self.sigma, self.s0),
                grid=grid,
                kprime=self.kprime,
                epsilon=self.epsilon,
                burn_in=self.burn_in,
            )
        except InvalidArgument as exc:
            raise ConfigError(f"model: {exc}") from None


@dataclass
class GridConfig:
    dt: float = 0.01
    count: int = 10_000

    def to_grid(self) -> Grid:
        try:
            return Grid(self.dt, self.count)
        except InvalidArgument as exc:
            raise ConfigError(f"grid: {exc}") from None


@dataclass
class GenerateConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    mode: str = "individual"
    output: str = "bandwidth.csv"
    grid: GridConfig = field(default_factory=GridConfig, metadata={"nested": GridConfig})
    model: ModelConfig = field(default_factory=ModelConfig, metadata={"nested": ModelConfig})
    components: Any = 1
    services: dict | None = None
    write_components: bool = False
    write_factors: bool = False
    jobs: int = 1

    def validate(self):
        _check_version(self.schema_version)
        if self.seed is None:
            raise ConfigError("generate needs a seed (config 'seed' or --seed)")
        if self.mode not in ("individual", "aggregate", "multiservice"):
            raise ConfigError(f"mode must be individual, aggregate or multiservice, got {self.mode!r}")
        if self.mode == "multiservice" and not self.services:
            raise ConfigError("multiservice mode needs a non-empty 'services' object")
        if self.write_factors and self.mode != "individual":
            raise ConfigError("write_factors is only available in individual mode")
        return self

    def individual_spec(self) -> BandwidthSpec:
        return self.model.to_spec(self.grid.to_grid())

    def aggregate_spec(self) -> AggregateSpec:
        grid = self.grid.to_grid()
        comps = self.components
        if isinstance(comps, bool) or not isinstance(comps, (int, list)):
            raise ConfigError("components must be a count or a list of model overrides")
        if isinstance(comps, int):
            if comps < 1:
                raise ConfigError("an aggregate needs at least one component")
            comps = [{}] * comps
        return AggregateSpec([self.model.merged(c).to_spec(grid) for c in comps])

    def multiservice_spec(self) -> MultiserviceSpec:
        grid = self.grid.to_grid()
        if not isinstance(self.services, dict):
            raise ConfigError("services must map names to model overrides")
        return MultiserviceSpec({
            str(name): self.model.merged(overrides or {}).to_spec(grid)
            for name, overrides in self.services.items()
        })


@dataclass
class EstimateConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    trace: str | None = None
    traffic: str | None = None
    cutoff: float | None = None
    dt: float | None = None
    output: str = "estimate.json"

    def validate(self):
        _check_version(self.schema_version)
        if self.trace is None and self.traffic is None:
            raise ConfigError("estimate needs 'trace' and/or 'traffic'")
        if self.traffic is not None and self.cutoff is None:
            raise ConfigError("estimating n needs the traffic cutoff ('cutoff' / --cutoff)")
        return self


@dataclass
class AnalyzeConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    input: str | None = None
    input_kind: str = "trace"
    max_lag: int | None = None
    dt: float | None = None
    output: str = "analysis.json"
    model: ModelConfig | None = field(default=None, metadata={"nested": ModelConfig})
    n_boot: int = 200

    def validate(self):
        _check_version(self.schema_version)
        if self.input is None:
            raise ConfigError("analyze needs an input file")
        if self.input_kind not in ("trace", "acv"):
            raise ConfigError(f"input_kind must be 'trace' or 'acv', got {self.input_kind!r}")
        return self


@dataclass
class QueueConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    input: str | None = None
    generate: dict | None = None
    service_rate: float | None = None
    utilization: float | None = None
    hurst: float | None = None
    download_rate: float | None = None
    upload_rate: float | None = None
    var_b: float | None = None
    var_s: float | None = None
    model: ModelConfig | None = field(default=None, metadata={"nested": ModelConfig})
    burn_in: float = 0.1
    thresholds: list | None = None
    output: str = "queue.json"

    def validate(self):
        _check_version(self.schema_version)
        if (self.input is None) == (self.generate is None):
            raise ConfigError("queue needs exactly one of an input trace or a 'generate' block")
        if (self.service_rate is None) == (self.utilization is None):
            raise ConfigError("queue needs exactly one of service_rate or utilization")
        if self.utilization is not None and not 0 < self.utilization:
            raise ConfigError("utilization must be > 0")
        return self


CONFIG_TYPES = {
    "generate": GenerateConfig,
    "estimate": EstimateConfig,
    "analyze": AnalyzeConfig,
    "queue": QueueConfig,
}


def load_config_file(path, command: str) -> dict:
    """Read a JSON config; returns the raw mapping (validated on build)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "command" in data:
        if data["command"] != command:
            raise ConfigError(f"{path} is a {data['command']!r} config, not {command!r}")
        data = {k: v for k, v in data.items() if k != "command"}
    return data


def build_config(command: str, data: dict):
    return _build(CONFIG_TYPES[command], data, command).validate()
