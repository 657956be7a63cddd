"""Run configuration: flat ``key = value`` files with command-line overrides.

Precedence is defaults < file < flags. Tuple-valued keys take comma-separated
values. Lines starting with ``#`` are comments. Relative paths are resolved
against the working directory.
"""

from __future__ import annotations

import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

from .ensemble import EnsembleConfig
from .tagger.config import ModelConfig, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # inputs and outputs
    train: str | None = None
    valid: str | None = None
    input: str | None = None
    gold: str | None = None
    pred: str | None = None
    models: str | None = None
    checkpoint: str | None = None
    out: str | None = None
    deps: tuple[str, ...] = ()
    lexicon: str | None = None
    frozen: tuple[str, ...] = ()
    # model
    variant: str = ModelConfig.variant
    embed_dim: int = ModelConfig.embed_dim
    gat_dims: tuple[int, ...] = ModelConfig.gat_dims
    gat_heads: tuple[int, ...] = ModelConfig.gat_heads
    gat_final_activation: str = ModelConfig.gat_final_activation
    leaky_slope: float = ModelConfig.leaky_slope
    lstm_hidden: int = ModelConfig.lstm_hidden
    max_len: int = ModelConfig.max_len
    # training
    batch_size: int = TrainConfig.batch_size
    learning_rate: float = TrainConfig.learning_rate
    epochs: int = TrainConfig.epochs
    dropout: float = TrainConfig.dropout
    seed: int = TrainConfig.seed
    # ensemble and tuning
    theta1: float = EnsembleConfig.theta1
    theta2: float = EnsembleConfig.theta2
    theta3: float = EnsembleConfig.theta3
    tie_break: str = EnsembleConfig.tie_break
    objective: str = EnsembleConfig.objective
    grid: tuple[float, ...] = ()
    # misc
    farm_size: int = 5
    graph_kind: str = "dependency"
    format: str = "tsv"
    explicit: frozenset[str] = field(default=frozenset(), compare=False, repr=False)

    def __post_init__(self):
        try:
            self.model_config(frozen_dim=1)
            self.train_config()
            self.ensemble_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.graph_kind not in ("dependency", "lexicon"):
            raise ConfigError(f"graph_kind must be dependency or lexicon, got {self.graph_kind!r}")
        if self.format not in ("tsv", "table"):
            raise ConfigError(f"format must be tsv or table, got {self.format!r}")
        if self.farm_size < 1:
            raise ConfigError("farm_size must be >= 1")
        if any(not 0.0 <= g <= 1.0 for g in self.grid):
            raise ConfigError("grid values must lie in [0, 1]")

    def model_config(self, frozen_dim: int = 0) -> ModelConfig:
        return ModelConfig(variant=self.variant, embed_dim=self.embed_dim, gat_dims=self.gat_dims,
                           gat_heads=self.gat_heads, gat_final_activation=self.gat_final_activation,
                           leaky_slope=self.leaky_slope, lstm_hidden=self.lstm_hidden,
                           frozen_dim=frozen_dim, max_len=self.max_len)

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
                           epochs=self.epochs, dropout=self.dropout,
                           seed=self.seed if seed is None else seed)

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(self.theta1, self.theta2, self.theta3, self.tie_break, self.objective)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["explicit"]
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def require(self, *keys: str) -> None:
        for k in keys:
            if getattr(self, k) in (None, ()):
                raise ConfigError(f"missing required setting {k!r} (--{k.replace('_', '-')})")


_HINTS = typing.get_type_hints(RunConfig)
KEYS = tuple(f.name for f in fields(RunConfig) if f.name != "explicit")


def _convert(key: str, raw: str):
    hint = _HINTS[key]
    text = raw.strip()
    args = typing.get_args(hint)
    try:
        if typing.get_origin(hint) is tuple:
            if not text:
                return ()
            return tuple(args[0](x.strip()) for x in text.split(","))
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        return text or None
    except ValueError:
        name = args[0].__name__ if args and args[0] is not type(None) else hint.__name__
        raise ConfigError(f"{key}: expected {name}, got {raw.strip()!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected `key = value`")
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return values


def load_config(path=None, overrides: Mapping[str, object] | None = None) -> RunConfig:
    """Resolve defaults, then the file at ``path``, then ``overrides`` (strings are parsed)."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _convert(key, value) if isinstance(value, str) else value
    return RunConfig(**values, explicit=frozenset(values))


def format_config(cfg: RunConfig, keys=None) -> str:
    out = []
    for k in keys or KEYS:
        v = getattr(cfg, k)
        if v is None:
            continue
        out.append(f"{k} = {','.join(map(str, v)) if isinstance(v, tuple) else v}")
    return "\n".join(out) + "\n"
