"""Model and training configuration.

Defaults mirror the full-size setup (ELECTRA-large encoder: 1024 hidden
units, 16 heads, 24 layers; GAT 512x8 then 1024x8; LSTM 2048; batch 32,
lr 2e-5, 120 epochs). The encoder here is a trainable character embedding,
so ``embed_dim`` stands in for the encoder width. :func:`toy_profile` gives
the desk-scale sizes used in tests and scripts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

VARIANTS = ("A", "B", "C")
UNK = "<unk>"


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "A"
    vocab: tuple[str, ...] = (UNK,)
    embed_dim: int = 1024
    gat_dims: tuple[int, ...] = (512, 1024)
    gat_heads: tuple[int, ...] = (8, 8)
    gat_final_activation: str = "identity"
    leaky_slope: float = 0.2
    lstm_hidden: int = 2048
    frozen_dim: int = 0
    max_len: int = 128

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if len(self.gat_dims) != len(self.gat_heads):
            raise ValueError("gat_dims and gat_heads must have the same length")
        if min((self.embed_dim, self.lstm_hidden, self.max_len, *self.gat_dims, *self.gat_heads)) < 1:
            raise ValueError("all widths must be positive")
        if self.variant == "B" and self.frozen_dim < 1:
            raise ValueError("variant B needs frozen_dim >= 1")
        if not self.vocab or self.vocab[0] != UNK:
            raise ValueError(f"vocabulary must start with {UNK}")

    @property
    def uses_graph(self) -> bool:
        return self.variant in ("A", "C")

    @property
    def uses_lstm(self) -> bool:
        return self.variant in ("A", "B")

    @property
    def gat_output_width(self) -> int:
        return self.gat_dims[-1] if self.gat_dims else 0

    def char_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.vocab)}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vocab"] = list(self.vocab)
        d["gat_dims"] = list(self.gat_dims)
        d["gat_heads"] = list(self.gat_heads)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        d = dict(d)
        for k in ("vocab", "gat_dims", "gat_heads"):
            d[k] = tuple(d[k])
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 2e-5
    epochs: int = 120
    dropout: float = 0.1
    seed: int = 0
    objective: str = "nll"

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.objective != "nll":
            raise ValueError("only the CRF negative log-likelihood objective is supported")


TOY_MODEL = dict(embed_dim=48, gat_dims=(16, 16), gat_heads=(2, 2), lstm_hidden=64)
TOY_TRAIN = dict(learning_rate=3e-3, batch_size=8, dropout=0.1)


def toy_profile(model: ModelConfig | None = None, train: TrainConfig | None = None,
                **overrides) -> tuple[ModelConfig, TrainConfig]:
    model = replace(model or ModelConfig(), **TOY_MODEL)
    train = replace(train or TrainConfig(), **TOY_TRAIN)
    m_fields = {k: v for k, v in overrides.items() if hasattr(model, k)}
    t_fields = {k: v for k, v in overrides.items() if hasattr(train, k)}
    unknown = set(overrides) - set(m_fields) - set(t_fields)
    if unknown:
        raise TypeError(f"unknown override(s): {sorted(unknown)}")
    return replace(model, **m_fields), replace(train, **t_fields)


def build_vocab(texts) -> tuple[str, ...]:
    return (UNK,) + tuple(sorted({c for t in texts for c in t}))
