"""Mini-batch training with Adam, Viterbi prediction, and input windowing."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from ..corpus import PredictionSet, Sentence, bio_to_spans, encodable_subset, spans_to_bio
from ..crf import viterbi_decode
from ..evaluate import evaluate
from ..graphs import CharGraph
from ..numerics import AdamState, adam_step, split_rngs
from .checkpoint import Checkpoint
from .config import UNK, ModelConfig, TrainConfig, build_vocab
from .model import MissingInputError, init_params, model_forward, sentence_loss

log = logging.getLogger(__name__)


class NumericError(FloatingPointError):
    pass


@dataclass
class Instance:
    sid: str
    offset: int  # 0-based position of this window in the sentence
    ids: np.ndarray
    tags: list[int] | None
    graph: CharGraph | None
    frozen: np.ndarray | None


def windows(n: int, max_len: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + max_len, n)) for lo in range(0, n, max_len)]


def make_instances(sentences: Sequence[Sentence], config: ModelConfig,
                   graphs: Mapping[str, CharGraph] | None = None,
                   frozen: Mapping[str, np.ndarray] | None = None,
                   with_tags: bool = True) -> list[Instance]:
    """Split sentences into ``max_len`` windows carrying ids, tags, subgraphs and frozen rows."""
    index = config.char_index()
    out = []
    for s in sentences:
        g = f = None
        if config.uses_graph:
            if graphs is None or s.id not in graphs:
                raise MissingInputError(f"no graph for sentence {s.id!r}")
            g = graphs[s.id]
            if g.n != len(s):
                raise ValueError(f"{s.id}: graph has {g.n} nodes for {len(s)} characters")
        if config.variant == "B":
            if frozen is None or s.id not in frozen:
                raise MissingInputError(f"no frozen features for sentence {s.id!r}")
            f = np.asarray(frozen[s.id])
            if f.shape[0] != len(s):
                raise ValueError(f"{s.id}: frozen rows {f.shape[0]} != {len(s)} characters")
        ids = np.array([index.get(c, 0) for c in s.chars], dtype=int)
        tags = spans_to_bio(encodable_subset(s.gold), len(s)) if with_tags else None
        for lo, hi in windows(len(s), config.max_len):
            out.append(Instance(
                s.id, lo, ids[lo:hi], tags[lo:hi] if tags is not None else None,
                g.subgraph(lo, hi) if g is not None and (lo, hi) != (0, len(s)) else g,
                f[lo:hi] if f is not None else None))
    return out


def train(sentences: Sequence[Sentence], model_config: ModelConfig, train_config: TrainConfig,
          graphs=None, frozen=None, valid: tuple | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> tuple[Checkpoint, list[dict]]:
    """Fit a tagger; returns the final checkpoint and one metrics record per epoch.

    ``valid`` is an optional ``(sentences, graphs, frozen)`` triple scored after every epoch.
    """
    if not sentences:
        raise ValueError("training corpus is empty")
    if model_config.vocab == (UNK,):
        model_config = replace(model_config, vocab=build_vocab(s.chars for s in sentences))
    seed = train_config.seed
    params = init_params(model_config, seed)
    shuffle_rng, drop_rng = split_rngs(seed, 6)[4:]
    instances = make_instances(sentences, model_config, graphs, frozen)
    state = AdamState(lr=train_config.learning_rate)
    history = []
    bs = train_config.batch_size
    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(len(instances))
        epoch_loss = 0.0
        for b, lo in enumerate(range(0, len(order), bs)):
            batch = [instances[i] for i in order[lo:lo + bs]]
            grads = None
            batch_loss = 0.0
            for inst in batch:
                loss, g = sentence_loss(params, model_config, inst.ids, inst.tags, inst.graph,
                                        inst.frozen, rng=drop_rng, dropout=train_config.dropout)
                batch_loss += loss
                if grads is None:
                    grads = g
                else:
                    for k in grads:
                        grads[k] += g[k]
            if not np.isfinite(batch_loss):
                raise NumericError(f"non-finite loss in epoch {epoch}, batch {b}")
            for k in grads:
                grads[k] /= len(batch)
            adam_step(params, grads, state)
            epoch_loss += batch_loss
        record = {"epoch": epoch, "loss": epoch_loss / len(instances)}
        if valid is not None:
            ckpt = Checkpoint(model_config, params, seed, epoch)
            report = evaluate(predict(ckpt, *valid), valid[0])
            record.update({f"{lvl}_f1": report[lvl].f1 for lvl in report.levels})
        history.append(record)
        log.info("epoch %d %s", epoch, {k: v for k, v in record.items() if k != "epoch"})
        if on_epoch is not None:
            on_epoch(record)
    ckpt = Checkpoint(model_config, params, seed, train_config.epochs,
                      train=asdict(train_config))
    return ckpt, history


def decode(ckpt: Checkpoint, inst: Instance) -> list[int]:
    V, _ = model_forward(ckpt.params, ckpt.config, inst.ids, inst.graph, inst.frozen)
    return viterbi_decode(V, ckpt.params["crf.A"])


def predict(ckpt: Checkpoint, sentences: Sequence[Sentence], graphs=None, frozen=None,
            variant: str | None = None, model_id: str | None = None) -> PredictionSet:
    """Viterbi-decode every sentence; sentences without spans are recorded as correct."""
    ckpt.require(variant=variant)
    cfg = ckpt.config
    if cfg.variant == "B" and frozen is not None:
        width = getattr(frozen, "width", None)
        if width is not None and width != cfg.frozen_dim:
            raise MissingInputError(f"frozen width {width} != model frozen_dim {cfg.frozen_dim}")
    tags: dict[str, list[int]] = {s.id: [] for s in sentences}
    for inst in make_instances(sentences, cfg, graphs, frozen, with_tags=False):
        tags[inst.sid].extend(decode(ckpt, inst))
    return PredictionSet(model_id or f"{cfg.variant}-{ckpt.fingerprint}-s{ckpt.seed}",
                         cfg.variant == "C",
                         {sid: bio_to_spans(t) for sid, t in tags.items()})
