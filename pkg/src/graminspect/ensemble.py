"""Three-stage threshold voting over span predictions from many models.

Stage 1 (type presence): when more than theta1 of the non-LGN models flag a
type in a sentence, emit the largest candidate span of that type.
Stage 2 (span vote): keep a span supported by more than theta2 of the
models that count for it. LGN models only count for spans some LGN model
predicted.
Stage 3 (fallback): when stages 1-2 emit nothing but the non-LGN models
together predicted more than theta3 errors per model, emit the single
most-voted span.

Model counts exclude LGN models throughout except in stage 2 as above; the
candidate pools in stages 1 and 3 include LGN predictions.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import ERROR_TYPES, CorpusError, ErrorSpan, PredictionSet, Sentence, read_predictions
from .evaluate import LEVELS, EvalReport, evaluate

TIE_BREAKS = ("widest", "most_voted")


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class EnsembleConfig:
    theta1: float = 0.5
    theta2: float = 0.5
    theta3: float = 0.5
    tie_break: str = "widest"
    objective: str = "identification"

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"unknown tie-break policy {self.tie_break!r}")
        if self.objective not in LEVELS:
            raise ValueError(f"unknown objective {self.objective!r}")

    @property
    def thetas(self) -> tuple[float, float, float]:
        return self.theta1, self.theta2, self.theta3


@dataclass
class VoteTally:
    n_models: int
    n_lgn: int
    type_models: Counter = field(default_factory=Counter)  # type -> non-LGN models flagging it
    lgn_votes: Counter = field(default_factory=Counter)  # span -> LGN supporters
    base_votes: Counter = field(default_factory=Counter)  # span -> non-LGN supporters
    base_errors: int = 0  # spans predicted by non-LGN models, summed over models

    @property
    def n_base(self) -> int:
        return self.n_models - self.n_lgn

    def votes(self, span: ErrorSpan) -> int:
        return self.lgn_votes[span] + self.base_votes[span]

    def candidates(self) -> set[ErrorSpan]:
        return set(self.lgn_votes) | set(self.base_votes)


def tally(predictions: Sequence[PredictionSet], sid: str) -> VoteTally:
    t = VoteTally(len(predictions), sum(p.is_lgn for p in predictions))
    for p in predictions:
        spans = p.get(sid)
        if p.is_lgn:
            t.lgn_votes.update(spans)
        else:
            t.base_votes.update(spans)
            t.base_errors += len(spans)
            t.type_models.update({s.type for s in spans})
    return t


def _largest_key(t: VoteTally, policy: str):
    # sort key: smaller is better
    if policy == "widest":
        return lambda s: (-s.width, -t.votes(s), s.start, s.end, s.type.rank)
    return lambda s: (-t.votes(s), -s.width, s.start, s.end, s.type.rank)


def stage1(t: VoteTally, theta1: float, policy: str = "widest") -> set[ErrorSpan]:
    out = set()
    cands = t.candidates()
    for et in ERROR_TYPES:
        if t.type_models[et] > theta1 * t.n_base:
            pool = [s for s in cands if s.type == et]
            out.add(min(pool, key=_largest_key(t, policy)))
    return out


def stage2(t: VoteTally, theta2: float) -> set[ErrorSpan]:
    out = set()
    for s in t.candidates():
        lgn = t.lgn_votes[s]
        if lgn:
            support, pool = lgn + t.base_votes[s], t.n_models
        else:
            support, pool = t.base_votes[s], t.n_base
        if support > theta2 * pool:
            out.add(s)
    return out


def stage3(t: VoteTally, theta3: float) -> set[ErrorSpan]:
    cands = t.candidates()
    if not cands or not t.base_errors > theta3 * t.n_base:
        return set()
    return {min(cands, key=lambda s: (-t.votes(s), -s.width, s.start, s.type.rank))}


def _require_base(predictions: Sequence[PredictionSet]) -> None:
    if not any(not p.is_lgn for p in predictions):
        raise EnsembleError("the ensemble needs at least one non-LGN model")


def ensemble_sentence(predictions: Sequence[PredictionSet], sid: str,
                      config: EnsembleConfig) -> frozenset[ErrorSpan]:
    _require_base(predictions)
    t = tally(predictions, sid)
    out = stage1(t, config.theta1, config.tie_break) | stage2(t, config.theta2)
    if not out:
        out = stage3(t, config.theta3)
    return frozenset(out)


def sentence_ids(predictions: Iterable[PredictionSet]) -> list[str]:
    return sorted({sid for p in predictions for sid in p.spans})


def ensemble(predictions: Sequence[PredictionSet], config: EnsembleConfig,
             sids: Iterable[str] | None = None, model_id: str = "ensemble") -> PredictionSet:
    _require_base(predictions)
    sids = sentence_ids(predictions) if sids is None else list(sids)
    return PredictionSet(model_id, False,
                         {sid: ensemble_sentence(predictions, sid, config) for sid in sids})


# -- threshold tuning --------------------------------------------------------

def default_grid() -> list[float]:
    return [round(0.05 * k, 2) for k in range(1, 20)]


@dataclass
class TuningResult:
    config: EnsembleConfig
    score: float
    table: list[tuple[float, float, float, float, float, float]]  # thetas + three F1s

    def to_tsv(self) -> str:
        lines = ["theta1\ttheta2\ttheta3\tdetection_f1\tidentification_f1\tposition_f1"]
        lines += ["\t".join(f"{v:.2f}" if i < 3 else f"{v:.6f}" for i, v in enumerate(row))
                  for row in self.table]
        return "\n".join(lines) + "\n"


def tune_thresholds(predictions: Sequence[PredictionSet], gold: Sequence[Sentence],
                    grid: Sequence[float] | None = None, objective: str = "identification",
                    tie_break: str = "widest",
                    grids: tuple[Sequence[float], Sequence[float], Sequence[float]] | None = None
                    ) -> TuningResult:
    """Exhaustive grid search; ties resolve toward the lexicographically smallest thetas."""
    _require_base(predictions)
    if grids is None:
        g = default_grid() if grid is None else list(grid)
        grids = (g, g, g)
    grids = tuple(sorted(set(float(x) for x in g)) for g in grids)
    if not all(grids):
        raise EnsembleError("threshold grid is empty")
    if objective not in LEVELS:
        raise ValueError(f"unknown objective {objective!r}")
    sids = [s.id for s in gold]
    tallies = {sid: tally(predictions, sid) for sid in sids}
    s1 = {th: {sid: stage1(t, th, tie_break) for sid, t in tallies.items()} for th in grids[0]}
    s2 = {th: {sid: stage2(t, th) for sid, t in tallies.items()} for th in grids[1]}
    s3 = {th: {sid: stage3(t, th) for sid, t in tallies.items()} for th in grids[2]}

    best, best_score, table = None, -np.inf, []
    for t1, t2, t3 in itertools.product(*grids):
        spans = {}
        for sid in sids:
            out = s1[t1][sid] | s2[t2][sid]
            spans[sid] = frozenset(out or s3[t3][sid])
        report = evaluate(PredictionSet("ensemble", False, spans), gold)
        row = (t1, t2, t3) + tuple(report[lvl].f1 for lvl in LEVELS)
        table.append(row)
        score = report[objective].f1
        if score > best_score:
            best, best_score = (t1, t2, t3), score
    cfg = EnsembleConfig(*best, tie_break=tie_break, objective=objective)
    return TuningResult(cfg, best_score, table)


# -- manifests ----------------------------------------------------------------

def read_manifest(path) -> list[tuple[str, bool]]:
    base = Path(path).parent
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2 or cols[1] not in ("0", "1"):
                raise CorpusError("expected `path<TAB>is_lgn(0|1)`", lineno)
            p = Path(cols[0])
            out.append((str(p if p.is_absolute() else base / p), cols[1] == "1"))
    return out


def write_manifest(entries: Iterable[tuple[str, bool]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p, is_lgn in entries:
            fh.write(f"{p}\t{int(bool(is_lgn))}\n")


def load_manifest(path) -> list[PredictionSet]:
    return [read_predictions(p, model_id=p, is_lgn=lgn) for p, lgn in read_manifest(path)]


def evaluate_config(predictions, gold, config: EnsembleConfig) -> EvalReport:
    return evaluate(ensemble(predictions, config, [s.id for s in gold]), gold)
