"""Detection, identification and position level precision/recall/F1."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import CorpusError, PredictionSet, Sentence

LEVELS = ("detection", "identification", "position")


def f1(precision: float, recall: float) -> float:
    for v in (precision, recall):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"precision/recall must lie in [0, 1], got {v}")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class LevelCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        return f1(self.precision, self.recall)

    @classmethod
    def from_sets(cls, pred: set, gold: set) -> LevelCounts:
        tp = len(pred & gold)
        return cls(tp, len(pred) - tp, len(gold) - tp)


@dataclass(frozen=True)
class EvalReport:
    detection: LevelCounts
    identification: LevelCounts
    position: LevelCounts

    levels = LEVELS

    def __getitem__(self, level: str) -> LevelCounts:
        if level not in LEVELS:
            raise KeyError(level)
        return getattr(self, level)

    def to_tsv(self) -> str:
        lines = ["level\tprecision\trecall\tf1\ttp\tfp\tfn"]
        for lvl in LEVELS:
            c = self[lvl]
            lines.append(f"{lvl}\t{c.precision:.4f}\t{c.recall:.4f}\t{c.f1:.4f}\t{c.tp}\t{c.fp}\t{c.fn}")
        return "\n".join(lines) + "\n"

    def to_table(self, name: str = "model") -> str:
        return format_table([(name, self)])


def format_table(rows: Iterable[tuple[str, EvalReport]]) -> str:
    rows = list(rows)
    width = max([5] + [len(n) for n, _ in rows])
    head1 = f"{'model':<{width}}  " + "  ".join(f"{lvl.capitalize():<26}" for lvl in LEVELS)
    head2 = f"{'':<{width}}  " + "  ".join(f"{'Precision':>8} {'Recall':>8} {'F1':>8}" for _ in LEVELS)
    lines = [head1.rstrip(), head2.rstrip()]
    for name, r in rows:
        cells = "  ".join(f"{r[l].precision:>8.4f} {r[l].recall:>8.4f} {r[l].f1:>8.4f}" for l in LEVELS)
        lines.append(f"{name:<{width}}  {cells}")
    return "\n".join(lines) + "\n"


def level_items(spans_by_sid, level: str) -> set:
    if level == "detection":
        return {sid for sid, spans in spans_by_sid.items() if spans}
    if level == "identification":
        return {(sid, s.type) for sid, spans in spans_by_sid.items() for s in spans}
    if level == "position":
        return {(sid, s.start, s.end, s.type) for sid, spans in spans_by_sid.items() for s in spans}
    raise ValueError(f"unknown level {level!r}")


def evaluate(pred: PredictionSet, gold: Sequence[Sentence]) -> EvalReport:
    gold_map = {s.id: s.gold for s in gold}
    unknown = sorted(set(pred.spans) - set(gold_map))
    if unknown:
        raise CorpusError(f"prediction for unknown sentence id {unknown[0]!r}")
    counts = {lvl: LevelCounts.from_sets(level_items(pred.spans, lvl), level_items(gold_map, lvl))
              for lvl in LEVELS}
    return EvalReport(**counts)
