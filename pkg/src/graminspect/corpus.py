"""Sentences, typed error spans, BIO label sequences and the file codecs.

Offsets on :class:`ErrorSpan` are 1-based and inclusive, the same convention
the CGED quadruple files use, so no conversion is needed at the codec edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class CorpusError(ValueError):
    """Malformed input record; carries the file line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ErrorType(str, Enum):
    R = "R"  # redundant word
    M = "M"  # missing word
    S = "S"  # word selection
    W = "W"  # word order

    @property
    def rank(self) -> int:
        return _TYPE_RANK[self]

    def __lt__(self, other):
        if not isinstance(other, ErrorType):
            return NotImplemented
        return self.rank < other.rank

    def __str__(self) -> str:
        return self.value


ERROR_TYPES: tuple[ErrorType, ...] = (ErrorType.R, ErrorType.M, ErrorType.S, ErrorType.W)
_TYPE_RANK = {t: i for i, t in enumerate(ERROR_TYPES)}

# O=0, then B-R, I-R, B-M, I-M, B-S, I-S, B-W, I-W
LABELS: tuple[str, ...] = ("O",) + tuple(f"{p}-{t.value}" for t in ERROR_TYPES for p in "BI")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}
NUM_LABELS = len(LABELS)
OUTSIDE = 0


def begin_label(t: ErrorType) -> int:
    return 1 + 2 * t.rank


def inside_label(t: ErrorType) -> int:
    return 2 + 2 * t.rank


def label_type(label: int) -> ErrorType | None:
    if label == OUTSIDE:
        return None
    return ERROR_TYPES[(label - 1) // 2]


def is_begin(label: int) -> bool:
    return label != OUTSIDE and (label - 1) % 2 == 0


@dataclass(frozen=True, order=True)
class ErrorSpan:
    start: int
    end: int
    type: ErrorType

    def __post_init__(self):
        if not isinstance(self.type, ErrorType):
            object.__setattr__(self, "type", parse_type(self.type))
        if self.start < 1 or self.end < self.start:
            raise ValueError(f"invalid span offsets ({self.start}, {self.end})")

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: ErrorSpan) -> bool:
        return self.start <= other.end and other.start <= self.end

    def __iter__(self):
        return iter((self.start, self.end, self.type))


def parse_type(token) -> ErrorType:
    try:
        return ErrorType(str(token).strip().upper())
    except ValueError:
        raise CorpusError(f"unknown error type {token!r}") from None


@dataclass(frozen=True)
class Sentence:
    id: str
    chars: str
    gold: frozenset[ErrorSpan] = frozenset()

    def __post_init__(self):
        if not self.chars:
            raise CorpusError(f"sentence {self.id!r} has no characters")
        object.__setattr__(self, "gold", frozenset(self.gold))
        check_spans(self.gold, len(self.chars), allow_cross_type_overlap=True, where=self.id)

    def __len__(self) -> int:
        return len(self.chars)

    @property
    def is_correct(self) -> bool:
        return not self.gold


@dataclass
class PredictionSet:
    """One model's output: sentence id -> predicted spans (empty set = predicted correct)."""

    model_id: str
    is_lgn: bool = False
    spans: dict[str, frozenset[ErrorSpan]] = field(default_factory=dict)

    def get(self, sid: str) -> frozenset[ErrorSpan]:
        return self.spans.get(sid, frozenset())

    def sentence_ids(self) -> list[str]:
        return sorted(self.spans)


def check_spans(spans: Iterable[ErrorSpan], n: int, *, allow_cross_type_overlap: bool,
                where: str = "") -> None:
    """Raise CorpusError for out-of-range spans or forbidden overlaps."""
    ordered = sorted(spans)
    prefix = f"{where}: " if where else ""
    for s in ordered:
        if s.end > n:
            raise CorpusError(f"{prefix}span {_fmt(s)} exceeds sentence length {n}")
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if b.start > a.end:
                break
            if a.overlaps(b) and (a.type == b.type or not allow_cross_type_overlap):
                raise CorpusError(f"{prefix}span {_fmt(b)} overlaps {_fmt(a)}")


def _fmt(s: ErrorSpan) -> str:
    return f"({s.start},{s.end},{s.type.value})"


# -- BIO ------------------------------------------------------------------

def spans_to_bio(spans: Iterable[ErrorSpan], n: int) -> list[int]:
    spans = list(spans)
    check_spans(spans, n, allow_cross_type_overlap=False)
    tags = [OUTSIDE] * n
    for s in spans:
        tags[s.start - 1] = begin_label(s.type)
        for p in range(s.start, s.end):
            tags[p] = inside_label(s.type)
    return tags


def bio_to_spans(tags: Sequence[int]) -> frozenset[ErrorSpan]:
    """Decode label indices into spans.

    Total over any sequence of valid labels: an I-t that does not continue an
    open span of the same type starts a new one.
    """
    out = []
    start = None
    cur = None
    for i, lab in enumerate(tags):
        lab = int(lab)
        if not 0 <= lab < NUM_LABELS:
            raise ValueError(f"label index {lab} out of range")
        t = label_type(lab)
        continues = t is not None and not is_begin(lab) and t == cur
        if continues:
            continue
        if cur is not None:
            out.append(ErrorSpan(start + 1, i, cur))
        start, cur = (i, t) if t is not None else (None, None)
    if cur is not None:
        out.append(ErrorSpan(start + 1, len(tags), cur))
    return frozenset(out)


def labels_to_names(tags: Sequence[int]) -> list[str]:
    return [LABELS[t] for t in tags]


def names_to_labels(names: Sequence[str]) -> list[int]:
    return [LABEL_INDEX[n] for n in names]


def encodable_subset(spans: Iterable[ErrorSpan]) -> frozenset[ErrorSpan]:
    """Greedy non-overlapping subset in (start, end, type) order, for BIO training targets."""
    kept: list[ErrorSpan] = []
    for s in sorted(spans):
        if all(not s.overlaps(k) for k in kept):
            kept.append(s)
    return frozenset(kept)


# -- gold corpus ------------------------------------------------------------

def parse_record(obj: Mapping, line: int | None = None) -> Sentence:
    try:
        sid = str(obj["id"])
        text = obj["text"]
        errors = obj.get("errors", [])
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"missing field {exc}", line) from None
    if not isinstance(text, str):
        raise CorpusError(f"{sid}: text must be a string", line)
    spans = []
    for e in errors:
        try:
            start, end = int(e["start"]), int(e["end"])
            t = parse_type(e["type"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{sid}: bad error record {e!r} ({exc})", line) from None
        if start < 1 or end < start:
            raise CorpusError(f"{sid}: invalid span ({start},{end},{t.value})", line)
        spans.append(ErrorSpan(start, end, t))
    try:
        return Sentence(sid, text, frozenset(spans))
    except CorpusError as exc:
        raise CorpusError(str(exc), line) from None


def read_corpus(path) -> list[Sentence]:
    sentences = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON ({exc.msg})", lineno) from None
            s = parse_record(obj, lineno)
            if s.id in seen:
                raise CorpusError(f"duplicate sentence id {s.id!r}", lineno)
            seen.add(s.id)
            sentences.append(s)
    return sentences


def sentence_record(s: Sentence) -> dict:
    return {
        "id": s.id,
        "text": s.chars,
        "errors": [{"start": e.start, "end": e.end, "type": e.type.value} for e in sorted(s.gold)],
    }


def write_corpus(sentences: Iterable[Sentence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(json.dumps(sentence_record(s), ensure_ascii=False) + "\n")


def gold_predictions(sentences: Iterable[Sentence], model_id: str = "gold") -> PredictionSet:
    return PredictionSet(model_id, False, {s.id: s.gold for s in sentences})


# -- prediction files ---------------------------------------------------------

def read_predictions(path, model_id: str | None = None, is_lgn: bool = False) -> PredictionSet:
    spans: dict[str, set[ErrorSpan]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            cols = [c.strip() for c in line.split("\t")]
            sid = cols[0]
            if len(cols) == 2 and cols[1].lower() == "correct":
                spans.setdefault(sid, set())
                continue
            if len(cols) != 4:
                raise CorpusError(f"expected 2 or 4 tab-separated fields, got {len(cols)}", lineno)
            try:
                start, end = int(cols[1]), int(cols[2])
            except ValueError:
                raise CorpusError(f"non-numeric offsets {cols[1]!r}, {cols[2]!r}", lineno) from None
            try:
                t = parse_type(cols[3])
            except CorpusError as exc:
                raise CorpusError(str(exc), lineno) from None
            if start < 1 or end < start:
                raise CorpusError(f"{sid}: invalid span ({start},{end},{t.value})", lineno)
            spans.setdefault(sid, set()).add(ErrorSpan(start, end, t))
    return PredictionSet(model_id or Path(path).stem, is_lgn,
                         {sid: frozenset(v) for sid, v in spans.items()})


def format_predictions(pred: PredictionSet) -> str:
    lines = []
    for sid in sorted(pred.spans):
        found = sorted(pred.spans[sid])
        if not found:
            lines.append(f"{sid}\tcorrect")
        for s in found:
            lines.append(f"{sid}\t{s.start}\t{s.end}\t{s.type.value}")
    return "".join(line + "\n" for line in lines)


def write_predictions(pred: PredictionSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_predictions(pred))


# -- lexicon --------------------------------------------------------------

def read_lexicon(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [w for w in (line.strip() for line in fh) if w and not w.startswith("#")]
