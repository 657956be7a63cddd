"""Character-level graphs: dependency projections and lexicon-match graphs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import CorpusError, read_lexicon

CHAIN = "chain"
INTRA_WORD = "intra-word"
DEPENDENCY = "dependency"
LEXICON_WORD = "lexicon-word"
SELF = "self"


@dataclass
class CharGraph:
    """Undirected graph over character positions (0-based internally).

    Every node carries a self-loop, so each attention neighborhood is non-empty.
    """

    n: int
    adjacency: np.ndarray = field(repr=False)
    provenance: dict[tuple[int, int], tuple[str, ...]] = field(default_factory=dict, repr=False)

    @classmethod
    def empty(cls, n: int) -> CharGraph:
        if n < 1:
            raise ValueError("graph needs at least one node")
        g = cls(n, np.zeros((n, n), dtype=bool))
        for i in range(n):
            g.add_edge(i, i, SELF)
        return g

    def add_edge(self, i: int, j: int, tag: str) -> None:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"edge ({i}, {j}) outside a {self.n}-node graph")
        self.adjacency[i, j] = self.adjacency[j, i] = True
        key = (min(i, j), max(i, j))
        tags = self.provenance.get(key, ())
        if tag not in tags:
            self.provenance[key] = tags + (tag,)

    def edges(self) -> list[tuple[int, int, tuple[str, ...]]]:
        """Undirected edge list with i <= j, sorted."""
        return [(i, j, self.provenance.get((i, j), ())) for i, j in
                sorted(zip(*np.nonzero(np.triu(self.adjacency))))]

    def edge_set(self, one_based: bool = True, include_self: bool = False) -> set[tuple[int, int]]:
        k = 1 if one_based else 0
        return {(i + k, j + k) for i, j, _ in self.edges() if include_self or i != j}

    def validate(self) -> None:
        a = self.adjacency
        if a.shape != (self.n, self.n):
            raise ValueError("adjacency shape does not match node count")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency is not symmetric")
        if not np.all(np.diag(a)):
            raise ValueError("missing self-loop")

    def subgraph(self, lo: int, hi: int) -> CharGraph:
        g = CharGraph(hi - lo, self.adjacency[lo:hi, lo:hi].copy())
        g.provenance = {(i - lo, j - lo): t for (i, j), t in self.provenance.items()
                        if lo <= i < hi and lo <= j < hi}
        return g

    def permuted(self, perm: Sequence[int]) -> CharGraph:
        """Graph whose node k is node perm[k] of this one."""
        perm = np.asarray(perm)
        return CharGraph(self.n, self.adjacency[np.ix_(perm, perm)].copy())


def chain_graph(n: int) -> CharGraph:
    g = CharGraph.empty(n)
    for i in range(n - 1):
        g.add_edge(i, i + 1, CHAIN)
    return g


# -- dependency parses -------------------------------------------------------------

@dataclass(frozen=True)
class DepWord:
    surface: str
    head: int  # 1-based word index, 0 = root
    relation: str = ""


@dataclass(frozen=True)
class DependencyParse:
    words: tuple[DepWord, ...]
    sid: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise CorpusError("dependency parse has no words")
        roots = [w for w in self.words if w.head == 0]
        if len(roots) != 1:
            raise CorpusError(f"dependency parse needs exactly one root, found {len(roots)}")
        for k, w in enumerate(self.words, 1):
            if not w.surface:
                raise CorpusError(f"word {k} is empty")
            if not 0 <= w.head <= len(self.words) or w.head == k:
                raise CorpusError(f"word {k} has invalid head {w.head}")

    @property
    def text(self) -> str:
        return "".join(w.surface for w in self.words)

    def char_offsets(self) -> list[tuple[int, int]]:
        """0-based half-open character range per word."""
        out, pos = [], 0
        for w in self.words:
            out.append((pos, pos + len(w.surface)))
            pos += len(w.surface)
        return out


def dep_to_char_adjacency(parse: DependencyParse, text: str | None = None) -> CharGraph:
    """Project a word-level tree onto characters.

    Characters of one word are chained; each dependent word's first character
    links to its head word's first character.
    """
    if text is not None and parse.text != text:
        raise CorpusError(f"parse words {parse.text!r} do not reconstruct sentence {text!r}")
    offsets = parse.char_offsets()
    g = CharGraph.empty(offsets[-1][1])
    for lo, hi in offsets:
        for i in range(lo, hi - 1):
            g.add_edge(i, i + 1, INTRA_WORD)
    for k, w in enumerate(parse.words):
        if w.head:
            g.add_edge(offsets[k][0], offsets[w.head - 1][0], DEPENDENCY)
    g.validate()
    return g


def parse_dependency_lines(lines: Iterable[str]) -> list[DependencyParse]:
    parses: list[DependencyParse] = []
    block: list[DepWord] = []
    sid = None
    start_line = None

    def flush():
        nonlocal block, sid
        if block:
            try:
                parses.append(DependencyParse(tuple(block), sid))
            except CorpusError as exc:
                raise CorpusError(str(exc), start_line) from None
        block, sid = [], None

    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            if key.strip() == "sid":
                sid = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise CorpusError(f"expected 4 tab-separated fields, got {len(cols)}", lineno)
        try:
            idx, head = int(cols[0]), int(cols[2])
        except ValueError:
            raise CorpusError("non-numeric token or head index", lineno) from None
        if idx != len(block) + 1:
            raise CorpusError(f"token index {idx} out of sequence", lineno)
        if not block:
            start_line = lineno
        block.append(DepWord(cols[1], head, cols[3]))
    flush()
    return parses


def read_dependencies(path) -> list[DependencyParse]:
    with open(path, encoding="utf-8") as fh:
        return parse_dependency_lines(fh)


def format_dependencies(parses: Iterable[DependencyParse]) -> str:
    chunks = []
    for p in parses:
        lines = [f"# sid = {p.sid}"] if p.sid is not None else []
        lines += [f"{k}\t{w.surface}\t{w.head}\t{w.relation}" for k, w in enumerate(p.words, 1)]
        chunks.append("\n".join(lines) + "\n")
    return "\n".join(chunks)


def write_dependencies(parses: Iterable[DependencyParse], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_dependencies(parses))


def align_parses(sentences, parses: Sequence[DependencyParse]) -> dict[str, DependencyParse]:
    """Pair parses with sentences by ``# sid`` when present, otherwise by file order."""
    if parses and all(p.sid is not None for p in parses):
        by_id = {p.sid: p for p in parses}
        missing = [s.id for s in sentences if s.id not in by_id]
        if missing:
            raise CorpusError(f"no dependency parse for sentence {missing[0]!r}")
        out = {s.id: by_id[s.id] for s in sentences}
    else:
        if len(parses) != len(sentences):
            raise CorpusError(f"{len(parses)} parses for {len(sentences)} sentences")
        out = {s.id: p for s, p in zip(sentences, parses)}
    for s in sentences:
        if out[s.id].text != s.chars:
            raise CorpusError(f"{s.id}: parse words {out[s.id].text!r} do not match text")
    return out


# -- lexicon --------------------------------------------------------------

class Lexicon:
    """Prefix trie over characters."""

    _END = ""

    def __init__(self, words: Iterable[str] = ()):
        self._root: dict = {}
        self._size = 0
        for w in words:
            self.add(w)

    def add(self, word: str) -> None:
        if not word:
            raise ValueError("lexicon words must be non-empty")
        node = self._root
        for ch in word:
            node = node.setdefault(ch, {})
        if self._END not in node:
            node[self._END] = word
            self._size += 1

    def __contains__(self, word: str) -> bool:
        node = self._root
        for ch in word:
            node = node.get(ch)
            if node is None:
                return False
        return self._END in node

    def __len__(self) -> int:
        return self._size

    def prefixes_at(self, text: str, i: int):
        """Yield (end_exclusive, word) for every lexicon word starting at text[i]."""
        node = self._root
        for j in range(i, len(text)):
            node = node.get(text[j])
            if node is None:
                return
            if self._END in node:
                yield j + 1, node[self._END]

    @classmethod
    def from_file(cls, path) -> Lexicon:
        return cls(read_lexicon(path))


def lexicon_match(text: str, lexicon: Lexicon) -> list[tuple[int, int, str]]:
    """Every lexicon word occurring in ``text`` as (start, end, word), 1-based inclusive."""
    out = []
    for i in range(len(text)):
        for end, word in lexicon.prefixes_at(text, i):
            out.append((i + 1, end, word))
    return sorted(out)


def build_lexicon_graph(text: str, lexicon: Lexicon) -> CharGraph:
    g = chain_graph(len(text))
    for start, end, _ in lexicon_match(text, lexicon):
        g.add_edge(start - 1, end - 1, LEXICON_WORD)
    g.validate()
    return g


def format_edge_list(sid: str, g: CharGraph) -> str:
    return "".join(f"{sid}\t{i + 1}\t{j + 1}\t{','.join(tags)}\n" for i, j, tags in g.edges())
