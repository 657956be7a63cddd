"""Toy learner corpus with rule-injected R/M/S/W errors.

Correct sentences follow ``[TIME] SUBJ [ADV] VERB OBJ [PART]`` with a verb-object
compatibility table. Each erroneous sentence carries one injected error:

R  a multi-character word is doubled, or a stray 的 is inserted (span = the extra material)
M  the subject or verb is dropped (span = the first character after the gap)
S  the object is replaced by one the verb does not take (span = the object)
W  two adjacent words are swapped (span = both words)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ErrorSpan, ErrorType, Sentence, write_corpus
from .graphs import DependencyParse, DepWord, write_dependencies
from .numerics import make_rng
from .tagger.frozen import write_frozen

TIME = ("昨天", "今天", "明天", "晚上", "周末")
SUBJ = ("我们", "他们", "老师", "学生", "朋友", "妈妈", "哥哥", "同学", "医生", "大家")
ADV = ("经常", "已经", "一起", "马上", "也", "都")
VERB_OBJECTS = {
    "喜欢": ("汉语", "音乐", "电影", "书", "中国菜", "足球"),
    "参观": ("北京", "机场", "博物馆", "学校"),
    "离开": ("北京", "机场", "学校", "家"),
    "学习": ("汉语", "音乐", "历史"),
    "看": ("电影", "书", "报纸", "足球"),
    "吃": ("中国菜", "饺子", "米饭"),
    "打": ("篮球", "电话"),
    "写": ("汉字", "信", "作业"),
    "参加": ("比赛", "考试", "晚会"),
    "买": ("书", "报纸", "米饭", "饺子"),
}
OBJ = tuple(sorted({o for objs in VERB_OBJECTS.values() for o in objs}))
PART = ("了", "吗", "呢")
REDUNDANT = "的"

CLASSES = {**{w: "TIME" for w in TIME}, **{w: "SUBJ" for w in SUBJ}, **{w: "ADV" for w in ADV},
           **{w: "VERB" for w in VERB_OBJECTS}, **{w: "OBJ" for w in OBJ},
           **{w: "PART" for w in PART}, REDUNDANT: "PART"}
RELATIONS = {"TIME": "ADV", "SUBJ": "SBV", "ADV": "ADV", "OBJ": "VOB", "PART": "RAD"}


def lexicon_words() -> list[str]:
    return sorted({w for w in CLASSES if len(w) > 1})


@dataclass
class SyntheticItem:
    sentence: Sentence
    parse: DependencyParse
    words: list[str]


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _clean_words(rng) -> list[str]:
    verb = _pick(rng, tuple(VERB_OBJECTS))
    words = [_pick(rng, TIME)] if rng.random() < 0.3 else []
    words.append(_pick(rng, SUBJ))
    if rng.random() < 0.5:
        words.append(_pick(rng, ADV))
    words += [verb, _pick(rng, VERB_OBJECTS[verb])]
    if rng.random() < 0.5:
        words.append(_pick(rng, PART))
    return words


def _offsets(words):
    out, pos = [], 1
    for w in words:
        out.append((pos, pos + len(w) - 1))
        pos += len(w)
    return out


def _inject(rng, words: list[str], etype: ErrorType) -> tuple[list[str], ErrorSpan]:
    classes = [CLASSES[w] for w in words]
    if etype is ErrorType.R:
        doubles = [k for k, w in enumerate(words) if len(w) > 1]
        if doubles and rng.random() < 0.5:
            # one-character verbs reduplicate grammatically, so only longer words are doubled
            k = _pick(rng, doubles)
            new = words[:k + 1] + [words[k]] + words[k + 1:]
            ins = k + 1
        else:
            k = classes.index(_pick(rng, ("SUBJ", "VERB")))
            new = words[:k + 1] + [REDUNDANT] + words[k + 1:]
            ins = k + 1
        s, e = _offsets(new)[ins]
        return new, ErrorSpan(s, e, etype)
    if etype is ErrorType.M:
        k = classes.index(_pick(rng, ("SUBJ", "VERB")))
        new = words[:k] + words[k + 1:]
        s, _ = _offsets(new)[k]
        return new, ErrorSpan(s, s, etype)
    if etype is ErrorType.S:
        k = classes.index("OBJ")
        verb = words[classes.index("VERB")]
        wrong = [o for o in OBJ if o not in VERB_OBJECTS[verb]]
        new = list(words)
        new[k] = _pick(rng, wrong)
        s, e = _offsets(new)[k]
        return new, ErrorSpan(s, e, etype)
    # W: swap word k and k+1, never touching the final particle; TIME SUBJ swaps stay grammatical
    last = len(words) - 1 if classes[-1] == "PART" else len(words)
    k = _pick(rng, [k for k in range(last - 1) if classes[k] != "TIME"])
    new = list(words)
    new[k], new[k + 1] = new[k + 1], new[k]
    offs = _offsets(new)
    return new, ErrorSpan(offs[k][0], offs[k + 1][1], etype)


def parse_words(words: list[str], sid: str | None = None) -> DependencyParse:
    """Heuristic parse: first verb is the root, every other word attaches to it."""
    classes = [CLASSES[w] for w in words]
    root = classes.index("VERB") if "VERB" in classes else 0
    deps = []
    for k, (w, c) in enumerate(zip(words, classes)):
        if k == root:
            deps.append(DepWord(w, 0, "HED"))
        elif w == REDUNDANT and k > 0:
            deps.append(DepWord(w, k, "RAD"))
        else:
            deps.append(DepWord(w, root + 1, RELATIONS.get(c, "COO")))
    return DependencyParse(tuple(deps), sid)


def generate(n: int, seed: int, prefix: str = "s", error_rate: float = 0.65) -> list[SyntheticItem]:
    rng = make_rng(seed)
    types = (ErrorType.R, ErrorType.M, ErrorType.S, ErrorType.W)
    items = []
    for i in range(n):
        sid = f"{prefix}{i:05d}"
        words = _clean_words(rng)
        gold = frozenset()
        if rng.random() < error_rate:
            words, span = _inject(rng, words, _pick(rng, types))
            gold = frozenset([span])
        text = "".join(words)
        items.append(SyntheticItem(Sentence(sid, text, gold), parse_words(words, sid), words))
    return items


def frozen_features(sentences, width: int = 8, seed: int = 1234) -> dict[str, np.ndarray]:
    """Fixed random character vectors smoothed over a +-1 window."""
    rng = make_rng(seed)
    chars = sorted({c for s in sentences for c in s.chars})
    table = {c: rng.normal(size=width) for c in chars}
    out = {}
    for s in sentences:
        v = np.array([table[c] for c in s.chars])
        pad = np.vstack([np.zeros(width), v, np.zeros(width)])
        out[s.id] = 0.5 * v + 0.25 * (pad[:-2] + pad[2:])
    return out


def write_dataset(out_dir, sizes: dict[str, int], seed: int = 0,
                  error_rate: float = 0.65) -> dict[str, Path]:
    """Write one ``<split>.jsonl`` per entry of ``sizes`` plus shared side inputs.

    Side inputs cover every split: ``deps.conll`` (parses keyed by sentence id),
    ``lexicon.txt`` and ``frozen.bin`` (8-wide features). Splits draw from
    independent seeds so they never share sentence ids.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths, parses, sents = {}, [], []
    for k, (split, n) in enumerate(sizes.items()):
        items = generate(n, seed=seed * 1000 + k, prefix=f"{split}-", error_rate=error_rate)
        paths[split] = out / f"{split}.jsonl"
        write_corpus([it.sentence for it in items], paths[split])
        parses += [it.parse for it in items]
        sents += [it.sentence for it in items]
    paths["deps"] = out / "deps.conll"
    write_dependencies(parses, paths["deps"])
    paths["lexicon"] = out / "lexicon.txt"
    paths["lexicon"].write_text("".join(w + "\n" for w in lexicon_words()), encoding="utf-8")
    paths["frozen"] = out / "frozen.bin"
    write_frozen(frozen_features(sents), paths["frozen"])
    return paths
