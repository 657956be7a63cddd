"""Precomputed per-sentence feature matrices that are never trained."""

from __future__ import annotations

import json
from typing import Mapping

import numpy as np

from ..corpus import CorpusError

MAGIC = b"GRAMINSPECT-FROZEN-1\n"


class FrozenEmbeddingTable(Mapping):
    def __init__(self, rows: Mapping[str, np.ndarray]):
        rows = {sid: np.ascontiguousarray(m, dtype="<f8") for sid, m in rows.items()}
        widths = {m.shape[1] for m in rows.values() if m.ndim == 2}
        if any(m.ndim != 2 for m in rows.values()) or len(widths) > 1:
            raise ValueError("frozen rows must be 2-D matrices of one common width")
        self.width = widths.pop() if widths else 0
        for m in rows.values():
            m.flags.writeable = False
        self._rows = rows

    def __getitem__(self, sid: str) -> np.ndarray:
        return self._rows[sid]

    def __iter__(self):
        return iter(self._rows)

    def __len__(self) -> int:
        return len(self._rows)


def write_frozen(table: Mapping[str, np.ndarray], path) -> None:
    table = table if isinstance(table, FrozenEmbeddingTable) else FrozenEmbeddingTable(table)
    entries, offset = [], 0
    for sid in table:
        m = table[sid]
        entries.append({"id": sid, "n": m.shape[0], "width": m.shape[1], "offset": offset})
        offset += m.nbytes
    header = json.dumps({"width": table.width, "entries": entries}, ensure_ascii=False)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("utf-8") + b"\n")
        for sid in table:
            fh.write(table[sid].tobytes())


def read_frozen(path) -> FrozenEmbeddingTable:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise CorpusError(f"{path}: not a frozen-embedding file")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorpusError(f"{path}: bad header ({exc})") from None
        payload = fh.read()
    rows = {}
    for e in header["entries"]:
        size = e["n"] * e["width"] * 8
        if e["offset"] + size > len(payload):
            raise CorpusError(f"{path}: payload truncated at sentence {e['id']!r}")
        buf = payload[e["offset"]:e["offset"] + size]
        rows[e["id"]] = np.frombuffer(buf, dtype="<f8").reshape(e["n"], e["width"]).copy()
    return FrozenEmbeddingTable(rows)
