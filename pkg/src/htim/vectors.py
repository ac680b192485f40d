"""Embedding tables and their plain-text on-disk format.

The file format is the usual one for word vectors: a header line
``<count> <dim>`` followed by one ``<id> <v1> ... <vdim>`` line per entry.
Values are written with ``repr(float)`` so a write -> read -> write cycle is
byte identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DataError, DataFormatError


class Lookup(NamedTuple):
    vector: np.ndarray
    absent: bool


@dataclass
class EmbeddingTable:
    """Dense vectors keyed by string id (user ids or terms)."""

    ids: list[str]
    vectors: np.ndarray  # (n, dim) float64
    method: str = ""
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise DataError("embedding table shape does not match id count")
        self._index = {}
        for i, key in enumerate(self.ids):
            if key in self._index:
                raise DataError(f"duplicate embedding id {key!r}")
            self._index[key] = i

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def index(self) -> dict[str, int]:
        return self._index

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def lookup(self, key: str) -> Lookup:
        """Vector for ``key``; unknown keys get zeros and the absent flag."""
        i = self._index.get(key)
        if i is None:
            return Lookup(np.zeros(self.dim), True)
        return Lookup(self.vectors[i].copy(), False)

    def row(self, key: str) -> np.ndarray:
        i = self._index.get(key)
        if i is None:
            raise KeyError(key)
        return self.vectors[i]


def format_float(v: float) -> str:
    """Shortest decimal string that round-trips the exact float64 value."""
    return repr(float(v))


def write_embeddings_text(path, ids: Iterable[str], vectors: np.ndarray) -> None:
    ids = list(ids)
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise DataError("vector matrix does not match id count")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(ids)} {vectors.shape[1]}\n")
        for key, row in zip(ids, vectors):
            if not key or any(c.isspace() for c in key):
                raise DataError(f"embedding id {key!r} is empty or has whitespace")
            fh.write(key + " " + " ".join(format_float(v) for v in row) + "\n")


def read_embeddings_text(path, method: str = "") -> EmbeddingTable:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataFormatError(path, 1, "empty embedding file")
    head = lines[0].split(" ")
    if len(head) != 2 or not head[0].isdigit() or not head[1].isdigit():
        raise DataFormatError(path, 1, "header must be '<count> <dim>'")
    count, dim = int(head[0]), int(head[1])
    if len(lines) - 1 != count:
        raise DataFormatError(path, 1,
                              f"header promises {count} rows, file has {len(lines) - 1}")
    ids: list[str] = []
    vectors = np.zeros((count, dim), dtype=np.float64)
    for r, line in enumerate(lines[1:]):
        lineno = r + 2
        parts = line.split(" ")
        if len(parts) != dim + 1:
            raise DataFormatError(path, lineno,
                                  f"expected id + {dim} values, got {len(parts)} fields")
        ids.append(parts[0])
        try:
            for c in range(dim):
                vectors[r, c] = float(parts[c + 1])
        except ValueError:
            raise DataFormatError(path, lineno, "non-numeric vector value") from None
    return EmbeddingTable(ids, vectors, method=method)
