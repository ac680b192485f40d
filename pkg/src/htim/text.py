"""Text features: tokenisation, tf-idf, CBOW word vectors, pooled
contextual vectors and the tweet/user aggregation helpers.

All featurizers emit float64 vectors wrapped in :class:`TextVector`, which
carries an ``absent`` flag (nothing usable in the input) and a ``kind`` tag
so downstream fusion can tell representations apart.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _sgd
from .errors import ConfigError, DataError, DataFormatError
from .vectors import EmbeddingTable, write_embeddings_text

POOLING_STRATEGIES = ("sos", "average", "maxpool")

# URLs and mentions collapse to placeholder tokens; hashtags keep their tag;
# everything else splits into lowercase word or single punctuation tokens.
_TOKEN_RE = re.compile(r"https?://\S+|www\.\S+|@\w+|#\w+|\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase, placeholder-normalising tweet tokeniser."""
    out: list[str] = []
    for m in _TOKEN_RE.finditer(text.lower()):
        tok = m.group()
        if tok.startswith(("http://", "https://", "www.")):
            out.append("<url>")
        elif tok.startswith("@") and len(tok) > 1:
            out.append("<user>")
        else:
            out.append(tok)
    return out


@dataclass
class TextVector:
    vector: np.ndarray
    absent: bool = False
    kind: str = ""


# --------------------------------------------------------------------------
# vocabulary


@dataclass
class Vocabulary:
    """Terms in first-appearance order with collection and document counts."""

    terms: list[str]
    counts: np.ndarray      # collection frequency per term
    doc_freq: np.ndarray    # number of documents containing the term
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)

    @classmethod
    def from_documents(cls, documents: Iterable[Sequence[str]]) -> "Vocabulary":
        terms: list[str] = []
        index: dict[str, int] = {}
        counts: list[int] = []
        doc_freq: list[int] = []
        for doc in documents:
            seen: set[int] = set()
            for tok in doc:
                i = index.get(tok)
                if i is None:
                    i = len(terms)
                    index[tok] = i
                    terms.append(tok)
                    counts.append(0)
                    doc_freq.append(0)
                counts[i] += 1
                seen.add(i)
            for i in seen:
                doc_freq[i] += 1
        return cls(terms, np.asarray(counts, dtype=np.int64),
                   np.asarray(doc_freq, dtype=np.int64))


# --------------------------------------------------------------------------
# tf-idf


@dataclass
class TfidfModel:
    """Bag-of-words features over the top-``dim`` terms by collection count.

    idf uses the smoothed form log((1 + N) / (1 + df)) + 1; transforms are
    L2 normalised unless built with ``normalize=False``.
    """

    terms: list[str]
    idf: np.ndarray
    n_documents: int
    normalize: bool = True
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.index = {t: i for i, t in enumerate(self.terms)}

    @property
    def dim(self) -> int:
        return len(self.terms)

    def transform(self, tokens: Sequence[str]) -> TextVector:
        vec = np.zeros(self.dim, dtype=np.float64)
        hit = False
        for tok in tokens:
            i = self.index.get(tok)
            if i is not None:
                vec[i] += 1.0
                hit = True
        if hit:
            vec *= self.idf
            if self.normalize:
                norm = float(np.sqrt(np.sum(vec * vec)))
                if norm > 0.0:
                    vec /= norm
        return TextVector(vec, absent=not hit, kind="tfidf")

    def to_json_dict(self) -> dict:
        return {"kind": "tfidf", "dim": self.dim, "terms": list(self.terms),
                "idf": [float(v) for v in self.idf],
                "n_documents": self.n_documents,
                "normalize": self.normalize}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TfidfModel":
        if obj.get("kind") != "tfidf":
            raise DataError("not a tf-idf model payload")
        return cls(list(obj["terms"]), np.asarray(obj["idf"], dtype=np.float64),
                   int(obj["n_documents"]), bool(obj.get("normalize", True)))


def fit_tfidf(documents: Mapping[str, Sequence[str]] | list[Sequence[str]],
              dim: int, normalize: bool = True) -> TfidfModel:
    """Fit on documents (typically one concatenated document per user).

    Keeps the ``dim`` most frequent terms by collection count, breaking ties
    by term; asking for more terms than the corpus has is an error.
    """
    if dim < 1:
        raise ConfigError("tf-idf dim must be >= 1")
    docs = list(documents.values()) if isinstance(documents, Mapping) \
        else list(documents)
    if not docs:
        raise DataError("tf-idf needs at least one document")
    vocab = Vocabulary.from_documents(docs)
    if dim > len(vocab):
        raise DataError(f"requested {dim} terms but corpus has {len(vocab)}")
    order = sorted(range(len(vocab)),
                   key=lambda i: (-int(vocab.counts[i]), vocab.terms[i]))
    chosen = order[:dim]
    terms = [vocab.terms[i] for i in chosen]
    n_docs = len(docs)
    df = vocab.doc_freq[chosen].astype(np.float64)
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    return TfidfModel(terms, idf, n_docs, normalize)


# --------------------------------------------------------------------------
# CBOW word vectors


@dataclass
class WordEmbeddings:
    """Input/output matrices from CBOW negative-sampling training."""

    vocab: Vocabulary
    w_in: np.ndarray
    w_out: np.ndarray | None
    window: int
    negatives: int
    epochs: int
    seed: int
    losses: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.w_in.shape[1])

    def vector(self, term: str) -> np.ndarray | None:
        i = self.vocab.index.get(term)
        return None if i is None else self.w_in[i]

    def save_text(self, path) -> None:
        write_embeddings_text(path, self.vocab.terms, self.w_in)

    def as_table(self) -> EmbeddingTable:
        return EmbeddingTable(list(self.vocab.terms), self.w_in.copy(),
                              method="cbow")


def train_cbow(sentences: Iterable[Sequence[str]], dim: int = 300,
               window: int = 5, negatives: int = 5, epochs: int = 5,
               seed: int = 0, threads: int = 1,
               lr: float = _sgd.LR_DEFAULT,
               lr_min: float = _sgd.LR_MIN_DEFAULT) -> WordEmbeddings:
    """CBOW with negative sampling over token lists.

    Every term is kept (no minimum count); the noise distribution is the
    unigram distribution raised to 0.75.  The learning rate decays linearly
    over all epochs.  Single-threaded runs are bit-reproducible for a fixed
    seed; ``threads > 1`` relaxes update ordering.
    """
    if dim < 1:
        raise ConfigError("embedding dim must be >= 1")
    sents = [list(s) for s in sentences]
    vocab = Vocabulary.from_documents(sents)
    if len(vocab) == 0:
        raise DataError("cannot train word vectors on an empty corpus")
    tokens = np.fromiter((vocab.index[t] for s in sents for t in s),
                         dtype=np.int64,
                         count=sum(len(s) for s in sents))
    offsets = np.zeros(len(sents) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in sents], out=offsets[1:])
    rng_init, rng_sgd = _sgd.spawn_rngs(seed, 2)
    w_in = (rng_init.random((len(vocab), dim)) - 0.5) / dim
    w_out = np.zeros((len(vocab), dim), dtype=np.float64)
    losses = _sgd.run_training("cbow", w_in, w_out, (tokens, offsets),
                               vocab.counts, rng_sgd, window=window,
                               negatives=negatives, epochs=epochs,
                               threads=threads, lr=lr, lr_min=lr_min)
    return WordEmbeddings(vocab, w_in, w_out, window, negatives, epochs,
                          seed, losses)


def embed_tweet_static(embeddings: WordEmbeddings | EmbeddingTable,
                       tokens: Sequence[str]) -> TextVector:
    """Mean of the known token vectors; all-unknown input is flagged absent."""
    if isinstance(embeddings, WordEmbeddings):
        table_index = embeddings.vocab.index
        matrix = embeddings.w_in
    else:
        table_index = embeddings.index
        matrix = embeddings.vectors
    dim = matrix.shape[1]
    acc = np.zeros(dim, dtype=np.float64)
    hits = 0
    for tok in tokens:
        i = table_index.get(tok)
        if i is not None:
            acc += matrix[i]
            hits += 1
    if hits == 0:
        return TextVector(acc, absent=True, kind="static")
    return TextVector(acc / hits, absent=False, kind="static")


# --------------------------------------------------------------------------
# contextual token vectors (produced externally, consumed here)


def load_contextual_tokens(path) -> tuple[dict[str, np.ndarray], int]:
    """Read per-tweet token vector sequences from JSONL.

    Each line holds ``tweet_id``, ``dim`` and ``tokens`` (a non-empty list of
    ``dim``-length rows; row 0 is the start-of-sequence vector).  Returns the
    sequences keyed by tweet id plus the common dimension.
    """
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    dim: int | None = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(path, lineno,
                                      f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("tweet_id"), str):
                raise DataFormatError(path, lineno, "missing tweet_id")
            tid = obj["tweet_id"]
            if tid in out:
                raise DataFormatError(path, lineno,
                                      f"duplicate tweet_id {tid!r}")
            d = obj.get("dim")
            rows = obj.get("tokens")
            if not isinstance(d, int) or d < 1:
                raise DataFormatError(path, lineno, "dim must be a positive int")
            if not isinstance(rows, list) or not rows:
                raise DataFormatError(path, lineno,
                                      "tokens must be a non-empty list")
            if dim is None:
                dim = d
            elif d != dim:
                raise DataFormatError(path, lineno,
                                      f"dim {d} differs from earlier {dim}")
            try:
                arr = np.asarray(rows, dtype=np.float64)
            except ValueError:
                raise DataFormatError(path, lineno,
                                      "tokens rows are ragged or non-numeric") from None
            if arr.ndim != 2 or arr.shape[1] != d:
                raise DataFormatError(path, lineno,
                                      f"token rows must each have {d} values")
            if not np.all(np.isfinite(arr)):
                raise DataFormatError(path, lineno, "non-finite token value")
            out[tid] = arr
    if dim is None:
        raise DataError(f"{path}: no token records found")
    return out, dim


def pool_contextual(token_vectors: np.ndarray, strategy: str) -> TextVector:
    """Collapse a (tokens, dim) sequence to one vector.

    ``sos`` takes row 0 (the start-of-sequence vector), ``average`` the
    element-wise mean over all rows, ``maxpool`` the element-wise maximum.
    A single-row sequence yields that row under every strategy.
    """
    arr = np.asarray(token_vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise DataError("token vector sequence must be a non-empty 2-d array")
    if strategy == "sos":
        vec = arr[0].copy()
    elif strategy == "average":
        vec = arr.mean(axis=0)
    elif strategy == "maxpool":
        vec = arr.max(axis=0)
    else:
        raise ConfigError(f"unknown pooling strategy {strategy!r}; "
                          f"expected one of {POOLING_STRATEGIES}")
    return TextVector(vec, absent=False, kind=f"contextual-{strategy}")


# --------------------------------------------------------------------------
# aggregation


def user_text_vector(tweet_vectors: Sequence[TextVector | np.ndarray],
                     dim: int | None = None) -> TextVector:
    """Mean over a user's present tweet vectors.

    Users with no usable tweet vector get zeros with the absent flag; ``dim``
    is required in that case (it cannot be inferred from nothing).
    """
    present: list[np.ndarray] = []
    kind = ""
    for tv in tweet_vectors:
        if isinstance(tv, TextVector):
            if tv.absent:
                continue
            kind = kind or tv.kind
            present.append(tv.vector)
        else:
            present.append(np.asarray(tv, dtype=np.float64))
    if not present:
        if dim is None:
            raise DataError("cannot size an absent user text vector "
                            "without an explicit dim")
        return TextVector(np.zeros(dim), absent=True, kind=kind)
    width = present[0].shape[0]
    if any(v.shape[0] != width for v in present):
        raise DataError("tweet vectors disagree on dimension")
    if dim is not None and width != dim:
        raise DataError(f"tweet vectors have dim {width}, expected {dim}")
    return TextVector(np.mean(np.stack(present), axis=0), absent=False,
                      kind=kind)


def concat_tweet_user(tweet_vec: TextVector, user_vec: TextVector,
                      tweet_dim: int | None = None,
                      user_dim: int | None = None) -> np.ndarray:
    """Tweet text block followed by the author's mean text block."""
    tv = np.asarray(tweet_vec.vector, dtype=np.float64)
    uv = np.asarray(user_vec.vector, dtype=np.float64)
    if tweet_dim is not None and tv.shape[0] != tweet_dim:
        raise DataError(f"tweet vector has dim {tv.shape[0]}, "
                        f"expected {tweet_dim}")
    if user_dim is not None and uv.shape[0] != user_dim:
        raise DataError(f"user vector has dim {uv.shape[0]}, "
                        f"expected {user_dim}")
    return np.concatenate([tv, uv])
