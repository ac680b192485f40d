"""Concatenation fusion of text and interaction blocks.

Hybrid vectors are plain concatenations in a fixed block order: at tweet
level ``[tweet text | author mean text | interaction]``, at user level
``[user text | interaction]``.  A missing modality is zero-filled at its
declared width and flagged, so downstream models see constant-width rows.
The CSV dump (``id,flag_text,flag_inter,f1..fd``) round-trips exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DataFormatError
from .text import TextVector
from .vectors import Lookup, format_float


@dataclass
class HybridFeature:
    key: str                  # tweet id at tweet level, user id at user level
    user_id: str
    vector: np.ndarray
    text_absent: bool
    interaction_absent: bool
    dims: tuple[int, ...]

    def blocks(self) -> tuple[np.ndarray, ...]:
        out = []
        start = 0
        for d in self.dims:
            out.append(self.vector[start:start + d])
            start += d
        return tuple(out)


def _as_block(value, width: int, what: str) -> tuple[np.ndarray, bool]:
    """Normalise an optional vector-ish input to (block, absent)."""
    if width < 0:
        raise DataError(f"negative width for {what}")
    if value is None:
        return np.zeros(width), True
    if isinstance(value, TextVector):
        vec, absent = value.vector, value.absent
    elif isinstance(value, Lookup):
        vec, absent = value.vector, value.absent
    else:
        vec, absent = np.asarray(value, dtype=np.float64), False
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != width:
        raise DataError(f"{what} has shape {vec.shape}, expected ({width},)")
    if absent:
        return np.zeros(width), True
    return vec, False


def _norm_block(vec: np.ndarray) -> np.ndarray:
    n = float(np.sqrt(np.sum(vec * vec)))
    return vec / n if n > 0.0 else vec


def fuse_tweet_level(tweet_id: str, user_id: str, tweet_text, user_text,
                     interaction, dims: tuple[int, int, int],
                     segment_norm: bool = False) -> HybridFeature:
    """One classification instance per tweet.

    ``dims`` fixes the three block widths.  The text flag covers both text
    blocks; an instance with no present modality at all is an error rather
    than a silent all-zero row.
    """
    tt, tt_abs = _as_block(tweet_text, dims[0], f"tweet text ({tweet_id})")
    ut, ut_abs = _as_block(user_text, dims[1], f"user text ({user_id})")
    iv, iv_abs = _as_block(interaction, dims[2], f"interaction ({user_id})")
    text_absent = tt_abs and ut_abs
    if text_absent and iv_abs:
        raise DataError(f"no modality present for tweet {tweet_id!r} "
                        f"of user {user_id!r}")
    if segment_norm:
        tt, ut, iv = _norm_block(tt), _norm_block(ut), _norm_block(iv)
    return HybridFeature(tweet_id, user_id, np.concatenate([tt, ut, iv]),
                         text_absent, iv_abs, tuple(dims))


def fuse_user_level(user_id: str, user_text, interaction,
                    dims: tuple[int, int],
                    segment_norm: bool = False) -> HybridFeature:
    """One classification instance per user: ``[user text | interaction]``."""
    ut, ut_abs = _as_block(user_text, dims[0], f"user text ({user_id})")
    iv, iv_abs = _as_block(interaction, dims[1], f"interaction ({user_id})")
    if ut_abs and iv_abs:
        raise DataError(f"no modality present for user {user_id!r}")
    if segment_norm:
        ut, iv = _norm_block(ut), _norm_block(iv)
    return HybridFeature(user_id, user_id, np.concatenate([ut, iv]),
                         ut_abs, iv_abs, tuple(dims))


def feature_matrix(features: Sequence[HybridFeature],
                   ) -> tuple[list[str], list[str], np.ndarray]:
    """Stack features into (keys, owner user ids, matrix)."""
    if not features:
        raise DataError("no features to stack")
    width = features[0].vector.shape[0]
    mat = np.zeros((len(features), width), dtype=np.float64)
    keys = []
    owners = []
    for r, f in enumerate(features):
        if f.vector.shape[0] != width:
            raise DataError("hybrid features disagree on width")
        mat[r] = f.vector
        keys.append(f.key)
        owners.append(f.user_id)
    return keys, owners, mat


def write_hybrid_csv(features: Iterable[HybridFeature], path) -> None:
    features = list(features)
    if not features:
        raise DataError("refusing to write an empty feature file")
    width = features[0].vector.shape[0]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "flag_text", "flag_inter"]
                   + [f"f{i + 1}" for i in range(width)])
        for f in features:
            if f.vector.shape[0] != width:
                raise DataError("hybrid features disagree on width")
            w.writerow([f.key, int(not f.text_absent),
                        int(not f.interaction_absent)]
                       + [format_float(v) for v in f.vector])


def read_hybrid_csv(path) -> list[HybridFeature]:
    """Read a feature dump.  Block structure is not stored in the file, so
    each feature comes back as a single block of the full width."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    out: list[HybridFeature] = []
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(path, 1, "empty feature file") from None
        if header[:3] != ["id", "flag_text", "flag_inter"]:
            raise DataFormatError(path, 1,
                                  "header must start with id,flag_text,flag_inter")
        width = len(header) - 3
        if width < 1:
            raise DataFormatError(path, 1, "no feature columns")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != width + 3:
                raise DataFormatError(path, lineno,
                                      f"expected {width + 3} fields, got {len(rec)}")
            if rec[1] not in ("0", "1") or rec[2] not in ("0", "1"):
                raise DataFormatError(path, lineno, "flags must be 0 or 1")
            try:
                vec = np.array([float(v) for v in rec[3:]], dtype=np.float64)
            except ValueError:
                raise DataFormatError(path, lineno, "non-numeric feature") from None
            out.append(HybridFeature(rec[0], rec[0], vec,
                                     text_absent=rec[1] == "0",
                                     interaction_absent=rec[2] == "0",
                                     dims=(width,)))
    if not out:
        raise DataError(f"{path}: no feature rows")
    return out
