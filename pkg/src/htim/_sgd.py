"""Driver shared by the negative-sampling trainers.

Handles what the kernels deliberately do not: noise tables, chunking,
uniform pre-draws, the linear learning-rate schedule and optional threading.
Uniform buffers are always drawn on the calling thread in deterministic chunk
order, so the random stream is identical whatever ``threads`` is; with more
than one thread only the interleaving of parameter updates is relaxed
(hogwild style), which is why multi-threaded training is fast but not
bit-reproducible.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .errors import ConfigError, DataError

NOISE_POWER = 0.75
LR_DEFAULT = 0.025
LR_MIN_DEFAULT = 1e-4
CHUNK_EXAMPLES = 200_000


def noise_alias(counts: np.ndarray):
    """Alias tables for the unigram^0.75 noise distribution."""
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 1 or c.shape[0] == 0:
        raise DataError("noise distribution needs at least one outcome")
    if np.any(c < 0) or c.sum() <= 0:
        raise DataError("noise counts must be non-negative with positive mass")
    probs = c ** NOISE_POWER
    probs /= probs.sum()
    return kernels.alias_setup(probs)


def cbow_example_counts(offsets: np.ndarray) -> np.ndarray:
    lengths = np.diff(offsets)
    return np.where(lengths >= 2, lengths, 0).astype(np.int64)


def sg_example_counts(offsets: np.ndarray, window: int) -> np.ndarray:
    out = np.zeros(offsets.shape[0] - 1, dtype=np.int64)
    for s in range(out.shape[0]):
        length = int(offsets[s + 1] - offsets[s])
        if length < 2:
            continue
        i = np.arange(length)
        out[s] = int(np.sum(np.minimum(i + window, length - 1)
                            - np.maximum(i - window, 0)))
    return out


def chunk_ranges(example_counts: np.ndarray, budget: int):
    """Split units into [start, stop) ranges of at most ``budget`` examples.

    A single unit larger than the budget still forms its own chunk.
    Zero-example units ride along with their neighbours.
    """
    ranges: list[tuple[int, int, int]] = []
    start = 0
    acc = 0
    n = len(example_counts)
    for i in range(n):
        ex = int(example_counts[i])
        if acc > 0 and acc + ex > budget:
            ranges.append((start, i, acc))
            start = i
            acc = 0
        acc += ex
    if start < n:
        ranges.append((start, n, acc))
    return ranges


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent deterministic streams derived from one seed."""
    return [np.random.default_rng(s)
            for s in np.random.SeedSequence(seed).spawn(n)]


def run_training(kind: str, w_in: np.ndarray, w_out: np.ndarray, data,
                 noise_counts: np.ndarray, rng: np.random.Generator, *,
                 window: int = 0, negatives: int = 5, epochs: int = 5,
                 threads: int = 1, lr: float = LR_DEFAULT,
                 lr_min: float = LR_MIN_DEFAULT,
                 chunk_examples: int = CHUNK_EXAMPLES) -> list[float]:
    """Train in place; returns the mean loss per epoch.

    ``kind`` selects the objective: ``cbow`` / ``sg`` over sentences given as
    ``(tokens, offsets)``, or ``pairs`` over ``(src, dst, repeats)`` arrays.
    """
    if negatives < 1:
        raise ConfigError("negatives must be >= 1")
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if kind in ("cbow", "sg"):
        if window < 1:
            raise ConfigError("window must be >= 1")
        tokens, offsets = data
        counts = (cbow_example_counts(offsets) if kind == "cbow"
                  else sg_example_counts(offsets, window))
    elif kind == "pairs":
        src, dst, rep = data
        counts = np.asarray(rep, dtype=np.int64)
    else:
        raise ConfigError(f"unknown training kind {kind!r}")

    per_epoch = int(counts.sum())
    if per_epoch == 0:
        return []
    total = per_epoch * epochs
    chunks = chunk_ranges(counts, chunk_examples)
    noise_j, noise_q = noise_alias(noise_counts)
    k = negatives

    def make_call(a: int, b: int, uniforms, done: int):
        if kind == "cbow":
            return (kernels.cbow_epoch_batch,
                    (w_in, w_out, tokens, offsets[a:b + 1], window, k,
                     noise_j, noise_q, uniforms, done, total, lr, lr_min))
        if kind == "sg":
            return (kernels.sg_epoch_batch,
                    (w_in, w_out, tokens, offsets[a:b + 1], window, k,
                     noise_j, noise_q, uniforms, done, total, lr, lr_min))
        return (kernels.pair_epoch_batch,
                (w_in, w_out, src[a:b], dst[a:b], counts[a:b], k,
                 noise_j, noise_q, uniforms, done, total, lr, lr_min))

    losses: list[float] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    done = 0
    try:
        for _ in range(epochs):
            epoch_loss = 0.0
            futures = []
            for (a, b, ex) in chunks:
                if ex == 0:
                    continue
                uniforms = rng.random(2 * k * ex)
                fn, args = make_call(a, b, uniforms, done)
                done += ex
                if pool is None:
                    loss, seen = fn(*args)
                    if seen != ex:  # pragma: no cover - internal invariant
                        raise AssertionError(
                            f"planned {ex} examples, kernel saw {seen}")
                    epoch_loss += loss
                else:
                    futures.append(pool.submit(fn, *args))
            for fut in futures:
                epoch_loss += fut.result()[0]
            losses.append(epoch_loss / per_epoch)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return losses
