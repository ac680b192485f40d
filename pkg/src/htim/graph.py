"""Interaction graphs and the embedding trainers that run on them.

The graph is built from weighted retweet edges.  Walk-based trainers
(uniform and return/in-out biased walks feeding skip-gram with negative
sampling) use the symmetrised undirected view; the relational trainer
consumes the directed weighted edge list directly, which is much cheaper
because it skips walk generation entirely.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _sgd, kernels
from .corpus import RetweetEdge
from .errors import ConfigError, DataError
from .vectors import EmbeddingTable

GRAPH_METHODS = ("deepwalk", "node2vec", "relational")


@dataclass
class InteractionGraph:
    """Symmetrised CSR view plus the original directed edges."""

    node_ids: list[str]
    indptr: np.ndarray
    indices: np.ndarray   # sorted within each row
    weights: np.ndarray
    src: np.ndarray       # directed, parallel edges merged
    dst: np.ndarray
    edge_weight: np.ndarray
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.index = {u: i for i, u in enumerate(self.node_ids)}

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def degree(self, node_id: str) -> int:
        i = self.index[node_id]
        return int(self.indptr[i + 1] - self.indptr[i])

    def neighbors(self, node_id: str) -> list[str]:
        i = self.index[node_id]
        return [self.node_ids[j]
                for j in self.indices[self.indptr[i]:self.indptr[i + 1]]]


def build_graph(retweets: Iterable[RetweetEdge],
                extra_nodes: Iterable[str] = ()) -> InteractionGraph:
    """Merge parallel edges, symmetrise, and index nodes in sorted order.

    ``extra_nodes`` forces isolated users into the graph so every labeled
    user gets a vector slot even without interactions.
    """
    merged: dict[tuple[str, str], int] = {}
    nodes: set[str] = set(extra_nodes)
    for e in retweets:
        if e.source == e.target:
            raise DataError(f"self loop on {e.source!r}")
        if e.weight < 1:
            raise DataError(f"non-positive weight on {e.source!r}->{e.target!r}")
        merged[(e.source, e.target)] = merged.get((e.source, e.target), 0) \
            + e.weight
        nodes.add(e.source)
        nodes.add(e.target)
    if len(nodes) < 2:
        raise DataError(f"graph needs at least 2 nodes, got {len(nodes)}")
    node_ids = sorted(nodes)
    index = {u: i for i, u in enumerate(node_ids)}
    n = len(node_ids)

    undirected: dict[tuple[int, int], float] = {}
    for (s, t), w in merged.items():
        a, b = index[s], index[t]
        key = (a, b) if a < b else (b, a)
        undirected[key] = undirected.get(key, 0.0) + float(w)
    deg = np.zeros(n + 1, dtype=np.int64)
    for (a, b) in undirected:
        deg[a + 1] += 1
        deg[b + 1] += 1
    indptr = np.cumsum(deg)
    indices = np.zeros(int(indptr[-1]), dtype=np.int64)
    weights = np.zeros(int(indptr[-1]), dtype=np.float64)
    cursor = indptr[:-1].copy()
    for (a, b) in sorted(undirected):
        w = undirected[(a, b)]
        indices[cursor[a]] = b
        weights[cursor[a]] = w
        cursor[a] += 1
        indices[cursor[b]] = a
        weights[cursor[b]] = w
        cursor[b] += 1
    # rows fill in sorted (a, b) order, so each row's indices are sorted for b
    # appended under a; entries appended under b arrive in a-order too.
    src = np.fromiter((index[s] for (s, _t) in merged), dtype=np.int64,
                      count=len(merged))
    dst = np.fromiter((index[t] for (_s, t) in merged), dtype=np.int64,
                      count=len(merged))
    wts = np.fromiter(merged.values(), dtype=np.int64, count=len(merged))
    order = np.lexsort((dst, src))
    return InteractionGraph(node_ids, indptr, indices, weights,
                            src[order], dst[order], wts[order])


def transition_probs(graph: InteractionGraph, prev: str | None, cur: str,
                     p: float = 1.0, q: float = 1.0,
                     ) -> tuple[list[str], np.ndarray]:
    """Next-step distribution from ``cur`` given the previous node.

    With ``prev`` None (or p = q = 1) this is the weight-proportional
    first-order distribution; otherwise candidate weights are scaled by 1/p
    for returning to ``prev``, by 1 for neighbours of ``prev``, and by 1/q
    for everything else.
    """
    if p <= 0.0 or q <= 0.0:
        raise ConfigError("p and q must be positive")
    ci = graph.index.get(cur)
    if ci is None:
        raise DataError(f"unknown node {cur!r}")
    lo, hi = int(graph.indptr[ci]), int(graph.indptr[ci + 1])
    neigh = [graph.node_ids[j] for j in graph.indices[lo:hi]]
    w = graph.weights[lo:hi].astype(np.float64).copy()
    if w.size == 0:
        return neigh, w
    if prev is not None and (p != 1.0 or q != 1.0):
        pi = graph.index.get(prev)
        if pi is None:
            raise DataError(f"unknown node {prev!r}")
        prev_neigh = set(
            graph.indices[graph.indptr[pi]:graph.indptr[pi + 1]].tolist())
        for k, x in enumerate(graph.indices[lo:hi]):
            if x == pi:
                w[k] /= p
            elif int(x) not in prev_neigh:
                w[k] /= q
    return neigh, w / w.sum()


@dataclass
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    epochs: int = 1
    p: float = 1.0
    q: float = 1.0

    def validate(self) -> None:
        if self.walks_per_node < 1 or self.walk_length < 1:
            raise ConfigError("walks_per_node and walk_length must be >= 1")
        if self.window < 1 or self.epochs < 1:
            raise ConfigError("window and epochs must be >= 1")
        if self.p <= 0.0 or self.q <= 0.0:
            raise ConfigError("p and q must be positive")


def generate_walks(graph: InteractionGraph, cfg: WalkConfig, seed: int = 0,
                   threads: int = 1) -> np.ndarray:
    """Walk matrix with cfg.walks_per_node rows per node; -1 pads isolated
    starts.  Node order is reshuffled every pass.  Deterministic for a fixed
    seed at any thread count (threads only split pre-assigned row ranges).
    """
    cfg.validate()
    rng_order, rng_steps = _sgd.spawn_rngs(seed, 2)
    n = graph.n_nodes
    starts = np.concatenate([rng_order.permutation(n)
                             for _ in range(cfg.walks_per_node)])
    length = cfg.walk_length
    out = np.full((starts.shape[0], length), -1, dtype=np.int64)
    uniforms = rng_steps.random(starts.shape[0] * max(0, 2 * (length - 1)))
    node_j, node_q = kernels.node_alias_tables(graph.indptr, graph.weights)
    use_edges = cfg.p != 1.0 or cfg.q != 1.0
    if use_edges:
        edge_off, edge_j, edge_q = kernels.edge_alias_tables(
            graph.indptr, graph.indices, graph.weights, cfg.p, cfg.q)
    else:
        edge_off = np.zeros(1, dtype=np.int64)
        edge_j = np.zeros(1, dtype=np.int64)
        edge_q = np.zeros(1, dtype=np.float64)

    per_row = 2 * (length - 1)
    if threads <= 1 or starts.shape[0] < 2 * threads:
        kernels.walk_batch(graph.indptr, graph.indices, starts, node_j,
                           node_q, use_edges, edge_off, edge_j, edge_q,
                           uniforms, out)
        return out
    bounds = np.linspace(0, starts.shape[0], threads + 1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = []
        for t in range(threads):
            a, b = int(bounds[t]), int(bounds[t + 1])
            if a == b:
                continue
            futs.append(pool.submit(
                kernels.walk_batch, graph.indptr, graph.indices, starts[a:b],
                node_j, node_q, use_edges, edge_off, edge_j, edge_q,
                uniforms[a * per_row:b * per_row], out[a:b]))
        for f in futs:
            f.result()
    return out


def _walks_to_stream(walks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flatten walk rows into (tokens, offsets), dropping the -1 padding."""
    lengths = (walks >= 0).sum(axis=1)
    offsets = np.zeros(walks.shape[0] + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    tokens = np.zeros(int(offsets[-1]), dtype=np.int64)
    for r in range(walks.shape[0]):
        row = walks[r, :lengths[r]]
        tokens[offsets[r]:offsets[r + 1]] = row
    return tokens, offsets


def train_skipgram_walks(walks: np.ndarray, node_ids: Sequence[str],
                         dim: int = 20, window: int = 10,
                         negatives: int = 5, epochs: int = 1, seed: int = 0,
                         threads: int = 1, method: str = "deepwalk",
                         ) -> EmbeddingTable:
    """Skip-gram with negative sampling over walk sequences.

    Noise follows walk occupancy counts raised to 0.75.  Nodes that only
    ever appear as isolated starts keep their random initial vector.
    """
    if dim < 1:
        raise ConfigError("embedding dim must be >= 1")
    n = len(node_ids)
    tokens, offsets = _walks_to_stream(np.asarray(walks, dtype=np.int64))
    if tokens.size and (tokens.min() < 0 or tokens.max() >= n):
        raise DataError("walk entries fall outside the node id range")
    counts = np.bincount(tokens, minlength=n).astype(np.float64)
    if not np.all(counts > 0):
        # nodes absent from every walk keep init vectors but need noise mass
        counts = counts + 1e-12
    rng_init, rng_sgd = _sgd.spawn_rngs(seed, 2)
    w_in = (rng_init.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim), dtype=np.float64)
    _sgd.run_training("sg", w_in, w_out, (tokens, offsets), counts, rng_sgd,
                      window=window, negatives=negatives, epochs=epochs,
                      threads=threads)
    return EmbeddingTable(list(node_ids), w_in, method=method)


def train_walk_embeddings(graph: InteractionGraph, cfg: WalkConfig,
                          dim: int = 20, negatives: int = 5, seed: int = 0,
                          threads: int = 1, method: str = "deepwalk",
                          ) -> EmbeddingTable:
    """Generate walks and train skip-gram in one go."""
    walks = generate_walks(graph, cfg, seed=seed, threads=threads)
    return train_skipgram_walks(walks, graph.node_ids, dim=dim,
                                window=cfg.window, negatives=negatives,
                                epochs=cfg.epochs, seed=seed,
                                threads=threads, method=method)


def train_relational(graph: InteractionGraph, dim: int = 20,
                     negatives: int = 5, epochs: int = 5, seed: int = 0,
                     threads: int = 1, table: str = "source",
                     ) -> EmbeddingTable:
    """Direct edge-objective embeddings: each directed edge (s, t, w) trains
    the pair s -> t w times per epoch against weighted in-degree noise.

    ``table`` picks the exported matrix: ``source`` (default), ``target`` or
    ``average`` of the two.
    """
    if dim < 1:
        raise ConfigError("embedding dim must be >= 1")
    if table not in ("source", "target", "average"):
        raise ConfigError(f"unknown table choice {table!r}")
    n = graph.n_nodes
    counts = np.zeros(n, dtype=np.float64)
    for t, w in zip(graph.dst, graph.edge_weight):
        counts[t] += float(w)
    rng_init, rng_sgd = _sgd.spawn_rngs(seed, 2)
    w_in = (rng_init.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim), dtype=np.float64)
    if graph.src.size:
        _sgd.run_training("pairs", w_in, w_out,
                          (graph.src, graph.dst, graph.edge_weight),
                          counts, rng_sgd, negatives=negatives,
                          epochs=epochs, threads=threads)
    if table == "source":
        mat = w_in
    elif table == "target":
        mat = w_out
    else:
        mat = (w_in + w_out) / 2.0
    return EmbeddingTable(list(graph.node_ids), mat, method="relational")
