"""From a region dataset and a method string to features and reports.

Representation fitting is transductive: text models and interaction
embeddings are trained once on the whole region (all retained tweets, the
full retweet graph) and only the classifier is cross-validated.  Providers
cache per-user and per-tweet vectors so fold loops stay cheap.
"""

from __future__ import annotations

import time
from typing import Mapping

import numpy as np

from . import text as textmod
from .config import MethodSpec, RunConfig
from .corpus import RegionDataset, Tier
from .errors import ConfigError, DataError
from .evaluate import EvalOutcome, EvalReport, run_cv, run_transfer
from .fusion import HybridFeature, fuse_tweet_level, fuse_user_level
from .graph import (InteractionGraph, WalkConfig, build_graph,
                    train_relational, train_walk_embeddings)
from .svm import (KernelConfig, MajorityBaseline, RandomBaseline,
                  SvmClassifier)
from .tsne import Projection2D, tsne_project
from .vectors import EmbeddingTable


def tier_users(dataset: RegionDataset, tier: Tier) -> list[tuple[str, str]]:
    """(user_id, party) pairs for a tier, in dataset order."""
    pairs = [(u.user_id, u.party) for u in dataset.labeled(tier)]
    if not pairs:
        raise DataError(f"no labeled users in tier {tier.value!r}")
    return pairs


class FeatureProvider:
    """Lazily fused hybrid features over a fixed dataset."""

    def __init__(self, dataset: RegionDataset, level: str,
                 text_kind: str | None, text_model,
                 ctx_data: Mapping[str, np.ndarray] | None,
                 pooling: str | None, text_dim: int,
                 graph_table: EmbeddingTable | None,
                 segment_norm: bool = False):
        self.dataset = dataset
        self.level = level
        self.text_kind = text_kind
        self.text_model = text_model
        self.ctx_data = ctx_data
        self.pooling = pooling
        self.text_dim = text_dim if text_kind else 0
        self.graph_table = graph_table
        self.graph_dim = graph_table.dim if graph_table is not None else 0
        self.segment_norm = segment_norm
        self._users = dataset.user_map()
        self._tweet_cache: dict[str, textmod.TextVector] = {}
        self._user_text_cache: dict[str, textmod.TextVector] = {}

    # -- single vectors ----------------------------------------------------

    def tweet_text_vector(self, tweet_id: str) -> textmod.TextVector:
        cached = self._tweet_cache.get(tweet_id)
        if cached is not None:
            return cached
        tweet = self.dataset.tweets.get(tweet_id)
        if tweet is None:
            raise DataError(f"unknown tweet {tweet_id!r}")
        if self.text_kind == "cbow":
            vec = textmod.embed_tweet_static(self.text_model, tweet.tokens)
        elif self.text_kind and self.text_kind.startswith("ctx-"):
            if isinstance(self.text_model, EmbeddingTable):
                # pooled per-tweet vectors were built ahead of time
                hit = self.text_model.lookup(tweet_id)
                if hit.absent:
                    raise DataError(f"no pooled vector for tweet {tweet_id!r}")
                vec = textmod.TextVector(hit.vector, absent=False,
                                         kind=f"contextual-{self.pooling}")
            else:
                arr = self.ctx_data.get(tweet_id)
                if arr is None:
                    raise DataError(f"no contextual token record for tweet "
                                    f"{tweet_id!r}")
                vec = textmod.pool_contextual(arr, self.pooling)
        else:
            raise DataError(f"text kind {self.text_kind!r} has no per-tweet "
                            f"vectors")
        self._tweet_cache[tweet_id] = vec
        return vec

    def user_text_vector(self, user_id: str) -> textmod.TextVector | None:
        if self.text_kind is None:
            return None
        cached = self._user_text_cache.get(user_id)
        if cached is not None:
            return cached
        user = self._users.get(user_id)
        if user is None:
            raise DataError(f"unknown user {user_id!r}")
        if self.text_kind == "tfidf":
            tokens = [t for tid in user.tweet_ids
                      for t in self.dataset.tweets[tid].tokens]
            vec = self.text_model.transform(tokens)
            if not user.tweet_ids:
                vec = textmod.TextVector(np.zeros(self.text_dim),
                                         absent=True, kind="tfidf")
        else:
            per_tweet = [self.tweet_text_vector(tid)
                         for tid in user.tweet_ids]
            vec = textmod.user_text_vector(per_tweet, dim=self.text_dim)
        self._user_text_cache[user_id] = vec
        return vec

    def interaction_vector(self, user_id: str):
        if self.graph_table is None:
            return None
        return self.graph_table.lookup(user_id)

    # -- fused rows --------------------------------------------------------

    def user_feature(self, user_id: str) -> HybridFeature:
        return fuse_user_level(
            user_id, self.user_text_vector(user_id),
            self.interaction_vector(user_id),
            (self.text_dim, self.graph_dim), self.segment_norm)

    def tweet_feature(self, tweet_id: str) -> HybridFeature:
        tweet = self.dataset.tweets.get(tweet_id)
        if tweet is None:
            raise DataError(f"unknown tweet {tweet_id!r}")
        return fuse_tweet_level(
            tweet_id, tweet.user_id, self.tweet_text_vector(tweet_id),
            self.user_text_vector(tweet.user_id),
            self.interaction_vector(tweet.user_id),
            (self.text_dim, self.text_dim, self.graph_dim),
            self.segment_norm)

    def user_matrix(self, uids: list[str]) -> np.ndarray:
        rows = [self.user_feature(u).vector for u in uids]
        return np.stack(rows) if rows else np.zeros((0, self.width))

    def tweet_matrix(self, uids: list[str]) -> tuple[list[str], np.ndarray]:
        owners: list[str] = []
        rows: list[np.ndarray] = []
        for uid in uids:
            user = self._users.get(uid)
            if user is None:
                raise DataError(f"unknown user {uid!r}")
            if not user.tweet_ids:
                raise DataError(f"user {uid!r} has no retained tweets for "
                                f"tweet-level features")
            for tid in user.tweet_ids:
                feat = self.tweet_feature(tid)
                owners.append(uid)
                rows.append(feat.vector)
        return owners, np.stack(rows)

    def user_features(self, uids: list[str]) -> list[HybridFeature]:
        return [self.user_feature(u) for u in uids]

    def tweet_features(self, uids: list[str]) -> list[HybridFeature]:
        out = []
        for uid in uids:
            user = self._users.get(uid)
            if user is None:
                raise DataError(f"unknown user {uid!r}")
            for tid in user.tweet_ids:
                out.append(self.tweet_feature(tid))
        return out

    @property
    def width(self) -> int:
        base = self.text_dim + self.graph_dim
        return base + (self.text_dim if self.level == "tweet" else 0)


class TrivialProvider:
    """Constant features for the baselines (they ignore inputs anyway)."""

    level = "user"

    def user_matrix(self, uids: list[str]) -> np.ndarray:
        return np.zeros((len(uids), 1))

    def tweet_matrix(self, uids):  # pragma: no cover - baselines are user level
        raise DataError("baselines do not produce tweet-level features")


def train_text_model(dataset: RegionDataset, kind: str, cfg: RunConfig,
                     ctx_data=None):
    """Fit the configured text representation on the whole region."""
    if kind == "tfidf":
        docs = {}
        for u in dataset.users:
            if u.tweet_ids:
                docs[u.user_id] = [t for tid in u.tweet_ids
                                   for t in dataset.tweets[tid].tokens]
        if not docs:
            raise DataError("no tweets available to fit tf-idf")
        # text_dim acts as a cap here: small regions simply yield a
        # shorter term list, mirroring the usual max-features semantics
        vocab = len({t for toks in docs.values() for t in toks})
        return textmod.fit_tfidf(docs, min(cfg.text_dim, vocab))
    if kind == "cbow":
        sentences = [t.tokens for t in dataset.tweets.values()]
        if not sentences:
            raise DataError("no tweets available to train word vectors")
        return textmod.train_cbow(
            sentences, dim=cfg.text_dim, window=cfg.window,
            negatives=cfg.negatives, epochs=cfg.text_epochs, seed=cfg.seed,
            threads=cfg.threads)
    if kind.startswith("ctx-"):
        return None  # pooled lazily from ctx_data
    raise ConfigError(f"unknown text kind {kind!r}")


def train_graph_table(dataset: RegionDataset, kind: str, cfg: RunConfig,
                      ) -> EmbeddingTable:
    """Train the configured interaction embedding on the full graph."""
    graph = build_graph(dataset.retweets)
    if kind == "relational":
        return train_relational(graph, dim=cfg.graph_dim,
                                negatives=cfg.negatives,
                                epochs=cfg.re_epochs, seed=cfg.seed,
                                threads=cfg.threads, table=cfg.re_table)
    walk_cfg = WalkConfig(
        walks_per_node=cfg.walks_per_node, walk_length=cfg.walk_length,
        window=cfg.walk_window, epochs=cfg.walk_epochs,
        p=1.0 if kind == "deepwalk" else cfg.p,
        q=1.0 if kind == "deepwalk" else cfg.q)
    return train_walk_embeddings(graph, walk_cfg, dim=cfg.graph_dim,
                                 negatives=cfg.negatives, seed=cfg.seed,
                                 threads=cfg.threads, method=kind)


def build_provider(dataset: RegionDataset, cfg: RunConfig,
                   text_model=None, graph_table: EmbeddingTable | None = None,
                   ctx_data=None) -> FeatureProvider:
    """Assemble the provider, training whatever was not supplied."""
    cfg.validate()
    spec = cfg.spec()
    if spec.baseline:
        raise ConfigError("baselines do not use features")
    ctx_dim = 0
    if spec.text and spec.text.startswith("ctx-"):
        if isinstance(text_model, EmbeddingTable):
            ctx_dim = text_model.dim  # pooled tweet-vector table
        elif ctx_data is None:
            if not cfg.tokens_path:
                raise ConfigError(f"method {cfg.method!r} needs tokens_path "
                                  f"(a contextual token vector file)")
            ctx_data, ctx_dim = textmod.load_contextual_tokens(cfg.tokens_path)
        else:
            first = next(iter(ctx_data.values()), None)
            if first is None:
                raise DataError("contextual token data is empty")
            ctx_dim = int(np.asarray(first).shape[1])
    if spec.text and text_model is None and not spec.text.startswith("ctx-"):
        text_model = train_text_model(dataset, spec.text, cfg)
    if spec.graph and graph_table is None:
        graph_table = train_graph_table(dataset, spec.graph, cfg)
    if spec.text == "cbow" and hasattr(text_model, "dim"):
        text_dim = text_model.dim
    elif spec.text == "tfidf":
        text_dim = text_model.dim
    elif spec.text:
        text_dim = ctx_dim
    else:
        text_dim = 0
    return FeatureProvider(dataset, cfg.level, spec.text, text_model,
                           ctx_data, spec.pooling, text_dim, graph_table,
                           cfg.segment_norm)


def make_classifier_factory(cfg: RunConfig):
    """Per-call classifier builder; random baselines get fold-unique streams."""
    spec = cfg.spec()
    if spec.baseline == "majority":
        return lambda: MajorityBaseline()
    if spec.baseline == "random":
        seeds = iter(np.random.SeedSequence(cfg.seed).generate_state(10_000))
        return lambda: RandomBaseline(int(next(seeds)))
    kernel_cfg = KernelConfig(
        c=cfg.svm_c, gamma=cfg.svm_gamma, tol=cfg.svm_tol,
        max_iter=cfg.svm_max_iter, multiclass=cfg.multiclass,
        standardize=cfg.standardize)
    return lambda: SvmClassifier(kernel_cfg, threads=cfg.threads)


def evaluate_dataset(dataset: RegionDataset, cfg: RunConfig,
                     text_model=None, graph_table=None, ctx_data=None,
                     ) -> tuple[EvalReport, object]:
    """Run the configured evaluation and build its report.

    Returns (report, provider).  ``runtime_s`` is only recorded for
    multi-threaded runs; single-threaded runs keep the report byte-stable
    for a fixed seed.
    """
    started = time.perf_counter()
    cfg.validate()
    spec = cfg.spec()
    tier = Tier(cfg.tier)
    mode = cfg.resolved_mode()
    if spec.baseline:
        provider = TrivialProvider()
    else:
        provider = build_provider(dataset, cfg, text_model=text_model,
                                  graph_table=graph_table, ctx_data=ctx_data)
    factory = make_classifier_factory(cfg)
    if mode == "cv":
        pairs = tier_users(dataset, Tier.MEMBER)
        outcome = run_cv(pairs, provider, factory, k=cfg.folds,
                         seed=cfg.seed, aggregate=cfg.aggregate)
    else:
        train_pairs = tier_users(dataset, Tier.MEMBER)
        test_pairs = tier_users(dataset, tier)
        outcome = run_transfer(train_pairs, test_pairs, provider, factory)
    elapsed = time.perf_counter() - started
    report = EvalReport(cfg.echo(), tier.value, outcome, cfg.seed,
                        runtime_s=None if cfg.threads == 1
                        else round(elapsed, 3))
    return report, provider


def project_dataset(dataset: RegionDataset, cfg: RunConfig,
                    tiers: list[Tier] | None = None,
                    text_model=None, graph_table=None, ctx_data=None,
                    ) -> tuple[Projection2D, dict[str, str]]:
    """User-level t-SNE over the fused features of the chosen tiers."""
    cfg.validate()
    if cfg.spec().baseline:
        raise ConfigError("baselines have no representation to project")
    if tiers is None:
        tiers = [Tier(cfg.tier)]
    provider = build_provider(dataset, cfg, text_model=text_model,
                              graph_table=graph_table, ctx_data=ctx_data)
    pairs: list[tuple[str, str]] = []
    for t in tiers:
        pairs.extend(tier_users(dataset, t))
    uids = [u for u, _ in pairs]
    mat = provider.user_matrix(uids)
    projection = tsne_project(mat, ids=uids, perplexity=cfg.perplexity,
                              iterations=cfg.tsne_iters, seed=cfg.seed)
    return projection, dict(pairs)
