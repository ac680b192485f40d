"""Region datasets: file formats, engagement tiers, quotas and synthesis.

A region is loaded from four files:

* ``labels.csv``    header ``user_id,region,party,tier``; tier is one of
  ``member``, ``supporter``, ``sympathizer`` or empty.
* ``tweets.jsonl``  one object per line: ``tweet_id``, ``user_id``, ``text``.
* ``retweets.tsv``  ``source<TAB>target<TAB>count`` with positive counts.
* ``follows.tsv``   ``follower<TAB>followee``.

Tweets must reference users present in ``labels.csv``; interaction edges may
reference unknown users (unlabeled accounts are expected in the graph).
Loaders are strict and report the offending file and line.  ``save_region``
writes the same four files back; save -> load -> save is byte identical.
"""

from __future__ import annotations

import csv
import enum
import functools
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ConfigError, DataError, DataFormatError
from .text import tokenize

LABELS_HEADER = ["user_id", "region", "party", "tier"]


@functools.total_ordering
class Tier(enum.Enum):
    """Engagement tiers, ordered by strength of the party signal."""

    MEMBER = "member"
    SUPPORTER = "supporter"
    SYMPATHIZER = "sympathizer"

    @property
    def rank(self) -> int:
        return {"member": 3, "supporter": 2, "sympathizer": 1}[self.value]

    def __lt__(self, other: "Tier") -> bool:
        if not isinstance(other, Tier):
            return NotImplemented
        return self.rank < other.rank


DEFAULT_QUOTAS = {Tier.MEMBER: 120, Tier.SUPPORTER: 60, Tier.SYMPATHIZER: 60}
DEFAULT_MIN_TOKENS = 10


@dataclass
class Tweet:
    tweet_id: str
    user_id: str
    text: str
    tokens: list[str]


@dataclass
class UserRecord:
    user_id: str
    region: str
    party: str | None = None
    tier: Tier | None = None
    tweet_ids: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class RetweetEdge:
    source: str
    target: str
    weight: int


@dataclass(frozen=True)
class FollowEdge:
    follower: str
    followee: str


@dataclass
class RegionDataset:
    region: str
    users: list[UserRecord]
    tweets: dict[str, Tweet]
    retweets: list[RetweetEdge]
    follows: list[FollowEdge]

    def user_map(self) -> dict[str, UserRecord]:
        return {u.user_id: u for u in self.users}

    def labeled(self, tier: Tier) -> list[UserRecord]:
        """Users of the given tier that carry a party."""
        return [u for u in self.users if u.tier == tier and u.party]

    def parties(self) -> list[str]:
        return sorted({u.party for u in self.users if u.party})

    def user_tweets(self, user_id: str) -> list[Tweet]:
        user = self.user_map().get(user_id)
        if user is None:
            return []
        return [self.tweets[t] for t in user.tweet_ids]


# --------------------------------------------------------------------------
# loading / saving


def _read_lines(path: Path) -> list[str]:
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_region(labels_path, tweets_path, retweets_path, follows_path,
                tokenizer: Callable[[str], list[str]] = tokenize,
                ) -> RegionDataset:
    labels_path = Path(labels_path)
    tweets_path = Path(tweets_path)
    retweets_path = Path(retweets_path)
    follows_path = Path(follows_path)

    users: list[UserRecord] = []
    seen_users: dict[str, int] = {}
    region: str | None = None
    lines = _read_lines(labels_path)
    if not lines:
        raise DataFormatError(labels_path, 1, "missing header")
    header = next(csv.reader([lines[0]]))
    if header != LABELS_HEADER:
        raise DataFormatError(labels_path, 1,
                              f"expected header {','.join(LABELS_HEADER)!r}")
    for lineno, rec in enumerate(csv.reader(lines[1:]), start=2):
        if not rec:
            continue
        if len(rec) != 4:
            raise DataFormatError(labels_path, lineno,
                                  f"expected 4 fields, got {len(rec)}")
        uid, reg, party, tier_s = rec
        if not uid:
            raise DataFormatError(labels_path, lineno, "empty user_id")
        if uid in seen_users:
            raise DataFormatError(labels_path, lineno,
                                  f"duplicate user_id {uid!r}")
        if not reg:
            raise DataFormatError(labels_path, lineno, "empty region")
        if region is None:
            region = reg
        elif reg != region:
            raise DataFormatError(labels_path, lineno,
                                  f"mixed regions {region!r} and {reg!r}")
        if tier_s:
            try:
                tier = Tier(tier_s)
            except ValueError:
                raise DataFormatError(labels_path, lineno,
                                      f"unknown tier {tier_s!r}") from None
            if not party:
                raise DataFormatError(labels_path, lineno,
                                      f"tier {tier_s!r} requires a party")
        else:
            tier = None
        seen_users[uid] = lineno
        users.append(UserRecord(uid, reg, party or None, tier))

    tweets: dict[str, Tweet] = {}
    for lineno, line in enumerate(_read_lines(tweets_path), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(tweets_path, lineno,
                                  f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise DataFormatError(tweets_path, lineno, "expected an object")
        for key in ("tweet_id", "user_id", "text"):
            if key not in obj or not isinstance(obj[key], str):
                raise DataFormatError(tweets_path, lineno,
                                      f"missing or non-string {key!r}")
        tid = obj["tweet_id"]
        uid = obj["user_id"]
        if tid in tweets:
            raise DataFormatError(tweets_path, lineno,
                                  f"duplicate tweet_id {tid!r}")
        if uid not in seen_users:
            raise DataFormatError(tweets_path, lineno,
                                  f"tweet author {uid!r} not in labels")
        tweets[tid] = Tweet(tid, uid, obj["text"], tokenizer(obj["text"]))

    user_map = {u.user_id: u for u in users}
    for tweet in tweets.values():
        user_map[tweet.user_id].tweet_ids.append(tweet.tweet_id)

    retweets: list[RetweetEdge] = []
    for lineno, line in enumerate(_read_lines(retweets_path), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataFormatError(retweets_path, lineno,
                                  f"expected 3 tab-separated fields, got {len(parts)}")
        src, dst, cnt_s = parts
        if not src or not dst:
            raise DataFormatError(retweets_path, lineno, "empty user id")
        if src == dst:
            raise DataFormatError(retweets_path, lineno,
                                  f"self retweet for {src!r}")
        if not cnt_s.isdigit() or int(cnt_s) < 1:
            raise DataFormatError(retweets_path, lineno,
                                  f"count must be a positive integer, got {cnt_s!r}")
        retweets.append(RetweetEdge(src, dst, int(cnt_s)))

    follows: list[FollowEdge] = []
    seen_follows: set[tuple[str, str]] = set()
    for lineno, line in enumerate(_read_lines(follows_path), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(follows_path, lineno,
                                  f"expected 2 tab-separated fields, got {len(parts)}")
        src, dst = parts
        if not src or not dst:
            raise DataFormatError(follows_path, lineno, "empty user id")
        if src == dst:
            raise DataFormatError(follows_path, lineno,
                                  f"self follow for {src!r}")
        if (src, dst) in seen_follows:
            raise DataFormatError(follows_path, lineno,
                                  f"duplicate follow {src!r} -> {dst!r}")
        seen_follows.add((src, dst))
        follows.append(FollowEdge(src, dst))

    return RegionDataset(region or "", users, tweets, retweets, follows)


def load_region_dir(data_dir, **kwargs) -> RegionDataset:
    d = Path(data_dir)
    return load_region(d / "labels.csv", d / "tweets.jsonl",
                       d / "retweets.tsv", d / "follows.tsv", **kwargs)


def save_region(dataset: RegionDataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "labels.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELS_HEADER)
        for u in dataset.users:
            w.writerow([u.user_id, u.region, u.party or "",
                        u.tier.value if u.tier else ""])
    with open(out / "tweets.jsonl", "w", encoding="utf-8") as fh:
        for t in dataset.tweets.values():
            fh.write(json.dumps({"tweet_id": t.tweet_id, "user_id": t.user_id,
                                 "text": t.text}, ensure_ascii=False) + "\n")
    with open(out / "retweets.tsv", "w", encoding="utf-8") as fh:
        for e in dataset.retweets:
            fh.write(f"{e.source}\t{e.target}\t{e.weight}\n")
    with open(out / "follows.tsv", "w", encoding="utf-8") as fh:
        for e in dataset.follows:
            fh.write(f"{e.follower}\t{e.followee}\n")


# --------------------------------------------------------------------------
# engagement tier derivation


def derive_supporters(follows: Iterable[FollowEdge],
                      members: Mapping[str, str],
                      threshold: int = 5) -> dict[str, str]:
    """Supporters follow at least ``threshold`` members of exactly one party.

    ``members`` maps member user ids to their party.  Accounts qualifying for
    two or more parties are ambiguous and excluded; members themselves are
    never reassigned.
    """
    if threshold < 1:
        raise ConfigError("supporter threshold must be >= 1")
    counts: dict[str, Counter] = {}
    for edge in follows:
        party = members.get(edge.followee)
        if party is None or edge.follower in members:
            continue
        counts.setdefault(edge.follower, Counter())[party] += 1
    out: dict[str, str] = {}
    for uid, per_party in counts.items():
        qualifying = [p for p, c in per_party.items() if c >= threshold]
        if len(qualifying) == 1:
            out[uid] = qualifying[0]
    return out


def derive_sympathizers(follows: Iterable[FollowEdge],
                        members: Mapping[str, str],
                        supporters: Mapping[str, str] | set,
                        max_per_party: int = 2) -> dict[str, str]:
    """Light-touch accounts: 1..``max_per_party`` member follows per party.

    The assigned party is the unique argmax of per-party follow counts; ties
    are excluded.  Members and supporters are never reassigned.
    """
    if max_per_party < 1:
        raise ConfigError("sympathizer cap must be >= 1")
    counts: dict[str, Counter] = {}
    for edge in follows:
        party = members.get(edge.followee)
        if party is None or edge.follower in members:
            continue
        counts.setdefault(edge.follower, Counter())[party] += 1
    out: dict[str, str] = {}
    for uid, per_party in counts.items():
        if uid in supporters:
            continue
        if any(c > max_per_party for c in per_party.values()):
            continue
        best = per_party.most_common()
        if len(best) > 1 and best[0][1] == best[1][1]:
            continue
        out[uid] = best[0][0]
    return out


def apply_tiers(dataset: RegionDataset,
                supporters: Mapping[str, str],
                sympathizers: Mapping[str, str]) -> RegionDataset:
    """Return a copy with derived tiers applied; unknown users are created."""
    overlap = set(supporters) & set(sympathizers)
    if overlap:
        raise DataError(f"users assigned to two tiers: {sorted(overlap)[:3]}")
    users = [replace(u, tweet_ids=list(u.tweet_ids)) for u in dataset.users]
    by_id = {u.user_id: u for u in users}
    new_users: list[UserRecord] = []
    for tier, mapping in ((Tier.SUPPORTER, supporters),
                          (Tier.SYMPATHIZER, sympathizers)):
        for uid in sorted(mapping):
            party = mapping[uid]
            existing = by_id.get(uid)
            if existing is None:
                rec = UserRecord(uid, dataset.region, party, tier)
                by_id[uid] = rec
                new_users.append(rec)
                continue
            if existing.tier == Tier.MEMBER:
                raise DataError(f"member {uid!r} reassigned to {tier.value}")
            if existing.party and existing.party != party:
                raise DataError(
                    f"party conflict for {uid!r}: "
                    f"{existing.party!r} vs derived {party!r}")
            existing.tier = tier
            existing.party = party
    return RegionDataset(dataset.region, users + new_users,
                         dict(dataset.tweets), list(dataset.retweets),
                         list(dataset.follows))


# --------------------------------------------------------------------------
# filtering and quotas


def filter_and_quota(dataset: RegionDataset,
                     min_tokens: int = DEFAULT_MIN_TOKENS,
                     quotas: Mapping[Tier, int] | None = None,
                     ) -> RegionDataset:
    """Drop short tweets and cap each user's tweet list by tier quota.

    Tweet files are expected newest first, so "the most recent N" means the
    first N surviving the length filter.  Users without a tier keep all
    surviving tweets (they never enter classification sets).
    """
    if quotas is None:
        quotas = DEFAULT_QUOTAS
    users = []
    kept_tweets: dict[str, Tweet] = {}
    for u in dataset.users:
        quota = quotas.get(u.tier) if u.tier else None
        kept: list[str] = []
        for tid in u.tweet_ids:
            tweet = dataset.tweets[tid]
            if len(tweet.tokens) < min_tokens:
                continue
            if quota is not None and len(kept) >= quota:
                break
            kept.append(tid)
        users.append(replace(u, tweet_ids=kept))
        for tid in kept:
            kept_tweets[tid] = dataset.tweets[tid]
    return RegionDataset(dataset.region, users, kept_tweets,
                         list(dataset.retweets), list(dataset.follows))


# --------------------------------------------------------------------------
# synthetic regions


@dataclass
class SynthConfig:
    parties: int = 3
    members_per_party: int = 60
    supporters_per_party: int = 0
    sympathizers_per_party: int = 60
    homophily: float = 0.9
    vocab_specificity: float = 0.25
    member_tweets: int = 24
    supporter_tweets: int = 12
    sympathizer_tweets: int = 8
    # Retweet event counts per user.  Members are prolific by definition;
    # the interaction-only trainers need this volume to organise.
    member_retweets: tuple[int, int] = (150, 300)
    supporter_retweets: tuple[int, int] = (30, 60)
    sympathizer_retweets: tuple[int, int] = (2, 5)
    tweet_tokens: tuple[int, int] = (12, 20)
    shared_vocab: int = 200
    party_vocab: int = 50
    supporter_threshold: int = 5
    seed: int = 0
    region: str = "synth"

    def validate(self) -> None:
        if not 2 <= self.parties <= 26:
            raise ConfigError("parties must be in [2, 26]")
        if self.members_per_party < 1:
            raise ConfigError("members_per_party must be >= 1")
        for name in ("supporters_per_party", "sympathizers_per_party"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("homophily", "vocab_specificity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        for name in ("member_retweets", "supporter_retweets",
                     "sympathizer_retweets", "tweet_tokens"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ConfigError(f"{name} range must satisfy 0 <= lo <= hi")
        if self.tweet_tokens[0] < 1:
            raise ConfigError("tweet_tokens lower bound must be >= 1")
        if self.shared_vocab < 1 or self.party_vocab < 1:
            raise ConfigError("vocabulary sizes must be >= 1")
        if self.supporters_per_party > 0 and \
                self.members_per_party < self.supporter_threshold:
            raise ConfigError("supporters need at least supporter_threshold "
                              "members per party to follow")


# Text noisiness scales the party-vocabulary rate down for weaker tiers.
_SPECIFICITY_SCALE = {Tier.MEMBER: 1.0, Tier.SUPPORTER: 0.6,
                      Tier.SYMPATHIZER: 0.4}


def synth_region(cfg: SynthConfig) -> RegionDataset:
    """Generate a homophilous multi-party region with ground-truth labels.

    Members retweet mostly within their own party (``homophily``) and use
    party vocabulary at rate ``vocab_specificity``; weaker tiers retweet and
    post less and their text carries a damped party signal.  Supporters and
    sympathizers also follow members so that tier derivation can recover
    their labels.  Fixed seed, fixed output, byte for byte.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    parties = [f"party_{chr(ord('a') + i)}" for i in range(cfg.parties)]
    shared = [f"w{i:03d}" for i in range(cfg.shared_vocab)]
    party_terms = {p: [f"{p}_t{i:02d}" for i in range(cfg.party_vocab)]
                   for p in parties}

    users: list[UserRecord] = []
    members_by_party: dict[str, list[str]] = {p: [] for p in parties}
    plan: list[tuple[UserRecord, Tier, int, tuple[int, int]]] = []

    def add_tier(prefix: str, tier: Tier, per_party: int, n_tweets: int,
                 rt_range: tuple[int, int]) -> None:
        for pi, party in enumerate(parties):
            for i in range(per_party):
                uid = f"{prefix}{pi}_{i:03d}"
                rec = UserRecord(uid, cfg.region, party, tier)
                users.append(rec)
                plan.append((rec, tier, n_tweets, rt_range))
                if tier == Tier.MEMBER:
                    members_by_party[party].append(uid)

    add_tier("m", Tier.MEMBER, cfg.members_per_party, cfg.member_tweets,
             cfg.member_retweets)
    add_tier("s", Tier.SUPPORTER, cfg.supporters_per_party,
             cfg.supporter_tweets, cfg.supporter_retweets)
    add_tier("y", Tier.SYMPATHIZER, cfg.sympathizers_per_party,
             cfg.sympathizer_tweets, cfg.sympathizer_retweets)

    tweets: dict[str, Tweet] = {}
    seq = 0
    for rec, tier, n_tweets, _ in plan:
        terms = party_terms[rec.party]
        rate = cfg.vocab_specificity * _SPECIFICITY_SCALE[tier]
        for _ in range(n_tweets):
            n_tok = int(rng.integers(cfg.tweet_tokens[0],
                                     cfg.tweet_tokens[1] + 1))
            toks = []
            for _ in range(n_tok):
                if rng.random() < rate:
                    toks.append(terms[int(rng.integers(len(terms)))])
                else:
                    toks.append(shared[int(rng.integers(len(shared)))])
            tid = f"t{seq:06d}"
            seq += 1
            tweets[tid] = Tweet(tid, rec.user_id, " ".join(toks), toks)
            rec.tweet_ids.append(tid)

    def pick_target(user_id: str, party: str) -> str | None:
        pool = members_by_party[party]
        if user_id in pool:
            if len(pool) == 1:
                return None
            k = int(rng.integers(len(pool) - 1))
            if k >= pool.index(user_id):
                k += 1
            return pool[k]
        return pool[int(rng.integers(len(pool)))]

    rt_counts: Counter = Counter()
    for rec, tier, _, rt_range in plan:
        n_events = int(rng.integers(rt_range[0], rt_range[1] + 1))
        others = [p for p in parties if p != rec.party]
        for _ in range(n_events):
            if rng.random() < cfg.homophily or not others:
                party = rec.party
            else:
                party = others[int(rng.integers(len(others)))]
            target = pick_target(rec.user_id, party)
            if target is not None:
                rt_counts[(rec.user_id, target)] += 1
    retweets = [RetweetEdge(s, t, c)
                for (s, t), c in sorted(rt_counts.items())]

    follows: list[FollowEdge] = []
    for rec, tier, _, _ in plan:
        own = members_by_party[rec.party]
        if tier == Tier.SUPPORTER:
            hi = min(cfg.supporter_threshold + 3, len(own))
            k = int(rng.integers(cfg.supporter_threshold, hi + 1))
            chosen = rng.choice(len(own), size=k, replace=False)
            for idx in sorted(int(x) for x in chosen):
                follows.append(FollowEdge(rec.user_id, own[idx]))
        elif tier == Tier.SYMPATHIZER:
            k = min(int(rng.integers(1, 3)), len(own))
            chosen = rng.choice(len(own), size=k, replace=False)
            for idx in sorted(int(x) for x in chosen):
                follows.append(FollowEdge(rec.user_id, own[idx]))
    follows.sort(key=lambda e: (e.follower, e.followee))

    return RegionDataset(cfg.region, users, tweets, retweets, follows)
