"""Dataset loading, tier derivation and quota filtering."""

import pytest

from htim.corpus import (DEFAULT_QUOTAS, FollowEdge, SynthConfig, Tier,
                         apply_tiers, derive_supporters, derive_sympathizers,
                         filter_and_quota, load_region_dir, save_region,
                         synth_region)
from htim.errors import ConfigError, DataError, DataFormatError


def _write_region(d, labels, tweets, retweets, follows):
    (d / "labels.csv").write_text(labels)
    (d / "tweets.jsonl").write_text(tweets)
    (d / "retweets.tsv").write_text(retweets)
    (d / "follows.tsv").write_text(follows)


LABELS_OK = ("user_id,region,party,tier\n"
             "u1,r1,party_a,member\n"
             "u2,r1,party_b,member\n"
             "u3,r1,,\n")
TWEETS_OK = ('{"tweet_id": "t1", "user_id": "u1", "text": "hello world"}\n'
             '{"tweet_id": "t2", "user_id": "u2", "text": "other text"}\n')


class TestLoader:
    def test_round_trip_is_byte_stable(self, tmp_path, tiny_region):
        d1 = tmp_path / "a"
        d2 = tmp_path / "b"
        save_region(tiny_region, d1)
        save_region(load_region_dir(d1), d2)
        for name in ("labels.csv", "tweets.jsonl", "retweets.tsv",
                     "follows.tsv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name

    def test_bad_header_reports_line(self, tmp_path):
        _write_region(tmp_path, "user,region\n", "", "", "")
        with pytest.raises(DataFormatError) as err:
            load_region_dir(tmp_path)
        assert "labels.csv:1" in str(err.value)

    def test_duplicate_user_rejected(self, tmp_path):
        labels = ("user_id,region,party,tier\n"
                  "u1,r1,party_a,member\n"
                  "u1,r1,party_a,member\n")
        _write_region(tmp_path, labels, "", "", "")
        with pytest.raises(DataFormatError) as err:
            load_region_dir(tmp_path)
        assert "labels.csv:3" in str(err.value)

    def test_tier_without_party_rejected(self, tmp_path):
        labels = ("user_id,region,party,tier\n"
                  "u1,r1,,member\n")
        _write_region(tmp_path, labels, "", "", "")
        with pytest.raises(DataFormatError):
            load_region_dir(tmp_path)

    def test_tweet_for_unknown_user_rejected(self, tmp_path):
        tweets = '{"tweet_id": "t1", "user_id": "ghost", "text": "hi"}\n'
        _write_region(tmp_path, LABELS_OK, tweets, "", "")
        with pytest.raises(DataFormatError) as err:
            load_region_dir(tmp_path)
        assert "tweets.jsonl:1" in str(err.value)

    def test_duplicate_tweet_id_rejected(self, tmp_path):
        tweets = ('{"tweet_id": "t1", "user_id": "u1", "text": "a"}\n'
                  '{"tweet_id": "t1", "user_id": "u2", "text": "b"}\n')
        _write_region(tmp_path, LABELS_OK, tweets, "", "")
        with pytest.raises(DataFormatError):
            load_region_dir(tmp_path)

    def test_self_retweet_rejected(self, tmp_path):
        _write_region(tmp_path, LABELS_OK, TWEETS_OK, "u1\tu1\t3\n", "")
        with pytest.raises(DataFormatError) as err:
            load_region_dir(tmp_path)
        assert "retweets.tsv:1" in str(err.value)

    def test_nonpositive_count_rejected(self, tmp_path):
        _write_region(tmp_path, LABELS_OK, TWEETS_OK, "u1\tu2\t0\n", "")
        with pytest.raises(DataFormatError):
            load_region_dir(tmp_path)

    def test_duplicate_follow_rejected(self, tmp_path):
        follows = "u1\tu2\nu1\tu2\n"
        _write_region(tmp_path, LABELS_OK, TWEETS_OK, "", follows)
        with pytest.raises(DataFormatError) as err:
            load_region_dir(tmp_path)
        assert "follows.tsv:2" in str(err.value)

    def test_loader_accepts_clean_region(self, tmp_path):
        _write_region(tmp_path, LABELS_OK, TWEETS_OK, "u1\tu2\t3\n",
                      "u3\tu1\n")
        ds = load_region_dir(tmp_path)
        assert [u.user_id for u in ds.users] == ["u1", "u2", "u3"]
        assert ds.users[2].tier is None
        assert ds.tweets["t1"].tokens == ["hello", "world"]


def _brute_supporters(follows, members, threshold):
    """Independent re-derivation straight from the tier definition."""
    per_user: dict[str, dict[str, int]] = {}
    for e in follows:
        if e.follower in members:
            continue
        party = members.get(e.followee)
        if party is None:
            continue
        per_user.setdefault(e.follower, {})
        per_user[e.follower][party] = per_user[e.follower].get(party, 0) + 1
    out = {}
    for uid, cnt in per_user.items():
        qual = [p for p, c in cnt.items() if c >= threshold]
        if len(qual) == 1:
            out[uid] = qual[0]
    return out


def _brute_sympathizers(follows, members, supporters, cap):
    per_user: dict[str, dict[str, int]] = {}
    for e in follows:
        if e.follower in members or e.follower in supporters:
            continue
        party = members.get(e.followee)
        if party is None:
            continue
        per_user.setdefault(e.follower, {})
        per_user[e.follower][party] = per_user[e.follower].get(party, 0) + 1
    out = {}
    for uid, cnt in per_user.items():
        if any(c > cap for c in cnt.values()):
            continue
        best = max(cnt.values())
        winners = [p for p, c in cnt.items() if c == best]
        if len(winners) == 1:
            out[uid] = winners[0]
    return out


class TestTierDerivation:
    def test_supporter_threshold_edge(self):
        members = {f"m{i}": "party_a" for i in range(6)}
        follows4 = [FollowEdge("x", f"m{i}") for i in range(4)]
        follows5 = [FollowEdge("x", f"m{i}") for i in range(5)]
        assert derive_supporters(follows4, members) == {}
        assert derive_supporters(follows5, members) == {"x": "party_a"}

    def test_supporter_two_parties_is_ambiguous(self):
        members = {f"a{i}": "party_a" for i in range(5)}
        members.update({f"b{i}": "party_b" for i in range(5)})
        follows = ([FollowEdge("x", f"a{i}") for i in range(5)]
                   + [FollowEdge("x", f"b{i}") for i in range(5)])
        assert derive_supporters(follows, members) == {}

    def test_member_never_becomes_supporter(self):
        members = {f"m{i}": "party_a" for i in range(6)}
        follows = [FollowEdge("m0", f"m{i}") for i in range(1, 6)]
        assert derive_supporters(follows, members) == {}

    def test_sympathizer_tie_excluded(self):
        members = {"a0": "party_a", "a1": "party_a",
                   "b0": "party_b", "b1": "party_b"}
        follows = [FollowEdge("x", "a0"), FollowEdge("x", "a1"),
                   FollowEdge("x", "b0"), FollowEdge("x", "b1")]
        assert derive_sympathizers(follows, members, {}) == {}

    def test_sympathizer_cap_exceeded_excluded(self):
        members = {f"a{i}": "party_a" for i in range(3)}
        follows = [FollowEdge("x", f"a{i}") for i in range(3)]
        assert derive_sympathizers(follows, members, {}) == {}

    def test_sympathizer_unique_argmax_wins(self):
        members = {"a0": "party_a", "a1": "party_a", "b0": "party_b"}
        follows = [FollowEdge("x", "a0"), FollowEdge("x", "a1"),
                   FollowEdge("x", "b0")]
        assert derive_sympathizers(follows, members, {}) == {"x": "party_a"}

    def test_supporter_excluded_from_sympathizers(self):
        members = {f"a{i}": "party_a" for i in range(5)}
        follows = [FollowEdge("x", "a0")]
        out = derive_sympathizers(follows, members, {"x": "party_a"})
        assert out == {}

    def test_matches_brute_force_on_random_graphs(self):
        import numpy as np
        rng = np.random.default_rng(77)
        for trial in range(30):
            n_members = int(rng.integers(4, 12))
            parties = ["party_a", "party_b", "party_c"]
            members = {f"m{i}": parties[int(rng.integers(3))]
                       for i in range(n_members)}
            others = [f"o{i}" for i in range(int(rng.integers(3, 10)))]
            follows = []
            seen = set()
            for _ in range(int(rng.integers(5, 60))):
                src = others[int(rng.integers(len(others)))]
                dst = f"m{int(rng.integers(n_members))}"
                if (src, dst) in seen:
                    continue
                seen.add((src, dst))
                follows.append(FollowEdge(src, dst))
            sup = derive_supporters(follows, members, threshold=3)
            assert sup == _brute_supporters(follows, members, 3), trial
            sym = derive_sympathizers(follows, members, sup)
            assert sym == _brute_sympathizers(follows, members, sup, 2), trial


class TestQuotaFilter:
    def test_min_tokens_drops_short_tweets(self, tiny_region):
        ds = filter_and_quota(tiny_region, min_tokens=10)
        for t in ds.tweets.values():
            assert len(t.tokens) >= 10

    def test_quota_caps_tweets_per_user_by_tier(self):
        ds = synth_region(SynthConfig(
            parties=2, members_per_party=4, sympathizers_per_party=3,
            member_tweets=8, sympathizer_tweets=6,
            member_retweets=(5, 10), sympathizer_retweets=(1, 2), seed=3))
        out = filter_and_quota(ds, min_tokens=1,
                               quotas={Tier.MEMBER: 5, Tier.SUPPORTER: 4,
                                       Tier.SYMPATHIZER: 2})
        for u in out.labeled(Tier.MEMBER):
            assert len(u.tweet_ids) == 5
        for u in out.labeled(Tier.SYMPATHIZER):
            assert len(u.tweet_ids) == 2

    def test_quota_keeps_first_surviving_tweets(self):
        ds = synth_region(SynthConfig(
            parties=2, members_per_party=5, sympathizers_per_party=0,
            member_tweets=6, member_retweets=(2, 4), seed=9))
        out = filter_and_quota(ds, min_tokens=1, quotas={Tier.MEMBER: 4})
        for u in out.labeled(Tier.MEMBER):
            original = ds.user_map()[u.user_id].tweet_ids
            assert u.tweet_ids == original[:4]

    def test_default_quotas_shape(self):
        assert DEFAULT_QUOTAS[Tier.MEMBER] == 120
        assert DEFAULT_QUOTAS[Tier.SUPPORTER] == 60
        assert DEFAULT_QUOTAS[Tier.SYMPATHIZER] == 60

    def test_dropped_tweets_leave_the_tweet_table(self):
        ds = synth_region(SynthConfig(
            parties=2, members_per_party=4, sympathizers_per_party=0,
            member_tweets=6, member_retweets=(2, 4), seed=4))
        out = filter_and_quota(ds, min_tokens=1, quotas={Tier.MEMBER: 2})
        referenced = {tid for u in out.users for tid in u.tweet_ids}
        assert set(out.tweets) == referenced
        # edges and users are untouched: graph structure survives filtering
        assert out.retweets == ds.retweets
        assert [u.user_id for u in out.users] == \
               [u.user_id for u in ds.users]


class TestApplyTiers:
    def test_new_users_appended_with_tier(self, tiny_region):
        sup = {"brand_new": "party_a"}
        out = apply_tiers(tiny_region, sup, {})
        rec = out.user_map()["brand_new"]
        assert rec.tier == Tier.SUPPORTER and rec.party == "party_a"

    def test_member_conflict_rejected(self, tiny_region):
        member = tiny_region.labeled(Tier.MEMBER)[0]
        with pytest.raises(DataError):
            apply_tiers(tiny_region, {member.user_id: member.party}, {})


class TestSynth:
    def test_determinism(self):
        cfg = SynthConfig(parties=2, members_per_party=5,
                          sympathizers_per_party=3, member_tweets=3,
                          member_retweets=(5, 10), seed=21)
        a = synth_region(cfg)
        b = synth_region(cfg)
        assert [u.user_id for u in a.users] == [u.user_id for u in b.users]
        assert a.retweets == b.retweets
        assert [a.tweets[t].text for t in a.tweets] == \
               [b.tweets[t].text for t in b.tweets]

    def test_validation(self):
        with pytest.raises(ConfigError):
            SynthConfig(parties=1).validate()
        with pytest.raises(ConfigError):
            SynthConfig(homophily=1.5).validate()

    def test_derivation_recovers_synth_tiers(self):
        ds = synth_region(SynthConfig(
            parties=2, members_per_party=8, supporters_per_party=4,
            sympathizers_per_party=4, member_tweets=2, supporter_tweets=2,
            sympathizer_tweets=2, member_retweets=(3, 6),
            supporter_retweets=(2, 4), sympathizer_retweets=(1, 2), seed=2))
        members = {u.user_id: u.party for u in ds.labeled(Tier.MEMBER)}
        sup = derive_supporters(ds.follows, members)
        sym = derive_sympathizers(ds.follows, members, sup)
        for u in ds.labeled(Tier.SUPPORTER):
            assert sup.get(u.user_id) == u.party
        for u in ds.labeled(Tier.SYMPATHIZER):
            assert sym.get(u.user_id) == u.party
