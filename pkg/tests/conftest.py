"""Shared fixtures: tiny regions, contextual token files, helper writers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from htim.corpus import (RegionDataset, SynthConfig, save_region,
                         synth_region)


@pytest.fixture(scope="session")
def tiny_region() -> RegionDataset:
    """2 parties x 8 members + 4 sympathizers, quick to embed."""
    return synth_region(SynthConfig(
        parties=2, members_per_party=8, sympathizers_per_party=4,
        member_tweets=6, sympathizer_tweets=3,
        member_retweets=(40, 80), sympathizer_retweets=(2, 4), seed=11))


@pytest.fixture(scope="session")
def small_region() -> RegionDataset:
    """3 parties, enough users for 5-fold work without being slow."""
    return synth_region(SynthConfig(
        parties=3, members_per_party=15, sympathizers_per_party=6,
        member_tweets=8, sympathizer_tweets=4,
        member_retweets=(60, 120), sympathizer_retweets=(2, 4), seed=23))


@pytest.fixture()
def tiny_region_dir(tmp_path, tiny_region) -> Path:
    d = tmp_path / "region"
    save_region(tiny_region, d)
    return d


def write_contextual_tokens(path, tweet_ids, dim=6, seed=0,
                            min_rows=2, max_rows=5):
    """Synthesise a per-token contextual vector file.

    Row 0 of every record plays the sentence-start role.  Values are
    deterministic in ``seed``; returns {tweet_id: array} for oracle use.
    """
    rng = np.random.default_rng(seed)
    arrays = {}
    with open(path, "w", encoding="utf-8") as fh:
        for tid in tweet_ids:
            rows = int(rng.integers(min_rows, max_rows + 1))
            arr = rng.normal(0.0, 1.0, size=(rows, dim)).round(4)
            arrays[tid] = arr
            rec = {"tweet_id": tid, "dim": dim,
                   "tokens": [[float(v) for v in row] for row in arr]}
            fh.write(json.dumps(rec) + "\n")
    return arrays


@pytest.fixture()
def ctx_tokens_file(tmp_path, tiny_region):
    path = tmp_path / "tokens.jsonl"
    arrays = write_contextual_tokens(path, list(tiny_region.tweets), dim=6,
                                     seed=5)
    return path, arrays
