"""Command line interface.

Subcommands cover the whole pipeline: ``synth`` and ``ingest`` produce
region datasets, ``derive-tiers`` assigns engagement tiers from follows,
``train-text`` / ``train-graph`` fit representations, ``fuse`` dumps hybrid
features, ``train-model`` fits the classifier, ``eval`` scores it and
``project`` draws the t-SNE scatter.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_config
from .corpus import (SynthConfig, Tier, apply_tiers, derive_supporters,
                     derive_sympathizers, filter_and_quota, load_region,
                     load_region_dir, save_region, synth_region)
from .errors import ConfigError, DataError, HtimError, NumericError
from .evaluate import render_projection_svg, write_confusion_csv, \
    write_report_json
from .fusion import read_hybrid_csv, write_hybrid_csv
from .pipeline import (build_provider, evaluate_dataset, project_dataset,
                       tier_users, train_graph_table, train_text_model)
from .svm import KernelConfig, save_model, train_svm
from .text import TfidfModel, load_contextual_tokens, pool_contextual
from .vectors import format_float, read_embeddings_text, \
    write_embeddings_text

_TEXT_KIND_FLAGS = ("tfidf", "w2v", "ctx-sos", "ctx-avg", "ctx-max")
_GRAPH_KIND_FLAGS = ("dw", "n2v", "re")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems -> exit code 1, not 2
        raise ConfigError(message)


def _gamma_arg(value: str):
    if value == "scale":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"gamma must be a number or 'scale', got {value!r}") from None


def _overrides(args, mapping: dict[str, str]) -> dict:
    out = {}
    for attr, field in mapping.items():
        val = getattr(args, attr, None)
        if val is not None:
            out[field] = val
    return out


_RUN_FLAG_FIELDS = {
    "method": "method", "level": "level", "tier": "tier", "mode": "mode",
    "folds": "folds", "seed": "seed", "threads": "threads",
    "aggregate": "aggregate", "text_dim": "text_dim", "window": "window",
    "negatives": "negatives", "text_epochs": "text_epochs",
    "graph_dim": "graph_dim", "walks": "walks_per_node",
    "walk_length": "walk_length", "walk_window": "walk_window",
    "walk_epochs": "walk_epochs", "p": "p", "q": "q",
    "re_epochs": "re_epochs", "re_table": "re_table",
    "c": "svm_c", "gamma": "svm_gamma", "tol": "svm_tol",
    "multiclass": "multiclass", "standardize": "standardize",
    "segment_norm": "segment_norm", "tokens": "tokens_path",
    "perplexity": "perplexity", "tsne_iters": "tsne_iters",
}


def _add_run_flags(p: _Parser, with_method: bool = True) -> None:
    if with_method:
        p.add_argument("--method", help="representation, e.g. re, re+tfidf, "
                                        "dw, w2v, ctx-max+re")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--level", choices=("user", "tweet"))
    p.add_argument("--tier",
                   choices=("member", "supporter", "sympathizer"))
    p.add_argument("--mode", choices=("auto", "cv", "transfer"))
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--aggregate", choices=("pooled", "mean"))
    p.add_argument("--text-dim", type=int, dest="text_dim")
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--text-epochs", type=int, dest="text_epochs")
    p.add_argument("--graph-dim", type=int, dest="graph_dim")
    p.add_argument("--walks", type=int)
    p.add_argument("--walk-length", type=int, dest="walk_length")
    p.add_argument("--walk-window", type=int, dest="walk_window")
    p.add_argument("--walk-epochs", type=int, dest="walk_epochs")
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--re-epochs", type=int, dest="re_epochs")
    p.add_argument("--re-table", choices=("source", "target", "average"),
                   dest="re_table")
    p.add_argument("--c", type=float)
    p.add_argument("--gamma", type=_gamma_arg)
    p.add_argument("--tol", type=float)
    p.add_argument("--multiclass", choices=("ovo", "ovr"))
    p.add_argument("--standardize", action="store_const", const=True)
    p.add_argument("--segment-norm", action="store_const", const=True,
                   dest="segment_norm")
    p.add_argument("--tokens", help="contextual token vectors (JSONL)")
    p.add_argument("--perplexity", type=float)
    p.add_argument("--tsne-iters", type=int, dest="tsne_iters")
    p.add_argument("--text-model", dest="text_model",
                   help="reuse a trained text artifact")
    p.add_argument("--graph-model", dest="graph_model",
                   help="reuse a trained interaction embedding file")


def _config_from_args(args, extra: dict | None = None) -> RunConfig:
    values = _overrides(args, _RUN_FLAG_FIELDS)
    if extra:
        values.update({k: v for k, v in extra.items() if v is not None})
    return build_config(getattr(args, "config", None), overrides=values)


def _load_artifacts(args, cfg: RunConfig):
    """Resolve --text-model / --graph-model paths into objects."""
    spec = cfg.spec()
    text_model = None
    graph_table = None
    path = getattr(args, "text_model", None)
    if path:
        if spec.text is None:
            raise ConfigError("--text-model given but the method has no "
                              "text component")
        if spec.text == "tfidf":
            try:
                with open(path, encoding="utf-8") as fh:
                    text_model = TfidfModel.from_json_dict(json.load(fh))
            except OSError as exc:
                raise DataError(f"cannot read {path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON: {exc.msg}") from exc
        else:
            text_model = read_embeddings_text(path, method=spec.text)
    path = getattr(args, "graph_model", None)
    if path:
        if spec.graph is None:
            raise ConfigError("--graph-model given but the method has no "
                              "graph component")
        graph_table = read_embeddings_text(path, method=spec.graph)
    return text_model, graph_table


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        parties=args.parties, members_per_party=args.members,
        supporters_per_party=args.supporters,
        sympathizers_per_party=args.sympathizers,
        homophily=args.homophily, vocab_specificity=args.specificity,
        member_tweets=args.member_tweets,
        supporter_tweets=args.supporter_tweets,
        sympathizer_tweets=args.sympathizer_tweets,
        seed=args.seed, region=args.region)
    ds = synth_region(cfg)
    save_region(ds, args.out)
    print(f"wrote {args.out}: {len(ds.users)} users, {len(ds.tweets)} tweets, "
          f"{len(ds.retweets)} retweet edges, {len(ds.follows)} follows")
    return 0


def cmd_ingest(args) -> int:
    ds = load_region(args.labels, args.tweets, args.retweets, args.follows)
    if not args.no_filter:
        quotas = {Tier.MEMBER: args.quota_member,
                  Tier.SUPPORTER: args.quota_supporter,
                  Tier.SYMPATHIZER: args.quota_sympathizer}
        ds = filter_and_quota(ds, min_tokens=args.min_tokens, quotas=quotas)
    save_region(ds, args.out)
    print(f"wrote {args.out}: {len(ds.users)} users, {len(ds.tweets)} tweets "
          f"retained")
    return 0


def cmd_derive_tiers(args) -> int:
    ds = load_region_dir(args.data)
    members = {u.user_id: u.party for u in ds.labeled(Tier.MEMBER)}
    if not members:
        raise DataError("no member-tier users; tiers cannot be derived")
    supporters = derive_supporters(ds.follows, members,
                                   threshold=args.threshold)
    sympathizers = derive_sympathizers(ds.follows, members, supporters,
                                       max_per_party=args.cap)
    out_ds = apply_tiers(ds, supporters, sympathizers)
    save_region(out_ds, args.out)
    print(f"derived {len(supporters)} supporters, "
          f"{len(sympathizers)} sympathizers")
    return 0


def cmd_train_text(args) -> int:
    kind_map = {"tfidf": "tfidf", "w2v": "cbow", "ctx-sos": "ctx-sos",
                "ctx-avg": "ctx-average", "ctx-max": "ctx-maxpool"}
    kind = kind_map[args.kind]
    cfg = _config_from_args(args, {"method": args.kind})
    ds = load_region_dir(args.data)
    if kind == "tfidf":
        model = train_text_model(ds, kind, cfg)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(model.to_json_dict(), fh, indent=1)
            fh.write("\n")
        print(f"fitted tf-idf over {model.n_documents} user documents, "
              f"dim {model.dim}")
        return 0
    if kind == "cbow":
        model = train_text_model(ds, kind, cfg)
        model.save_text(args.out)
        loss = model.losses[-1] if model.losses else float("nan")
        print(f"trained word vectors: {len(model.vocab)} terms, "
              f"dim {model.dim}, final loss {loss:.4f}")
        return 0
    # ctx-*: pool per-tweet token vectors into a tweet-vector table
    if not cfg.tokens_path:
        raise ConfigError("--tokens is required for contextual kinds")
    ctx, dim = load_contextual_tokens(cfg.tokens_path)
    strategy = kind.split("-", 1)[1]
    ids = []
    rows = []
    for tid in ds.tweets:
        arr = ctx.get(tid)
        if arr is None:
            raise DataError(f"no contextual token record for tweet {tid!r}")
        ids.append(tid)
        rows.append(pool_contextual(arr, strategy).vector)
    write_embeddings_text(args.out, ids, np.stack(rows))
    print(f"pooled {len(ids)} tweets with strategy {strategy}, dim {dim}")
    return 0


def cmd_train_graph(args) -> int:
    kind_map = {"dw": "deepwalk", "n2v": "node2vec", "re": "relational"}
    kind = kind_map[args.kind]
    cfg = _config_from_args(args, {"method": args.kind})
    ds = load_region_dir(args.data)
    table = train_graph_table(ds, kind, cfg)
    write_embeddings_text(args.out, table.ids, table.vectors)
    print(f"trained {kind} embeddings for {len(table)} nodes, "
          f"dim {table.dim}")
    return 0


def cmd_fuse(args) -> int:
    cfg = _config_from_args(args)
    ds = load_region_dir(args.data)
    text_model, graph_table = _load_artifacts(args, cfg)
    provider = build_provider(ds, cfg, text_model=text_model,
                              graph_table=graph_table)
    if args.users_tier == "all":
        uids = [u.user_id for u in ds.users
                if u.tier is not None and u.party]
    else:
        uids = [u for u, _ in tier_users(ds, Tier(args.users_tier))]
    if not uids:
        raise DataError("no labeled users selected for fusion")
    feats = (provider.tweet_features(uids) if cfg.level == "tweet"
             else provider.user_features(uids))
    write_hybrid_csv(feats, args.out)
    print(f"wrote {len(feats)} hybrid rows of width {provider.width} "
          f"to {args.out}")
    return 0


def cmd_train_model(args) -> int:
    cfg = _config_from_args(args, {"method": "relational"})
    feats = read_hybrid_csv(args.features)
    ds = load_region_dir(args.data)
    users = ds.user_map()
    labels = []
    for f in feats:
        if f.key in ds.tweets:
            owner = users[ds.tweets[f.key].user_id]
        elif f.key in users:
            owner = users[f.key]
        else:
            raise DataError(f"feature id {f.key!r} is neither a tweet nor "
                            f"a user in {args.data}")
        if not owner.party:
            raise DataError(f"user {owner.user_id!r} has no party label")
        labels.append(owner.party)
    mat = np.stack([f.vector for f in feats])
    kernel_cfg = KernelConfig(c=cfg.svm_c, gamma=cfg.svm_gamma,
                              tol=cfg.svm_tol, max_iter=cfg.svm_max_iter,
                              multiclass=cfg.multiclass,
                              standardize=cfg.standardize)
    model = train_svm(mat, labels, kernel_cfg, threads=cfg.threads)
    save_model(model, args.out)
    sv_total = sum(m.sv.shape[0] for m in model.machines)
    print(f"trained {kernel_cfg.multiclass} model over "
          f"{len(model.classes)} classes, {sv_total} support vectors")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    ds = load_region_dir(args.data)
    text_model, graph_table = _load_artifacts(args, cfg)
    report, _ = evaluate_dataset(ds, cfg, text_model=text_model,
                                 graph_table=graph_table)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out_dir / "report.json")
    write_confusion_csv(report.outcome.confusion, out_dir / "confusion.csv")
    print(f"macro_f1={format_float(round(report.outcome.score, 4))}")
    return 0


def cmd_project(args) -> int:
    cfg = _config_from_args(args)
    ds = load_region_dir(args.data)
    text_model, graph_table = _load_artifacts(args, cfg)
    if args.tiers == "all":
        tiers = [Tier.MEMBER, Tier.SUPPORTER, Tier.SYMPATHIZER]
        tiers = [t for t in tiers if ds.labeled(t)]
    else:
        tiers = [Tier(t.strip()) for t in args.tiers.split(",") if t.strip()]
    projection, labels = project_dataset(ds, cfg, tiers=tiers,
                                         text_model=text_model,
                                         graph_table=graph_table)
    render_projection_svg(projection, labels, args.out)
    print(f"kl_initial={format_float(round(projection.kl_initial, 6))} "
          f"kl_final={format_float(round(projection.kl_final, 6))}")
    return 0


# --------------------------------------------------------------------------
# parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="htim",
                     description="hybrid text+interaction user modeling "
                                 "and leaning inference")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic region")
    p.add_argument("--out", required=True)
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--members", type=int, default=60)
    p.add_argument("--supporters", type=int, default=0)
    p.add_argument("--sympathizers", type=int, default=60)
    p.add_argument("--homophily", type=float, default=0.9)
    p.add_argument("--specificity", type=float, default=0.25)
    p.add_argument("--member-tweets", type=int, default=24,
                   dest="member_tweets")
    p.add_argument("--supporter-tweets", type=int, default=12,
                   dest="supporter_tweets")
    p.add_argument("--sympathizer-tweets", type=int, default=8,
                   dest="sympathizer_tweets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--region", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="normalise, filter and quota a region")
    p.add_argument("--labels", required=True)
    p.add_argument("--tweets", required=True)
    p.add_argument("--retweets", required=True)
    p.add_argument("--follows", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-filter", action="store_true", dest="no_filter")
    p.add_argument("--min-tokens", type=int, default=10, dest="min_tokens")
    p.add_argument("--quota-member", type=int, default=120,
                   dest="quota_member")
    p.add_argument("--quota-supporter", type=int, default=60,
                   dest="quota_supporter")
    p.add_argument("--quota-sympathizer", type=int, default=60,
                   dest="quota_sympathizer")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("derive-tiers",
                       help="assign supporter/sympathizer tiers from follows")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=int, default=5)
    p.add_argument("--cap", type=int, default=2)
    p.set_defaults(func=cmd_derive_tiers)

    p = sub.add_parser("train-text", help="fit a text representation")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", required=True, choices=_TEXT_KIND_FLAGS)
    p.add_argument("--out", required=True)
    _add_run_flags(p, with_method=False)
    p.set_defaults(func=cmd_train_text)

    p = sub.add_parser("train-graph", help="fit interaction embeddings")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", required=True, choices=_GRAPH_KIND_FLAGS)
    p.add_argument("--out", required=True)
    _add_run_flags(p, with_method=False)
    p.set_defaults(func=cmd_train_graph)

    p = sub.add_parser("fuse", help="dump hybrid feature rows to CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--users-tier", default="all", dest="users_tier",
                   choices=("all", "member", "supporter", "sympathizer"))
    _add_run_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("train-model", help="train the classifier on a "
                                           "feature dump")
    p.add_argument("--features", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_run_flags(p, with_method=False)
    p.set_defaults(func=cmd_train_model)

    p = sub.add_parser("eval", help="cross-validate or transfer-evaluate")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=".")
    _add_run_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("project", help="t-SNE scatter of user features")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tiers", default="member",
                   help="comma list of tiers or 'all'")
    _add_run_flags(p)
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HtimError as exc:  # pragma: no cover - catch-all for subclasses
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
