"""Evaluation harness: stratified folds, macro-F1, cross-validation,
tier transfer, reports and the SVG projection plot.

Scores are percentages.  The default aggregate pools predictions across
folds into one confusion matrix; ``aggregate='mean'`` averages per-fold
macro-F1 instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .svm import Prediction, majority_vote
from .tsne import Projection2D
from .vectors import format_float


# --------------------------------------------------------------------------
# confusion matrices and macro-F1


@dataclass
class ConfusionMatrix:
    classes: list[str]
    counts: np.ndarray  # (true, predicted) int64

    @classmethod
    def empty(cls, classes: Sequence[str]) -> "ConfusionMatrix":
        cs = list(classes)
        if len(cs) != len(set(cs)):
            raise DataError("duplicate class names")
        return cls(cs, np.zeros((len(cs), len(cs)), dtype=np.int64))

    @classmethod
    def from_pairs(cls, truths: Sequence[str], preds: Sequence[str],
                   classes: Sequence[str] | None = None) -> "ConfusionMatrix":
        if len(truths) != len(preds):
            raise DataError("truth and prediction counts differ")
        if classes is None:
            classes = sorted(set(truths) | set(preds))
        cm = cls.empty(classes)
        for t, p in zip(truths, preds):
            cm.add(t, p)
        return cm

    def add(self, true: str, pred: str) -> None:
        idx = {c: i for i, c in enumerate(self.classes)}
        if true not in idx or pred not in idx:
            raise DataError(f"label outside class set: {true!r}/{pred!r}")
        self.counts[idx[true], idx[pred]] += 1

    def merged(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise DataError("cannot merge confusion matrices over "
                            "different class sets")
        return ConfusionMatrix(list(self.classes),
                               self.counts + other.counts)


def per_class_prf(cm: ConfusionMatrix) -> dict[str, dict[str, float]]:
    """Precision/recall/F1 per class, zero where undefined, as percentages."""
    out: dict[str, dict[str, float]] = {}
    counts = cm.counts
    for i, c in enumerate(cm.classes):
        tp = float(counts[i, i])
        pred = float(counts[:, i].sum())
        true = float(counts[i, :].sum())
        precision = tp / pred if pred > 0 else 0.0
        recall = tp / true if true > 0 else 0.0
        f1 = (2.0 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        out[c] = {"precision": precision * 100.0, "recall": recall * 100.0,
                  "f1": f1 * 100.0}
    return out


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1, as a percentage."""
    prf = per_class_prf(cm)
    if not prf:
        raise DataError("empty confusion matrix")
    return sum(v["f1"] for v in prf.values()) / len(prf)


def macro_f1_pairs(truths: Sequence[str], preds: Sequence[str],
                   classes: Sequence[str] | None = None) -> float:
    return macro_f1(ConfusionMatrix.from_pairs(truths, preds, classes))


# --------------------------------------------------------------------------
# fold construction


def kfold_split(ids: Sequence[str], labels: Sequence[str], k: int = 10,
                seed: int = 0) -> list[tuple[list[str], list[str]]]:
    """Stratified folds: each class is shuffled once, then dealt round-robin
    with a per-class offset so small classes spread evenly.  Returns
    (train_ids, test_ids) per fold, deterministic in ``seed``.
    """
    if k < 2:
        raise ConfigError("k must be >= 2")
    if len(ids) != len(labels):
        raise DataError("id and label counts differ")
    if len(ids) < k:
        raise DataError(f"cannot make {k} folds from {len(ids)} items")
    if len(set(ids)) != len(ids):
        raise DataError("duplicate ids in fold input")
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[str]] = {}
    for uid, lab in zip(ids, labels):
        by_class.setdefault(lab, []).append(uid)
    fold_of: dict[str, int] = {}
    for ci, lab in enumerate(sorted(by_class)):
        members = by_class[lab]
        order = rng.permutation(len(members))
        for j, pos in enumerate(order):
            fold_of[members[int(pos)]] = (j + ci) % k
    folds: list[tuple[list[str], list[str]]] = []
    for f in range(k):
        test = [u for u in ids if fold_of[u] == f]
        train = [u for u in ids if fold_of[u] != f]
        folds.append((train, test))
    return folds


# --------------------------------------------------------------------------
# providers and classifier protocol (duck-typed)
#
# provider.level: "user" or "tweet"
# provider.user_matrix(uids) -> (n_users, d) rows aligned with uids
# provider.tweet_matrix(uids) -> (owner_ids, matrix) one row per tweet
# classifier_factory() -> object with fit(X, y) and predict_many(X)


@dataclass
class FoldOutcome:
    fold: int
    test_users: list[str]
    truths: list[str]
    preds: list[str]
    score: float


@dataclass
class EvalOutcome:
    classes: list[str]
    confusion: ConfusionMatrix
    score: float
    folds: list[FoldOutcome]
    aggregate: str


def _predict_users(provider, classifier, uids: list[str]) -> list[str]:
    if provider.level == "tweet":
        owners, mat = provider.tweet_matrix(uids)
        preds = classifier.predict_many(mat)
        per_user: dict[str, list[Prediction]] = {u: [] for u in uids}
        for owner, pred in zip(owners, preds):
            per_user[owner].append(pred)
        missing = [u for u, ps in per_user.items() if not ps]
        if missing:
            raise DataError("no tweet instances for users: "
                            f"{missing[:5]}")
        return [majority_vote(per_user[u]) for u in uids]
    mat = provider.user_matrix(uids)
    preds = classifier.predict_many(mat)
    return [p.label for p in preds]


def _fit(provider, classifier, uids: list[str],
         label_of: Mapping[str, str]):
    if provider.level == "tweet":
        owners, mat = provider.tweet_matrix(uids)
        y = [label_of[u] for u in owners]
    else:
        mat = provider.user_matrix(uids)
        y = [label_of[u] for u in uids]
    return classifier.fit(mat, y)


def run_cv(users: Sequence[tuple[str, str]], provider,
           classifier_factory: Callable[[], object], k: int = 10,
           seed: int = 0, aggregate: str = "pooled") -> EvalOutcome:
    """k-fold cross-validation over (user_id, label) pairs."""
    if aggregate not in ("pooled", "mean"):
        raise ConfigError(f"aggregate must be 'pooled' or 'mean', "
                          f"got {aggregate!r}")
    ids = [u for u, _ in users]
    labels = [lab for _, lab in users]
    label_of = dict(users)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError("cross-validation needs at least 2 classes")
    folds = kfold_split(ids, labels, k=k, seed=seed)
    outcomes: list[FoldOutcome] = []
    pooled = ConfusionMatrix.empty(classes)
    for fi, (train, test) in enumerate(folds):
        if not test:
            continue
        clf = classifier_factory()
        _fit(provider, clf, train, label_of)
        preds = _predict_users(provider, clf, test)
        truths = [label_of[u] for u in test]
        cm = ConfusionMatrix.from_pairs(truths, preds, classes)
        pooled = pooled.merged(cm)
        outcomes.append(FoldOutcome(fi, list(test), truths, preds,
                                    macro_f1(cm)))
    if aggregate == "pooled":
        score = macro_f1(pooled)
    else:
        score = sum(o.score for o in outcomes) / len(outcomes)
    return EvalOutcome(classes, pooled, score, outcomes, aggregate)


def run_transfer(train_users: Sequence[tuple[str, str]],
                 test_users: Sequence[tuple[str, str]], provider,
                 classifier_factory: Callable[[], object]) -> EvalOutcome:
    """Train once on one tier, evaluate on another."""
    train_ids = [u for u, _ in train_users]
    label_of = dict(train_users)
    test_label_of = dict(test_users)
    classes = sorted(set(label_of.values()) | set(test_label_of.values()))
    if len(set(label_of.values())) < 2:
        raise DataError("transfer training needs at least 2 classes")
    clf = classifier_factory()
    _fit(provider, clf, train_ids, label_of)
    test_ids = [u for u, _ in test_users]
    preds = _predict_users(provider, clf, test_ids)
    truths = [test_label_of[u] for u in test_ids]
    cm = ConfusionMatrix.from_pairs(truths, preds, classes)
    score = macro_f1(cm)
    return EvalOutcome(classes, cm, score,
                       [FoldOutcome(0, list(test_ids), truths, preds, score)],
                       "pooled")


# --------------------------------------------------------------------------
# reports


@dataclass
class EvalReport:
    config: dict
    tier: str
    outcome: EvalOutcome
    seed: int
    runtime_s: float | None = None

    def to_json_dict(self) -> dict:
        oc = self.outcome
        return {
            "config": self.config,
            "tier": self.tier,
            "folds": [{"fold": f.fold, "macro_f1": f.score,
                       "test_users": len(f.test_users)} for f in oc.folds],
            "macro_f1": oc.score,
            "per_class": per_class_prf(oc.confusion),
            "confusion": {"classes": list(oc.classes),
                          "matrix": oc.confusion.counts.tolist()},
            "seed": self.seed,
            "runtime_s": self.runtime_s,
        }


def write_report_json(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=1)
        fh.write("\n")


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    """Rows are true classes, columns predicted classes."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("true\\pred," + ",".join(cm.classes) + "\n")
        for i, c in enumerate(cm.classes):
            fh.write(c + "," + ",".join(str(int(v)) for v in cm.counts[i])
                     + "\n")


# --------------------------------------------------------------------------
# SVG scatter of a 2-d projection

_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
_GREY = "#aaaaaa"


def render_projection_svg(projection: Projection2D,
                          labels: Mapping[str, str], path,
                          size: int = 800, margin: int = 50,
                          radius: float = 4.0) -> None:
    """One circle per point, colour keyed by label, legend embedded.

    Output is plain hand-assembled SVG with fixed-precision coordinates, so
    identical projections give identical bytes.
    """
    coords = projection.coords
    n = coords.shape[0]
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    used = []
    for uid in projection.ids:
        lab = labels.get(uid, "(unlabeled)")
        if lab not in used:
            used.append(lab)
    used.sort()
    color = {lab: (_GREY if lab == "(unlabeled)"
                   else _PALETTE[i % len(_PALETTE)])
             for i, lab in enumerate(used)}
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="#ffffff"/>',
    ]
    inner = size - 2 * margin
    for i in range(n):
        x = margin + (coords[i, 0] - lo[0]) / span[0] * inner
        y = margin + (coords[i, 1] - lo[1]) / span[1] * inner
        lab = labels.get(projection.ids[i], "(unlabeled)")
        lines.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius:.1f}" '
                     f'fill="{color[lab]}" fill-opacity="0.8"/>')
    ly = margin
    for lab in used:
        lines.append(f'<circle cx="{size - margin - 120}" cy="{ly}" '
                     f'r="5.0" fill="{color[lab]}"/>')
        lines.append(f'<text x="{size - margin - 108}" y="{ly + 4}" '
                     f'font-family="sans-serif" font-size="13">{lab}</text>')
        ly += 20
    lines.append(
        f'<text x="{margin}" y="{size - margin // 2}" '
        f'font-family="sans-serif" font-size="12" fill="#555555">'
        f'KL {format_float(round(projection.kl_final, 6))} after '
        f'{projection.iterations} iterations, perplexity '
        f'{format_float(round(projection.perplexity, 3))}</text>')
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
