"""Kernel SVM with SMO, one-vs-one voting and the trivial baselines.

Training canonically re-sorts its input rows, so any permutation of the
same (X, y) produces the identical model.  Single-seed runs are fully
deterministic; JSON round-trips preserve decision values bit for bit.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, NumericError

SV_EPS = 1e-10  # multipliers at or below this are not stored


@dataclass(frozen=True)
class KernelConfig:
    kernel: str = "rbf"
    c: float = 1.0
    gamma: float | str = "scale"
    tol: float = 1e-3
    max_iter: int = 1_000_000
    multiclass: str = "ovo"
    standardize: bool = False

    def validate(self) -> None:
        if self.kernel != "rbf":
            raise ConfigError(f"unsupported kernel {self.kernel!r}")
        if self.c <= 0.0:
            raise ConfigError("C must be positive")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ConfigError(f"gamma must be positive or 'scale', "
                                  f"got {self.gamma!r}")
        elif self.gamma <= 0.0:
            raise ConfigError("gamma must be positive")
        if self.tol <= 0.0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.multiclass not in ("ovo", "ovr"):
            raise ConfigError(f"multiclass must be 'ovo' or 'ovr', "
                              f"got {self.multiclass!r}")


def resolve_gamma(cfg_gamma: float | str, x: np.ndarray) -> float:
    """'scale' -> 1 / (n_features * var(X)), or 1.0 for constant X."""
    if isinstance(cfg_gamma, str):
        var = float(x.var())
        if var <= 0.0:
            return 1.0
        return 1.0 / (x.shape[1] * var)
    return float(cfg_gamma)


def rbf_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq_a = np.sum(a * a, axis=1)[:, None]
    sq_b = np.sum(b * b, axis=1)[None, :]
    d2 = sq_a + sq_b - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


@dataclass
class BinaryMachine:
    pos: str                 # decision > 0 votes for this class
    neg: str
    sv: np.ndarray           # (n_sv, d) support vectors
    coef: np.ndarray         # alpha_i * y_i per support vector
    bias: float
    iterations: int = 0
    gap: float = 0.0

    def decision(self, x: np.ndarray, gamma: float) -> np.ndarray:
        if self.sv.shape[0] == 0:
            return np.full(x.shape[0], self.bias)
        return rbf_matrix(x, self.sv, gamma) @ self.coef + self.bias


@dataclass
class Prediction:
    label: str
    votes: dict[str, int] = field(default_factory=dict)
    margins: dict[str, float] = field(default_factory=dict)


@dataclass
class SvmModel:
    classes: list[str]
    machines: list[BinaryMachine]
    config: KernelConfig
    gamma_value: float
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None

    def _prep(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise DataError("prediction input must be 2-d")
        if self.feature_mean is not None:
            x = (x - self.feature_mean) / self.feature_scale
        return x


def _canonical_order(x: np.ndarray, codes: np.ndarray) -> np.ndarray:
    # least significant first: label code, then features right to left
    keys = [codes] + [x[:, c] for c in range(x.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def train_svm(x: np.ndarray, y: Sequence[str], cfg: KernelConfig,
              threads: int = 1) -> SvmModel:
    """Fit one-vs-one (or one-vs-rest) RBF machines with the SMO solver.

    Pairwise problems are independent, so ``threads > 1`` trains them in
    parallel without changing any result.
    """
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("training matrix must be 2-d and non-empty")
    if x.shape[0] != len(y):
        raise DataError("feature and label counts differ")
    if not np.all(np.isfinite(x)):
        raise NumericError("training features contain non-finite values")
    labels = [str(v) for v in y]
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError("training needs at least 2 classes")
    class_idx = {c: i for i, c in enumerate(classes)}
    codes = np.array([class_idx[v] for v in labels], dtype=np.int64)

    mean = scale = None
    if cfg.standardize:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale == 0.0] = 1.0
        x = (x - mean) / scale

    order = _canonical_order(x, codes)
    x = x[order]
    codes = codes[order]
    gamma = resolve_gamma(cfg.gamma, x)

    if cfg.multiclass == "ovo":
        tasks = [(a, b) for a, b in combinations(range(len(classes)), 2)]
    else:
        tasks = [(a, None) for a in range(len(classes))]

    def solve(task) -> BinaryMachine:
        a, b = task
        if b is None:  # one vs rest
            mask = np.ones(x.shape[0], dtype=bool)
            yy = np.where(codes == a, 1.0, -1.0)
            pos, neg = classes[a], "(rest)"
        else:
            mask = (codes == a) | (codes == b)
            yy = np.where(codes[mask] == a, 1.0, -1.0)
            pos, neg = classes[a], classes[b]
        sub = x[mask]
        kmat = rbf_matrix(sub, sub, gamma)
        alpha, bias, iters, gap = kernels.smo_solve(
            kmat, yy, cfg.c, cfg.tol, cfg.max_iter)
        if gap > cfg.tol:
            raise NumericError(
                f"SMO did not converge for {pos} vs {neg}: "
                f"gap {gap:.3e} > tol {cfg.tol:.3e} after {iters} iterations")
        keep = alpha > SV_EPS
        return BinaryMachine(pos, neg, sub[keep].copy(),
                             (alpha * yy)[keep], float(bias),
                             int(iters), float(gap))

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            machines = list(pool.map(solve, tasks))
    else:
        machines = [solve(t) for t in tasks]
    return SvmModel(classes, machines, cfg, gamma, mean, scale)


def predict_many(model: SvmModel, x: np.ndarray) -> list[Prediction]:
    """Vote over pairwise machines; ties resolve by summed signed margins,
    then lexicographically."""
    x = model._prep(x)
    n = x.shape[0]
    votes = np.zeros((n, len(model.classes)), dtype=np.int64)
    margins = np.zeros((n, len(model.classes)), dtype=np.float64)
    idx = {c: i for i, c in enumerate(model.classes)}
    for m in model.machines:
        dec = m.decision(x, model.gamma_value)
        a = idx[m.pos]
        if model.config.multiclass == "ovr" or m.neg == "(rest)":
            votes[:, a] += (dec > 0).astype(np.int64)
            margins[:, a] += dec
            continue
        b = idx[m.neg]
        up = dec > 0
        votes[up, a] += 1
        votes[~up, b] += 1
        margins[:, a] += dec
        margins[:, b] -= dec
    out: list[Prediction] = []
    for r in range(n):
        if model.config.multiclass == "ovr":
            ranked = sorted(range(len(model.classes)),
                            key=lambda c: (-margins[r, c], model.classes[c]))
        else:
            ranked = sorted(range(len(model.classes)),
                            key=lambda c: (-votes[r, c], -margins[r, c],
                                           model.classes[c]))
        best = ranked[0]
        out.append(Prediction(
            model.classes[best],
            {c: int(votes[r, i]) for i, c in enumerate(model.classes)},
            {c: float(margins[r, i]) for i, c in enumerate(model.classes)}))
    return out


def predict(model: SvmModel, x: np.ndarray) -> Prediction:
    return predict_many(model, np.asarray(x, dtype=np.float64)[None, :])[0]


def majority_vote(predictions: Sequence[Prediction]) -> str:
    """Collapse instance-level predictions to one label.

    Ties break by the highest mean margin across the instances, then
    lexicographically, so the result never depends on input order.
    """
    if not predictions:
        raise DataError("cannot vote over zero predictions")
    counts: dict[str, int] = {}
    margin_sum: dict[str, float] = {}
    for p in predictions:
        counts[p.label] = counts.get(p.label, 0) + 1
        for c, m in p.margins.items():
            margin_sum[c] = margin_sum.get(c, 0.0) + m
    n = len(predictions)
    return min(counts,
               key=lambda c: (-counts[c], -(margin_sum.get(c, 0.0) / n), c))


# --------------------------------------------------------------------------
# baselines


class MajorityBaseline:
    """Predicts the most frequent training label (ties: lexicographic)."""

    def __init__(self) -> None:
        self.label: str | None = None

    def fit(self, x, y: Sequence[str]) -> "MajorityBaseline":
        if len(y) == 0:
            raise DataError("cannot fit a baseline on zero labels")
        counts: dict[str, int] = {}
        for v in y:
            counts[str(v)] = counts.get(str(v), 0) + 1
        self.label = min(counts, key=lambda c: (-counts[c], c))
        return self

    def predict_many(self, x) -> list[Prediction]:
        if self.label is None:
            raise DataError("baseline not fitted")
        return [Prediction(self.label) for _ in range(len(x))]


class RandomBaseline:
    """Uniform draws over the training classes with a private stream."""

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self.classes: list[str] = []
        self._rng = np.random.default_rng(seed)

    def fit(self, x, y: Sequence[str]) -> "RandomBaseline":
        if len(y) == 0:
            raise DataError("cannot fit a baseline on zero labels")
        self.classes = sorted({str(v) for v in y})
        return self

    def predict_many(self, x) -> list[Prediction]:
        if not self.classes:
            raise DataError("baseline not fitted")
        picks = self._rng.integers(0, len(self.classes), size=len(x))
        return [Prediction(self.classes[int(k)]) for k in picks]


class SvmClassifier:
    """fit/predict adapter around train_svm for the evaluation harness."""

    def __init__(self, cfg: KernelConfig | None = None, threads: int = 1):
        self.cfg = cfg or KernelConfig()
        self.threads = threads
        self.model: SvmModel | None = None

    def fit(self, x, y) -> "SvmClassifier":
        self.model = train_svm(x, y, self.cfg, threads=self.threads)
        return self

    def predict_many(self, x) -> list[Prediction]:
        if self.model is None:
            raise DataError("classifier not fitted")
        return predict_many(self.model, x)


# --------------------------------------------------------------------------
# serialization


def model_to_json_dict(model: SvmModel) -> dict:
    cfg = model.config
    return {
        "format": "htim-svm",
        "version": 1,
        "classes": list(model.classes),
        "kernel": {"kernel": cfg.kernel, "c": cfg.c,
                   "gamma": cfg.gamma if isinstance(cfg.gamma, str) else float(cfg.gamma),
                   "tol": cfg.tol, "max_iter": cfg.max_iter,
                   "multiclass": cfg.multiclass,
                   "standardize": cfg.standardize},
        "gamma_value": float(model.gamma_value),
        "feature_mean": None if model.feature_mean is None
        else [float(v) for v in model.feature_mean],
        "feature_scale": None if model.feature_scale is None
        else [float(v) for v in model.feature_scale],
        "machines": [{
            "pos": m.pos, "neg": m.neg, "bias": float(m.bias),
            "iterations": m.iterations, "gap": float(m.gap),
            "coef": [float(v) for v in m.coef],
            "sv": [[float(v) for v in row] for row in m.sv],
        } for m in model.machines],
    }


def model_from_json_dict(obj: dict) -> SvmModel:
    if obj.get("format") != "htim-svm" or obj.get("version") != 1:
        raise DataError("not a recognised SVM model payload")
    k = obj["kernel"]
    cfg = KernelConfig(kernel=k["kernel"], c=k["c"], gamma=k["gamma"],
                       tol=k["tol"], max_iter=k["max_iter"],
                       multiclass=k["multiclass"],
                       standardize=k["standardize"])
    machines = []
    for m in obj["machines"]:
        sv = np.asarray(m["sv"], dtype=np.float64)
        if sv.size == 0:
            sv = sv.reshape(0, 0)
        machines.append(BinaryMachine(m["pos"], m["neg"], sv,
                                      np.asarray(m["coef"], dtype=np.float64),
                                      float(m["bias"]),
                                      int(m.get("iterations", 0)),
                                      float(m.get("gap", 0.0))))
    mean = obj.get("feature_mean")
    scale = obj.get("feature_scale")
    return SvmModel(list(obj["classes"]), machines, cfg,
                    float(obj["gamma_value"]),
                    None if mean is None else np.asarray(mean, dtype=np.float64),
                    None if scale is None else np.asarray(scale, dtype=np.float64))


def save_model(model: SvmModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> SvmModel:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc.msg}") from exc
    return model_from_json_dict(obj)
