"""Run configuration: the method grammar and layered option sources.

Precedence, lowest to highest: built-in defaults, config file, ``HTIM_*``
environment variables, explicit overrides (CLI flags).  The config file is a
flat ``key = value`` format; unknown keys are an error so typos surface
immediately.
"""

from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ConfigError, DataFormatError

TEXT_KINDS = ("tfidf", "cbow", "ctx-sos", "ctx-average", "ctx-maxpool")
GRAPH_KINDS = ("deepwalk", "node2vec", "relational")
BASELINES = ("majority", "random")

_METHOD_ALIASES = {
    "tfidf": "tfidf",
    "w2v": "cbow", "cbow": "cbow", "word2vec": "cbow",
    "ctx-sos": "ctx-sos",
    "ctx-avg": "ctx-average", "ctx-average": "ctx-average",
    "ctx-max": "ctx-maxpool", "ctx-maxpool": "ctx-maxpool",
    "dw": "deepwalk", "deepwalk": "deepwalk",
    "n2v": "node2vec", "node2vec": "node2vec",
    "re": "relational", "rel": "relational", "relational": "relational",
    "majority": "majority", "random": "random",
}


@dataclass(frozen=True)
class MethodSpec:
    """Parsed method string: at most one text and one graph family, or a
    baseline alone."""

    text: str | None = None
    graph: str | None = None
    baseline: str | None = None

    @property
    def pooling(self) -> str | None:
        if self.text and self.text.startswith("ctx-"):
            return self.text.split("-", 1)[1]
        return None

    def describe(self) -> str:
        if self.baseline:
            return self.baseline
        return "+".join([v for v in (self.graph, self.text) if v])


def parse_method(method: str) -> MethodSpec:
    """Parse strings like ``re``, ``re+tfidf``, ``dw``, ``w2v+n2v`` or
    ``ctx-max``.  Order of the parts does not matter."""
    parts = [p.strip() for p in method.split("+")]
    if not method.strip() or any(not p for p in parts):
        raise ConfigError(f"empty method component in {method!r}")
    text = graph = baseline = None
    for part in parts:
        resolved = _METHOD_ALIASES.get(part.lower())
        if resolved is None:
            raise ConfigError(f"unknown method component {part!r}")
        if resolved in TEXT_KINDS:
            if text is not None:
                raise ConfigError(f"two text components in {method!r}")
            text = resolved
        elif resolved in GRAPH_KINDS:
            if graph is not None:
                raise ConfigError(f"two graph components in {method!r}")
            graph = resolved
        else:
            baseline = resolved
    if baseline is not None and (text or graph or len(parts) > 1):
        raise ConfigError(f"baseline {baseline!r} cannot be combined "
                          f"with other components")
    return MethodSpec(text, graph, baseline)


@dataclass
class RunConfig:
    method: str = "relational"
    level: str = "user"            # fusion level: user | tweet
    tier: str = "member"
    mode: str = "auto"             # auto | cv | transfer
    folds: int = 10
    seed: int = 42
    threads: int = 1
    aggregate: str = "pooled"      # pooled | mean
    # text features
    text_dim: int = 300
    window: int = 5
    negatives: int = 5
    text_epochs: int = 5
    tokens_path: str = ""
    # graph features
    graph_dim: int = 20
    walks_per_node: int = 10
    walk_length: int = 80
    walk_window: int = 10
    walk_epochs: int = 1
    p: float = 1.0
    q: float = 0.5
    re_epochs: int = 5
    re_table: str = "source"
    # corpus handling
    min_tokens: int = 10
    quota_member: int = 120
    quota_supporter: int = 60
    quota_sympathizer: int = 60
    # classifier
    svm_c: float = 1.0
    svm_gamma: float | str = "scale"
    svm_tol: float = 1e-3
    svm_max_iter: int = 1_000_000
    multiclass: str = "ovo"
    standardize: bool = False
    segment_norm: bool = False
    # projection
    perplexity: float = 30.0
    tsne_iters: int = 1000

    def spec(self) -> MethodSpec:
        return parse_method(self.method)

    def validate(self) -> None:
        spec = self.spec()  # raises on a malformed method string
        if self.level not in ("user", "tweet"):
            raise ConfigError(f"level must be 'user' or 'tweet', "
                              f"got {self.level!r}")
        if self.tier not in ("member", "supporter", "sympathizer"):
            raise ConfigError(f"unknown tier {self.tier!r}")
        if self.mode not in ("auto", "cv", "transfer"):
            raise ConfigError(f"mode must be auto, cv or transfer, "
                              f"got {self.mode!r}")
        if self.aggregate not in ("pooled", "mean"):
            raise ConfigError(f"aggregate must be 'pooled' or 'mean', "
                              f"got {self.aggregate!r}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for name in ("text_dim", "graph_dim", "window", "negatives",
                     "text_epochs", "walks_per_node", "walk_length",
                     "walk_window", "walk_epochs", "re_epochs", "min_tokens",
                     "tsne_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("quota_member", "quota_supporter", "quota_sympathizer"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.p <= 0 or self.q <= 0:
            raise ConfigError("p and q must be positive")
        if self.svm_c <= 0:
            raise ConfigError("svm_c must be positive")
        if self.svm_tol <= 0:
            raise ConfigError("svm_tol must be positive")
        if self.svm_max_iter < 1:
            raise ConfigError("svm_max_iter must be >= 1")
        if isinstance(self.svm_gamma, str):
            if self.svm_gamma != "scale":
                raise ConfigError(f"svm_gamma must be a positive number or "
                                  f"'scale', got {self.svm_gamma!r}")
        elif self.svm_gamma <= 0:
            raise ConfigError("svm_gamma must be positive")
        if self.multiclass not in ("ovo", "ovr"):
            raise ConfigError(f"multiclass must be 'ovo' or 'ovr', "
                              f"got {self.multiclass!r}")
        if self.perplexity <= 0:
            raise ConfigError("perplexity must be positive")
        if self.re_table not in ("source", "target", "average"):
            raise ConfigError(f"re_table must be source, target or average, "
                              f"got {self.re_table!r}")
        if self.level == "tweet":
            if spec.text is None:
                raise ConfigError("tweet-level fusion needs a text component "
                                  "that produces per-tweet vectors")
            if spec.text == "tfidf":
                raise ConfigError("tf-idf is a user-level representation; "
                                  "it cannot drive tweet-level fusion")
        # ctx-* methods also need token vectors (tokens_path or a prebuilt
        # artifact); that is checked where features are assembled, since a
        # supplied pooled table makes the path unnecessary.
        if self.mode == "cv" and self.tier != "member":
            raise ConfigError("cross-validation runs on the member tier; "
                              "use transfer for other tiers")
        if self.mode == "transfer" and self.tier == "member":
            raise ConfigError("transfer evaluates a non-member tier "
                              "against member training")

    def resolved_mode(self) -> str:
        if self.mode != "auto":
            return self.mode
        return "cv" if self.tier == "member" else "transfer"

    def echo(self) -> dict:
        """Stable summary embedded in reports."""
        spec = self.spec()
        out = {
            "method": spec.describe(),
            "level": self.level,
            "mode": self.resolved_mode(),
            "aggregate": self.aggregate,
            "folds": self.folds,
            "threads": self.threads,
        }
        if spec.text:
            out["text"] = {"kind": spec.text, "dim": self.text_dim}
            if spec.text == "cbow":
                out["text"].update({"window": self.window,
                                    "negatives": self.negatives,
                                    "epochs": self.text_epochs})
        if spec.graph:
            out["graph"] = {"kind": spec.graph, "dim": self.graph_dim}
            if spec.graph in ("deepwalk", "node2vec"):
                out["graph"].update({
                    "walks_per_node": self.walks_per_node,
                    "walk_length": self.walk_length,
                    "window": self.walk_window,
                    "epochs": self.walk_epochs})
            if spec.graph == "node2vec":
                out["graph"].update({"p": self.p, "q": self.q})
            if spec.graph == "relational":
                out["graph"].update({"epochs": self.re_epochs,
                                     "table": self.re_table})
        if not spec.baseline:
            out["svm"] = {"c": self.svm_c, "gamma": self.svm_gamma,
                          "tol": self.svm_tol,
                          "multiclass": self.multiclass,
                          "standardize": self.standardize}
        return out


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _coerce(name: str, raw: str, where: str):
    ftype = _FIELD_TYPES[name]
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1]
        ftype = "str" if ftype not in ("float | str", "str") else ftype
    if ftype == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: {name} expects an integer, "
                              f"got {raw!r}") from None
    if ftype == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: {name} expects a number, "
                              f"got {raw!r}") from None
    if ftype == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}: {name} expects a boolean, got {raw!r}")
    if ftype == "float | str":
        try:
            return float(raw)
        except ValueError:
            return raw
    return raw


def load_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment line."""
    path = Path(path)
    values: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"),
                                  start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise DataFormatError(path, lineno,
                                  f"expected 'key = value', got {stripped!r}")
        key, raw = m.group(1), m.group(2)
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        values[key] = _coerce(key, raw, f"{path}:{lineno}")
    return values


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    """Collect HTIM_<FIELD> variables matching RunConfig fields."""
    env = os.environ if environ is None else environ
    values: dict = {}
    for name in _FIELD_TYPES:
        var = "HTIM_" + name.upper()
        if var in env:
            values[name] = _coerce(name, env[var], f"${var}")
    return values


def build_config(file_path=None, environ: Mapping[str, str] | None = None,
                 overrides: Mapping | None = None) -> RunConfig:
    """Layer defaults, file, environment and explicit overrides."""
    values: dict = {}
    if file_path is not None:
        values.update(load_config_file(file_path))
    values.update(env_overrides(environ))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown option {key!r}")
        values[key] = val
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg
