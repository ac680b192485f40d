"""Frozen-model token vector export.

Runs a pre-trained masked language model over a tweets file and writes one
JSONL record per tweet holding every token's hidden-state vector, row 0
being the start-of-sequence token.  No pooling happens here; the consumer
owns that.  Weights stay frozen (eval mode, no gradients), so repeated
runs over the same input produce identical files.

Input lines look like ``{"tweet_id": s, "user_id": s, "text": s}``;
output lines ``{"tweet_id": s, "dim": D, "tokens": [[f, ...], ...]}``.
Lines the tokenizer cannot handle are skipped and written to a sidecar
log together with every truncation event.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import torch

# Short names for the four model families the toolkit targets.  Anything
# else is passed through untouched, so hub ids and local paths also work.
MODEL_ALIASES = {
    "mbert": "bert-base-multilingual-cased",
    "distilmbert": "distilbert-base-multilingual-cased",
    "xlmr": "xlm-roberta-base",
    "xlmt": "cardiffnlp/twitter-xlm-roberta-base",
}


class ExportError(Exception):
    """Bad configuration or unusable input file."""


@dataclass
class ExportConfig:
    model: str
    batch_size: int = 32
    max_length: int = 128

    def validate(self) -> "ExportConfig":
        if not self.model:
            raise ExportError("a model name is required")
        if self.batch_size < 1:
            raise ExportError("batch size must be >= 1")
        if self.max_length < 2:
            # room for the start-of-sequence token plus at least one piece
            raise ExportError("max length must be >= 2")
        return self


@dataclass
class ExportStats:
    written: int = 0
    skipped: int = 0
    truncated: int = 0


def resolve_model(name: str) -> str:
    return MODEL_ALIASES.get(name, name)


def load_backend(model_id: str):
    """(tokenizer, model) pair in inference mode."""
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as why:  # noqa: BLE001 - hub errors vary by version
        raise ExportError(f"cannot load model {model_id!r}: {why}") from why
    model.eval()
    return tokenizer, model


def _parse_line(raw: str):
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as why:
        raise ValueError(f"not valid JSON ({why.msg})") from None
    if not isinstance(obj, dict):
        raise ValueError("line is not an object")
    tid = obj.get("tweet_id")
    text = obj.get("text")
    if not isinstance(tid, str) or not tid:
        raise ValueError("missing or empty tweet_id")
    if not isinstance(text, str):
        raise ValueError("missing text")
    return tid, text


def _flush(batch, tokenizer, model, cfg, dst, log, stats) -> None:
    if not batch:
        return
    texts = [text for _, _, text in batch]
    try:
        full_ids = tokenizer(texts, truncation=False)["input_ids"]
        enc = tokenizer(texts, truncation=True, max_length=cfg.max_length,
                        padding=True, return_tensors="pt")
    except Exception as why:  # noqa: BLE001 - tokenizers raise freely
        if len(batch) == 1:
            line_no = batch[0][0]
            stats.skipped += 1
            log.write(f"skip line {line_no}: tokenizer failed: {why}\n")
            return
        # one bad item poisons the whole batch; isolate it
        for item in batch:
            _flush([item], tokenizer, model, cfg, dst, log, stats)
        return
    with torch.no_grad():
        hidden = model(**enc).last_hidden_state
    mask = enc["attention_mask"]
    dim = int(hidden.shape[-1])
    for i, (line_no, tid, _) in enumerate(batch):
        n = int(mask[i].sum())
        if len(full_ids[i]) > n:
            log.write(f"truncate line {line_no}: {len(full_ids[i])} "
                      f"pieces -> {n} (max {cfg.max_length})\n")
            stats.truncated += 1
        rec = {"tweet_id": tid, "dim": dim,
               "tokens": hidden[i, :n].tolist()}
        dst.write(json.dumps(rec) + "\n")
        stats.written += 1


def export_file(in_path, out_path, cfg: ExportConfig, log_path=None,
                backend=None) -> ExportStats:
    """Stream the tweets file through the model in input order.

    ``backend`` takes a prebuilt (tokenizer, model) pair, mainly so tests
    can supply a local one; by default the configured model is loaded.
    Returns counts of written / skipped / truncated lines.
    """
    cfg.validate()
    tokenizer, model = backend if backend is not None \
        else load_backend(resolve_model(cfg.model))
    if log_path is None:
        log_path = f"{out_path}.log"
    stats = ExportStats()
    with open(in_path, encoding="utf-8") as src, \
            open(out_path, "w", encoding="utf-8") as dst, \
            open(log_path, "w", encoding="utf-8") as log:
        batch = []
        for line_no, raw in enumerate(src, start=1):
            if not raw.strip():
                continue
            try:
                tid, text = _parse_line(raw)
            except ValueError as why:
                stats.skipped += 1
                log.write(f"skip line {line_no}: {why}\n")
                continue
            batch.append((line_no, tid, text))
            if len(batch) == cfg.batch_size:
                _flush(batch, tokenizer, model, cfg, dst, log, stats)
                batch = []
        _flush(batch, tokenizer, model, cfg, dst, log, stats)
    return stats
