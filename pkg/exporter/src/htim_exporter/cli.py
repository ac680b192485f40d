"""htim-export: dump frozen transformer token vectors for a tweets file.

    htim-export --model mbert --in tweets.jsonl --out tokens.jsonl

Exit codes: 0 success, 1 usage or model error, 2 unreadable input.
"""

import argparse
import sys

from .export import ExportConfig, ExportError, MODEL_ALIASES, export_file


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # uniform exit code for usage problems
        raise ExportError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="htim-export",
                description="Export per-token hidden vectors from a frozen "
                            "pre-trained language model.")
    p.add_argument("--model", required=True,
                   help="alias (%s) or any model id / local path"
                        % ", ".join(sorted(MODEL_ALIASES)))
    p.add_argument("--in", dest="inp", required=True, metavar="TWEETS",
                   help="input tweets.jsonl")
    p.add_argument("--out", required=True, metavar="TOKENS",
                   help="output tokens.jsonl")
    p.add_argument("--batch", type=int, default=32,
                   help="tweets per inference batch (default 32)")
    p.add_argument("--max-len", type=int, default=128,
                   help="sequence length cap in pieces (default 128)")
    p.add_argument("--log", default=None,
                   help="sidecar log path (default: OUT.log)")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = ExportConfig(model=args.model, batch_size=args.batch,
                           max_length=args.max_len)
        stats = export_file(args.inp, args.out, cfg, log_path=args.log)
    except ExportError as why:
        print(f"error: {why}", file=sys.stderr)
        return 1
    except OSError as why:
        print(f"error: {why}", file=sys.stderr)
        return 2
    print(f"wrote {stats.written} tweets, skipped {stats.skipped}, "
          f"truncated {stats.truncated}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
