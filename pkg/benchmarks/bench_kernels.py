"""Wall-time comparison of the compiled kernels against the fallback.

Every numeric kernel runs under numba by default; setting HTIM_NUMBA=0
leaves the same functions interpreted.  Results are bitwise identical, so
the only question is speed.  This script times a representative workload
per kernel family under both backends and prints the ratio.

The backend flag is read once at import, so each measurement runs in a
fresh worker process:

    python3 benchmarks/bench_kernels.py            # full table
    python3 benchmarks/bench_kernels.py --repeat 3 # more stable timings

Workloads are sized so the interpreted pass stays in the tens of seconds.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _sentences(rng, n, length, vocab):
    words = [f"w{i:03d}" for i in range(vocab)]
    # zipf-ish draw keeps a realistic frequency skew
    ranks = rng.zipf(1.3, size=n * length) % vocab
    return [[words[int(r)] for r in ranks[i * length:(i + 1) * length]]
            for i in range(n)]


def _graph(rng, n_users, n_edges):
    from htim.corpus import RetweetEdge
    from htim.graph import build_graph
    users = [f"u{i:03d}" for i in range(n_users)]
    edges = []
    for _ in range(n_edges):
        a, b = rng.choice(n_users, size=2, replace=False)
        edges.append(RetweetEdge(users[int(a)], users[int(b)],
                                 int(rng.integers(1, 6))))
    return build_graph(edges)


def build_tasks(scale):
    """(name, callable) pairs; ``scale`` < 1 gives tiny warm-up inputs that
    still touch every kernel signature."""
    import numpy as np
    from htim.graph import WalkConfig, train_relational, \
        train_walk_embeddings
    from htim.svm import KernelConfig, train_svm
    from htim.text import train_cbow
    from htim.tsne import tsne_project

    rng = np.random.default_rng(7)
    sents = _sentences(rng, max(8, int(900 * scale)), 8, 250)
    graph = _graph(rng, max(10, int(70 * scale)),
                   max(20, int(420 * scale)))
    svm_n = max(24, int(260 * scale))
    svm_x = rng.normal(0, 1.0, (svm_n, 8))
    svm_x[: svm_n // 2] += 1.5
    svm_y = ["a"] * (svm_n // 2) + ["b"] * (svm_n - svm_n // 2)
    tsne_n = max(12, int(72 * scale))
    tsne_x = rng.normal(0, 1.0, (tsne_n, 10))
    tsne_iters = max(20, int(120 * scale))

    walk_cfg = WalkConfig(walks_per_node=3, walk_length=12, window=4,
                          epochs=1)

    return [
        ("cbow text vectors",
         lambda: train_cbow(sents, dim=32, window=5, negatives=5,
                            epochs=1, seed=3)),
        ("walk skip-gram (deepwalk)",
         lambda: train_walk_embeddings(graph, walk_cfg, dim=16,
                                       negatives=3, seed=3)),
        ("biased walks (node2vec)",
         lambda: train_walk_embeddings(graph, walk_cfg, dim=16,
                                       negatives=3, seed=3,
                                       method="node2vec")),
        ("direct pairs (relational)",
         lambda: train_relational(graph, dim=16, negatives=3, epochs=2,
                                  seed=3)),
        ("svm smo solve",
         lambda: train_svm(svm_x, svm_y, KernelConfig())),
        ("t-sne projection",
         lambda: tsne_project(tsne_x, perplexity=12.0,
                              iterations=tsne_iters, seed=3)),
    ]


def worker(repeat):
    from htim import backend_name

    # tiny pass first: under numba this triggers compilation for every
    # signature so the timed pass measures steady-state execution
    for _, fn in build_tasks(scale=0.05):
        fn()
    results = {}
    for name, fn in build_tasks(scale=1.0):
        best = min(_timed(fn) for _ in range(repeat))
        results[name] = best
    print(json.dumps({"backend": backend_name(), "times": results}))


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=1,
                    help="timed runs per task; the best is kept")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        worker(args.repeat)
        return 0

    rows = {}
    for flag in ("1", "0"):
        env = dict(os.environ, HTIM_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True, check=True)
        payload = json.loads(out.stdout.strip().splitlines()[-1])
        rows[payload["backend"]] = payload["times"]

    names = list(next(iter(rows.values())))
    width = max(len(n) for n in names)
    print(f"{'task':<{width}}  {'numba':>9}  {'numpy':>9}  {'speedup':>8}")
    for name in names:
        fast = rows["numba"][name]
        slow = rows["numpy"][name]
        print(f"{name:<{width}}  {fast:>8.3f}s  {slow:>8.3f}s  "
              f"{slow / fast:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
