"""Exact 2-d t-SNE for qualitative inspection of user embeddings.

O(n^2) per iteration, meant for region-sized user sets (hundreds to a few
thousand points).  Fixed seed means fixed output; the run records the KL
divergence at initialisation and after the final iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, NumericError


@dataclass
class Projection2D:
    ids: list[str]
    coords: np.ndarray      # (n, 2)
    kl_initial: float
    kl_final: float
    perplexity: float       # effective value after clamping
    iterations: int


def tsne_project(vectors: np.ndarray, ids: Sequence[str] | None = None,
                 perplexity: float = 30.0, iterations: int = 1000,
                 learning_rate: float = 200.0, seed: int = 0,
                 early_exaggeration: float = 12.0,
                 exaggeration_iters: int = 250,
                 momentum_switch: int = 250) -> Projection2D:
    """Project row vectors to 2-d.

    The per-point bandwidth is found by bisection to match the target
    perplexity (clamped to (n - 1) / 3 for tiny inputs); early iterations
    exaggerate attractive forces and use the lower momentum.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4:
        raise DataError("t-SNE needs a 2-d matrix with at least 4 rows")
    if not np.all(np.isfinite(x)):
        raise NumericError("t-SNE input contains non-finite values")
    if perplexity <= 0.0:
        raise ConfigError("perplexity must be positive")
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    n = x.shape[0]
    if ids is None:
        id_list = [str(i) for i in range(n)]
    else:
        id_list = [str(v) for v in ids]
        if len(id_list) != n:
            raise DataError("id count does not match row count")
    eff_perp = min(float(perplexity), (n - 1) / 3.0)
    eff_perp = max(eff_perp, 1.0)

    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)

    cond = kernels.tsne_cond_probs(d2, float(np.log(eff_perp)), 64, 1e-6)
    p = (cond + cond.T) / (2.0 * n)

    rng = np.random.default_rng(seed)
    y = rng.standard_normal((n, 2)) * 1e-4
    kl_initial = float(kernels.tsne_kl(p, y))
    vel = np.zeros((n, 2), dtype=np.float64)
    gains = np.ones((n, 2), dtype=np.float64)
    kernels.tsne_run(p, y, vel, gains, int(iterations),
                     float(learning_rate), float(early_exaggeration),
                     int(min(exaggeration_iters, iterations)),
                     int(momentum_switch), 0.5, 0.8)
    if not np.all(np.isfinite(y)):
        raise NumericError("t-SNE diverged to non-finite coordinates "
                           "(try a lower learning rate)")
    kl_final = float(kernels.tsne_kl(p, y))
    return Projection2D(id_list, y, kl_initial, kl_final, eff_perp,
                        int(iterations))
