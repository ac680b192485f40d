"""Numerically hot inner loops.

Every function here is decorated through :mod:`htim._jit`, so it is either
numba-compiled or left as plain Python depending on ``HTIM_NUMBA``.  Bodies
are written as explicit element loops (no vectorised numpy calls) so the two
backends execute identical floating point operations in identical order and
produce bitwise identical results.

No kernel generates randomness.  Callers pre-draw uniform buffers and the
consumption pattern is fixed: 2 uniforms per alias draw, ``2 * k`` per
negative-sampling example, ``2 * (walk_length - 1)`` per walk row.  That keeps
every result a pure function of (inputs, seed) regardless of backend or
chunking.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit


# --------------------------------------------------------------------------
# numerics helpers


@njit(cache=True, inline="always")
def _sigmoid(x):
    # branch avoids exp overflow for large |x|
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, inline="always")
def _log1p_exp(x):
    # log(1 + e^x), stable on both tails
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


# --------------------------------------------------------------------------
# alias method (Vose) for O(1) draws from a discrete distribution


@njit(cache=True)
def _alias_fill(probs, n, j_out, q_out, small, large):
    # probs[:n] must sum to 1; j_out/q_out are slices of length n
    ns = 0
    nl = 0
    for k in range(n):
        q_out[k] = n * probs[k]
        j_out[k] = k
        if q_out[k] < 1.0:
            small[ns] = k
            ns += 1
        else:
            large[nl] = k
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        l = large[nl]
        j_out[s] = l
        q_out[l] = (q_out[l] + q_out[s]) - 1.0
        if q_out[l] < 1.0:
            small[ns] = l
            ns += 1
        else:
            large[nl] = l
            nl += 1
    while ns > 0:  # leftovers are pure rounding noise
        ns -= 1
        q_out[small[ns]] = 1.0
    while nl > 0:
        nl -= 1
        q_out[large[nl]] = 1.0


@njit(cache=True)
def alias_setup(probs):
    """Build alias tables (J, q) for a probability vector."""
    n = probs.shape[0]
    j_out = np.zeros(n, np.int64)
    q_out = np.zeros(n, np.float64)
    small = np.empty(n, np.int64)
    large = np.empty(n, np.int64)
    _alias_fill(probs, n, j_out, q_out, small, large)
    return j_out, q_out


@njit(cache=True, inline="always")
def alias_draw(j_tab, q_tab, u1, u2):
    """Draw one index using two uniforms in [0, 1)."""
    n = j_tab.shape[0]
    k = int(u1 * n)
    if k >= n:
        k = n - 1
    if u2 < q_tab[k]:
        return k
    return j_tab[k]


# --------------------------------------------------------------------------
# negative-sampling steps
#
# Loss per example with score s = h . v_out:
#     target:   log(1 + e^-s)
#     negative: log(1 + e^s)
# Each step reads every parameter it needs before writing any, so with
# distinct negative rows it applies an exact gradient-descent step of that
# loss; lr = 0 evaluates the loss without touching the parameters, which is
# what the finite-difference tests rely on.  Negatives that collide with the
# target are skipped, not redrawn, so the uniform budget stays fixed.


@njit(cache=True)
def sgns_pair_step(w_in, w_out, src, dst, negs, k, lr, gbuf, gh):
    d = w_in.shape[1]
    for c in range(d):
        gh[c] = 0.0
    loss = 0.0
    s = 0.0
    for c in range(d):
        s += w_in[src, c] * w_out[dst, c]
    loss += _log1p_exp(-s)
    gbuf[0] = _sigmoid(s) - 1.0
    for c in range(d):
        gh[c] += gbuf[0] * w_out[dst, c]
    for n in range(k):
        t = negs[n]
        if t == dst:
            gbuf[n + 1] = 0.0
            continue
        s = 0.0
        for c in range(d):
            s += w_in[src, c] * w_out[t, c]
        loss += _log1p_exp(s)
        gbuf[n + 1] = _sigmoid(s)
        for c in range(d):
            gh[c] += gbuf[n + 1] * w_out[t, c]
    if lr != 0.0:
        for c in range(d):
            w_out[dst, c] -= lr * gbuf[0] * w_in[src, c]
        for n in range(k):
            t = negs[n]
            if t == dst:
                continue
            for c in range(d):
                w_out[t, c] -= lr * gbuf[n + 1] * w_in[src, c]
        for c in range(d):
            w_in[src, c] -= lr * gh[c]
    return loss


@njit(cache=True)
def cbow_step(w_in, w_out, ctx, m, center, negs, k, lr, gbuf, hbuf, gh):
    # h is the mean of the m context input rows; the input update divides by
    # m, so the step is the exact gradient of the stated loss (a context word
    # appearing twice correctly receives two updates).
    d = w_in.shape[1]
    for c in range(d):
        acc = 0.0
        for j in range(m):
            acc += w_in[ctx[j], c]
        hbuf[c] = acc / m
        gh[c] = 0.0
    loss = 0.0
    s = 0.0
    for c in range(d):
        s += hbuf[c] * w_out[center, c]
    loss += _log1p_exp(-s)
    gbuf[0] = _sigmoid(s) - 1.0
    for c in range(d):
        gh[c] += gbuf[0] * w_out[center, c]
    for n in range(k):
        t = negs[n]
        if t == center:
            gbuf[n + 1] = 0.0
            continue
        s = 0.0
        for c in range(d):
            s += hbuf[c] * w_out[t, c]
        loss += _log1p_exp(s)
        gbuf[n + 1] = _sigmoid(s)
        for c in range(d):
            gh[c] += gbuf[n + 1] * w_out[t, c]
    if lr != 0.0:
        for c in range(d):
            w_out[center, c] -= lr * gbuf[0] * hbuf[c]
        for n in range(k):
            t = negs[n]
            if t == center:
                continue
            for c in range(d):
                w_out[t, c] -= lr * gbuf[n + 1] * hbuf[c]
        inv = 1.0 / m
        for c in range(d):
            g = lr * gh[c] * inv
            for j in range(m):
                w_in[ctx[j], c] -= g
    return loss


# --------------------------------------------------------------------------
# epoch drivers
#
# Sentences arrive flattened: token ids in ``tokens`` and sentence s spanning
# tokens[offsets[s]:offsets[s+1]].  The learning rate decays linearly from
# lr0 to lr1 over ``total`` examples across all epochs; ``done`` is the
# number already consumed before this batch.


@njit(cache=True, nogil=True)
def cbow_epoch_batch(w_in, w_out, tokens, offsets, window, k,
                     noise_j, noise_q, uniforms, done, total, lr0, lr1):
    """One CBOW pass over a batch of sentences. Returns (loss_sum, examples)."""
    d = w_in.shape[1]
    gh = np.zeros(d, np.float64)
    hbuf = np.zeros(d, np.float64)
    ctxbuf = np.empty(2 * window, np.int64)
    negbuf = np.empty(k, np.int64)
    gbuf = np.empty(k + 1, np.float64)
    upos = 0
    loss = 0.0
    ex = 0
    for s in range(offsets.shape[0] - 1):
        lo = offsets[s]
        hi = offsets[s + 1]
        length = hi - lo
        if length < 2:
            continue
        for pos in range(length):
            center = tokens[lo + pos]
            c0 = pos - window
            if c0 < 0:
                c0 = 0
            c1 = pos + window + 1
            if c1 > length:
                c1 = length
            m = 0
            for j in range(c0, c1):
                if j != pos:
                    ctxbuf[m] = tokens[lo + j]
                    m += 1
            for n in range(k):
                negbuf[n] = alias_draw(noise_j, noise_q,
                                       uniforms[upos], uniforms[upos + 1])
                upos += 2
            lr = lr0 + (lr1 - lr0) * ((done + ex) / total)
            loss += cbow_step(w_in, w_out, ctxbuf, m, center,
                              negbuf, k, lr, gbuf, hbuf, gh)
            ex += 1
    return loss, ex


@njit(cache=True, nogil=True)
def sg_epoch_batch(w_in, w_out, tokens, offsets, window, k,
                   noise_j, noise_q, uniforms, done, total, lr0, lr1):
    """One skip-gram pass over a batch of sentences (center predicts context)."""
    d = w_in.shape[1]
    gh = np.zeros(d, np.float64)
    negbuf = np.empty(k, np.int64)
    gbuf = np.empty(k + 1, np.float64)
    upos = 0
    loss = 0.0
    ex = 0
    for s in range(offsets.shape[0] - 1):
        lo = offsets[s]
        hi = offsets[s + 1]
        length = hi - lo
        for pos in range(length):
            src = tokens[lo + pos]
            c0 = pos - window
            if c0 < 0:
                c0 = 0
            c1 = pos + window + 1
            if c1 > length:
                c1 = length
            for j in range(c0, c1):
                if j == pos:
                    continue
                dst = tokens[lo + j]
                for n in range(k):
                    negbuf[n] = alias_draw(noise_j, noise_q,
                                           uniforms[upos], uniforms[upos + 1])
                    upos += 2
                lr = lr0 + (lr1 - lr0) * ((done + ex) / total)
                loss += sgns_pair_step(w_in, w_out, src, dst,
                                       negbuf, k, lr, gbuf, gh)
                ex += 1
    return loss, ex


@njit(cache=True, nogil=True)
def pair_epoch_batch(w_in, w_out, src_arr, dst_arr, rep_arr, k,
                     noise_j, noise_q, uniforms, done, total, lr0, lr1):
    """One pass over weighted (src, dst) pairs; pair e trains rep_arr[e] times."""
    d = w_in.shape[1]
    gh = np.zeros(d, np.float64)
    negbuf = np.empty(k, np.int64)
    gbuf = np.empty(k + 1, np.float64)
    upos = 0
    loss = 0.0
    ex = 0
    for e in range(src_arr.shape[0]):
        src = src_arr[e]
        dst = dst_arr[e]
        for _ in range(rep_arr[e]):
            for n in range(k):
                negbuf[n] = alias_draw(noise_j, noise_q,
                                       uniforms[upos], uniforms[upos + 1])
                upos += 2
            lr = lr0 + (lr1 - lr0) * ((done + ex) / total)
            loss += sgns_pair_step(w_in, w_out, src, dst,
                                   negbuf, k, lr, gbuf, gh)
            ex += 1
    return loss, ex


# --------------------------------------------------------------------------
# random walks over a CSR graph (indices sorted within each row)


@njit(cache=True, inline="always")
def _has_arc(indptr, indices, a, b):
    # binary search for b in a's sorted neighbour slice
    lo = indptr[a]
    hi = indptr[a + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        v = indices[mid]
        if v == b:
            return True
        if v < b:
            lo = mid + 1
        else:
            hi = mid
    return False


@njit(cache=True)
def node_alias_tables(indptr, weights):
    """Per-node alias tables over outgoing weights, aligned with the CSR slots."""
    n = indptr.shape[0] - 1
    nnz = weights.shape[0]
    j_tab = np.zeros(nnz, np.int64)
    q_tab = np.zeros(nnz, np.float64)
    maxdeg = 0
    for v in range(n):
        deg = indptr[v + 1] - indptr[v]
        if deg > maxdeg:
            maxdeg = deg
    probs = np.empty(maxdeg, np.float64)
    small = np.empty(maxdeg, np.int64)
    large = np.empty(maxdeg, np.int64)
    for v in range(n):
        lo = indptr[v]
        deg = indptr[v + 1] - lo
        if deg == 0:
            continue
        tot = 0.0
        for i in range(deg):
            tot += weights[lo + i]
        for i in range(deg):
            probs[i] = weights[lo + i] / tot
        _alias_fill(probs, deg, j_tab[lo:lo + deg], q_tab[lo:lo + deg],
                    small, large)
    return j_tab, q_tab


@njit(cache=True)
def edge_alias_tables(indptr, indices, weights, p, q):
    """Second-order alias tables, one per arc (prev -> cur).

    For the arc ending at cur, candidate x gets weight w(cur,x) scaled by
    1/p if x == prev, by 1 if x neighbours prev, else by 1/q.  Table for arc
    a starts at offsets[a] and has len(neighbours(cur)) slots.
    """
    n = indptr.shape[0] - 1
    nnz = indices.shape[0]
    offsets = np.zeros(nnz + 1, np.int64)
    for a in range(nnz):
        head = indices[a]
        offsets[a + 1] = offsets[a] + (indptr[head + 1] - indptr[head])
    total = offsets[nnz]
    j_tab = np.zeros(total, np.int64)
    q_tab = np.zeros(total, np.float64)
    maxdeg = 0
    for v in range(n):
        deg = indptr[v + 1] - indptr[v]
        if deg > maxdeg:
            maxdeg = deg
    probs = np.empty(maxdeg, np.float64)
    small = np.empty(maxdeg, np.int64)
    large = np.empty(maxdeg, np.int64)
    for prev in range(n):
        for a in range(indptr[prev], indptr[prev + 1]):
            cur = indices[a]
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                continue
            tot = 0.0
            for i in range(deg):
                x = indices[lo + i]
                w = weights[lo + i]
                if x == prev:
                    w = w / p
                elif not _has_arc(indptr, indices, x, prev):
                    w = w / q
                probs[i] = w
                tot += w
            for i in range(deg):
                probs[i] /= tot
            o = offsets[a]
            _alias_fill(probs, deg, j_tab[o:o + deg], q_tab[o:o + deg],
                        small, large)
    return offsets, j_tab, q_tab


@njit(cache=True, nogil=True)
def walk_batch(indptr, indices, starts, node_j, node_q, use_edges,
               edge_off, edge_j, edge_q, uniforms, out):
    """Fill out[r] with a walk from starts[r]; -1 pads isolated starts.

    Uniforms are indexed by row (2 per step, walk_length - 1 steps per row),
    so early exits never shift later rows' draws.
    """
    length = out.shape[1]
    per_row = 2 * (length - 1)
    for r in range(starts.shape[0]):
        v = starts[r]
        out[r, 0] = v
        if length < 2:
            continue
        deg = indptr[v + 1] - indptr[v]
        if deg == 0:
            for c in range(1, length):
                out[r, c] = -1
            continue
        base = r * per_row
        lo = indptr[v]
        slot = alias_draw(node_j[lo:lo + deg], node_q[lo:lo + deg],
                          uniforms[base], uniforms[base + 1])
        arc = lo + slot
        cur = indices[arc]
        out[r, 1] = cur
        for step in range(2, length):
            u1 = uniforms[base + 2 * (step - 1)]
            u2 = uniforms[base + 2 * (step - 1) + 1]
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if use_edges:
                o = edge_off[arc]
                slot = alias_draw(edge_j[o:o + deg], edge_q[o:o + deg], u1, u2)
            else:
                slot = alias_draw(node_j[lo:lo + deg], node_q[lo:lo + deg],
                                  u1, u2)
            arc = lo + slot
            cur = indices[arc]
            out[r, step] = cur


# --------------------------------------------------------------------------
# SMO for the soft-margin kernel SVM dual
#
# minimise 1/2 a'Qa - sum(a) s.t. 0 <= a <= C, y'a = 0, with
# Q_ij = y_i y_j K_ij.  Working set = maximal violating pair; stop when
# m(a) - M(a) <= tol.


@njit(cache=True, nogil=True)
def smo_solve(kmat, y, c_box, tol, max_iter):
    """Returns (alpha, bias, iterations, final_gap)."""
    n = y.shape[0]
    alpha = np.zeros(n, np.float64)
    grad = np.full(n, -1.0)
    it = 0
    while it < max_iter:
        gmax = -1e300
        gmin = 1e300
        i = -1
        j = -1
        for a in range(n):
            v = -y[a] * grad[a]
            if (y[a] > 0 and alpha[a] < c_box) or (y[a] < 0 and alpha[a] > 0.0):
                if v > gmax:
                    gmax = v
                    i = a
            if (y[a] > 0 and alpha[a] > 0.0) or (y[a] < 0 and alpha[a] < c_box):
                if v < gmin:
                    gmin = v
                    j = a
        if i < 0 or j < 0 or gmax - gmin <= tol:
            break
        eta = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
        if eta <= 0.0:
            eta = 1e-12
        t = (gmax - gmin) / eta
        # clip to keep both multipliers inside the box
        if y[i] > 0:
            if t > c_box - alpha[i]:
                t = c_box - alpha[i]
        else:
            if t > alpha[i]:
                t = alpha[i]
        if y[j] > 0:
            if t > alpha[j]:
                t = alpha[j]
        else:
            if t > c_box - alpha[j]:
                t = c_box - alpha[j]
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        if alpha[i] < 0.0:
            alpha[i] = 0.0
        elif alpha[i] > c_box:
            alpha[i] = c_box
        if alpha[j] < 0.0:
            alpha[j] = 0.0
        elif alpha[j] > c_box:
            alpha[j] = c_box
        for a in range(n):
            grad[a] += y[a] * t * (kmat[a, i] - kmat[a, j])
        it += 1
    # recompute the gap fresh (the loop may have exited on max_iter)
    gmax = -1e300
    gmin = 1e300
    for a in range(n):
        v = -y[a] * grad[a]
        if (y[a] > 0 and alpha[a] < c_box) or (y[a] < 0 and alpha[a] > 0.0):
            if v > gmax:
                gmax = v
        if (y[a] > 0 and alpha[a] > 0.0) or (y[a] < 0 and alpha[a] < c_box):
            if v < gmin:
                gmin = v
    nfree = 0
    bsum = 0.0
    for a in range(n):
        if 1e-12 < alpha[a] < c_box - 1e-12:
            bsum += -y[a] * grad[a]
            nfree += 1
    if nfree > 0:
        bias = bsum / nfree
    else:
        bias = (gmax + gmin) / 2.0
    return alpha, bias, it, gmax - gmin


# --------------------------------------------------------------------------
# exact t-SNE (O(n^2)); small corpora only


@njit(cache=True)
def tsne_cond_probs(d2, target_entropy, max_bisect, entropy_tol):
    """Per-row conditional probabilities with precision found by bisection.

    d2 is the squared-distance matrix; target_entropy = log(perplexity).
    """
    n = d2.shape[0]
    cond = np.zeros((n, n), np.float64)
    row = np.empty(n, np.float64)
    for i in range(n):
        beta = 1.0
        beta_min = -1.0
        beta_max = -1.0
        # shift distances so exp never underflows to an all-zero row
        dmin = 1e300
        for jj in range(n):
            if jj != i and d2[i, jj] < dmin:
                dmin = d2[i, jj]
        psum = 1.0
        for _ in range(max_bisect):
            psum = 0.0
            wsum = 0.0
            for jj in range(n):
                if jj == i:
                    row[jj] = 0.0
                    continue
                e = math.exp(-beta * (d2[i, jj] - dmin))
                row[jj] = e
                psum += e
                wsum += e * (d2[i, jj] - dmin)
            # entropy of the normalised row
            h = math.log(psum) + beta * wsum / psum
            diff = h - target_entropy
            if diff < entropy_tol and -diff < entropy_tol:
                break
            if diff > 0.0:
                beta_min = beta
                beta = beta * 2.0 if beta_max < 0.0 else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min < 0.0 else (beta + beta_min) / 2.0
        for jj in range(n):
            cond[i, jj] = row[jj] / psum
    return cond


@njit(cache=True)
def tsne_kl(p, y):
    """KL(P || Q) for the current embedding with Student-t similarities."""
    n = p.shape[0]
    z = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d2 = (y[i, 0] - y[j, 0]) ** 2 + (y[i, 1] - y[j, 1]) ** 2
            z += 2.0 / (1.0 + d2)
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if i == j or p[i, j] <= 0.0:
                continue
            d2 = (y[i, 0] - y[j, 0]) ** 2 + (y[i, 1] - y[j, 1]) ** 2
            qij = (1.0 / (1.0 + d2)) / z
            if qij < 1e-300:
                qij = 1e-300
            kl += p[i, j] * math.log(p[i, j] / qij)
    return kl


@njit(cache=True)
def tsne_run(p, y, vel, gains, iters, lr, exag, exag_until, mom_switch,
             mom0, mom1):
    """Gradient descent with momentum, gains and early exaggeration (in place)."""
    n = p.shape[0]
    num = np.zeros((n, n), np.float64)
    gradbuf = np.zeros((n, 2), np.float64)
    for it in range(iters):
        mom = mom0 if it < mom_switch else mom1
        pm = exag if it < exag_until else 1.0
        z = 0.0
        for i in range(n):
            num[i, i] = 0.0
            for j in range(i + 1, n):
                d2 = (y[i, 0] - y[j, 0]) ** 2 + (y[i, 1] - y[j, 1]) ** 2
                v = 1.0 / (1.0 + d2)
                num[i, j] = v
                num[j, i] = v
                z += 2.0 * v
        for i in range(n):
            g0 = 0.0
            g1 = 0.0
            for j in range(n):
                if i == j:
                    continue
                coef = (pm * p[i, j] - num[i, j] / z) * num[i, j]
                g0 += coef * (y[i, 0] - y[j, 0])
                g1 += coef * (y[i, 1] - y[j, 1])
            gradbuf[i, 0] = 4.0 * g0
            gradbuf[i, 1] = 4.0 * g1
        for i in range(n):
            for c in range(2):
                g = gradbuf[i, c]
                if (g > 0.0) == (vel[i, c] > 0.0):
                    gains[i, c] *= 0.8
                else:
                    gains[i, c] += 0.2
                if gains[i, c] < 0.01:
                    gains[i, c] = 0.01
                vel[i, c] = mom * vel[i, c] - lr * gains[i, c] * g
                y[i, c] += vel[i, c]
        # recentre
        m0 = 0.0
        m1 = 0.0
        for i in range(n):
            m0 += y[i, 0]
            m1 += y[i, 1]
        m0 /= n
        m1 /= n
        for i in range(n):
            y[i, 0] -= m0
            y[i, 1] -= m1
