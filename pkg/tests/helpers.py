"""Independent numeric oracles used across the test suite.

Everything here is deliberately written without touching the library's
backward passes: central finite differences for gradients, dense one-hot
matmuls for lookups, and a direct brute-force n-gram counter for BLEU.
"""

import math
from collections import Counter

import numpy as np

from synformer import autodiff


def numeric_grad(fn, arrays, h=1e-5):
    """Central finite differences of scalar ``fn(arrays)`` w.r.t. each array."""
    grads = []
    for k, base in enumerate(arrays):
        g = np.zeros_like(base, dtype=np.float64)
        flat = base.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = fn(arrays)
            flat[i] = orig - h
            down = fn(arrays)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric):
    """max |a - n| / max(|a|, |n|, 1) over all elements of all arrays."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1.0)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def check_gradients(build, arrays, h=1e-5):
    """Compare ``backward`` against finite differences.

    ``build(tensors)`` maps a list of Tensors to a scalar Tensor; ``arrays``
    are the float64 leaf values. Returns the max relative error.
    """
    leaves = [autodiff.Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(leaves)
    autodiff.backward(loss)
    analytic = [leaf.grad for leaf in leaves]

    def fn(values):
        ts = [autodiff.Tensor(v.copy()) for v in values]
        return build(ts).item()

    numeric = numeric_grad(fn, [a.copy() for a in arrays], h=h)
    return max_rel_err(analytic, numeric)


def onehot_embedding(table, ids):
    """Eq.-style dense one-hot gather: rows of an identity select table rows."""
    n = table.shape[0]
    out = np.zeros((len(ids), table.shape[1]))
    for i, idx in enumerate(ids):
        onehot = np.zeros(n)
        onehot[idx] = 1.0
        out[i] = onehot @ table
    return out


def direct_attention(h, w_k, w_q, w_v):
    """Direct evaluation of the attention block: K, Q, V projections of the
    shared input, scores scaled by sqrt of the projection width, row softmax,
    then the weighted value sum. Written independently of the library."""
    k = h @ w_k
    q = h @ w_q
    v = h @ w_v
    scores = q @ k.T / math.sqrt(w_k.shape[1])
    scores = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    weights = e / e.sum(axis=1, keepdims=True)
    return weights @ v, weights


def brute_force_bleu(hypotheses, references):
    """Corpus BLEU-4 by direct clipped n-gram counting with brevity penalty."""
    match = {n: 0 for n in range(1, 5)}
    total = {n: 0 for n in range(1, 5)}
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h, r = hyp.split(), ref.split()
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, 5):
            hgrams = Counter(tuple(h[i:i + n]) for i in range(len(h) - n + 1))
            rgrams = Counter(tuple(r[i:i + n]) for i in range(len(r) - n + 1))
            match[n] += sum(min(c, rgrams[g]) for g, c in hgrams.items())
            total[n] += max(len(h) - n + 1, 0)
    logs = []
    for n in range(1, 5):
        if total[n] == 0:
            continue
        if match[n] == 0:
            return 0.0
        logs.append(math.log(match[n] / total[n]))
    if not logs or hyp_len == 0:
        return 0.0
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(sum(logs) / len(logs))
