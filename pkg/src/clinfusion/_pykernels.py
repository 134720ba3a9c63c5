"""Pure-Python versions of the compiled kernels (same inputs, same results
up to floating-point summation order)."""
from __future__ import annotations

import math

import numpy as np


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def sgns_document(doc, retained, keep, negs, U, V, window, lr, scale):
    """One pass over one document; returns (summed pair loss, n_pairs)."""
    T = len(doc)
    ret = np.flatnonzero(retained)
    dvec = U[doc[ret]].sum(axis=0) * scale if len(ret) else np.zeros(U.shape[1])
    gd = np.zeros(U.shape[1])
    loss = 0.0
    n_pairs = 0
    for i in range(T):
        if not keep[i]:
            continue
        slot = 0
        target = doc[i]
        for j in range(max(0, i - window), min(T, i + window + 1)):
            if j == i:
                continue
            c = doc[j]
            p = U[c] + dvec
            neu = np.zeros_like(p)
            outs = [target] + [o for o in negs[i, slot] if o != target]
            for n, o in enumerate(outs):
                f = float(V[o] @ p)
                if n == 0:
                    loss -= _log_sigmoid(f)
                    g = lr * (1.0 - _sigmoid(f))
                else:
                    loss -= _log_sigmoid(-f)
                    g = -lr * _sigmoid(f)
                neu += g * V[o]
                V[o] += g * p
            U[c] += neu
            gd += neu
            n_pairs += 1
            slot += 1
    for j in ret:
        U[doc[j]] += scale * gd
    return loss, n_pairs


def perplexity_search(sqdist, perplexity, tol, max_iter):
    n = sqdist.shape[0]
    P = np.zeros((n, n))
    betas = np.ones(n)
    others = ~np.eye(n, dtype=bool)
    for i in range(n):
        d = sqdist[i, others[i]]
        d = d - d.min()
        beta, lo, hi = 1.0, -1.0, -1.0
        for _ in range(max_iter):
            w = np.exp(-d * beta)
            s = w.sum()
            if s <= 0.0:
                s = 1e-300
            row = w / s
            h = math.log(s) + beta * float(d @ row)
            if abs(math.exp(h) - perplexity) <= tol:
                break
            if math.exp(h) > perplexity:
                lo = beta
                beta = beta * 2.0 if hi < 0 else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = beta * 0.5 if lo < 0 else 0.5 * (beta + lo)
        P[i, others[i]] = row
        betas[i] = beta
    return P, betas
