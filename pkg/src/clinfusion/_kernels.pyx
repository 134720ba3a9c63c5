# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Each function mirrors one in ``_pykernels`` and
consumes the same pre-drawn random numbers, so both paths agree to
rounding."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs

cnp.import_array()


cdef inline double _log_sigmoid(double x) nogil:
    if x >= 0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def sgns_document(const cnp.int64_t[::1] doc,
                  const cnp.uint8_t[::1] retained,
                  const cnp.uint8_t[::1] keep,
                  const cnp.int64_t[:, :, ::1] negs,
                  double[:, ::1] U,
                  double[:, ::1] V,
                  int window,
                  double lr,
                  double scale):
    """One pass over one document; returns (summed pair loss, n_pairs)."""
    cdef Py_ssize_t T = doc.shape[0]
    cdef Py_ssize_t d = U.shape[1]
    cdef Py_ssize_t k = negs.shape[2]
    cdef Py_ssize_t i, j, a, slot, n, o, c
    cdef double f, g, loss = 0.0
    cdef long n_pairs = 0
    cdef double[::1] dvec = np.zeros(d)
    cdef double[::1] gd = np.zeros(d)
    cdef double[::1] p = np.zeros(d)
    cdef double[::1] neu = np.zeros(d)
    with nogil:
        for j in range(T):
            if retained[j]:
                for a in range(d):
                    dvec[a] += U[doc[j], a]
        for a in range(d):
            dvec[a] *= scale
        for i in range(T):
            if not keep[i]:
                continue
            slot = 0
            for j in range(i - window, i + window + 1):
                if j == i or j < 0 or j >= T:
                    continue
                c = doc[j]
                for a in range(d):
                    p[a] = U[c, a] + dvec[a]
                    neu[a] = 0.0
                for n in range(k + 1):
                    if n == 0:
                        o = doc[i]
                    else:
                        o = negs[i, slot, n - 1]
                        if o == doc[i]:
                            continue
                    f = 0.0
                    for a in range(d):
                        f += V[o, a] * p[a]
                    if n == 0:
                        loss -= _log_sigmoid(f)
                        g = lr * (1.0 - _sigmoid(f))
                    else:
                        loss -= _log_sigmoid(-f)
                        g = -lr * _sigmoid(f)
                    for a in range(d):
                        neu[a] += g * V[o, a]
                        V[o, a] += g * p[a]
                for a in range(d):
                    U[c, a] += neu[a]
                    gd[a] += neu[a]
                n_pairs += 1
                slot += 1
        for j in range(T):
            if retained[j]:
                for a in range(d):
                    U[doc[j], a] += scale * gd[a]
    return loss, n_pairs


def perplexity_search(const double[:, ::1] sqdist, double perplexity, double tol, int max_iter):
    """Row-wise binary search on the Gaussian precision so that each
    conditional distribution has perplexity exp(H) within ``tol`` of the target."""
    cdef Py_ssize_t n = sqdist.shape[0]
    cdef Py_ssize_t i, j, it
    cdef double beta, lo, hi, s, h, dmin
    P_arr = np.zeros((n, n))
    cdef double[:, ::1] P = P_arr
    beta_arr = np.ones(n)
    cdef double[::1] betas = beta_arr
    with nogil:
        for i in range(n):
            # shift by the nearest distance so exp() cannot underflow to all zeros
            dmin = -1.0
            for j in range(n):
                if j != i and (dmin < 0 or sqdist[i, j] < dmin):
                    dmin = sqdist[i, j]
            beta = 1.0
            lo = -1.0
            hi = -1.0
            for it in range(max_iter):
                s = 0.0
                for j in range(n):
                    if j == i:
                        P[i, j] = 0.0
                    else:
                        P[i, j] = exp(-(sqdist[i, j] - dmin) * beta)
                        s += P[i, j]
                if s <= 0.0:
                    s = 1e-300
                h = 0.0
                for j in range(n):
                    P[i, j] /= s
                    if j != i:
                        h += (sqdist[i, j] - dmin) * P[i, j]
                h = log(s) + beta * h
                if fabs(exp(h) - perplexity) <= tol:
                    break
                if exp(h) > perplexity:
                    lo = beta
                    if hi < 0:
                        beta *= 2.0
                    else:
                        beta = 0.5 * (beta + hi)
                else:
                    hi = beta
                    if lo < 0:
                        beta *= 0.5
                    else:
                        beta = 0.5 * (beta + lo)
            betas[i] = beta
    return P_arr, beta_arr
