"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends consume identical pre-drawn random inputs, so besides timing
the script reports the largest absolute difference between their outputs.
"""
import argparse
import time

import numpy as np

from clinfusion import _pykernels
from clinfusion.doc2vecc import negative_sample, unigram_table
from clinfusion.pipeline.tsne import squared_distances

try:
    from clinfusion import _kernels
except ImportError:
    _kernels = None


def sgns_inputs(rng, n_vocab=500, dim=100, T=200, window=5, k=5, q=0.9):
    counts = rng.integers(1, 1000, n_vocab)
    doc = rng.integers(0, n_vocab, T).astype(np.int64)
    retained = (rng.random(T) >= q).astype(np.uint8)
    keep = np.ones(T, dtype=np.uint8)
    negs = negative_sample(rng, unigram_table(counts), (T, 2 * window, k)).astype(np.int64)
    U = (rng.random((n_vocab, dim)) - 0.5) / dim
    V = rng.normal(0, 0.1, (n_vocab, dim))
    return doc, retained, keep, negs, U, V, window, 0.025, 1.0 / ((1 - q) * T)


def time_call(fn, make_args, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        args = make_args()
        t0 = time.perf_counter()
        res = fn(*args)
        best = min(best, time.perf_counter() - t0)
        out = (res, args)
    return best, out


def bench_sgns(repeat):
    base = sgns_inputs(np.random.default_rng(0))

    def make_args():
        args = list(base)
        args[4], args[5] = base[4].copy(), base[5].copy()
        return args

    t_py, (r_py, a_py) = time_call(_pykernels.sgns_document, make_args, repeat)
    line = f"sgns_document       python {t_py * 1e3:9.2f} ms"
    if _kernels is not None:
        t_c, (r_c, a_c) = time_call(_kernels.sgns_document, make_args, repeat)
        diff = max(abs(r_py[0] - r_c[0]), np.abs(a_py[4] - a_c[4]).max(), np.abs(a_py[5] - a_c[5]).max())
        line += f"  compiled {t_c * 1e3:9.2f} ms  speedup {t_py / t_c:6.1f}x  max|diff| {diff:.1e}"
    print(line)


def bench_perplexity(repeat, n=400):
    X = np.random.default_rng(1).normal(size=(n, 20))
    D = squared_distances(X)
    make_args = lambda: (D, 30.0, 1e-5, 200)  # noqa: E731
    t_py, (r_py, _) = time_call(_pykernels.perplexity_search, make_args, repeat)
    line = f"perplexity_search   python {t_py * 1e3:9.2f} ms"
    if _kernels is not None:
        t_c, (r_c, _) = time_call(_kernels.perplexity_search, make_args, repeat)
        diff = np.abs(r_py[0] - r_c[0]).max()
        line += f"  compiled {t_c * 1e3:9.2f} ms  speedup {t_py / t_c:6.1f}x  max|diff| {diff:.1e}"
    print(line)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled extension not built; timing the fallback only")
    bench_sgns(args.repeat)
    bench_perplexity(args.repeat)


if __name__ == "__main__":
    main()
