import numpy as np
import pytest

from clinfusion.numkit import make_rng


@pytest.fixture
def rng():
    return make_rng(1234)


def naive_matmul(a, b):
    """Triple-loop product used as an independent oracle."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def scalar_sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def lstm_cell_oracle(store, prefix, x, h, c):
    """One peephole LSTM step written element by element (independent of the
    stacked-gate vectorized code)."""
    Wx, Wh, b, wc = (store[f"{prefix}.{k}"] for k in ("W_x", "W_h", "b", "w_c"))
    H = Wh.shape[1]

    def pre(gate, k):
        row = gate * H + k
        s = b[row]
        for d in range(len(x)):
            s += Wx[row, d] * x[d]
        for j in range(H):
            s += Wh[row, j] * h[j]
        return s

    new_c = [0.0] * H
    new_h = [0.0] * H
    for k in range(H):
        i = scalar_sigmoid(pre(0, k) + wc[k] * c[k])
        f = scalar_sigmoid(pre(1, k) + wc[H + k] * c[k])
        new_c[k] = f * c[k] + i * np.tanh(pre(3, k))
    for k in range(H):
        o = scalar_sigmoid(pre(2, k) + wc[2 * H + k] * new_c[k])
        new_h[k] = o * np.tanh(new_c[k])
    return new_h, new_c


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Context manager factory that records one PASS/FAIL line per acceptance criterion."""
    import contextlib
    import time

    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    @contextlib.contextmanager
    def run(number, title):
        t0 = time.perf_counter()
        detail = {}
        try:
            yield detail
        except BaseException as exc:
            lines.append((number, f"FAIL  criterion {number:>2}: {title} ({time.perf_counter() - t0:.1f}s) "
                                  f"{_fmt(detail)} :: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"))
            raise
        lines.append((number, f"PASS  criterion {number:>2}: {title} ({time.perf_counter() - t0:.1f}s) {_fmt(detail)}"))

    return run


def _fmt(detail):
    return " ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in detail.items())


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
