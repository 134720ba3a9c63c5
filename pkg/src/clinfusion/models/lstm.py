"""Peephole LSTM over batched, fixed-length sequences.

Gate pre-activations are stored stacked in the order (input, forget,
output, candidate) so one matmul serves all four gates per step:

    i_t = sig(Wxi x_t + Whi h_{t-1} + wci * c_{t-1} + b_i)
    f_t = sig(Wxf x_t + Whf h_{t-1} + wcf * c_{t-1} + b_f)
    c_t = f_t * c_{t-1} + i_t * tanh(Wxc x_t + Whc h_{t-1} + b_c)
    o_t = sig(Wxo x_t + Who h_{t-1} + wco * c_t + b_o)
    h_t = o_t * tanh(c_t)

Slots for prefix ``p``: ``p.W_x`` (4H, D), ``p.W_h`` (4H, H), ``p.b`` (4H,)
and the diagonal peepholes ``p.w_c`` (3H,) ordered (i, f, o).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, DomainError
from ..numkit import ParamStore, glorot

GATES = ("input", "forget", "output", "candidate")


def _sig(x):
    # tanh form: overflow-free for any finite input
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def init_lstm(store: ParamStore, prefix: str, n_in: int, hidden: int,
              rng: np.random.Generator, forget_bias: float = 1.0) -> None:
    H = hidden
    W_x = np.concatenate([glorot(rng, H, n_in) for _ in GATES])
    W_h = np.concatenate([glorot(rng, H, H) for _ in GATES])
    b = np.zeros(4 * H)
    b[H:2 * H] = forget_bias
    store.add(f"{prefix}.W_x", W_x)
    store.add(f"{prefix}.W_h", W_h)
    store.add(f"{prefix}.b", b)
    store.add(f"{prefix}.w_c", np.zeros(3 * H))


def gate_weights(store: ParamStore, prefix: str, gate: str) -> dict[str, np.ndarray]:
    """Per-gate views (W_x, W_h, b and peephole when the gate has one)."""
    H = store[f"{prefix}.W_h"].shape[1]
    k = GATES.index(gate)
    rows = slice(k * H, (k + 1) * H)
    out = {"W_x": store[f"{prefix}.W_x"][rows], "W_h": store[f"{prefix}.W_h"][rows],
           "b": store[f"{prefix}.b"][rows]}
    if k < 3:
        out["w_c"] = store[f"{prefix}.w_c"][rows]
    return out


@dataclass
class LstmCache:
    x: np.ndarray
    h: np.ndarray      # (B, T+1, H), h[:, 0] = h_0
    c: np.ndarray      # (B, T+1, H)
    gates: np.ndarray  # (B, T, 4H) post-nonlinearity i, f, o, g
    tc: np.ndarray     # (B, T, H) tanh(c_t)


def lstm_forward(store: ParamStore, prefix: str, x: np.ndarray):
    """Run the LSTM over ``x`` of shape (B, T, D); return (h_1..h_T, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    B, T, D = x.shape
    if T == 0:
        raise DomainError("lstm_forward needs at least one time step")
    W_x, W_h = store[f"{prefix}.W_x"], store[f"{prefix}.W_h"]
    b, w_c = store[f"{prefix}.b"], store[f"{prefix}.w_c"]
    if W_x.shape[1] != D:
        raise DimensionError(f"{prefix}: input dim {D} but W_x is {W_x.shape}")
    H = W_h.shape[1]
    w_ci, w_cf, w_co = w_c[:H], w_c[H:2 * H], w_c[2 * H:]
    h = np.zeros((B, T + 1, H))
    c = np.zeros((B, T + 1, H))
    gates = np.empty((B, T, 4 * H))
    tc = np.empty((B, T, H))
    xa = (x.reshape(B * T, D) @ W_x.T).reshape(B, T, 4 * H) + b
    for t in range(T):
        a = xa[:, t] + h[:, t] @ W_h.T
        c_prev = c[:, t]
        i = _sig(a[:, :H] + w_ci * c_prev)
        f = _sig(a[:, H:2 * H] + w_cf * c_prev)
        g = np.tanh(a[:, 3 * H:])
        c_t = f * c_prev + i * g
        o = _sig(a[:, 2 * H:3 * H] + w_co * c_t)
        tc_t = np.tanh(c_t)
        c[:, t + 1] = c_t
        h[:, t + 1] = o * tc_t
        gates[:, t, :H] = i
        gates[:, t, H:2 * H] = f
        gates[:, t, 2 * H:3 * H] = o
        gates[:, t, 3 * H:] = g
        tc[:, t] = tc_t
    return h[:, 1:], LstmCache(x, h, c, gates, tc)


def lstm_backward(store: ParamStore, prefix: str, cache: LstmCache, dh_out: np.ndarray,
                  need_dx: bool = False):
    """Backprop through time; accumulates into the store's gradient slots.

    ``dh_out`` has shape (B, T, H): loss gradient w.r.t. each h_t.
    Returns dx (B, T, D) if ``need_dx`` else None.
    """
    W_x, W_h = store[f"{prefix}.W_x"], store[f"{prefix}.W_h"]
    w_c = store[f"{prefix}.w_c"]
    x, hs, cs, gates, tcs = cache.x, cache.h, cache.c, cache.gates, cache.tc
    B, T, D = x.shape
    H = W_h.shape[1]
    w_ci, w_cf, w_co = w_c[:H], w_c[H:2 * H], w_c[2 * H:]
    da_all = np.empty((B, T, 4 * H))
    dw_c = np.zeros(3 * H)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        i = gates[:, t, :H]
        f = gates[:, t, H:2 * H]
        o = gates[:, t, 2 * H:3 * H]
        g = gates[:, t, 3 * H:]
        tc = tcs[:, t]
        c_prev, c_t = cs[:, t], cs[:, t + 1]
        dh = dh_out[:, t] + dh_next
        da_o = dh * tc * o * (1.0 - o)
        dc = dc_next + dh * o * (1.0 - tc * tc) + da_o * w_co
        da_i = dc * g * i * (1.0 - i)
        da_f = dc * c_prev * f * (1.0 - f)
        da_g = dc * i * (1.0 - g * g)
        dw_c[:H] += (da_i * c_prev).sum(axis=0)
        dw_c[H:2 * H] += (da_f * c_prev).sum(axis=0)
        dw_c[2 * H:] += (da_o * c_t).sum(axis=0)
        da = da_all[:, t]
        da[:, :H] = da_i
        da[:, H:2 * H] = da_f
        da[:, 2 * H:3 * H] = da_o
        da[:, 3 * H:] = da_g
        dc_next = dc * f + da_i * w_ci + da_f * w_cf
        dh_next = da @ W_h
    flat = da_all.reshape(B * T, 4 * H)
    store.grads[f"{prefix}.W_x"] += flat.T @ x.reshape(B * T, D)
    store.grads[f"{prefix}.W_h"] += flat.T @ hs[:, :-1].reshape(B * T, H)
    store.grads[f"{prefix}.b"] += flat.sum(axis=0)
    store.grads[f"{prefix}.w_c"] += dw_c
    if need_dx:
        return (flat @ W_x).reshape(B, T, D)
    return None


def lstm_step(store: ParamStore, prefix: str, x_t: np.ndarray, h: np.ndarray, c: np.ndarray):
    """Single step for incremental decoding; inputs are (B, D), (B, H), (B, H)."""
    W_x, W_h = store[f"{prefix}.W_x"], store[f"{prefix}.W_h"]
    b, w_c = store[f"{prefix}.b"], store[f"{prefix}.w_c"]
    H = W_h.shape[1]
    a = x_t @ W_x.T + h @ W_h.T + b
    i = _sig(a[:, :H] + w_c[:H] * c)
    f = _sig(a[:, H:2 * H] + w_c[H:2 * H] * c)
    c_new = f * c + i * np.tanh(a[:, 3 * H:])
    o = _sig(a[:, 2 * H:3 * H] + w_c[2 * H:] * c_new)
    return o * np.tanh(c_new), c_new
