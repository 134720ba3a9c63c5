"""The three mortality classifiers.

``BenchmarkLstm``   vitals -> peephole LSTM -> logistic unit on h_T
``ConcatLstm``      per-step [x_t ; e_day(t)] -> peephole LSTM -> logistic unit
``FusionNet``       vitals -> LSTM -> h_T; [e_1, e_2] -> h_e; [h_T, h_e] -> h_j -> logit

Every model exposes ``forward(x, e) -> (logits, cache)`` and
``backward(cache, dlogits)`` which accumulates into ``model.store.grads``.
``x`` is (B, T, L); ``e`` is (B, 2, d) holding the two daily embeddings.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DimensionError
from ..numkit import ParamStore, bce_with_logit_grad, binary_cross_entropy, glorot, sigmoid
from .lstm import init_lstm, lstm_backward, lstm_forward

STRUCTURES = ("lstm", "multimodal")
VISIBILITY = ("from_start", "end_of_day")
STEPS_PER_DAY = 12


@dataclass
class ModelOutput:
    y_hat: np.ndarray
    logits: np.ndarray
    h: np.ndarray | None = None
    h_e: np.ndarray | None = None
    h_j: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def concat_inputs(x: np.ndarray, e: np.ndarray, visibility: str = "from_start") -> np.ndarray:
    """Append the day embedding to every time step.

    ``from_start``: steps 1-12 see e_1, steps 13-24 see e_2.
    ``end_of_day``: each daily note is stamped in the last bin of its day and
    forward-filled, so steps 1-11 see zeros, 12-23 see e_1 and 24 sees e_2.
    """
    B, T, _ = x.shape
    d = e.shape[2]
    per_step = np.zeros((B, T, d))
    if visibility == "from_start":
        per_step[:, :STEPS_PER_DAY] = e[:, 0:1]
        per_step[:, STEPS_PER_DAY:] = e[:, 1:2]
    elif visibility == "end_of_day":
        per_step[:, STEPS_PER_DAY - 1:2 * STEPS_PER_DAY - 1] = e[:, 0:1]
        per_step[:, 2 * STEPS_PER_DAY - 1:] = e[:, 1:2]
    else:
        raise ConfigError(f"unknown embedding visibility {visibility!r}", "embedding_visibility")
    return np.concatenate([x, per_step], axis=2)


def fusion_forward(h_T: np.ndarray, e1: np.ndarray, e2: np.ndarray, store: ParamStore) -> ModelOutput:
    """h_e = W_e [e1, e2] + b_e;  h_j = W_j [h_T, h_e] + b_j;  y = sig(W_y h_j + b_y)."""
    h_T = np.atleast_2d(h_T)
    ee = np.concatenate([np.atleast_2d(e1), np.atleast_2d(e2)], axis=1)
    W_e, W_j, W_y = store["W_e"], store["W_j"], store["W_y"]
    if ee.shape[1] != W_e.shape[1]:
        raise DimensionError(f"[e1, e2] has {ee.shape[1]} values but W_e is {W_e.shape}")
    if h_T.shape[1] + W_e.shape[0] != W_j.shape[1]:
        raise DimensionError(f"h_T{h_T.shape} with h_e size {W_e.shape[0]} does not fit W_j{W_j.shape}")
    h_e = ee @ W_e.T + store["b_e"]
    hj_in = np.concatenate([h_T, h_e], axis=1)
    h_j = hj_in @ W_j.T + store["b_j"]
    logits = (h_j @ W_y.T + store["b_y"])[:, 0]
    return ModelOutput(sigmoid(logits), logits, h=h_T, h_e=h_e, h_j=h_j,
                       extra={"ee": ee, "hj_in": hj_in})


class _Classifier:
    structure = ""

    def __init__(self, store: ParamStore):
        self.store = store

    def predict_proba(self, x, e=None, batch_size: int = 256) -> np.ndarray:
        out = []
        for s in range(0, len(x), batch_size):
            logits, _ = self.forward(x[s:s + batch_size], None if e is None else e[s:s + batch_size])
            out.append(sigmoid(logits))
        return np.concatenate(out) if out else np.zeros(0)

    def loss(self, x, e, y) -> float:
        logits, _ = self.forward(x, e)
        return float(np.mean(binary_cross_entropy(sigmoid(logits), y)))

    def loss_and_grad(self, x, e, y) -> float:
        """Mean BCE over the batch; gradients accumulated into the store."""
        logits, cache = self.forward(x, e)
        y = np.asarray(y, dtype=np.float64)
        self.backward(cache, bce_with_logit_grad(logits, y) / len(y))
        return float(np.mean(binary_cross_entropy(sigmoid(logits), y)))


class BenchmarkLstm(_Classifier):
    structure = "lstm"

    @classmethod
    def build(cls, n_in: int, hidden: int, rng: np.random.Generator) -> "BenchmarkLstm":
        store = ParamStore()
        init_lstm(store, "lstm", n_in, hidden, rng)
        store.add("out.W", glorot(rng, 1, hidden))
        store.add("out.b", np.zeros(1))
        return cls(store)

    def _inputs(self, x, e):
        return x

    def forward(self, x, e=None):
        hs, lcache = lstm_forward(self.store, "lstm", self._inputs(np.asarray(x, dtype=np.float64), e))
        h_T = hs[:, -1]
        logits = h_T @ self.store["out.W"][0] + self.store["out.b"][0]
        return logits, (lcache, h_T)

    def backward(self, cache, dlogits):
        lcache, h_T = cache
        self.store.grads["out.W"] += (dlogits @ h_T)[None]
        self.store.grads["out.b"] += dlogits.sum()
        dh = np.zeros_like(lcache.h[:, 1:])
        dh[:, -1] = dlogits[:, None] * self.store["out.W"][0]
        lstm_backward(self.store, "lstm", lcache, dh)

    def output(self, x, e=None) -> ModelOutput:
        logits, (lcache, h_T) = self.forward(x, e)
        return ModelOutput(sigmoid(logits), logits, h=lcache.h[:, 1:])


class ConcatLstm(BenchmarkLstm):
    structure = "lstm"

    def __init__(self, store: ParamStore, visibility: str = "from_start"):
        super().__init__(store)
        if visibility not in VISIBILITY:
            raise ConfigError(f"unknown embedding visibility {visibility!r}", "embedding_visibility")
        self.visibility = visibility

    @classmethod
    def build(cls, n_in: int, emb_dim: int, hidden: int, rng: np.random.Generator,
              visibility: str = "from_start") -> "ConcatLstm":
        base = BenchmarkLstm.build(n_in + emb_dim, hidden, rng)
        return cls(base.store, visibility)

    def _inputs(self, x, e):
        return concat_inputs(x, np.asarray(e, dtype=np.float64), self.visibility)


class FusionNet(_Classifier):
    structure = "multimodal"

    @classmethod
    def build(cls, n_in: int, emb_dim: int, hidden: int, text_hidden: int, joint_hidden: int,
              rng: np.random.Generator) -> "FusionNet":
        store = ParamStore()
        init_lstm(store, "lstm", n_in, hidden, rng)
        store.add("W_e", glorot(rng, text_hidden, 2 * emb_dim))
        store.add("b_e", np.zeros(text_hidden))
        store.add("W_j", glorot(rng, joint_hidden, hidden + text_hidden))
        store.add("b_j", np.zeros(joint_hidden))
        store.add("W_y", glorot(rng, 1, joint_hidden))
        store.add("b_y", np.zeros(1))
        return cls(store)

    def forward(self, x, e):
        e = np.asarray(e, dtype=np.float64)
        hs, lcache = lstm_forward(self.store, "lstm", np.asarray(x, dtype=np.float64))
        out = fusion_forward(hs[:, -1], e[:, 0], e[:, 1], self.store)
        return out.logits, (lcache, out)

    def backward(self, cache, dlogits):
        lcache, out = cache
        s, g = self.store, self.store.grads
        H = lcache.h.shape[2]
        dz = dlogits[:, None]
        g["W_y"] += dz.T @ out.h_j
        g["b_y"] += dz.sum(axis=0)
        dh_j = dz @ s["W_y"]
        g["W_j"] += dh_j.T @ out.extra["hj_in"]
        g["b_j"] += dh_j.sum(axis=0)
        dhj_in = dh_j @ s["W_j"]
        dh_e = dhj_in[:, H:]
        g["W_e"] += dh_e.T @ out.extra["ee"]
        g["b_e"] += dh_e.sum(axis=0)
        dh = np.zeros_like(lcache.h[:, 1:])
        dh[:, -1] = dhj_in[:, :H]
        lstm_backward(s, "lstm", lcache, dh)

    def output(self, x, e) -> ModelOutput:
        return self.forward(x, e)[1][1]


def build_model(structure: str, feature_set: str, n_in: int, emb_dim: int, hidden: int,
                text_hidden: int, joint_hidden: int, rng: np.random.Generator,
                visibility: str = "from_start"):
    if structure not in STRUCTURES:
        raise ConfigError(f"unknown structure {structure!r}", "structure")
    if feature_set == "vital":
        if structure != "lstm":
            raise ConfigError("feature set 'vital' only pairs with structure 'lstm'", "structure")
        return BenchmarkLstm.build(n_in, hidden, rng)
    if structure == "lstm":
        return ConcatLstm.build(n_in, emb_dim, hidden, rng, visibility)
    return FusionNet.build(n_in, emb_dim, hidden, text_hidden, joint_hidden, rng)
