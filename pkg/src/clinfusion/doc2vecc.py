"""Document Vector through Corruption (skip-gram form).

For every (context, target) pair inside the window the predictor is

    p = U[context] + sum(U[w] for retained w) / (T * (1 - q))

i.e. the context word's input vector plus an unbiased estimate of the
document mean built from a corrupted copy of the document (each word kept
with probability 1 - q). The target is scored against ``V_out`` with
negative sampling from the unigram^0.75 table. A document is embedded as the
mean of its words' input vectors.

Within one document pass the corrupted document vector is held fixed; its
gradient is summed over the document's pairs and applied to the retained
words at the end of the pass.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .corpus import Vocabulary
from .errors import ConfigError
from .numkit import make_rng

log = logging.getLogger(__name__)

MAGIC = b"D2VC"
FORMAT_VERSION = 1


@dataclass
class Doc2VecCConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    corruption: float = 0.9
    subsample: float = 1e-4
    epochs: int = 10
    lr: float = 0.025
    min_lr_fraction: float = 1e-4

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigError("dim must be >= 1", "dim")
        if not 0.0 <= self.corruption < 1.0:
            raise ConfigError("corruption rate must lie in [0, 1)", "corruption")
        if self.window < 1 or self.negatives < 0 or self.epochs < 0:
            raise ConfigError("window >= 1, negatives >= 0 and epochs >= 0 required", "window")


@dataclass
class Corruption:
    retained: np.ndarray   # bool mask over document positions
    scale: float           # 1 / (1 - q)


@dataclass
class DocEmbedding:
    stay_id: str
    day: int
    vector: np.ndarray
    empty: bool = False

    def to_json(self) -> dict:
        return {"stay_id": self.stay_id, "day": self.day, "vector": [float(v) for v in self.vector],
                "empty": self.empty}

    @classmethod
    def from_json(cls, rec: dict) -> "DocEmbedding":
        return cls(str(rec["stay_id"]), int(rec["day"]), np.asarray(rec["vector"], dtype=np.float64),
                   bool(rec.get("empty", False)))


@dataclass
class EmbeddingModel:
    vocab: Vocabulary
    U: np.ndarray
    V: np.ndarray
    config: Doc2VecCConfig
    history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.U.shape[1]

    def save(self, path) -> None:
        """Binary layout (little-endian): magic, u32 version, u64 dim, u64 |V|,
        u64 config length + JSON config, per token (u32 byte length, UTF-8,
        u64 count), then U and V_out as row-major float64."""
        cfg = json.dumps(asdict(self.config), sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQQQ", FORMAT_VERSION, self.dim, len(self.vocab), len(cfg)))
            fh.write(cfg)
            for tok, cnt in zip(self.vocab.itos, self.vocab.counts):
                b = tok.encode("utf-8")
                fh.write(struct.pack("<I", len(b)))
                fh.write(b)
                fh.write(struct.pack("<Q", cnt))
            fh.write(np.ascontiguousarray(self.U, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.V, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        with open(path, "rb") as fh:
            if fh.read(4) != MAGIC:
                raise ValueError(f"{path}: not a Doc2VecC model file")
            version, dim, n, clen = struct.unpack("<IQQQ", fh.read(28))
            if version != FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported format version {version}")
            config = Doc2VecCConfig(**json.loads(fh.read(clen)))
            tokens, counts = [], []
            for _ in range(n):
                (blen,) = struct.unpack("<I", fh.read(4))
                tokens.append(fh.read(blen).decode("utf-8"))
                counts.append(struct.unpack("<Q", fh.read(8))[0])
            U = np.frombuffer(fh.read(8 * n * dim), dtype="<f8").reshape(n, dim).astype(np.float64)
            V = np.frombuffer(fh.read(8 * n * dim), dtype="<f8").reshape(n, dim).astype(np.float64)
        return cls(Vocabulary(tokens, counts), U, V, config)

    def export_text(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok, row in zip(self.vocab.itos, self.U):
                fh.write(tok + " " + " ".join(repr(float(v)) for v in row) + "\n")


def corrupt(n_tokens: int, q: float, rng: np.random.Generator) -> Corruption:
    """Keep each position independently with probability 1 - q."""
    if not 0.0 <= q < 1.0:
        raise ConfigError("corruption rate must lie in [0, 1)", "corruption")
    retained = rng.random(n_tokens) >= q
    return Corruption(retained, 1.0 / (1.0 - q))


def unigram_table(counts, power: float = 0.75) -> np.ndarray:
    """Cumulative sampling distribution proportional to count**power."""
    w = np.asarray(counts, dtype=np.float64) ** power
    if w.sum() <= 0:
        w = np.ones_like(w)
    cdf = np.cumsum(w)
    return cdf / cdf[-1]


def negative_sample(rng: np.random.Generator, table: np.ndarray, size=None):
    u = rng.random(size)
    idx = np.searchsorted(table, u, side="right")
    return np.minimum(idx, len(table) - 1)


def keep_probabilities(counts, t: float) -> np.ndarray:
    """word2vec subsampling: keep = (sqrt(f / t) + 1) * t / f, capped at 1."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    f = np.where(c > 0, c / max(total, 1.0), 1.0)
    if t <= 0:
        return np.ones_like(f)
    return np.minimum(1.0, (np.sqrt(f / t) + 1.0) * t / f)


def pair_loss(context, doc_rows, scale, target, negatives):
    """Loss of one pair and its gradients, used to check the training update.

    ``doc_rows`` are the retained words' input vectors and ``scale`` the
    factor 1 / (T (1 - q)). Returns (loss, grads) with grads keyed like the
    arguments.
    """
    p = context + scale * doc_rows.sum(axis=0)
    f_pos = target @ p
    f_neg = negatives @ p
    sig = lambda x: 1.0 / (1.0 + np.exp(-x))  # noqa: E731
    loss = -np.log(sig(f_pos)) - np.log(sig(-f_neg)).sum()
    g_pos = sig(f_pos) - 1.0
    g_neg = sig(f_neg)
    dp = g_pos * target + g_neg @ negatives
    grads = {
        "context": dp,
        "doc_rows": np.tile(scale * dp, (doc_rows.shape[0], 1)),
        "target": g_pos * p,
        "negatives": np.outer(g_neg, p),
    }
    return float(loss), grads


def init_model(vocab: Vocabulary, config: Doc2VecCConfig, rng: np.random.Generator) -> EmbeddingModel:
    d = config.dim
    U = (rng.random((len(vocab), d)) - 0.5) / d
    V = np.zeros((len(vocab), d))
    return EmbeddingModel(vocab, U, V, config)


def train(documents, vocab: Vocabulary, config: Doc2VecCConfig, rng: np.random.Generator,
          kernel=None) -> EmbeddingModel:
    """Fit input/output embeddings on token-list documents.

    Corruption is redrawn for every (document, epoch). The learning rate
    decays linearly from ``lr`` to ``lr * min_lr_fraction``. ``history`` holds
    the mean pair loss of each epoch.
    """
    config.validate()
    if len(vocab) == 0:
        raise ConfigError("empty vocabulary", "vocab")
    kernel = kernel or kernels.sgns_document
    model = init_model(vocab, config, rng)
    encoded = [np.asarray(vocab.encode(doc), dtype=np.int64) for doc in documents]
    encoded = [d for d in encoded if len(d) > 1]
    table = unigram_table(vocab.counts)
    keep_p = keep_probabilities(vocab.counts, config.subsample)
    q = config.corruption
    w, k = config.window, config.negatives
    total_steps = max(1, config.epochs * len(encoded))
    step = 0
    for epoch in range(config.epochs):
        loss_sum, pairs = 0.0, 0
        for j in rng.permutation(len(encoded)):
            doc = encoded[j]
            T = len(doc)
            lr = config.lr * max(config.min_lr_fraction, 1.0 - step / total_steps)
            step += 1
            c = corrupt(T, q, rng)
            keep = rng.random(T) < keep_p[doc]
            negs = negative_sample(rng, table, (T, 2 * w, k)).astype(np.int64)
            l, n = kernel(doc, c.retained.astype(np.uint8), keep.astype(np.uint8), negs,
                          model.U, model.V, w, lr, c.scale / T)
            loss_sum += l
            pairs += n
        model.history.append(loss_sum / max(pairs, 1))
        log.debug("doc2vecc epoch %d mean pair loss %.5f", epoch, model.history[-1])
    if not (np.all(np.isfinite(model.U)) and np.all(np.isfinite(model.V))):
        raise ConfigError("training diverged: non-finite embeddings; lower lr", "lr")
    return model


def embed_document(tokens, model: EmbeddingModel, mode: str = "exact", q: float | None = None,
                   rng: np.random.Generator | None = None, stay_id: str = "", day: int = 0) -> DocEmbedding:
    """Mean input embedding of the document (``exact``) or of a corrupted copy
    rescaled by 1 / (1 - q) (``sampled``). Empty documents give the zero vector."""
    idx = np.asarray(model.vocab.encode(tokens), dtype=np.int64)
    T = len(idx)
    if T == 0:
        return DocEmbedding(stay_id, day, np.zeros(model.dim), empty=True)
    if mode == "exact":
        retained = np.ones(T, dtype=bool)
        scale = 1.0
    elif mode == "sampled":
        q = model.config.corruption if q is None else q
        c = corrupt(T, q, rng if rng is not None else make_rng(0))
        retained, scale = c.retained, c.scale
    else:
        raise ConfigError(f"unknown embedding mode {mode!r}", "mode")
    vec = model.U[idx[retained]].sum(axis=0) * (scale / T) if retained.any() else np.zeros(model.dim)
    return DocEmbedding(stay_id, day, vec)
