"""Trainable hierarchical entity tagger.

Three stages, all hand-differentiated:

1. character encoder: char embeddings -> stacked width-``w`` convolutions
   (ReLU, optional residual connection, dropout between layers in training)
   -> max-pool over character positions;
2. word encoder: [char feature ; word embedding] -> peephole LSTM -> h_enc;
3. tag decoder: peephole LSTM over [embedding of previous tag ; h_enc_i]
   with the GO symbol at the first step, softmax over tags.

Training is teacher-forced; inference decodes greedily, feeding the argmax
tag forward. Negation is encoded as tag variants (``B-condition-neg``).
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DataError
from ..models.lstm import init_lstm, lstm_backward, lstm_forward, lstm_step
from ..numkit import Adam, ParamStore, Sgd, glorot, log_softmax, make_rng, softmax
from .lexicon import ENTITY_TYPES, EntitySpan

log = logging.getLogger(__name__)

NEG_SUFFIX = "-neg"


def build_tagset() -> list[str]:
    tags = ["O"]
    for typ in ENTITY_TYPES:
        for suffix in ("", NEG_SUFFIX):
            tags.append(f"B-{typ}{suffix}")
            tags.append(f"I-{typ}{suffix}")
    return tags


TAGS = build_tagset()
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}
GO = len(TAGS)
UNK = "<unk>"
PAD_CHAR = 0


def _parse_tag(tag: str):
    if tag == "O":
        return "O", None, False
    prefix, rest = tag.split("-", 1)
    negated = rest.endswith(NEG_SUFFIX)
    if negated:
        rest = rest[: -len(NEG_SUFFIX)]
    return prefix, rest, negated


def check_bio(tags, index: int = 0) -> None:
    """Raise ``DataError`` unless every I- tag continues a same-label B/I run."""
    prev = "O"
    for pos, tag in enumerate(tags):
        if tag not in TAG_INDEX:
            raise DataError(f"sentence {index}: unknown tag {tag!r} at position {pos}")
        prefix, typ, neg = _parse_tag(tag)
        if prefix == "I":
            p_prefix, p_typ, p_neg = _parse_tag(prev)
            if p_prefix not in ("B", "I") or (p_typ, p_neg) != (typ, neg):
                raise DataError(f"sentence {index}: {tag!r} at position {pos} does not continue {prev!r}")
        prev = tag


def spans_from_tags(tags, tokens=None) -> list[EntitySpan]:
    """Decode BIO tags into spans. A stray I- opens a new span."""
    spans = []
    start = None
    cur = None
    for pos, tag in enumerate(list(tags) + ["O"]):
        prefix, typ, neg = _parse_tag(tag)
        continues = prefix == "I" and cur == (typ, neg)
        if start is not None and not continues:
            surface = tuple(tokens[start:pos]) if tokens is not None else ()
            spans.append(EntitySpan(start, pos, cur[0], cur[1], surface))
            start, cur = None, None
        if prefix in ("B", "I") and not continues:
            start, cur = pos, (typ, neg)
    return spans


def tags_from_spans(n: int, spans) -> list[str]:
    tags = ["O"] * n
    for s in spans:
        suffix = NEG_SUFFIX if s.negated else ""
        tags[s.start] = f"B-{s.entity_type}{suffix}"
        for i in range(s.start + 1, s.end):
            tags[i] = f"I-{s.entity_type}{suffix}"
    return tags


@dataclass
class TaggerConfig:
    char_dim: int = 16
    n_filters: int = 32
    width: int = 3
    n_layers: int = 2
    char_dropout: float = 0.25
    word_dim: int = 32
    enc_hidden: int = 32
    dec_hidden: int = 32
    tag_dim: int = 16
    word_dropout: float = 0.5
    optimizer: str = "adam"
    lr: float = 5e-3
    batch_size: int = 5
    max_epochs: int = 200
    target_accuracy: float = 0.99
    seed: int = 0


class Tagger:
    def __init__(self, config: TaggerConfig, chars: list[str], words: list[str], store: ParamStore):
        self.config = config
        self.chars = chars                      # index 0 = padding, 1 = unknown
        self.words = words                      # index 0 = unknown
        self.char_index = {c: i for i, c in enumerate(chars)}
        self.word_index = {w: i for i, w in enumerate(words)}
        self.store = store

    # residual only where the layer keeps its width
    def residual(self, layer: int) -> bool:
        c = self.config
        return layer > 0 or c.char_dim == c.n_filters

    @classmethod
    def init(cls, config: TaggerConfig, vocab_words, rng: np.random.Generator) -> "Tagger":
        words = [UNK] + sorted(set(vocab_words))
        chars = ["<pad>", UNK] + sorted({ch for w in words[1:] for ch in w})
        c = config
        s = ParamStore()
        s.add("char_emb", rng.normal(0.0, 0.1, (len(chars), c.char_dim)))
        s["char_emb"][PAD_CHAR] = 0.0
        n_in = c.char_dim
        for layer in range(c.n_layers):
            fan_in = c.width * n_in
            s.add(f"conv{layer}.W", glorot(rng, c.n_filters, fan_in).T.copy())
            s.add(f"conv{layer}.b", np.zeros(c.n_filters))
            n_in = c.n_filters
        s.add("word_emb", rng.normal(0.0, 0.1, (len(words), c.word_dim)))
        init_lstm(s, "enc", c.n_filters + c.word_dim, c.enc_hidden, rng)
        s.add("tag_emb", rng.normal(0.0, 0.1, (len(TAGS) + 1, c.tag_dim)))
        init_lstm(s, "dec", c.tag_dim + c.enc_hidden, c.dec_hidden, rng)
        s.add("out.W", glorot(rng, len(TAGS), c.dec_hidden))
        s.add("out.b", np.zeros(len(TAGS)))
        return cls(config, chars, words, s)

    def encode_words(self, tokens):
        return np.array([self.word_index.get(t, 0) for t in tokens], dtype=np.int64)

    def encode_chars(self, tokens):
        M = max(1, max(len(t) for t in tokens))
        ids = np.zeros((len(tokens), M), dtype=np.int64)
        for i, t in enumerate(tokens):
            ids[i, :len(t)] = [self.char_index.get(ch, 1) for ch in t]
        return ids

    # -- forward / backward -------------------------------------------------

    def _char_encoder(self, char_ids, train, rng):
        c = self.config
        s = self.store
        n, M = char_ids.shape
        mask = (char_ids != PAD_CHAR).astype(np.float64)[:, :, None]
        if not mask.any(axis=1).all():
            # empty word: treat its first slot as observed so pooling is defined
            mask[~mask.any(axis=1)[:, 0], 0] = 1.0
        X = s["char_emb"][char_ids] * mask
        pad = c.width // 2
        layers = []
        for layer in range(c.n_layers):
            drop = None
            if layer > 0 and train and c.char_dropout > 0:
                drop = (rng.random(X.shape) >= c.char_dropout) / (1.0 - c.char_dropout)
                X = X * drop
            Xp = np.pad(X, ((0, 0), (pad, c.width - 1 - pad), (0, 0)))
            cols = np.concatenate([Xp[:, k:k + M] for k in range(c.width)], axis=2)
            Z = cols @ s[f"conv{layer}.W"] + s[f"conv{layer}.b"]
            R = np.maximum(Z, 0.0)
            out = R + X if self.residual(layer) else R
            out = out * mask
            layers.append((X, cols, Z, drop))
            X = out
        pooled_in = np.where(mask > 0, X, -np.inf)
        arg = pooled_in.argmax(axis=1)
        feat = np.take_along_axis(X, arg[:, None, :], axis=1)[:, 0]
        return feat, (char_ids, mask, layers, arg, X.shape)

    def _char_backward(self, dfeat, cache):
        c = self.config
        s, g = self.store, self.store.grads
        char_ids, mask, layers, arg, shape = cache
        n, M, F = shape
        dX = np.zeros(shape)
        np.put_along_axis(dX, arg[:, None, :], dfeat[:, None, :], axis=1)
        pad = c.width // 2
        for layer in reversed(range(c.n_layers)):
            X, cols, Z, drop = layers[layer]
            dout = dX * mask
            dZ = dout * (Z > 0)
            g[f"conv{layer}.W"] += cols.reshape(-1, cols.shape[2]).T @ dZ.reshape(-1, dZ.shape[2])
            g[f"conv{layer}.b"] += dZ.sum(axis=(0, 1))
            dcols = dZ @ s[f"conv{layer}.W"].T
            n_in = X.shape[2]
            dXp = np.zeros((n, M + c.width - 1, n_in))
            for k in range(c.width):
                dXp[:, k:k + M] += dcols[:, :, k * n_in:(k + 1) * n_in]
            dXin = dXp[:, pad:pad + M]
            if self.residual(layer):
                dXin = dXin + dout
            if drop is not None:
                dXin = dXin * drop
            dX = dXin
        dX = dX * mask
        np.add.at(g["char_emb"], char_ids.reshape(-1), dX.reshape(-1, dX.shape[2]))
        g["char_emb"][PAD_CHAR] = 0.0

    def _encode(self, tokens, train, rng):
        c = self.config
        word_ids = self.encode_words(tokens)
        if train and c.word_dropout > 0:
            word_ids = np.where(rng.random(len(word_ids)) < c.word_dropout, 0, word_ids)
        char_ids = self.encode_chars(tokens)
        feat, ccache = self._char_encoder(char_ids, train, rng)
        enc_in = np.concatenate([feat, self.store["word_emb"][word_ids]], axis=1)
        h_enc, ecache = lstm_forward(self.store, "enc", enc_in[None])
        return h_enc[0], (word_ids, ccache, ecache)

    def _encode_backward(self, dh_enc, cache):
        word_ids, ccache, ecache = cache
        nf = self.config.n_filters
        d_in = lstm_backward(self.store, "enc", ecache, dh_enc[None], need_dx=True)[0]
        np.add.at(self.store.grads["word_emb"], word_ids, d_in[:, nf:])
        self._char_backward(d_in[:, :nf], ccache)

    def sentence_loss(self, tokens, tags, train=False, rng=None, backward=False) -> tuple[float, int]:
        """Teacher-forced summed cross-entropy of one sentence; returns (loss, n_correct)."""
        gold = np.array([TAG_INDEX[t] for t in tags], dtype=np.int64)
        h_enc, ecache = self._encode(tokens, train, rng)
        prev = np.concatenate([[GO], gold[:-1]])
        dec_in = np.concatenate([self.store["tag_emb"][prev], h_enc], axis=1)
        h_dec, dcache = lstm_forward(self.store, "dec", dec_in[None])
        h_dec = h_dec[0]
        logits = h_dec @ self.store["out.W"].T + self.store["out.b"]
        logp = log_softmax(logits)
        n = len(gold)
        loss = -float(logp[np.arange(n), gold].sum())
        correct = int((logits.argmax(axis=1) == gold).sum())
        if backward:
            g = self.store.grads
            dlogits = np.exp(logp)
            dlogits[np.arange(n), gold] -= 1.0
            g["out.W"] += dlogits.T @ h_dec
            g["out.b"] += dlogits.sum(axis=0)
            dh_dec = dlogits @ self.store["out.W"]
            d_dec_in = lstm_backward(self.store, "dec", dcache, dh_dec[None], need_dx=True)[0]
            td = self.config.tag_dim
            np.add.at(g["tag_emb"], prev, d_dec_in[:, :td])
            self._encode_backward(d_dec_in[:, td:], ecache)
        return loss, correct

    def batch_loss_and_grad(self, batch, train=False, rng=None) -> float:
        """Mean per-token loss over a batch of (tokens, tags); grads accumulated."""
        n_tok = sum(len(t) for t, _ in batch)
        total = 0.0
        for tokens, tags in batch:
            loss, _ = self.sentence_loss(tokens, tags, train, rng, backward=True)
            total += loss
        for k in self.store.grads:
            self.store.grads[k] /= n_tok
        return total / n_tok

    def forward(self, tokens) -> np.ndarray:
        """Greedy decode; returns per-word tag distributions (n, n_tags)."""
        h_enc, _ = self._encode(tokens, False, None)
        s = self.store
        H = s["dec.W_h"].shape[1]
        h = np.zeros((1, H))
        cc = np.zeros((1, H))
        prev = GO
        dists = []
        for i in range(len(tokens)):
            x_t = np.concatenate([s["tag_emb"][prev], h_enc[i]])[None]
            h, cc = lstm_step(s, "dec", x_t, h, cc)
            p = softmax(h @ s["out.W"].T + s["out.b"])[0]
            dists.append(p)
            prev = int(p.argmax())
        return np.array(dists)

    def predict(self, tokens) -> list[str]:
        if not tokens:
            return []
        return [TAGS[i] for i in self.forward(tokens).argmax(axis=1)]

    def spans(self, tokens) -> list[EntitySpan]:
        return spans_from_tags(self.predict(list(tokens)), list(tokens))

    def accuracy(self, sentences) -> float:
        total = correct = 0
        for tokens, tags in sentences:
            pred = self.predict(tokens)
            correct += sum(p == t for p, t in zip(pred, tags))
            total += len(tags)
        return correct / max(total, 1)

    def eval_loss(self, sentences) -> float:
        total = n = 0
        for tokens, tags in sentences:
            loss, _ = self.sentence_loss(tokens, tags)
            total += loss
            n += len(tags)
        return total / max(n, 1)

    def config_dict(self) -> dict:
        return asdict(self.config)


def tagger_forward(tokens, tagger: Tagger) -> np.ndarray:
    return tagger.forward(list(tokens))


def tagger_train(sentences, config: TaggerConfig | None = None, return_history: bool = False):
    """Fit a tagger on (tokens, tags) pairs; stops early at the target accuracy."""
    config = config or TaggerConfig()
    sentences = [(list(t), list(g)) for t, g in sentences]
    for i, (tokens, tags) in enumerate(sentences):
        if len(tokens) != len(tags):
            raise DataError(f"sentence {i}: {len(tokens)} tokens but {len(tags)} tags")
        if not tokens:
            raise DataError(f"sentence {i}: empty")
        check_bio(tags, i)
    rng = make_rng(config.seed)
    tagger = Tagger.init(config, [w for t, _ in sentences for w in t], rng)
    opt = Adam(tagger.store, config.lr) if config.optimizer == "adam" else Sgd(tagger.store, config.lr)
    history = [tagger.eval_loss(sentences)]
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(sentences))
        for s in range(0, len(order), config.batch_size):
            batch = [sentences[j] for j in order[s:s + config.batch_size]]
            tagger.batch_loss_and_grad(batch, train=True, rng=rng)
            opt.step()
        history.append(tagger.eval_loss(sentences))
        acc = tagger.accuracy(sentences)
        log.debug("tagger epoch %d loss %.4f acc %.4f", epoch, history[-1], acc)
        if acc >= config.target_accuracy:
            break
    return (tagger, history) if return_history else tagger


def read_tagged(path):
    from ..corpus import read_jsonl
    return [(r["tokens"], r["tags"]) for r in read_jsonl(path)]
