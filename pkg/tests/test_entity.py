import math

import numpy as np
import pytest

from clinfusion.corpus import DayDocument, process_text
from clinfusion.entity import (ENTITY_TYPES, TAGS, EntitySpan, Lexicon, Tagger, TaggerConfig, check_bio,
                               detect_negation, entity_document, filter_negated, match_entities, read_tagged,
                               spans_from_tags, tagger_forward, tagger_train, tags_from_spans)
from clinfusion.entity.tagger import GO
from clinfusion.errors import DataError
from clinfusion.numkit import grad_check, make_rng, softmax
from clinfusion.synthgen import CohortConfig, gold_tagged_sentences

from conftest import lstm_cell_oracle

LEX = Lexicon.from_pairs([("oropharyngeal lesion", "condition"), ("chest pain", "condition"),
                          ("pain", "condition"), ("fever", "condition"), ("cough", "condition"),
                          ("acute MI", "condition"), ("aspirin", "medication")])


def test_match_entities_examples():
    spans = match_entities(["oropharyngeal", "lesion"], LEX)
    assert [(s.start, s.end, s.entity_type) for s in spans] == [(0, 2, "condition")]
    assert match_entities([], LEX) == []
    spans = match_entities(["chest", "pain", "and", "pain"], LEX)
    assert [(s.start, s.end) for s in spans] == [(0, 2), (3, 4)]


def test_match_entities_sorted_and_disjoint():
    toks = "fever chest pain aspirin pain cough chest".split()
    spans = match_entities(toks, LEX)
    for a, b in zip(spans, spans[1:]):
        assert a.end <= b.start


def test_detect_negation_examples():
    neg = detect_negation(["no", "oropharyngeal", "lesion"], match_entities(["no", "oropharyngeal", "lesion"], LEX))
    assert neg[0].negated
    pos = detect_negation(["oropharyngeal", "lesion"], match_entities(["oropharyngeal", "lesion"], LEX))
    assert not pos[0].negated
    toks = ["no", "fever", "but", "cough"]
    flags = [s.negated for s in detect_negation(toks, match_entities(toks, LEX))]
    assert flags == [True, False]


def test_negation_multiword_trigger_and_window():
    toks = "negative for fever".split()
    assert detect_negation(toks, match_entities(toks, LEX))[0].negated
    toks = "no a b c d e fever".split()  # trigger six tokens back
    assert not detect_negation(toks, match_entities(toks, LEX))[0].negated
    toks = "no a b c d fever".split()
    assert detect_negation(toks, match_entities(toks, LEX))[0].negated
    toks = "no fever . cough".split()
    assert [s.negated for s in detect_negation(toks, match_entities(toks, LEX))] == [True, False]


def test_filter_negated():
    a = EntitySpan(0, 1, "condition", False)
    b = EntitySpan(1, 2, "test", True)
    c = EntitySpan(2, 3, "medication", False)
    assert filter_negated([b]) == []
    assert filter_negated([]) == []
    assert filter_negated([a, b, c]) == [a, c]
    toks = ["no", "fever", "cough"]
    once = filter_negated(detect_negation(toks, match_entities(toks, LEX)))
    assert filter_negated(detect_negation(toks, once)) == once


def test_entity_document():
    toks, breaks = process_text("No oropharyngeal lesion. Acute MI.")
    doc = entity_document(DayDocument("s", 0, toks, breaks), LEX)
    assert doc.tokens == ["acute_mi"]
    assert entity_document(DayDocument("s", 0, ["nothing", "here"]), LEX).tokens == []
    toks, breaks = process_text("Fever noted. Fever persists.")
    assert entity_document(DayDocument("s", 0, toks, breaks), LEX).tokens == ["fever", "fever"]
    kept = entity_document(DayDocument("s", 1, ["no", "fever"]), LEX, drop_negated=False)
    assert kept.tokens == ["fever"]


def test_sentence_break_bounds_negation_scope():
    toks, breaks = process_text("No fever. Cough.")
    assert entity_document(DayDocument("s", 0, toks, breaks), LEX).tokens == ["cough"]


def test_lexicon_file_round_trip(tmp_path):
    LEX.save(tmp_path / "lex.tsv")
    again = Lexicon.load(tmp_path / "lex.tsv")
    assert again.entries == LEX.entries
    with pytest.raises(ValueError):
        Lexicon.from_pairs([("x", "organism")])


def test_tagset():
    assert len(TAGS) == 21 and TAGS[0] == "O"
    assert {t.split("-")[1] for t in TAGS[1:]} == set(ENTITY_TYPES)


def test_spans_from_tags_examples():
    s = spans_from_tags(["B-condition", "I-condition", "O"])
    assert [(x.start, x.end, x.entity_type, x.negated) for x in s] == [(0, 2, "condition", False)]
    s = spans_from_tags(["I-condition"])
    assert [(x.start, x.end) for x in s] == [(0, 1)]
    s = spans_from_tags(["B-condition-neg", "I-condition-neg"])
    assert [(x.start, x.end, x.negated) for x in s] == [(0, 2, True)]
    s = spans_from_tags(["B-test", "I-condition", "B-test", "B-test"])
    assert [(x.start, x.end, x.entity_type) for x in s] == [(0, 1, "test"), (1, 2, "condition"),
                                                            (2, 3, "test"), (3, 4, "test")]


def test_gold_spans_round_trip():
    for tokens, tags, spans in gold_tagged_sentences(CohortConfig(), n=200, seed=3):
        assert spans_from_tags(tags, tokens) == spans
        assert tags_from_spans(len(tokens), spans) == tags
        check_bio(tags)


def test_check_bio_reports_sentence_index():
    with pytest.raises(DataError, match="sentence 4"):
        check_bio(["O", "I-test"], 4)
    with pytest.raises(DataError, match="sentence 1"):
        tagger_train([(["a"], ["O"]), (["b", "c"], ["B-test", "I-test-neg"])], TaggerConfig(max_epochs=0))


def small_config(**kw):
    base = dict(char_dim=3, n_filters=3, width=3, n_layers=2, word_dim=2, enc_hidden=3, dec_hidden=3, tag_dim=2)
    base.update(kw)
    return TaggerConfig(**base)


def randomize(tagger, rng, scale=0.5):
    for k, v in tagger.store.params.items():
        v[...] = rng.normal(0.0, scale, v.shape)
    tagger.store["char_emb"][0] = 0.0


def tagger_oracle(tagger, tokens):
    """Loop-level greedy forward pass used as an independent oracle."""
    s, c = tagger.store, tagger.config
    feats = []
    for tok in tokens:
        X = [list(s["char_emb"][tagger.char_index.get(ch, 1)]) for ch in tok]
        M = len(X)
        for layer in range(c.n_layers):
            W, b = s[f"conv{layer}.W"], s[f"conv{layer}.b"]
            n_in = len(X[0])
            out = []
            for p in range(M):
                row = []
                for f in range(c.n_filters):
                    z = b[f]
                    for k in range(c.width):
                        q = p + k - c.width // 2
                        if 0 <= q < M:
                            for d in range(n_in):
                                z += W[k * n_in + d, f] * X[q][d]
                    r = max(z, 0.0)
                    if tagger.residual(layer):
                        r += X[p][f]
                    row.append(r)
                out.append(row)
            X = out
        feats.append([max(X[p][f] for p in range(M)) for f in range(c.n_filters)])
    H = c.enc_hidden
    h, cc = [0.0] * H, [0.0] * H
    enc = []
    for tok, feat in zip(tokens, feats):
        x = feat + list(s["word_emb"][tagger.word_index.get(tok, 0)])
        h, cc = lstm_cell_oracle(s, "enc", x, h, cc)
        enc.append(h)
    D = c.dec_hidden
    h, cc = [0.0] * D, [0.0] * D
    prev = GO
    dists = []
    for i in range(len(tokens)):
        x = list(s["tag_emb"][prev]) + enc[i]
        h, cc = lstm_cell_oracle(s, "dec", x, h, cc)
        logits = [s["out.b"][t] + sum(s["out.W"][t, j] * h[j] for j in range(D)) for t in range(len(TAGS))]
        m = max(logits)
        z = sum(math.exp(v - m) for v in logits)
        p = [math.exp(v - m) / z for v in logits]
        dists.append(p)
        prev = int(np.argmax(p))
    return np.array(dists)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_tagger_forward_matches_oracle(seed):
    rng = make_rng(seed)
    tagger = Tagger.init(small_config(), ["fever", "mi"], rng)
    randomize(tagger, rng)
    tokens = ["fever", "mi"]
    assert np.max(np.abs(tagger_forward(tokens, tagger) - tagger_oracle(tagger, tokens))) < 1e-10
    # residual on the first layer only when widths match
    wide = Tagger.init(small_config(char_dim=4), ["ab"], rng)
    randomize(wide, rng)
    assert not wide.residual(0) and wide.residual(1)
    assert np.max(np.abs(tagger_forward(["ab", "zz"], wide) - tagger_oracle(wide, ["ab", "zz"]))) < 1e-10


def test_tagger_zero_params_uniform():
    tagger = Tagger.init(small_config(), ["x"], make_rng(0))
    for v in tagger.store.params.values():
        v[...] = 0.0
    assert np.allclose(tagger_forward(["x"], tagger), 1.0 / len(TAGS), atol=1e-15)


def test_tagger_unknown_word_and_char():
    tagger = Tagger.init(small_config(), ["ab"], make_rng(0))
    assert list(tagger.encode_words(["ab", "zz"])) == [1, 0]
    assert tagger.encode_chars(["a?"])[0, 1] == 1


def test_word_dropout_rate():
    tagger = Tagger.init(small_config(), ["w"], make_rng(0))
    rng = make_rng(1)
    ids = [tagger._encode(["w"] * 200, True, rng)[1][0] for _ in range(10)]
    frac = np.mean([np.mean(i == 0) for i in ids])
    assert abs(frac - 0.5) < 0.05


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_tagger_gradients(seed):
    rng = make_rng(seed)
    batch = [(["no", "fever"], ["O", "B-condition-neg"]), (["chest", "pain", "ok"], ["B-condition", "I-condition", "O"])]
    tagger = Tagger.init(small_config(), [w for t, _ in batch for w in t], rng)
    randomize(tagger, rng, 0.3)

    def loss(store):
        # fixed dropout masks: reseed before every evaluation
        return tagger.batch_loss_and_grad(batch, train=True, rng=make_rng(seed + 10))

    report = grad_check(loss, tagger.store)
    assert report.ok, report.max_rel_error


def test_tagger_zero_epochs_keeps_initialisation():
    sents = [(["fever"], ["B-condition"])]
    a = tagger_train(sents, TaggerConfig(max_epochs=0))
    b = Tagger.init(TaggerConfig(), ["fever"], make_rng(0))
    for k in a.store.names():
        assert np.array_equal(a.store[k], b.store[k])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_tagger_loss_decreases_first_epoch(seed):
    gold = [(t, g) for t, g, _ in gold_tagged_sentences(CohortConfig(), n=20, seed=seed)]
    _, hist = tagger_train(gold, TaggerConfig(max_epochs=1, seed=seed), return_history=True)
    assert hist[1] < hist[0]


@pytest.mark.slow
def test_tagger_overfits_gold_corpus():
    gold = [(t, g) for t, g, _ in gold_tagged_sentences(CohortConfig())]
    tagger, hist = tagger_train(gold, TaggerConfig(), return_history=True)
    assert len(hist) - 1 <= 200
    assert tagger.accuracy(gold) >= 0.99
    tokens = ["no", "oropharyngeal", "lesion"]
    assert tagger.spans(tokens) == [EntitySpan(1, 3, "condition", True, ("oropharyngeal", "lesion"))]


def test_read_tagged(tmp_path):
    (tmp_path / "t.jsonl").write_text('{"tokens": ["a"], "tags": ["O"]}\n')
    assert read_tagged(tmp_path / "t.jsonl") == [(["a"], ["O"])]
