import random

from hypothesis import given
from hypothesis import strategies as st

from clinfusion.corpus import (NUMZERO, RARE, DayDocument, NoteEvent, Vocabulary, aggregate_daily, build_vocab,
                               normalize_numbers, process_text, read_day_documents, tokenize, write_jsonl)


def test_tokenize_examples():
    assert tokenize("No oropharyngeal lesion.") == ["no", "oropharyngeal", "lesion"]
    assert tokenize("") == []
    assert tokenize("BP 120/80 mmHg") == ["bp", "120", "80", "mmhg"]
    assert tokenize("a. b; c", keep_terminators=True) == ["a", ".", "b", ";", "c"]


def test_normalize_numbers_examples():
    assert normalize_numbers(["hr", "98"]) == ["hr", "0"]
    assert normalize_numbers(["0"]) == ["0"]
    assert normalize_numbers(["12.5", "mg"]) == ["0", "mg"]
    assert normalize_numbers(["b12"]) == ["b12"]


@given(st.lists(st.sampled_from(["hr", "98", "12.5", "0", "mg", "x1"])))
def test_normalize_numbers_idempotent(tokens):
    once = normalize_numbers(tokens)
    assert normalize_numbers(once) == once
    assert all(not t.replace(".", "").isdigit() or t == "0" for t in once)


def test_process_text_breaks():
    toks, breaks = process_text("Pt stable. No fever; HR 98.")
    assert toks == ["pt", "stable", "no", "fever", "hr", "0"]
    assert breaks == [2, 4]


def test_build_vocab_min_count_boundary():
    docs = [["sepsis"]] * 10 + [["zebra"]] * 9
    v = build_vocab(docs, min_count=10)
    assert "sepsis" in v.stoi
    assert "zebra" not in v.stoi
    assert v.encode(["zebra"]) == [v.stoi[RARE]]


def test_build_vocab_order_and_specials():
    docs = [["b", "a", "c", "c", "0"]] * 10
    v = build_vocab(docs, min_count=10)
    assert v.itos[:2] == [RARE, NUMZERO]
    assert v.itos[2:] == ["c", "a", "b"]
    assert len(build_vocab([], 10)) == 2  # only the two special tokens


def test_build_vocab_order_independent():
    rnd = random.Random(0)
    docs = [[rnd.choice("abcdefg") for _ in range(rnd.randint(1, 30))] for _ in range(60)]
    shuffled = docs[:]
    rnd.shuffle(shuffled)
    a, b = build_vocab(docs, 5), build_vocab(shuffled, 5)
    assert a.itos == b.itos and a.counts == b.counts


def test_vocab_round_trip(tmp_path):
    v = build_vocab([["x", "y", "y"]] * 10, 10)
    for i in range(len(v)):
        assert v.encode(v.decode([i])) == [i]
    v.save(tmp_path / "v.tsv")
    w = Vocabulary.load(tmp_path / "v.tsv")
    assert w.itos == v.itos and w.counts == v.counts
    assert (tmp_path / "v.tsv").read_text().splitlines()[2] == "y\t20"


def test_aggregate_daily_windowing():
    notes = [
        NoteEvent("s", "nursing", "second note", charttime=5.0),
        NoteEvent("s", "nursing", "first note", charttime=3.5),
        NoteEvent("s", "discharge", "leaked outcome", charttime=30.0),
        NoteEvent("s", "ecg", "sinus rhythm", chartdate=1),
        NoteEvent("s", "nursing", "day two", charttime=24.0),
        NoteEvent("s", "nursing", "too late", charttime=48.0),
    ]
    d0, d1 = aggregate_daily(notes, "s")
    assert d0.tokens == ["first", "note", "second", "note"]
    assert d1.tokens == ["sinus", "rhythm", "day", "two"]
    assert "leaked" not in d0.tokens + d1.tokens
    assert d0.breaks == [2]


def test_aggregate_daily_ties_keep_input_order():
    notes = [NoteEvent("s", "n", "alpha", charttime=1.0), NoteEvent("s", "n", "beta", charttime=1.0)]
    assert aggregate_daily(notes, "s")[0].tokens == ["alpha", "beta"]
    assert aggregate_daily(list(reversed(notes)), "s")[0].tokens == ["beta", "alpha"]


def test_note_event_day():
    assert NoteEvent("s", "n", "", charttime=3.5).day() == 0
    assert NoteEvent("s", "n", "", charttime=47.9).day() == 1
    assert NoteEvent("s", "n", "", charttime=-1.0).day() is None
    assert NoteEvent("s", "echo", "", chartdate=1).day() == 1
    assert NoteEvent("s", "echo", "", chartdate=2).day() is None


def test_day_documents_jsonl_round_trip(tmp_path):
    docs = [DayDocument("s", 0, ["a", "b"], [1]), DayDocument("s", 1, [], [])]
    write_jsonl(tmp_path / "d.jsonl", (d.to_json() for d in docs))
    assert read_day_documents(tmp_path / "d.jsonl") == docs


def test_no_digit_tokens_besides_zero():
    toks, _ = process_text("Temp 38.5, HR 112, given 2 units; K 3.9")
    assert all(not t.isdigit() or t == "0" for t in toks)
