"""Note ingestion, tokenization and aggregation into two day-documents per stay."""
from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

RARE = "<rare>"
NUMZERO = "0"
DISCHARGE = "discharge"
HOURS_PER_DAY = 24.0
N_DAYS = 2

# numbers (with optional decimal part) first so "12.5" stays one token
_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|[^\W_]+|[.;]")
_NUMBER_RE = re.compile(r"^\d+(?:\.\d+)?$")
TERMINATORS = frozenset({".", ";"})


@dataclass(frozen=True)
class NoteEvent:
    stay_id: str
    category: str
    text: str
    charttime: float | None = None
    chartdate: int | None = None

    def day(self) -> int | None:
        """0-based day of the note, or None when outside the 48 h window."""
        if self.charttime is not None:
            d = int(self.charttime // HOURS_PER_DAY)
            return d if 0 <= self.charttime < N_DAYS * HOURS_PER_DAY else None
        if self.chartdate is not None and 0 <= self.chartdate < N_DAYS:
            return int(self.chartdate)
        return None

    def to_json(self) -> dict:
        return {"stay_id": self.stay_id, "category": self.category, "charttime": self.charttime,
                "chartdate": self.chartdate, "text": self.text}

    @classmethod
    def from_json(cls, rec: dict) -> "NoteEvent":
        return cls(str(rec["stay_id"]), rec.get("category", ""), rec.get("text", ""),
                   rec.get("charttime"), rec.get("chartdate"))


@dataclass
class DayDocument:
    stay_id: str
    day: int
    tokens: list[str]
    # positions in ``tokens`` that start a new sentence; used to bound negation scope
    breaks: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"stay_id": self.stay_id, "day": self.day, "tokens": self.tokens, "breaks": self.breaks}

    @classmethod
    def from_json(cls, rec: dict) -> "DayDocument":
        return cls(str(rec["stay_id"]), int(rec["day"]), list(rec["tokens"]), list(rec.get("breaks", [])))


def tokenize(text: str, keep_terminators: bool = False) -> list[str]:
    """Lowercase and split on whitespace/punctuation; punctuation is dropped.

    With ``keep_terminators`` the sentence terminators "." and ";" survive as
    standalone tokens.
    """
    toks = _TOKEN_RE.findall(text.lower())
    if keep_terminators:
        return toks
    return [t for t in toks if t not in TERMINATORS]


def normalize_numbers(tokens: Iterable[str]) -> list[str]:
    return [NUMZERO if _NUMBER_RE.match(t) else t for t in tokens]


def _split_breaks(tokens: list[str]) -> tuple[list[str], list[int]]:
    out, breaks = [], []
    for t in tokens:
        if t in TERMINATORS:
            if out and (not breaks or breaks[-1] != len(out)):
                breaks.append(len(out))
        else:
            out.append(t)
    if breaks and breaks[-1] == len(out):
        breaks.pop()
    return out, breaks


def process_text(text: str) -> tuple[list[str], list[int]]:
    """Tokenize + number-normalize; also return sentence-break positions."""
    return _split_breaks(normalize_numbers(tokenize(text, keep_terminators=True)))


def aggregate_daily(notes: Sequence[NoteEvent], stay_id: str) -> tuple[DayDocument, DayDocument]:
    """Concatenate a stay's non-discharge notes into day-0 and day-1 documents."""
    buckets: list[list[tuple[float, int, str]]] = [[] for _ in range(N_DAYS)]
    for order, note in enumerate(notes):
        if note.category.strip().lower() == DISCHARGE:
            continue
        day = note.day()
        if day is None:
            log.debug("stay %s: note outside the 48 h window dropped", stay_id)
            continue
        # date-only notes sort to the start of their day
        t = note.charttime if note.charttime is not None else day * HOURS_PER_DAY
        buckets[day].append((t, order, note.text))
    docs = []
    for day, items in enumerate(buckets):
        items.sort(key=lambda it: (it[0], it[1]))
        tokens: list[str] = []
        breaks: list[int] = []
        for _, _, text in items:
            toks, brk = process_text(text)
            if not toks:
                continue
            if tokens:
                breaks.append(len(tokens))
            breaks.extend(b + len(tokens) for b in brk)
            tokens.extend(toks)
        docs.append(DayDocument(stay_id, day, tokens, breaks))
    return docs[0], docs[1]


class Vocabulary:
    """Token <-> index map. Index 0 is the rare-word token, index 1 the number token."""

    def __init__(self, tokens: Sequence[str], counts: Sequence[int]):
        if len(tokens) != len(counts):
            raise ValueError("tokens and counts differ in length")
        self.itos = list(tokens)
        self.counts = [int(c) for c in counts]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos and self.counts == other.counts

    @property
    def rare_index(self) -> int:
        return self.stoi[RARE]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        rare = self.stoi[RARE]
        return [self.stoi.get(t, rare) for t in tokens]

    def decode(self, indices: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in indices]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t, c in zip(self.itos, self.counts):
                fh.write(f"{t}\t{c}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens, counts = [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                t, c = line.rsplit("\t", 1)
                tokens.append(t)
                counts.append(int(c))
        return cls(tokens, counts)


def build_vocab(documents: Iterable[Sequence[str]], min_count: int = 10) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times; the rest fold into RARE.

    Order: RARE, NUMZERO, then descending count with ties broken lexicographically.
    """
    counts: Counter = Counter()
    for doc in documents:
        counts.update(doc)
    rare = sum(c for t, c in counts.items() if c < min_count and t not in (RARE, NUMZERO))
    rare += counts.pop(RARE, 0)
    num = counts.pop(NUMZERO, 0)
    kept = sorted(((t, c) for t, c in counts.items() if c >= min_count), key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary([RARE, NUMZERO] + [t for t, _ in kept], [rare, num] + [c for _, c in kept])


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_notes(path) -> list[NoteEvent]:
    return [NoteEvent.from_json(r) for r in read_jsonl(path)]


def read_day_documents(path) -> list[DayDocument]:
    return [DayDocument.from_json(r) for r in read_jsonl(Path(path))]


def group_notes(notes: Iterable[NoteEvent]) -> dict[str, list[NoteEvent]]:
    """Group by stay, preserving ingestion order within each stay."""
    out: dict[str, list[NoteEvent]] = {}
    for n in notes:
        out.setdefault(n.stay_id, []).append(n)
    return out
