"""Lexicon entity matching, rule-based negation and the entity corpus."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from ..corpus import DayDocument, normalize_numbers, tokenize

ENTITY_TYPES = ("condition", "medication", "test", "treatment", "procedure")
DEFAULT_WINDOW = 5


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    entity_type: str
    negated: bool = False
    surface: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")
        if self.entity_type not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type {self.entity_type!r}")

    def with_negation(self, negated: bool) -> "EntitySpan":
        return EntitySpan(self.start, self.end, self.entity_type, negated, self.surface)

    @property
    def token(self) -> str:
        """Single corpus token for the entity: surface tokens joined by '_'."""
        return "_".join(self.surface)


@dataclass
class EntityCorpusDoc:
    stay_id: str
    day: int
    tokens: list[str]

    def to_json(self) -> dict:
        return {"stay_id": self.stay_id, "day": self.day, "tokens": self.tokens}


class Lexicon:
    def __init__(self, entries: dict[tuple[str, ...], str]):
        for key, typ in entries.items():
            if not key:
                raise ValueError("empty lexicon key")
            if typ not in ENTITY_TYPES:
                raise ValueError(f"unknown entity type {typ!r} for {' '.join(key)!r}")
        self.entries = dict(entries)
        self.max_n = max((len(k) for k in self.entries), default=0)

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "Lexicon":
        entries = {}
        for surface, typ in pairs:
            key = tuple(normalize_numbers(tokenize(surface)))
            entries[key] = typ
        return cls(entries)

    @classmethod
    def load(cls, path) -> "Lexicon":
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.strip() and not line.startswith("#"):
                    surface, typ = line.split("\t")
                    pairs.append((surface, typ.strip()))
        return cls.from_pairs(pairs)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key, typ in self.entries.items():
                fh.write(f"{' '.join(key)}\t{typ}\n")


def _read_phrases(path) -> list[tuple[str, ...]]:
    with open(path, encoding="utf-8") as fh:
        return [tuple(line.split()) for line in fh if line.strip()]


def default_triggers() -> list[tuple[str, ...]]:
    with resources.as_file(resources.files("clinfusion") / "data" / "negation_triggers.txt") as p:
        return _read_phrases(p)


def default_terminators() -> frozenset[str]:
    with resources.as_file(resources.files("clinfusion") / "data" / "scope_terminators.txt") as p:
        return frozenset(t[0] for t in _read_phrases(p))


def load_triggers(path) -> list[tuple[str, ...]]:
    return _read_phrases(path)


def match_entities(tokens: Sequence[str], lexicon: Lexicon) -> list[EntitySpan]:
    """Greedy longest match, left to right, non-overlapping."""
    spans = []
    i, n = 0, len(tokens)
    while i < n:
        for length in range(min(lexicon.max_n, n - i), 0, -1):
            key = tuple(tokens[i:i + length])
            typ = lexicon.entries.get(key)
            if typ is not None:
                spans.append(EntitySpan(i, i + length, typ, False, key))
                i += length
                break
        else:
            i += 1
    return spans


def detect_negation(tokens: Sequence[str], spans: Sequence[EntitySpan], triggers=None,
                    window: int = DEFAULT_WINDOW, terminators=None) -> list[EntitySpan]:
    """Flag spans preceded by a trigger within ``window`` tokens.

    Scanning backwards from the span start stops at the first terminator.
    """
    triggers = default_triggers() if triggers is None else [tuple(t) for t in triggers]
    terminators = default_terminators() if terminators is None else frozenset(terminators)
    out = []
    for span in spans:
        negated = False
        lo = max(0, span.start - window)
        for j in range(span.start - 1, lo - 1, -1):
            if tokens[j] in terminators:
                break
            if any(j - len(t) + 1 >= lo and tuple(tokens[j - len(t) + 1:j + 1]) == t for t in triggers):
                negated = True
                break
        out.append(span.with_negation(negated))
    return out


def filter_negated(spans: Iterable[EntitySpan]) -> list[EntitySpan]:
    return [s for s in spans if not s.negated]


def with_breaks(doc: DayDocument) -> list[str]:
    """Document tokens with '.' re-inserted at sentence breaks."""
    out: list[str] = []
    breaks = set(doc.breaks)
    for i, tok in enumerate(doc.tokens):
        if i in breaks:
            out.append(".")
        out.append(tok)
    return out


def entity_document(doc: DayDocument, lexicon: Lexicon, triggers=None, window: int = DEFAULT_WINDOW,
                    terminators=None, drop_negated: bool = True, spans_fn=None) -> EntityCorpusDoc:
    """Surviving entities of a day document, one '_'-joined token per entity.

    ``spans_fn(tokens)`` replaces lexicon matching plus rule negation (e.g. a
    trained tagger); ``drop_negated=False`` keeps negated entities.
    """
    seq = with_breaks(doc)
    if spans_fn is None:
        spans = detect_negation(seq, match_entities(seq, lexicon), triggers, window, terminators)
    else:
        spans = spans_fn(seq)
    if drop_negated:
        spans = filter_negated(spans)
    return EntityCorpusDoc(doc.stay_id, doc.day, [s.token for s in spans])
