"""Synthetic ICU cohort with planted signal in vitals and notes.

Each stay has two independent standard-normal latents: ``z_v`` drives the
vital-sign drift and ``z_t`` drives how often risk entities are mentioned in
the notes. The label is Bernoulli(sigmoid(b0 + beta_v z_v + beta_t z_t)), so
the generative logit is the Bayes-optimal score. Negated decoy sentences
("no septic shock") mention risk entities at a rate independent of every
latent, so they only add noise to a pipeline that keeps them.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .corpus import NoteEvent, tokenize
from .errors import ConfigError
from .numkit import make_rng
from .vitals import N_SIGNALS, VitalEvent

RISK_ENTITIES = [
    ("septic shock", "condition"), ("cardiac arrest", "condition"),
    ("respiratory failure", "condition"), ("acute mi", "condition"),
    ("intracranial hemorrhage", "condition"), ("norepinephrine", "medication"),
    ("vasopressin", "medication"), ("lactate", "test"), ("troponin", "test"),
    ("mechanical ventilation", "treatment"), ("dialysis", "treatment"),
    ("intubation", "procedure"),
]
BENIGN_ENTITIES = [
    ("oropharyngeal lesion", "condition"), ("mild headache", "condition"),
    ("constipation", "condition"), ("anxiety", "condition"),
    ("acetaminophen", "medication"), ("docusate", "medication"), ("insulin", "medication"),
    ("chest radiograph", "test"), ("urinalysis", "test"),
    ("physical therapy", "treatment"), ("wound care", "treatment"),
    ("central line placement", "procedure"),
]
MENTION_TEMPLATES = [
    "patient with {e}.", "{e} noted.", "assessment notable for {e}.",
    "plan includes {e}.", "continue {e} per team.", "{e} reviewed on rounds.",
]
DECOY_TEMPLATES = [
    "no {e}.", "denies {e}.", "negative for {e}.", "patient without {e}.",
    "free of {e}.", "not consistent with {e}.", "ruled out {e}.",
]
FILLER_TEMPLATES = [
    "patient resting comfortably.", "family at bedside.", "hr {n} bp {n}/{n}.",
    "no acute distress.", "temp {n}.{n} overnight.", "will continue to monitor.",
    "plan discussed with family.", "skin warm and dry.", "sats {n} percent on room air.",
    "not in pain at this time.", "tolerating diet.", "lines intact.",
]
TIMED_CATEGORIES = ("nursing", "physician", "radiology", "respiratory")
DATE_ONLY_CATEGORIES = ("ecg", "echo")

# signal means/scales and how strongly each loads on the vital latent
SIGNAL_MEAN = np.array([85, 120, 65, 18, 37, 97, 140, 4.0, 100, 24, 15, 1.0, 120, 10, 300, 30, 7.4])
SIGNAL_SCALE = np.array([15, 20, 10, 4, 0.6, 2, 4, 0.5, 5, 3, 6, 0.4, 30, 2, 80, 5, 0.05])
SIGNAL_LOADING = np.array([1.0, -1.0, -0.8, 0.9, 0.3, -0.9, 0.0, 0.2, 0.0, -0.7, 0.8, 0.7,
                           0.4, -0.5, -0.6, 0.0, -0.8])
# mean hours between measurements: bedside vitals often, labs rarely
SIGNAL_INTERVAL = np.array([2, 2, 2, 2, 4, 2, 8, 8, 8, 8, 12, 12, 8, 12, 12, 12, 8], dtype=float)


@dataclass
class CohortConfig:
    n_stays: int = 2000
    max_stays_per_patient: int = 3
    extra_stay_rate: float = 0.25
    base_rate: float = 0.2
    beta_v: float = 1.5
    beta_t: float = 0.92
    n_risk_entities: int = 12
    n_benign_entities: int = 12
    risk_rate: float = 10.0
    text_gain: float = 1.5
    benign_rate: float = 5.0
    decoy_rate: float = 10.0
    filler_rate: float = 8.0
    pseudo_vocab: int = 400
    missingness: float = 0.3
    vital_noise: float = 0.6
    stay_offset_sd: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        for name in ("base_rate", "missingness"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}", name)
        if not 0.0 < self.base_rate < 1.0:
            raise ConfigError("base_rate must lie strictly inside (0, 1)", "base_rate")
        for name in ("beta_v", "beta_t", "risk_rate", "benign_rate", "decoy_rate", "filler_rate",
                     "extra_stay_rate", "text_gain", "vital_noise", "stay_offset_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", name)
        if not 1 <= self.n_risk_entities <= len(RISK_ENTITIES):
            raise ConfigError("n_risk_entities out of range", "n_risk_entities")
        if not 1 <= self.n_benign_entities <= len(BENIGN_ENTITIES):
            raise ConfigError("n_benign_entities out of range", "n_benign_entities")
        if self.n_stays < 3:
            raise ConfigError("n_stays must be >= 3", "n_stays")
        if self.max_stays_per_patient < 1:
            raise ConfigError("max_stays_per_patient must be >= 1", "max_stays_per_patient")

    @classmethod
    def from_dict(cls, d: dict) -> "CohortConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in known:
                raise ConfigError(f"unknown cohort setting {k!r}", k)
            default = getattr(cls, k)
            try:
                kwargs[k] = type(default)(v)
            except (TypeError, ValueError):
                raise ConfigError(f"cohort setting {k!r}: cannot parse {v!r}", k) from None
        return cls(**kwargs)


@dataclass
class StayRecord:
    stay_id: str
    patient_id: str
    label: int
    vitals: list[VitalEvent] = field(default_factory=list)
    notes: list[NoteEvent] = field(default_factory=list)
    split: str | None = None

    def header(self) -> dict:
        return {"stay_id": self.stay_id, "patient_id": self.patient_id, "label": self.label}


@dataclass
class GroundTruth:
    intercept: float
    z_v: np.ndarray
    z_t: np.ndarray
    logit: np.ndarray

    def vital_score(self, beta_v: float) -> np.ndarray:
        return beta_v * self.z_v


def intercept_for(base_rate: float, beta_v: float, beta_t: float) -> float:
    """Intercept making E[sigmoid(b0 + s Z)] = base_rate with s = |(beta_v, beta_t)|."""
    x, w = np.polynomial.hermite_e.hermegauss(80)
    w = w / w.sum()
    s = math.hypot(beta_v, beta_t)
    return brentq(lambda b: float((w * expit(b + s * x)).sum()) - base_rate, -50.0, 50.0)


def entity_lexicon(config: CohortConfig) -> list[tuple[str, str]]:
    return RISK_ENTITIES[:config.n_risk_entities] + BENIGN_ENTITIES[:config.n_benign_entities]


def _pseudo_words(n: int) -> list[str]:
    syll = ["ka", "lo", "mer", "tis", "an", "dre", "vo", "sul", "pe", "ri", "gan", "to"]
    words = []
    i = 0
    while len(words) < n:
        a, b, c = i % 12, (i // 12) % 12, (i // 144) % 12
        words.append(syll[a] + syll[b] + ("" if i < 144 else syll[c]))
        i += 1
    return words


def _fill(template: str, rng: np.random.Generator) -> str:
    while "{n}" in template:
        template = template.replace("{n}", str(int(rng.integers(1, 200))), 1)
    return template


def _day_sentences(cfg: CohortConfig, z_t: float, rng, risk, benign, pseudo, zipf) -> list[str]:
    g = cfg.text_gain
    n_risk = rng.poisson(cfg.risk_rate * math.exp(g * z_t - 0.5 * g * g))
    n_benign = rng.poisson(cfg.benign_rate)
    n_decoy = rng.poisson(cfg.decoy_rate)
    n_filler = rng.poisson(cfg.filler_rate)
    sents = []
    for _ in range(n_risk):
        e = risk[rng.integers(len(risk))][0]
        sents.append(MENTION_TEMPLATES[rng.integers(len(MENTION_TEMPLATES))].format(e=e))
    for _ in range(n_benign):
        e = benign[rng.integers(len(benign))][0]
        sents.append(MENTION_TEMPLATES[rng.integers(len(MENTION_TEMPLATES))].format(e=e))
    for _ in range(n_decoy):
        e = risk[rng.integers(len(risk))][0]
        sents.append(DECOY_TEMPLATES[rng.integers(len(DECOY_TEMPLATES))].format(e=e))
    for _ in range(n_filler):
        if rng.random() < 0.5:
            sents.append(_fill(FILLER_TEMPLATES[rng.integers(len(FILLER_TEMPLATES))], rng))
        else:
            k = int(rng.integers(3, 8))
            sents.append(" ".join(pseudo[j] for j in rng.choice(len(pseudo), size=k, p=zipf)) + ".")
    order = rng.permutation(len(sents))
    return [sents[i] for i in order]


def _notes_for_day(stay_id: str, day: int, sents: list[str], rng) -> list[NoteEvent]:
    notes = []
    i = 0
    while i < len(sents):
        k = int(rng.integers(3, 8))
        text = " ".join(sents[i:i + k])
        i += k
        if rng.random() < 0.1:
            cat = DATE_ONLY_CATEGORIES[rng.integers(len(DATE_ONLY_CATEGORIES))]
            notes.append(NoteEvent(stay_id, cat, text, None, day))
        else:
            cat = TIMED_CATEGORIES[rng.integers(len(TIMED_CATEGORIES))]
            t = round(day * 24.0 + float(rng.uniform(0.0, 24.0)), 3)
            notes.append(NoteEvent(stay_id, cat, text, t, None))
    return notes


def _vital_events(cfg: CohortConfig, stay_id: str, z_v: float, rng) -> list[VitalEvent]:
    events = []
    horizon = 56.0
    for s in range(N_SIGNALS):
        offset = rng.normal(0.0, cfg.stay_offset_sd)
        t = float(rng.uniform(0.0, SIGNAL_INTERVAL[s]))
        noise = rng.normal(0.0, cfg.vital_noise)
        while t < horizon:
            drift = SIGNAL_LOADING[s] * z_v * (0.5 + t / 48.0)
            noise = 0.8 * noise + math.sqrt(1 - 0.64) * rng.normal(0.0, cfg.vital_noise)
            keep = rng.random() >= cfg.missingness
            if keep:
                v = SIGNAL_MEAN[s] + SIGNAL_SCALE[s] * (drift + offset + noise)
                events.append(VitalEvent(stay_id, s, round(t, 3), round(float(v), 4)))
            t += float(rng.exponential(SIGNAL_INTERVAL[s]))
    events.sort(key=lambda ev: (ev.time, ev.signal))
    return events


def generate(config: CohortConfig) -> tuple[list[StayRecord], GroundTruth]:
    config.validate()
    rng = make_rng(config.seed)
    n = config.n_stays
    b0 = intercept_for(config.base_rate, config.beta_v, config.beta_t)
    z_v = rng.standard_normal(n)
    z_t = rng.standard_normal(n)
    logit = b0 + config.beta_v * z_v + config.beta_t * z_t
    labels = (rng.random(n) < expit(logit)).astype(int)
    risk = RISK_ENTITIES[:config.n_risk_entities]
    benign = BENIGN_ENTITIES[:config.n_benign_entities]
    pseudo = _pseudo_words(config.pseudo_vocab)
    zipf = 1.0 / np.arange(1, len(pseudo) + 1)
    zipf /= zipf.sum()
    stays = []
    patient = 0
    left = 0
    for i in range(n):
        if left == 0:
            patient += 1
            left = min(1 + rng.poisson(config.extra_stay_rate), config.max_stays_per_patient)
        left -= 1
        sid = f"s{i:06d}"
        rec = StayRecord(sid, f"p{patient:06d}", int(labels[i]))
        rec.vitals = _vital_events(config, sid, float(z_v[i]), rng)
        for day in (0, 1):
            sents = _day_sentences(config, float(z_t[i]), rng, risk, benign, pseudo, zipf)
            rec.notes.extend(_notes_for_day(sid, day, sents, rng))
        # leaky notes the pipeline must ignore
        outcome = "patient expired." if labels[i] else "discharged home in stable condition."
        rec.notes.append(NoteEvent(sid, "discharge", outcome, round(float(rng.uniform(30, 48)), 3)))
        rec.notes.append(NoteEvent(sid, "nursing", outcome, round(float(rng.uniform(48, 72)), 3)))
        rec.notes.sort(key=lambda nt: (nt.charttime if nt.charttime is not None else nt.chartdate * 24.0))
        stays.append(rec)
    return stays, GroundTruth(b0, z_v, z_t, logit)


def gold_tagged_sentences(config: CohortConfig, n: int = 50, seed: int | None = None):
    """Sentences with gold BIO tags (negated variants for decoys) and their spans."""
    from .entity.lexicon import EntitySpan
    from .entity.tagger import tags_from_spans

    rng = make_rng(config.seed + 7919 if seed is None else seed)
    lex = entity_lexicon(config)
    out = []
    for _ in range(n):
        kind = rng.random()
        if kind < 0.15:
            text = _fill(FILLER_TEMPLATES[rng.integers(len(FILLER_TEMPLATES))], rng)
            ent = None
        else:
            ent = lex[rng.integers(len(lex))]
            negated = kind < 0.45
            pool = DECOY_TEMPLATES if negated else MENTION_TEMPLATES
            template = pool[rng.integers(len(pool))]
        if ent is None:
            tokens = tokenize(text)
            spans = []
        else:
            before, after = template.split("{e}")
            pre, surf, post = tokenize(before), tokenize(ent[0]), tokenize(after)
            tokens = pre + surf + post
            spans = [EntitySpan(len(pre), len(pre) + len(surf), ent[1], negated, tuple(surf))]
        out.append((tokens, tags_from_spans(len(tokens), spans), spans))
    return out


def config_dict(config: CohortConfig) -> dict:
    return asdict(config)
