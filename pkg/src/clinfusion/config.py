"""Experiment configuration: INI files with sections, plus dotted overrides."""
from __future__ import annotations

import configparser
import copy
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .doc2vecc import Doc2VecCConfig
from .errors import ConfigError
from .models.train import TrainConfig
from .pipeline.protocol import ModelConfig
from .synthgen import CohortConfig

FEATURE_SETS = ("vital", "vital+note_emb", "vital+entity_emb")
STRUCTURES = ("lstm", "multimodal")
# the five rows of the published results table
TABLE_ROWS = (
    ("vital", "lstm"),
    ("vital+note_emb", "lstm"),
    ("vital+note_emb", "multimodal"),
    ("vital+entity_emb", "lstm"),
    ("vital+entity_emb", "multimodal"),
)


@dataclass
class PathsConfig:
    data_dir: str = "data"
    work_dir: str = "work"


@dataclass
class PreprocessConfig:
    min_count: int = 10
    split_seed: int = 0


@dataclass
class EmbeddingConfig:
    doc2vecc: Doc2VecCConfig = field(default_factory=Doc2VecCConfig)
    inference_mode: str = "exact"
    entity_backend: str = "lexicon"
    filter_negated: bool = True
    negation_window: int = 5
    seed: int = 0


@dataclass
class ProtocolConfig:
    n_seeds: int = 20
    master_seed: int = 0
    f1_threshold: float = 0.5
    n_bootstrap: int = 100
    bootstrap_seed: int = 0
    jobs: int = 1


@dataclass
class TsneConfig:
    perplexity: float = 30.0
    n_iter: int = 1000
    max_points: int = 1000
    seed: int = 0


@dataclass
class ExperimentConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    cohort: CohortConfig = field(default_factory=CohortConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    tsne: TsneConfig = field(default_factory=TsneConfig)

    def validate(self) -> None:
        m = self.model
        if m.feature_set not in FEATURE_SETS:
            raise ConfigError(f"feature_set must be one of {FEATURE_SETS}", "model.feature_set")
        if m.structure not in STRUCTURES:
            raise ConfigError(f"structure must be one of {STRUCTURES}", "model.structure")
        if m.feature_set == "vital" and m.structure != "lstm":
            raise ConfigError("the vital-only feature set runs with structure 'lstm'", "model.structure")
        if m.embedding_visibility not in ("from_start", "end_of_day"):
            raise ConfigError("embedding_visibility must be from_start or end_of_day",
                              "model.embedding_visibility")
        if m.train.optimizer not in ("sgd", "adam"):
            raise ConfigError("optimizer must be sgd or adam", "model.optimizer")
        if m.train.batch_size < 1 or m.train.max_epochs < 0 or m.train.lr < 0:
            raise ConfigError("batch_size >= 1, max_epochs >= 0 and lr >= 0 required", "model.batch_size")
        e = self.embedding
        if e.inference_mode not in ("exact", "sampled"):
            raise ConfigError("inference_mode must be exact or sampled", "embedding.inference_mode")
        if e.entity_backend not in ("lexicon", "tagger"):
            raise ConfigError("entity_backend must be lexicon or tagger", "embedding.entity_backend")
        try:
            e.doc2vecc.validate()
        except ConfigError as exc:
            raise ConfigError(str(exc), f"embedding.{exc.field}") from None
        try:
            self.cohort.validate()
        except ConfigError as exc:
            raise ConfigError(str(exc), f"cohort.{exc.field}") from None
        p = self.protocol
        if p.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1", "protocol.n_seeds")
        if p.n_bootstrap < 1:
            raise ConfigError("n_bootstrap must be >= 1", "protocol.n_bootstrap")
        if self.preprocess.min_count < 1:
            raise ConfigError("min_count must be >= 1", "preprocess.min_count")

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def data_dir(self) -> Path:
        return Path(self.paths.data_dir)

    @property
    def work_dir(self) -> Path:
        return Path(self.paths.work_dir)


PRESETS = {"desk": Path(__file__).parent / "data" / "desk.ini"}


# flat key -> (owner path, attribute) for sections whose dataclasses nest
_NESTED = {
    "embedding": {f.name: ("doc2vecc",) for f in fields(Doc2VecCConfig)},
    "model": {f.name: ("train",) for f in fields(TrainConfig)},
}


def _coerce(current, raw: str, key: str):
    if isinstance(current, bool):
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}", key)
    try:
        return type(current)(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(current).__name__}", key) from None


def set_value(cfg: ExperimentConfig, section: str, key: str, raw) -> None:
    dotted = f"{section}.{key}"
    if not hasattr(cfg, section):
        raise ConfigError(f"unknown config section {section!r}", dotted)
    owner = getattr(cfg, section)
    for hop in _NESTED.get(section, {}).get(key, ()):
        owner = getattr(owner, hop)
    names = {f.name for f in fields(owner)}
    if key not in names or is_dataclass(getattr(owner, key)):
        raise ConfigError(f"unknown config key {dotted!r}", dotted)
    setattr(owner, key, _coerce(getattr(owner, key), raw, dotted))


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read an INI file (optional) and apply ``section.key=value`` overrides.

    ``path`` may also name a shipped preset, e.g. ``"desk"``.
    """
    cfg = ExperimentConfig()
    if path is not None:
        path = PRESETS.get(str(path), path)
        parser = configparser.ConfigParser()
        parser.optionxform = str
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        for section in parser.sections():
            for key, raw in parser.items(section):
                set_value(cfg, section, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value", item)
        lhs, raw = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        set_value(cfg, section, key, raw.strip())
    cfg.validate()
    return cfg


def write_config(cfg: ExperimentConfig, path) -> None:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, values in flat_sections(cfg).items():
        parser[section] = {k: str(v) for k, v in values.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def flat_sections(cfg: ExperimentConfig) -> dict[str, dict]:
    out = {}
    for f in fields(cfg):
        obj = getattr(cfg, f.name)
        flat = {}
        for g in fields(obj):
            v = getattr(obj, g.name)
            if is_dataclass(v):
                flat.update(asdict(v))
            else:
                flat[g.name] = v
        out[f.name] = flat
    return out


def with_master_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Copy of ``cfg`` whose every random stream (cohort, embedding, training
    seeds, t-SNE) is driven by one master seed."""
    out = copy.deepcopy(cfg)
    out.cohort.seed = seed
    out.embedding.seed = seed
    out.protocol.master_seed = seed
    out.tsne.seed = seed
    return out
