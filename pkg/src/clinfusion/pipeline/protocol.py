"""Multi-seed training, F1 model selection and bootstrap evaluation."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ProtocolError, TrainingError
from ..models import TrainConfig, build_model, fit
from ..numkit import derive_seeds, make_rng
from .metrics import auprc, auroc, f1

log = logging.getLogger(__name__)


@dataclass
class Split:
    x: np.ndarray
    e: np.ndarray | None
    y: np.ndarray
    stay_ids: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.y)

    def take(self, idx) -> "Split":
        return Split(self.x[idx], None if self.e is None else self.e[idx], self.y[idx],
                     [self.stay_ids[i] for i in idx] if self.stay_ids else [])


@dataclass
class ModelConfig:
    feature_set: str = "vital"
    structure: str = "lstm"
    hidden: int = 256
    text_hidden: int = 100
    joint_hidden: int = 300
    embedding_visibility: str = "from_start"
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def row_id(self) -> str:
        return f"{self.feature_set}__{self.structure}"


@dataclass
class RunResult:
    seed: int
    val_f1: float = 0.0
    val_auroc: float = float("nan")
    val_auprc: float = float("nan")
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    failed: bool = False
    error: str = ""
    params: dict | None = None
    checkpoint: str = ""

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("params")
        return d


@dataclass
class ProtocolResult:
    runs: list[RunResult]
    selected: int

    @property
    def best(self) -> RunResult:
        return self.runs[self.selected]


@dataclass
class EvalReport:
    model_id: str
    feature_set: str
    structure: str
    auroc_mean: float
    auroc_std: float
    auprc_mean: float
    auprc_std: float
    auroc_point: float
    auprc_point: float
    n_resamples: int
    n_redrawn: int
    seed: int
    n_test: int
    spread: str = "bootstrap standard deviation"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def _n_in(split: Split) -> tuple[int, int]:
    emb_dim = 0 if split.e is None else split.e.shape[2]
    return split.x.shape[2], emb_dim


def make_model(cfg: ModelConfig, n_in: int, emb_dim: int, rng: np.random.Generator):
    return build_model(cfg.structure, cfg.feature_set, n_in, emb_dim, cfg.hidden, cfg.text_hidden,
                       cfg.joint_hidden, rng, cfg.embedding_visibility)


def train_one(cfg: ModelConfig, train: Split, val: Split, seed: int, threshold: float = 0.5) -> RunResult:
    """One independent training run; failures are captured, not raised."""
    rng = make_rng(seed)
    n_in, emb_dim = _n_in(train)
    res = RunResult(seed)
    try:
        model = make_model(cfg, n_in, emb_dim, rng)
        hist = fit(model, (train.x, train.e, train.y), (val.x, val.e, val.y), cfg.train, rng)
        scores = model.predict_proba(val.x, val.e)
        if not np.all(np.isfinite(scores)):
            raise TrainingError("non-finite validation predictions")
    except (TrainingError, FloatingPointError) as exc:
        res.failed, res.error = True, str(exc)
        log.warning("run with seed %d failed: %s", seed, exc)
        return res
    res.train_loss, res.val_loss = hist.train_loss, hist.val_loss
    res.val_f1 = f1(scores, val.y, threshold)
    if 0 < val.y.sum() < len(val.y):
        res.val_auroc = auroc(scores, val.y)
        res.val_auprc = auprc(scores, val.y)
    res.params = model.store.state_dict()
    return res


def select_run(runs: list[RunResult]) -> int:
    """Index of the best non-failed run by validation F1; ties go to the lower seed."""
    ok = [i for i, r in enumerate(runs) if not r.failed]
    if not ok:
        raise ProtocolError("every training run failed")
    return min(ok, key=lambda i: (-runs[i].val_f1, runs[i].seed))


def _train_star(args):
    return train_one(*args)


def run_protocol(cfg: ModelConfig, train: Split, val: Split, n_seeds: int = 20, master_seed: int = 0,
                 threshold: float = 0.5, jobs: int = 1) -> ProtocolResult:
    seeds = derive_seeds(master_seed, n_seeds)
    tasks = [(cfg, train, val, s, threshold) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_train_star, tasks))
    else:
        runs = [train_one(*t) for t in tasks]
    return ProtocolResult(runs, select_run(runs))


def load_model(cfg: ModelConfig, params: dict, n_in: int, emb_dim: int):
    model = make_model(cfg, n_in, emb_dim, make_rng(0))
    model.store.load_state_dict(params)
    return model


def bootstrap_eval(scores, labels, n: int = 100, seed: int = 0, model_id: str = "",
                   feature_set: str = "", structure: str = "") -> EvalReport:
    """Resample the test set with replacement ``n`` times; single-class draws are redrawn."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    m = len(y)
    if m == 0:
        raise ProtocolError("empty test set")
    if y.min() == y.max():
        raise ProtocolError("test set holds a single class")
    rng = make_rng(seed)
    aurocs, auprcs = [], []
    redrawn = 0
    while len(aurocs) < n:
        idx = rng.integers(0, m, size=m)
        yy = y[idx]
        if yy.min() == yy.max():
            redrawn += 1
            log.info("bootstrap resample lacked a class; redrawing")
            continue
        aurocs.append(auroc(s[idx], yy))
        auprcs.append(auprc(s[idx], yy))
    return EvalReport(model_id, feature_set, structure,
                      float(np.mean(aurocs)), float(np.std(aurocs)),
                      float(np.mean(auprcs)), float(np.std(auprcs)),
                      auroc(s, y), auprc(s, y), n, redrawn, seed, m)


def evaluate_run(cfg: ModelConfig, run: RunResult, test: Split, n: int = 100, seed: int = 0) -> EvalReport:
    n_in, emb_dim = _n_in(test)
    model = load_model(cfg, run.params, n_in, emb_dim)
    scores = model.predict_proba(test.x, test.e)
    return bootstrap_eval(scores, test.y, n, seed, cfg.row_id, cfg.feature_set, cfg.structure)
