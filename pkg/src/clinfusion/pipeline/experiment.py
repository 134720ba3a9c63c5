"""File-backed pipeline stages: synth, preprocess, embed, train, evaluate,
tsne and report. Each stage reads its inputs from the data/work directories
and writes only under its own ``work_dir/<stage>/`` (``synth`` writes
``data_dir``)."""
from __future__ import annotations

import json
import logging
import shutil
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from .. import doc2vecc
from ..config import TABLE_ROWS, ExperimentConfig
from ..corpus import (DayDocument, Vocabulary, aggregate_daily, build_vocab, group_notes, read_day_documents,
                      read_jsonl, read_notes, write_jsonl)
from ..entity.lexicon import Lexicon, entity_document, load_triggers
from ..entity.tagger import TaggerConfig, read_tagged, tagger_train
from ..errors import DataError
from ..models.checkpoint import load_checkpoint, save_checkpoint
from ..numkit import make_rng
from ..synthgen import entity_lexicon, generate, gold_tagged_sentences
from ..vitals import (SPLITS, PopulationStats, discretize, impute, read_events, read_index, read_matrix,
                      split_cohort, standardize, write_index, write_matrix)
from .metrics import auroc
from .protocol import EvalReport, RunResult, Split, evaluate_run, run_protocol
from .tsne import tsne, write_csv, write_svg

log = logging.getLogger(__name__)

FEATURE_LABELS = {"vital": "Vital (Benchmark)", "vital+note_emb": "Vital + NoteEmb",
                  "vital+entity_emb": "Vital + EntityEmb"}
STRUCTURE_LABELS = {"lstm": "LSTM", "multimodal": "Multi-modal"}


def require(path: Path) -> Path:
    if not Path(path).exists():
        raise FileNotFoundError(str(path))
    return Path(path)


def stage_dir(cfg: ExperimentConfig, stage: str) -> Path:
    d = cfg.work_dir / stage
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- synth ------------------------------------------------------------------

def run_synth(cfg: ExperimentConfig) -> dict:
    out = cfg.data_dir
    out.mkdir(parents=True, exist_ok=True)
    stays, truth = generate(cfg.cohort)
    write_jsonl(out / "stays.jsonl", (s.header() for s in stays))
    write_jsonl(out / "vitals.jsonl", (ev.to_json() for s in stays for ev in s.vitals))
    write_jsonl(out / "notes.jsonl", (n.to_json() for s in stays for n in s.notes))
    with open(out / "lexicon.tsv", "w", encoding="utf-8") as fh:
        for surface, typ in entity_lexicon(cfg.cohort):
            fh.write(f"{surface}\t{typ}\n")
    with resources.as_file(resources.files("clinfusion") / "data" / "negation_triggers.txt") as p:
        shutil.copyfile(p, out / "negation_triggers.txt")
    gold = gold_tagged_sentences(cfg.cohort)
    write_jsonl(out / "tagged.jsonl", ({"tokens": t, "tags": g} for t, g, _ in gold))
    labels = np.array([s.label for s in stays])
    write_jsonl(out / "truth.jsonl", ({"stay_id": s.stay_id, "z_v": float(zv), "z_t": float(zt),
                                       "logit": float(lg), "label": s.label}
                                      for s, zv, zt, lg in zip(stays, truth.z_v, truth.z_t, truth.logit)))
    summary = {
        "intercept": truth.intercept,
        "prevalence": float(labels.mean()),
        "bayes_auroc": auroc(truth.logit, labels),
        "bayes_auroc_vital_only": auroc(truth.z_v, labels),
        "bayes_auroc_text_only": auroc(truth.z_t, labels) if cfg.cohort.beta_t > 0 else 0.5,
        "n_stays": len(stays),
        "n_patients": len({s.patient_id for s in stays}),
    }
    summary["bayes_gap"] = summary["bayes_auroc"] - summary["bayes_auroc_vital_only"]
    with open(out / "truth_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


# -- preprocess -------------------------------------------------------------

def run_preprocess(cfg: ExperimentConfig) -> dict:
    data = cfg.data_dir
    stays = read_jsonl(require(data / "stays.jsonl"))
    events = read_events(require(data / "vitals.jsonl"))
    notes = group_notes(read_notes(require(data / "notes.jsonl")))
    out = stage_dir(cfg, "preprocess")
    ids = [str(s["stay_id"]) for s in stays]
    tags = split_cohort(ids, [str(s["patient_id"]) for s in stays], cfg.preprocess.split_seed)
    seqs = {sid: discretize(events.get(sid, []), sid) for sid in ids}
    train_ids = [sid for sid in ids if tags[sid] == "train"]
    stats = PopulationStats.from_train([seqs[s] for s in train_ids], ["train"] * len(train_ids))
    for split in SPLITS:
        members = [sid for sid in ids if tags[sid] == split]
        done = [standardize(impute(seqs[s], stats), stats) for s in members]
        write_matrix(out / f"{split}.bin", np.array([d.values for d in done]).reshape(-1, 24, stats.mean.size))
        write_matrix(out / f"{split}_mask.bin",
                     np.array([d.mask for d in done], dtype=np.float64).reshape(-1, 24, stats.mean.size))
        write_index(out / f"{split}.ids", members)
    with open(out / "splits.json", "w", encoding="utf-8") as fh:
        json.dump(tags, fh, indent=1, sort_keys=True)
    with open(out / "labels.json", "w", encoding="utf-8") as fh:
        json.dump({str(s["stay_id"]): int(s["label"]) for s in stays}, fh, indent=1, sort_keys=True)
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats.to_json(), fh, indent=1)
    docs = []
    for sid in ids:
        docs.extend(aggregate_daily(notes.get(sid, []), sid))
    write_jsonl(out / "day_docs.jsonl", (d.to_json() for d in docs))
    return {split: sum(1 for t in tags.values() if t == split) for split in SPLITS}


# -- embed ------------------------------------------------------------------

def embedding_name(cfg: ExperimentConfig, mode: str) -> str:
    if mode == "note":
        return "note"
    e = cfg.embedding
    name = "entity"
    if e.entity_backend == "tagger":
        name += "_tagger"
    if not e.filter_negated:
        name += "_unfiltered"
    return name


def feature_mode(feature_set: str) -> str | None:
    return {"vital": None, "vital+note_emb": "note", "vital+entity_emb": "entity"}[feature_set]


def _entity_corpus(cfg: ExperimentConfig, docs: list[DayDocument], out: Path) -> list[list[str]]:
    e = cfg.embedding
    lexicon = Lexicon.load(require(cfg.data_dir / "lexicon.tsv"))
    trig_path = cfg.data_dir / "negation_triggers.txt"
    triggers = load_triggers(trig_path) if trig_path.exists() else None
    spans_fn = None
    if e.entity_backend == "tagger":
        tagger = tagger_train(read_tagged(require(cfg.data_dir / "tagged.jsonl")), TaggerConfig(seed=e.seed))
        spans_fn = tagger.spans
    corpus = [entity_document(d, lexicon, triggers, e.negation_window, drop_negated=e.filter_negated,
                              spans_fn=spans_fn) for d in docs]
    write_jsonl(out / "corpus.jsonl", (c.to_json() for c in corpus))
    return [c.tokens for c in corpus]


def run_embed(cfg: ExperimentConfig, mode: str) -> dict:
    if mode not in ("note", "entity"):
        raise DataError(f"unknown embedding mode {mode!r}")
    pre = cfg.work_dir / "preprocess"
    docs = read_day_documents(require(pre / "day_docs.jsonl"))
    with open(require(pre / "splits.json"), encoding="utf-8") as fh:
        tags = json.load(fh)
    name = embedding_name(cfg, mode)
    out = stage_dir(cfg, "embed") / name
    out.mkdir(parents=True, exist_ok=True)
    if mode == "note":
        token_docs = [d.tokens for d in docs]
        write_jsonl(out / "corpus.jsonl", ({"stay_id": d.stay_id, "day": d.day, "tokens": d.tokens} for d in docs))
    else:
        token_docs = _entity_corpus(cfg, docs, out)
    train_docs = [t for d, t in zip(docs, token_docs) if tags.get(d.stay_id) == "train"]
    vocab = build_vocab(train_docs, cfg.preprocess.min_count)
    vocab.save(out / "vocab.tsv")
    rng = make_rng(cfg.embedding.seed)
    model = doc2vecc.train(train_docs, vocab, cfg.embedding.doc2vecc, rng)
    model.save(out / "model.bin")
    model.export_text(out / "vectors.txt")
    infer_rng = make_rng(cfg.embedding.seed + 1)
    embs = [doc2vecc.embed_document(t, model, cfg.embedding.inference_mode, rng=infer_rng,
                                    stay_id=d.stay_id, day=d.day) for d, t in zip(docs, token_docs)]
    n_empty = sum(e.empty for e in embs)
    if n_empty:
        log.warning("%s: %d empty day documents embedded as the zero vector", name, n_empty)
    write_jsonl(out / "embeddings.jsonl", (e.to_json() for e in embs))
    return {"name": name, "vocab_size": len(vocab), "n_docs": len(docs), "n_empty": n_empty,
            "loss_history": model.history}


def load_embeddings(path: Path) -> dict[str, np.ndarray]:
    """Per-stay (2, d) day vectors. A missing/empty day takes the previous
    day's vector; a missing first day takes the zero vector."""
    by_stay: dict[str, dict[int, doc2vecc.DocEmbedding]] = {}
    for rec in read_jsonl(path):
        e = doc2vecc.DocEmbedding.from_json(rec)
        by_stay.setdefault(e.stay_id, {})[e.day] = e
    out = {}
    for sid, days in by_stay.items():
        d = len(next(iter(days.values())).vector)
        prev = np.zeros(d)
        rows = []
        for day in (0, 1):
            e = days.get(day)
            if e is not None and not e.empty:
                prev = e.vector
            rows.append(prev)
        out[sid] = np.array(rows)
    return out


def row_id(cfg: ExperimentConfig) -> str:
    m = cfg.model
    rid = f"{m.feature_set}__{m.structure}"
    mode = feature_mode(m.feature_set)
    if mode is not None and embedding_name(cfg, mode) != mode:
        rid += "__" + embedding_name(cfg, mode)
    return rid


def load_splits(cfg: ExperimentConfig) -> dict[str, Split]:
    pre = cfg.work_dir / "preprocess"
    with open(require(pre / "labels.json"), encoding="utf-8") as fh:
        labels = json.load(fh)
    mode = feature_mode(cfg.model.feature_set)
    embs = None
    if mode is not None:
        embs = load_embeddings(require(cfg.work_dir / "embed" / embedding_name(cfg, mode) / "embeddings.jsonl"))
    out = {}
    for split in SPLITS:
        ids = read_index(require(pre / f"{split}.ids"))
        x = read_matrix(pre / f"{split}.bin")
        e = np.array([embs[s] for s in ids]) if embs is not None else None
        out[split] = Split(x, e, np.array([labels[s] for s in ids], dtype=np.float64), ids)
    return out


# -- train / evaluate ---------------------------------------------------------

def run_train(cfg: ExperimentConfig, jobs: int | None = None) -> dict:
    splits = load_splits(cfg)
    p = cfg.protocol
    res = run_protocol(cfg.model, splits["train"], splits["val"], p.n_seeds, p.master_seed,
                       p.f1_threshold, jobs or p.jobs)
    out = stage_dir(cfg, "train") / row_id(cfg)
    out.mkdir(parents=True, exist_ok=True)
    echo = {"model": asdict(cfg.model), "row_id": row_id(cfg)}
    for run in res.runs:
        if not run.failed:
            run.checkpoint = f"seed_{run.seed}.ckpt"
            save_checkpoint(out / run.checkpoint, run.params, dict(echo, seed=run.seed))
    summary = {"row_id": row_id(cfg), "selected": res.selected, "selected_seed": res.best.seed,
               "runs": [r.summary() for r in res.runs]}
    with open(out / "runs.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def run_evaluate(cfg: ExperimentConfig) -> EvalReport:
    rid = row_id(cfg)
    tdir = cfg.work_dir / "train" / rid
    with open(require(tdir / "runs.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    best = summary["runs"][summary["selected"]]
    params, _ = load_checkpoint(require(tdir / best["checkpoint"]))
    test = load_splits(cfg)["test"]
    run = RunResult(best["seed"], params=params)
    p = cfg.protocol
    report = evaluate_run(cfg.model, run, test, p.n_bootstrap, p.bootstrap_seed)
    report.model_id = rid
    out = stage_dir(cfg, "evaluate")
    with open(out / f"{rid}.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    return report


def bayes_ceiling(cfg: ExperimentConfig, split: str = "test") -> dict:
    """AUROC of the generator's true logit (and its vital-only part) on one split.

    No model can beat the true logit in expectation, so this is the ceiling
    the trained rows are compared against on the same stays.
    """
    truth = {r["stay_id"]: r for r in read_jsonl(require(cfg.data_dir / "truth.jsonl"))}
    with open(require(cfg.work_dir / "preprocess" / "labels.json"), encoding="utf-8") as fh:
        labels = json.load(fh)
    ids = read_index(require(cfg.work_dir / "preprocess" / f"{split}.ids"))
    y = np.array([labels[s] for s in ids])
    full = auroc([truth[s]["logit"] for s in ids], y)
    vital = auroc([truth[s]["z_v"] for s in ids], y)
    return {"split": split, "bayes_auroc": full, "bayes_auroc_vital_only": vital, "bayes_gap": full - vital}


# -- tsne / report ------------------------------------------------------------

def run_tsne(cfg: ExperimentConfig, mode: str) -> dict:
    name = embedding_name(cfg, mode)
    embs = load_embeddings(require(cfg.work_dir / "embed" / name / "embeddings.jsonl"))
    with open(require(cfg.work_dir / "preprocess" / "labels.json"), encoding="utf-8") as fh:
        labels = json.load(fh)
    ids = sorted(embs)[:cfg.tsne.max_points]
    X = np.array([embs[s].reshape(-1) for s in ids])
    y = [labels[s] for s in ids]
    t = cfg.tsne
    res = tsne(X, t.perplexity, t.n_iter, t.seed)
    out = stage_dir(cfg, "tsne")
    write_csv(out / f"{name}.csv", ids, res.coords, y)
    write_svg(out / f"{name}.svg", res.coords, y, title=f"t-SNE of {name} embeddings")
    return {"name": name, "kl": res.kl, "n": len(ids)}


def format_table(reports: list[EvalReport]) -> str:
    head = ("Feature Set", "Neural Network Structure", "AU-ROC", "AU-PRC")
    rows = []
    for r in reports:
        feat = FEATURE_LABELS.get(r.feature_set, r.feature_set)
        suffix = r.model_id.split("__", 2)[2] if r.model_id.count("__") >= 2 else ""
        if suffix:
            feat += f" [{suffix}]"
        rows.append((feat, STRUCTURE_LABELS.get(r.structure, r.structure),
                     f"{r.auroc_mean:.4f} ± {r.auroc_std:.4f}", f"{r.auprc_mean:.4f} ± {r.auprc_std:.4f}"))
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(head)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    out = [line(head), line(["-" * w for w in widths])]
    out += [line(r) for r in rows]
    out.append("(± = standard deviation over bootstrap resamples of the test set)")
    return "\n".join(out) + "\n"


def _row_order(r: EvalReport):
    key = (r.feature_set, r.structure)
    return (TABLE_ROWS.index(key) if key in TABLE_ROWS else len(TABLE_ROWS), r.model_id)


def run_report(cfg: ExperimentConfig) -> str:
    edir = require(cfg.work_dir / "evaluate")
    reports = [EvalReport.from_json(p.read_text(encoding="utf-8")) for p in sorted(edir.glob("*.json"))]
    reports.sort(key=_row_order)
    table = format_table(reports)
    out = stage_dir(cfg, "report")
    (out / "table.txt").write_text(table, encoding="utf-8")
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in reports], fh, indent=2, sort_keys=True)
    return table
