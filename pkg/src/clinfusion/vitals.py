"""Vital-sign feature pipeline: 48 h window, 2 h bins, forward-fill imputation,
population-default fill and standardization."""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .numkit import make_rng

N_SIGNALS = 17
WINDOW_HOURS = 48.0
STEP_HOURS = 2.0
N_STEPS = int(WINDOW_HOURS / STEP_HOURS)
STD_FLOOR = 1e-6
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class VitalEvent:
    stay_id: str
    signal: int
    time: float
    value: float

    @classmethod
    def from_json(cls, rec: dict) -> "VitalEvent":
        return cls(str(rec["stay_id"]), int(rec["signal"]), float(rec["time"]), float(rec["value"]))

    def to_json(self) -> dict:
        return {"stay_id": self.stay_id, "signal": self.signal, "time": self.time, "value": self.value}


@dataclass
class VitalSequence:
    stay_id: str
    values: np.ndarray   # (T, L); NaN marks a missing cell before imputation
    mask: np.ndarray     # (T, L) bool, True = observed in the raw events

    def copy(self) -> "VitalSequence":
        return VitalSequence(self.stay_id, self.values.copy(), self.mask.copy())


@dataclass
class PopulationStats:
    mean: np.ndarray
    std: np.ndarray
    default: np.ndarray

    def to_json(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("mean", "std", "default")}

    @classmethod
    def from_json(cls, rec: dict) -> "PopulationStats":
        return cls(*(np.asarray(rec[k], dtype=np.float64) for k in ("mean", "std", "default")))

    @classmethod
    def from_train(cls, sequences: Sequence[VitalSequence], split_tags: Sequence[str]) -> "PopulationStats":
        """Per-signal statistics of observed cells. Only train-tagged stays are accepted."""
        if len(sequences) != len(split_tags):
            raise DataError("one split tag per sequence required")
        bad = [s.stay_id for s, tag in zip(sequences, split_tags) if tag != "train"]
        if bad:
            raise DataError(f"population statistics must come from the train split; got {bad[:3]}...")
        L = sequences[0].values.shape[1] if sequences else N_SIGNALS
        mean = np.zeros(L)
        std = np.zeros(L)
        for k in range(L):
            obs = np.concatenate([s.values[s.mask[:, k], k] for s in sequences]) if sequences else np.zeros(0)
            if obs.size:
                mean[k] = obs.mean()
                std[k] = obs.std()
        return cls(mean, std, mean.copy())


def discretize(events: Iterable[VitalEvent], stay_id: str = "", window: float = WINDOW_HOURS,
               step: float = STEP_HOURS, n_signals: int = N_SIGNALS) -> VitalSequence:
    """Bin events by floor(time / step); the latest event in a bin wins."""
    T = int(round(window / step))
    values = np.full((T, n_signals), np.nan)
    best_time = np.full((T, n_signals), -np.inf)
    for ev in events:
        if ev.time < 0:
            raise DataError(f"stay {ev.stay_id}: negative event time {ev.time}")
        if not 0 <= ev.signal < n_signals:
            raise DataError(f"stay {ev.stay_id}: signal index {ev.signal} out of range")
        if ev.time >= window:
            continue
        b = int(math.floor(ev.time / step))
        # ties in time keep the later input record
        if ev.time >= best_time[b, ev.signal]:
            best_time[b, ev.signal] = ev.time
            values[b, ev.signal] = ev.value
    return VitalSequence(stay_id, values, ~np.isnan(values))


def impute(seq: VitalSequence, stats: PopulationStats) -> VitalSequence:
    """Forward-fill each signal; leading gaps take the population default."""
    out = seq.values.copy()
    T, L = out.shape
    for k in range(L):
        last = stats.default[k]
        for t in range(T):
            if np.isnan(out[t, k]):
                out[t, k] = last
            else:
                last = out[t, k]
    return VitalSequence(seq.stay_id, out, seq.mask.copy())


def standardize(seq: VitalSequence, stats: PopulationStats) -> VitalSequence:
    std = np.maximum(stats.std, STD_FLOOR)
    return VitalSequence(seq.stay_id, (seq.values - stats.mean) / std, seq.mask.copy())


def split_cohort(stay_ids: Sequence[str], patient_ids: Sequence[str], seed: int,
                 fractions=(0.7, 0.15, 0.15)) -> dict[str, str]:
    """Patient-grouped shuffle then contiguous train/val/test assignment.

    Patients are shuffled and walked in order. A patient joins the current
    split while the midpoint of its stays stays inside that split's rounded
    cumulative quota, so each cut lands within half a patient of its target.
    """
    if len(stay_ids) < 3:
        raise ConfigError("need at least 3 stays to split", "n_stays")
    if abs(sum(fractions) - 1.0) > 1e-9 or len(fractions) != 3:
        raise ConfigError(f"split fractions must be three values summing to 1, got {fractions}", "fractions")
    by_patient: dict[str, list[str]] = {}
    for s, p in zip(stay_ids, patient_ids):
        by_patient.setdefault(str(p), []).append(str(s))
    patients = sorted(by_patient)
    order = make_rng(seed).permutation(len(patients))
    n = len(stay_ids)
    bounds = np.round(np.cumsum(fractions) * n).astype(int)
    tags: dict[str, str] = {}
    assigned = 0
    k = 0
    for j in order:
        stays = by_patient[patients[j]]
        while k < 2 and assigned + len(stays) / 2.0 > bounds[k]:
            k += 1
        tag = SPLITS[k]
        for s in stays:
            tags[s] = tag
        assigned += len(stays)
    return tags


def write_matrix(path, array: np.ndarray) -> None:
    """Header (n_stays, T, L) as little-endian uint64, then row-major float64 data."""
    array = np.ascontiguousarray(array, dtype="<f8")
    n, T, L = array.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3Q", n, T, L))
        fh.write(array.tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        n, T, L = struct.unpack("<3Q", fh.read(24))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * T * L:
        raise DataError(f"{path}: expected {n * T * L} values, found {data.size}")
    return data.reshape(n, T, L).astype(np.float64)


def write_index(path, stay_ids: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(stay_ids) + ("\n" if stay_ids else ""))


def read_index(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def read_events(path) -> dict[str, list[VitalEvent]]:
    out: dict[str, list[VitalEvent]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                ev = VitalEvent.from_json(json.loads(line))
                out.setdefault(ev.stay_id, []).append(ev)
    return out
