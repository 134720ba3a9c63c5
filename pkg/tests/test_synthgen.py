import math
from dataclasses import replace

import numpy as np
import pytest

from clinfusion.corpus import aggregate_daily
from clinfusion.entity import Lexicon, entity_document
from clinfusion.errors import ConfigError
from clinfusion.pipeline.metrics import auroc
from clinfusion.synthgen import CohortConfig, entity_lexicon, generate, gold_tagged_sentences, intercept_for
from clinfusion.vitals import discretize

SMALL = CohortConfig(n_stays=400, seed=11)


@pytest.fixture(scope="module")
def cohort():
    return generate(SMALL)


def test_generate_is_pure_function_of_config(cohort):
    stays, truth = cohort
    again, truth2 = generate(SMALL)
    assert [s.header() for s in stays] == [s.header() for s in again]
    assert stays[7].notes == again[7].notes and stays[7].vitals == again[7].vitals
    assert np.array_equal(truth.logit, truth2.logit)


def test_prevalence_within_three_sigma():
    stays, _ = generate(CohortConfig(n_stays=3000, seed=2))
    y = np.array([s.label for s in stays])
    sigma = math.sqrt(0.2 * 0.8 / len(y))
    assert abs(y.mean() - 0.2) < 3 * sigma


def test_intercept_matches_base_rate():
    b0 = intercept_for(0.2, 1.5, 0.92)
    z = np.random.default_rng(0).standard_normal((2, 400_000))
    p = 1 / (1 + np.exp(-(b0 + 1.5 * z[0] + 0.92 * z[1])))
    assert abs(p.mean() - 0.2) < 0.003


def test_default_bayes_gap_near_five_points():
    stays, truth = generate(CohortConfig(n_stays=4000, seed=5))
    y = np.array([s.label for s in stays])
    gap = auroc(truth.logit, y) - auroc(truth.z_v, y)
    assert 0.03 < gap < 0.08


def test_signal_ablations():
    stays, truth = generate(replace(SMALL, beta_t=0.0, n_stays=2000))
    y = np.array([s.label for s in stays])
    assert abs(auroc(truth.z_t, y) - 0.5) < 0.05
    stays, truth = generate(replace(SMALL, beta_v=0.0, beta_t=2.0, n_stays=2000))
    y = np.array([s.label for s in stays])
    assert abs(auroc(truth.z_v, y) - 0.5) < 0.05


def test_patients_group_stays(cohort):
    stays, _ = cohort
    per_patient = {}
    for s in stays:
        per_patient[s.patient_id] = per_patient.get(s.patient_id, 0) + 1
    assert max(per_patient.values()) <= SMALL.max_stays_per_patient
    assert len(per_patient) < len(stays)


def test_vitals_are_valid_events(cohort):
    stays, _ = cohort
    for s in stays[:20]:
        seq = discretize(s.vitals, s.stay_id)
        assert seq.values.shape == (24, 17)
        assert all(ev.time >= 0 and 0 <= ev.signal < 17 for ev in s.vitals)


def test_leaky_notes_excluded_by_aggregation(cohort):
    stays, _ = cohort
    for s in stays[:30]:
        d0, d1 = aggregate_daily(s.notes, s.stay_id)
        assert "expired" not in d0.tokens + d1.tokens
        assert any(n.category == "discharge" for n in s.notes)


def test_decoys_carry_no_label_signal(cohort):
    """Negated mentions are independent of the label; affirmed risk mentions are not."""
    stays, _ = cohort
    lex = Lexicon.from_pairs(entity_lexicon(SMALL))
    risk = {" ".join(k) for k, t in lex.entries.items()} & {e.lower() for e, _ in entity_lexicon(SMALL)[:12]}
    risk_tokens = {r.replace(" ", "_") for r in risk}
    y, affirmed, all_mentions = [], [], []
    for s in stays:
        docs = aggregate_daily(s.notes, s.stay_id)
        kept = sum(t in risk_tokens for d in docs for t in entity_document(d, lex).tokens)
        every = sum(t in risk_tokens for d in docs for t in entity_document(d, lex, drop_negated=False).tokens)
        y.append(s.label)
        affirmed.append(kept)
        all_mentions.append(every)
    y = np.array(y)
    negated = np.array(all_mentions) - np.array(affirmed)
    assert auroc(affirmed, y) > 0.6
    assert abs(auroc(negated, y) - 0.5) < 0.08


def test_gold_sentences(cohort):
    gold = gold_tagged_sentences(SMALL, n=50)
    assert len(gold) == 50
    assert any(all(t == "O" for t in tags) and not spans for _, tags, spans in gold)
    negated = [(toks, tags) for toks, tags, spans in gold if spans and spans[0].negated]
    assert negated and all(any(t.endswith("-neg") for t in tags) for _, tags in negated)
    toks, tags = next((t, g) for t, g, sp in gold if sp and sp[0].negated and t[0] == "no")
    assert tags[0] == "O" and tags[1].startswith("B-") and tags[1].endswith("-neg")


def test_config_validation():
    with pytest.raises(ConfigError) as err:
        generate(replace(SMALL, base_rate=1.5))
    assert err.value.field == "base_rate"
    with pytest.raises(ConfigError):
        generate(replace(SMALL, beta_t=-1.0))
    with pytest.raises(ConfigError):
        CohortConfig.from_dict({"n_patients": 3})
