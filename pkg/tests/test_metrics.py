import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinfusion.errors import MetricError, ProtocolError
from clinfusion.numkit import make_rng
from clinfusion.pipeline.metrics import auprc, auroc, f1
from clinfusion.pipeline.protocol import bootstrap_eval


def pairwise_auroc(s, y):
    pos = [a for a, l in zip(s, y) if l == 1]
    neg = [b for b, l in zip(s, y) if l == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def sweep_auprc(s, y):
    """Every distinct score as a threshold; AP = sum (R_k - R_{k-1}) P_k."""
    n_pos = sum(y)
    ap, prev_r = 0.0, 0.0
    for t in sorted(set(s), reverse=True):
        tp = sum(1 for a, l in zip(s, y) if a >= t and l == 1)
        k = sum(1 for a in s if a >= t)
        r = tp / n_pos
        ap += (r - prev_r) * (tp / k)
        prev_r = r
    return ap


def random_instance(seed):
    rng = make_rng(seed)
    n = int(rng.integers(2, 40))
    y = rng.integers(0, 2, n)
    y[0], y[1] = 1, 0
    # coarse grid so ties are common
    s = rng.integers(0, 6, n) / 5.0 if seed % 2 else rng.random(n)
    return list(s), list(y)


@pytest.mark.parametrize("seed", range(20))
def test_metrics_match_oracles(seed):
    s, y = random_instance(seed)
    assert abs(auroc(s, y) - pairwise_auroc(s, y)) < 1e-12
    assert abs(auprc(s, y) - sweep_auprc(s, y)) < 1e-12


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.3], [1, 0, 1]) == 0.5
    assert auroc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auroc([0.4] * 4, [1, 0, 1, 0]) == 0.5
    with pytest.raises(MetricError):
        auroc([0.1, 0.2], [1, 1])


def test_auprc_examples():
    assert auprc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auprc([0.3, 0.1, 0.7], [1, 1, 1]) == 1.0
    with pytest.raises(MetricError):
        auprc([0.3, 0.1], [0, 0])


def test_auprc_ties_independent_of_input_order():
    s, y = [0.5, 0.5, 0.5, 0.1], [0, 1, 0, 1]
    assert auprc(s, y) == auprc(s[::-1], y[::-1])


def test_f1_examples():
    assert f1([0.9, 0.1], [1, 0]) == 1.0
    assert f1([0.1, 0.2], [1, 0]) == 0.0
    assert f1([0.9, 0.8, 0.1], [1, 0, 1]) == 0.5  # TP=1 FP=1 FN=1
    assert f1([0.5], [1]) == 1.0  # threshold is inclusive


@settings(max_examples=50)
@given(st.lists(st.integers(-500, 500), min_size=4, max_size=30), st.integers(0, 1000))
def test_auroc_invariant_under_monotone_transform(scores, seed):
    y = make_rng(seed).integers(0, 2, len(scores))
    y[0], y[1] = 1, 0
    s = np.array(scores) / 100.0
    assert auroc(np.exp(s) * 3 + 1, y) == pytest.approx(auroc(s, y), abs=1e-12)
    assert auprc(np.exp(s) * 3 + 1, y) == pytest.approx(auprc(s, y), abs=1e-12)


def test_auprc_worst_ranking_can_fall_below_base_rate():
    # positives ranked last: AP = (1/3 + 2/4) / 2 < 0.5
    assert auprc([4, 3, 2, 1], [0, 0, 1, 1]) == pytest.approx(5 / 12)


def test_bootstrap_single_resample_equals_point_metric():
    s = np.array([0.9, 0.2, 0.6, 0.4, 0.8])
    y = np.array([1, 0, 1, 0, 0])
    m = len(y)
    seed = next(k for k in range(10_000)
                if sorted(make_rng(k).integers(0, m, size=m)) == list(range(m)))
    rep = bootstrap_eval(s, y, n=1, seed=seed)
    assert rep.auroc_mean == pytest.approx(auroc(s, y), abs=1e-15)
    assert rep.auprc_mean == pytest.approx(auprc(s, y), abs=1e-15)


def test_bootstrap_deterministic_and_bounded():
    rng = make_rng(0)
    y = rng.integers(0, 2, 1000)
    s = y + rng.normal(0, 1.0, 1000)
    a, b = bootstrap_eval(s, y, 100, seed=3), bootstrap_eval(s, y, 100, seed=3)
    assert a == b
    assert a.auroc_std < 0.05
    assert a.n_resamples == 100


def test_bootstrap_redraws_single_class_resamples():
    y = np.array([1] + [0] * 9)
    s = np.linspace(1, 0, 10)
    rep = bootstrap_eval(s, y, n=20, seed=0)
    assert rep.n_redrawn > 0 and rep.n_resamples == 20
    with pytest.raises(ProtocolError):
        bootstrap_eval([0.1, 0.2], [1, 1])


def test_bootstrap_mean_within_resample_range():
    rng = make_rng(1)
    y = rng.integers(0, 2, 60)
    s = rng.random(60)
    rep = bootstrap_eval(s, y, n=30, seed=2)
    # reproduce the per-resample values with the same generator
    r = make_rng(2)
    vals = []
    while len(vals) < 30:
        idx = r.integers(0, 60, size=60)
        if y[idx].min() != y[idx].max():
            vals.append(auroc(s[idx], y[idx]))
    assert min(vals) <= rep.auroc_mean <= max(vals)
    assert rep.auroc_mean == pytest.approx(np.mean(vals), abs=1e-15)
