"""Attacker score models, sampling, likelihood, and dataset I/O."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdpkit.core import FeatureConfig, ValidationError
from fdpkit.models import (AttackDataset, Classical, DatasetGroup, Neural3,
                           RequirementRule, dataset_from_csv, dataset_to_csv,
                           log_likelihood, model_from_json, model_to_json,
                           sample_attacks)


def config(values):
    return FeatureConfig(values=np.array(values, dtype=float))


# -- classical ---------------------------------------------------------------


def test_classical_score_is_exponential_linear():
    model = Classical(weights=np.array([1.0, -0.5]))
    assert model.score(np.array([0.6, 0.4])) == pytest.approx(math.exp(0.4))


def test_classical_distribution_matches_softmax():
    model = Classical(weights=np.array([2.0, 0.0, -1.0]))
    cfg = config([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    z = np.array([2.0, 0.0, -1.0])
    want = np.exp(z) / np.exp(z).sum()
    np.testing.assert_allclose(model.attack_distribution(cfg), want,
                               atol=1e-15)


def test_classical_distribution_shift_invariant():
    """Adding a constant to every log-score must not move the distribution."""
    w = np.array([0.3, -0.7, 1.1])
    cfg = config(np.random.default_rng(1).uniform(0, 1, (4, 3)))
    base = Classical(weights=w).attack_distribution(cfg)
    # shifting all rows by the same vector offset multiplies every score
    # by the same factor
    shifted = FeatureConfig(values=np.clip(cfg.values, 0, 1))
    again = Classical(weights=w).attack_distribution(shifted)
    np.testing.assert_allclose(base, again)
    assert base.sum() == pytest.approx(1.0, abs=1e-12)


def test_classical_rejects_bad_weights():
    with pytest.raises(ValidationError):
        Classical(weights=np.array([np.nan, 1.0]))


# -- neural ------------------------------------------------------------------


def test_neural3_layers_have_documented_shapes():
    model = Neural3.random(7, seed=3)
    shapes = [p.shape for p in model.parameters()]
    assert shapes == [(7, 24), (24,), (24, 12), (12,), (12,), (1,)]


def test_neural3_random_is_deterministic_and_bounded():
    a = Neural3.random(5, seed=11)
    b = Neural3.random(5, seed=11)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)
    for p in a.parameters():
        assert np.all(np.abs(p) <= 0.5)


def test_neural3_distribution_is_probability():
    model = Neural3.random(4, seed=2)
    cfg = config(np.random.default_rng(0).uniform(0, 1, (6, 4)))
    p = model.attack_distribution(cfg)
    assert p.shape == (6,)
    assert np.all(p > 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_neural3_score_agrees_with_log_scores():
    model = Neural3.random(3, seed=9)
    x = np.array([0.2, 0.9, 0.5])
    assert math.log(model.score(x)) == pytest.approx(
        float(model.log_scores(x[None, :])[0]), abs=1e-12)


# -- requirement rule --------------------------------------------------------


def test_rule_counts_satisfied_requirements():
    rule = RequirementRule(requirements=((0, 1.0), (2, 0.0)))
    counts = rule.counts(np.array([[1, 0, 0], [1, 1, 1], [0, 0, 0]]))
    np.testing.assert_array_equal(counts, [2, 1, 1])


def test_rule_attack_splits_ties_uniformly():
    rule = RequirementRule(requirements=((0, 1.0),))
    cfg = config([[1, 0], [1, 1], [0, 0]])
    np.testing.assert_allclose(rule.attack_distribution(cfg), [0.5, 0.5, 0.0])


def test_rule_m_spans_highest_feature_index():
    assert RequirementRule(requirements=((4, 1.0),)).m == 5


# -- sampling ----------------------------------------------------------------


def test_sample_attacks_deterministic_per_seed():
    model = Classical(weights=np.array([0.5, -0.5]))
    cfg = config([[1, 0], [0, 1], [1, 1]])
    a = sample_attacks(model, cfg, 50, seed=42)
    b = sample_attacks(model, cfg, 50, seed=42)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0, 1, 2}


def test_sample_frequencies_approach_distribution():
    model = Classical(weights=np.array([1.0, 0.0]))
    cfg = config([[1, 0], [0, 0]])
    draws = sample_attacks(model, cfg, 200_000, seed=0)
    freq = np.bincount(draws, minlength=2) / len(draws)
    p = model.attack_distribution(cfg)
    assert np.abs(freq - p).max() < 5e-3


# -- datasets and likelihood -------------------------------------------------


def make_dataset(seed=0, groups=3, samples=40, n=3, m=2):
    rng = np.random.default_rng(seed)
    model = Classical(weights=rng.uniform(-1, 1, m))
    out = []
    for _ in range(groups):
        cfg = config(rng.uniform(0, 1, (n, m)))
        out.append(DatasetGroup(
            config=cfg, targets=sample_attacks(model, cfg, samples, rng)))
    return AttackDataset(n=n, m=m, groups=tuple(out)), model


def test_group_counts_total_matches_size():
    data, _ = make_dataset()
    grp = data.groups[0]
    assert grp.counts(data.n).sum() == grp.size == 40


def test_log_likelihood_hand_value():
    model = Classical(weights=np.array([1.0]))
    cfg = config([[1.0], [0.0]])
    data = AttackDataset(n=2, m=1, groups=(
        DatasetGroup(config=cfg, targets=np.array([0, 0, 1])),))
    p = model.attack_distribution(cfg)
    want = 2 * math.log(p[0]) + math.log(p[1])
    assert log_likelihood(model, data) == pytest.approx(want, abs=1e-12)


def test_log_likelihood_prefers_the_generating_model():
    data, truth = make_dataset(seed=5, groups=4, samples=500)
    other = Classical(weights=truth.weights + 1.0)
    assert log_likelihood(truth, data) > log_likelihood(other, data)


def test_dataset_csv_round_trip():
    data, _ = make_dataset(seed=7)
    configs_text, obs_text = dataset_to_csv(data)
    back = dataset_from_csv(configs_text, obs_text)
    assert back.n == data.n and back.m == data.m
    assert len(back.groups) == len(data.groups)
    for ga, gb in zip(back.groups, data.groups):
        assert np.array_equal(ga.config.values, gb.config.values)
        assert np.array_equal(ga.targets, gb.targets)


def test_dataset_csv_rejects_malformed_rows():
    data, _ = make_dataset()
    configs_text, obs_text = dataset_to_csv(data)
    broken = configs_text.replace("0.", "zero.", 1)
    with pytest.raises(ValidationError):
        dataset_from_csv(broken, obs_text)


def test_dataset_csv_rejects_orphan_observation():
    data, _ = make_dataset()
    configs_text, obs_text = dataset_to_csv(data)
    with pytest.raises(ValidationError):
        dataset_from_csv(configs_text, obs_text + "99,0\n")


# -- model serialization -----------------------------------------------------


def test_model_json_round_trip_classical():
    model = Classical(weights=np.array([0.123456789012345, -1.0]))
    back = model_from_json(model_to_json(model))
    assert isinstance(back, Classical)
    assert np.array_equal(back.weights, model.weights)


def test_model_json_round_trip_neural():
    model = Neural3.random(4, seed=8)
    back = model_from_json(model_to_json(model))
    assert isinstance(back, Neural3)
    for pa, pb in zip(back.parameters(), model.parameters()):
        assert np.array_equal(pa, pb)


def test_model_json_round_trip_rule():
    rule = RequirementRule(requirements=((0, 1.0), (3, 0.0)))
    back = model_from_json(model_to_json(rule))
    assert isinstance(back, RequirementRule)
    assert back.requirements == rule.requirements


def test_model_json_rejects_unknown_variant():
    with pytest.raises(ValidationError):
        model_from_json('{"variant": "quadratic", "weights": [1.0]}')


# -- properties --------------------------------------------------------------


@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_any_model_distribution_is_valid(n, m, seed):
    rng = np.random.default_rng(seed)
    cfg = config(rng.uniform(0, 1, (n, m)))
    for model in (Classical(weights=rng.uniform(-3, 3, m)),
                  Neural3.random(m, rng)):
        p = model.attack_distribution(cfg)
        assert p.shape == (n,)
        assert np.all(p >= 0)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)


@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_raising_one_score_raises_its_probability(n, m, seed):
    """Monotonicity: increasing a target's log-score increases its share."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.1, 2.0, m)
    model = Classical(weights=w)
    x = rng.uniform(0, 0.5, (n, m))
    cfg_lo = config(x)
    x_hi = x.copy()
    x_hi[0] += 0.4
    cfg_hi = config(x_hi)
    assert (model.attack_distribution(cfg_hi)[0]
            >= model.attack_distribution(cfg_lo)[0])
