"""Instance generators, the network case study, and the benchmark pipelines.

The case study is checked in exact rational arithmetic end to end. Pipeline
tests pin determinism (same seed, same output, with or without worker
processes) and the soundness of the per-trial near-optimality certificate,
leaving statistical quality to the acceptance suite.
"""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from fdpkit.core import FeatureConfig, ValidationError, check_feasibility
from fdpkit.experiments import (InstanceGenSpec, generate_binary_instance,
                                generate_instance, paired_t_statistic,
                                run_case_study, run_end_to_end,
                                run_learning_curve, run_poisoning_experiment,
                                solution_gap, write_csv, write_manifest)
from fdpkit.experiments.casestudy import (FEATURES, attacker_rule,
                                          approx_weights, build_instance,
                                          exact_losses, optimal_plan,
                                          published_plan, rule_outcome)


# ------------------------------------------------------------- generators


def test_generators_are_deterministic():
    spec = InstanceGenSpec(n=4, m=6, family="classical", seed=42)
    a, b = generate_instance(spec), generate_instance(spec)
    assert np.array_equal(a.actual, b.actual)
    assert np.array_equal(a.costs, b.costs)
    assert a.budget == b.budget
    c, d = generate_binary_instance(3, 5, 7), generate_binary_instance(3, 5, 7)
    assert np.array_equal(c.actual, d.actual)
    assert c.budget == d.budget


def test_generator_rejects_bad_specs():
    with pytest.raises(ValidationError):
        InstanceGenSpec(n=3, m=4, family="classical", seed=0)  # m % 3 != 0
    with pytest.raises(ValidationError):
        InstanceGenSpec(n=3, m=3, family="quantum", seed=0)
    with pytest.raises(ValidationError):
        InstanceGenSpec(n=0, m=3, family="neural", seed=0)


def test_classical_family_layout():
    inst = generate_instance(InstanceGenSpec(n=5, m=9, family="classical",
                                             seed=1))
    md = 6
    assert inst.kinds == ("binary",) * md + ("continuous",) * 3
    assert np.all(inst.radii[:, :md] == 1.0)
    assert np.all(inst.radii[:, md:] <= 0.25)
    assert np.all((inst.actual[:, :md] == 0) | (inst.actual[:, :md] == 1))
    assert np.all(inst.costs[:, :md] >= -3.0) and np.all(
        inst.costs[:, :md] <= 3.0)
    assert np.all(inst.costs[:, md:] >= 0.0)
    assert np.all((inst.losses >= 0.0) & (inst.losses <= 1.0))
    assert inst.budget >= 0.0


def test_neural_family_layout():
    inst = generate_instance(InstanceGenSpec(n=4, m=5, family="neural",
                                             seed=2))
    assert inst.kinds == ("continuous",) * 5
    assert np.all(inst.radii == 1.0)
    assert np.all((inst.costs >= 0.0) & (inst.costs <= 1.0))
    assert 0.0 <= inst.budget <= 0.2 * 4 * 5


def test_binary_family_is_all_free_switches():
    inst = generate_binary_instance(4, 3, 11)
    assert inst.kinds == ("binary",) * 3
    assert np.all(inst.radii == 1.0)
    assert not inst.linear_constraints
    assert inst.budget >= 0.0


# ------------------------------------------------------------- case study


def test_network_instance_shape():
    inst = build_instance()
    assert (inst.n, inst.m) == (10, 6)
    assert inst.budget == 10.0
    assert len(inst.linear_constraints) == 20
    assert np.array_equal(inst.costs[0], [5.0, 1.0, 1.0, 2.0, 2.0, 2.0])
    # the hidden network satisfies its own compatibility rules
    assert check_feasibility(inst, FeatureConfig(values=inst.actual)).feasible
    assert exact_losses() == (Fraction(1, 10), Fraction(1, 10),
                              Fraction(2, 10), Fraction(3, 10),
                              Fraction(3, 10), Fraction(4, 10),
                              Fraction(4, 10), Fraction(4, 10),
                              Fraction(8, 10), Fraction(8, 10))


def test_before_and_after_losses_are_exact_rationals():
    inst = build_instance()
    actual = FeatureConfig(values=inst.actual)

    support, loss = rule_outcome("apt", actual)
    assert support == (5, 6, 7, 8, 9)
    assert loss == Fraction(14, 25)  # 0.56

    support, loss = rule_outcome("apt", published_plan("apt"))
    assert support == (1, 5, 6, 7)
    assert loss == Fraction(13, 40)  # 0.325

    support, loss = rule_outcome("botnet", actual)
    assert support == (0, 1, 3, 4)
    assert loss == Fraction(1, 5)

    support, loss = rule_outcome("botnet", published_plan("botnet"))
    assert support == (0, 1)
    assert loss == Fraction(1, 10)


def test_published_plans_are_affordable_and_legal():
    inst = build_instance()
    apt = check_feasibility(inst, published_plan("apt"))
    assert apt.feasible
    assert apt.cost == 10.0  # spends the whole budget
    bot = check_feasibility(inst, published_plan("botnet"))
    assert bot.feasible
    assert bot.cost == 2.0


def test_optimal_search_never_loses_to_the_published_plan():
    inst = build_instance()
    for profile in ("apt", "botnet"):
        config, support, loss, cost = optimal_plan(profile)
        _, published_loss = rule_outcome(profile, published_plan(profile))
        assert loss <= published_loss
        assert cost <= 10
        assert check_feasibility(inst, config).feasible
        # the reported support and loss describe the returned config
        again_support, again_loss = rule_outcome(profile, config)
        assert (support, loss) == (again_support, again_loss)


def test_classical_approximation_reproduces_the_rule_attack():
    inst = build_instance()
    actual = FeatureConfig(values=inst.actual)
    for profile in ("apt", "botnet"):
        rule = attacker_rule(profile)
        soft = approx_weights(profile, 10.0)
        support = np.flatnonzero(rule.attack_distribution(actual) > 0)
        p = soft.attack_distribution(actual)
        # weight 10 leaves only e^-10 of mass off the argmax set
        assert p[support].sum() > 1.0 - 1e-3
        assert np.allclose(p[support], 1.0 / len(support), atol=1e-3)


def test_case_study_report_end_to_end():
    rep = run_case_study("apt")
    assert rep.before_loss == Fraction(14, 25)
    assert rep.published_loss == Fraction(13, 40)
    assert rep.published_cost == 10.0
    assert rep.best_loss <= rep.published_loss
    assert rep.approx_loss <= rep.before_loss
    assert ("os" in {feat for _, feat, _, _ in rep.published_changes})
    text = rep.to_text()
    assert "attacked" in text and "0.325" in text

    bot = run_case_study("botnet")
    assert bot.before_loss == Fraction(1, 5)
    assert bot.published_loss == Fraction(1, 10)

    with pytest.raises(ValidationError):
        run_case_study("script-kiddie")


# -------------------------------------------------------------- pipelines


def test_learning_curve_is_reproducible_across_workers():
    kwargs = dict(family="classical", n=3, m=3, sample_grid=[30, 120],
                  replications=3, seed=5)
    seq = run_learning_curve(**kwargs)
    par = run_learning_curve(**kwargs, jobs=2)
    assert seq == par
    assert [p.param for p in seq] == [30.0, 120.0]
    assert all(p.n_reps == 3 for p in seq)
    assert all(len(p.values) == 3 for p in seq)
    assert all(0.0 <= v <= 1.0 for p in seq for v in p.values)


def test_learning_curve_neural_smoke():
    points = run_learning_curve("neural3", 2, 3, [10], replications=1, seed=1)
    assert len(points) == 1 and points[0].n_reps == 1
    assert 0.0 <= points[0].mean <= 1.0


def test_learning_curve_validates_inputs():
    with pytest.raises(ValidationError):
        run_learning_curve("tabular", 3, 3, [10])
    with pytest.raises(ValidationError):
        run_learning_curve("classical", 3, 3, [])
    with pytest.raises(ValidationError):
        run_learning_curve("classical", 3, 3, [0, 10])


def test_end_to_end_certificate_is_sound():
    res = run_end_to_end("binary", 3, 3, [500], replications=4, seed=9,
                         planner="milp_bs", reference="brute")
    assert len(res.trials) == 4
    for t in res.trials:
        # the reference is the exact optimum, so no plan can beat it
        assert t["excess"] >= -1e-9
        assert t["eta"] == pytest.approx(2 * 0.1 ** 2 + 1e-4)
        if t.get("certificate_valid"):
            assert t["excess"] <= t["certificate"] + 1e-9
    assert [p.param for p in res.points] == [500.0]
    assert res.points[0].n_reps == 4


def test_end_to_end_is_reproducible_across_workers():
    kwargs = dict(family="binary", n=3, m=3, sample_grid=[100],
                  replications=3, seed=2, planner="greedy",
                  reference="brute")
    seq = run_end_to_end(**kwargs)
    par = run_end_to_end(**kwargs, jobs=3)
    assert seq.points == par.points
    assert seq.trials == par.trials


def test_end_to_end_validates_inputs():
    with pytest.raises(ValidationError):
        run_end_to_end("mystery", 3, 3, [10])
    with pytest.raises(ValidationError):
        run_end_to_end("binary", 3, 3, [10], planner="oracle")
    with pytest.raises(ValidationError):
        run_end_to_end("binary", 3, 3, [10], reference="vibes")


def test_poisoning_rows_flag_the_regime():
    rows = run_poisoning_experiment([0.0, 0.3], eps=0.5, n=3, m=3,
                                    replications=3, seed=4)
    clean, heavy = rows
    assert clean.gamma == 0.0
    # no poison: learning is exact up to sampling noise, well inside 3 eps
    assert clean.in_regime_reps == 3
    assert clean.within_bound_reps == 3
    assert clean.mean_error < 0.5
    # 30% relabeling is far beyond eps * rho / (4 m) for any rho <= 1
    assert heavy.in_regime_reps == 0
    assert heavy.max_error >= clean.max_error
    with pytest.raises(ValidationError):
        run_poisoning_experiment([0.1], eps=1.5, n=3, m=3)


# ------------------------------------------------------- small statistics


def test_solution_gap_switches_to_absolute_near_zero():
    assert solution_gap(2.0, 1.0) == pytest.approx(1.0)
    assert solution_gap(-0.1, -0.2) == pytest.approx(0.5)
    assert solution_gap(0.3, 0.0) == pytest.approx(0.3)


def test_paired_t_statistic_hand_values():
    assert paired_t_statistic([1.0, 2.0, 4.0], [0.0, 1.0, 2.0]) == \
        pytest.approx(4.0)
    assert paired_t_statistic([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert paired_t_statistic([2.0, 3.0], [1.0, 2.0]) == math.inf
    with pytest.raises(ValidationError):
        paired_t_statistic([1.0, 2.0], [1.0])


# ------------------------------------------------------------ file output


def test_result_csv_format(tmp_path):
    points = run_learning_curve("classical", 2, 2, [20, 40],
                                replications=2, seed=0)
    path = tmp_path / "curve.csv"
    write_csv(path, points)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "param,mean,std,n_reps"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert float(first[0]) == 20.0
    assert first[3] == "2"
    # repr round-trips every float exactly
    assert float(first[1]) == points[0].mean


def test_manifest_records_version_and_payload(tmp_path):
    path = tmp_path / "run.manifest.json"
    write_manifest(path, seed=7, command="experiment", grid=[1, 2])
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["seed"] == 7
    assert doc["grid"] == [1, 2]
    assert "fdpkit_version" in doc
    assert path.read_text(encoding="utf-8").endswith("\n")
