"""Instance model, feasibility checking, cost, and the loss functional."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdpkit.core import (DimensionError, FdpInstance, FeatureConfig,
                         FeatureKind, LinearConstraint, ValidationError,
                         check_feasibility, config_from_json, config_to_json,
                         deception_cost, expected_loss, feasible_interval,
                         instance_from_json, instance_to_json)
from fdpkit.models import Classical


def mixed_instance():
    """Two targets, one binary and one continuous feature."""
    return FdpInstance(
        n=2, m=2,
        kinds=(FeatureKind.BINARY, FeatureKind.CONTINUOUS),
        actual=np.array([[1.0, 0.5], [0.0, 0.2]]),
        losses=np.array([0.3, -0.1]),
        radii=np.array([[1.0, 0.25], [0.0, 0.1]]),
        costs=np.array([[2.0, 1.0], [3.0, 4.0]]),
        budget=2.5,
        linear_constraints=(
            LinearConstraint(target=0, terms=((0, 1.0),), relation="leq",
                             rhs=1.0),
        ),
    )


# -- construction and validation --------------------------------------------


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionError):
        FdpInstance(n=2, m=2, kinds=("binary", "binary"),
                    actual=np.zeros((2, 3)), losses=np.zeros(2),
                    radii=np.zeros((2, 2)), costs=np.zeros((2, 2)),
                    budget=1.0)


def test_binary_actual_must_be_zero_or_one():
    with pytest.raises(ValidationError):
        FdpInstance(n=1, m=1, kinds=("binary",),
                    actual=np.array([[0.5]]), losses=np.array([0.1]),
                    radii=np.array([[1.0]]), costs=np.array([[1.0]]),
                    budget=1.0)


def test_losses_outside_unit_band_rejected():
    with pytest.raises(ValidationError):
        FdpInstance(n=1, m=1, kinds=("binary",),
                    actual=np.array([[1.0]]), losses=np.array([1.5]),
                    radii=np.array([[1.0]]), costs=np.array([[1.0]]),
                    budget=1.0)


def test_actual_must_satisfy_constraints():
    # actual has both features on, but the constraint allows at most one
    with pytest.raises(ValidationError):
        FdpInstance(
            n=1, m=2, kinds=("binary", "binary"),
            actual=np.array([[1.0, 1.0]]), losses=np.array([0.2]),
            radii=np.ones((1, 2)), costs=np.ones((1, 2)), budget=1.0,
            linear_constraints=(
                LinearConstraint(target=0, terms=((0, 1.0), (1, 1.0)),
                                 relation="leq", rhs=1.0),
            ),
        )


def test_constraint_rejects_duplicate_feature():
    with pytest.raises(ValidationError):
        LinearConstraint(target=0, terms=((0, 1.0), (0, 2.0)),
                         relation="leq", rhs=1.0)


def test_constraint_rejects_unknown_relation():
    with pytest.raises(ValidationError):
        LinearConstraint(target=0, terms=((0, 1.0),), relation="ge", rhs=0.0)


def test_arrays_are_frozen():
    inst = mixed_instance()
    with pytest.raises(ValueError):
        inst.actual[0, 0] = 0.0


# -- feasibility -------------------------------------------------------------


def test_feasible_interval_clips_to_unit_box():
    inst = mixed_instance()
    lo, hi = feasible_interval(inst, 0, 1)
    assert (lo, hi) == (0.25, 0.75)
    lo, hi = feasible_interval(inst, 1, 1)
    assert lo == pytest.approx(0.1)
    assert hi == pytest.approx(0.3)


def test_feasible_interval_rejects_binary_feature():
    with pytest.raises(ValidationError):
        feasible_interval(mixed_instance(), 0, 0)


def test_actual_config_is_feasible_with_zero_cost():
    inst = mixed_instance()
    report = check_feasibility(inst, inst.actual_config())
    assert report.feasible
    assert report.cost == 0.0


def test_fixed_binary_entry_cannot_flip():
    inst = mixed_instance()
    x = inst.actual.copy()
    x[1, 0] = 1.0  # radii marker for (1, 0) is 0.0: fixed
    report = check_feasibility(inst, FeatureConfig(values=x))
    assert (1, 0, 1.0) in report.entry_violations


def test_continuous_entry_outside_radius_flagged():
    inst = mixed_instance()
    x = inst.actual.copy()
    x[0, 1] = 0.9  # interval is [0.25, 0.75]
    report = check_feasibility(inst, FeatureConfig(values=x))
    assert report.entry_violations == ((0, 1, 0.9),)


def test_budget_violation_reported_not_raised():
    inst = mixed_instance()
    x = inst.actual.copy()
    x[0, 0] = 0.0  # flip costs 2.0; then move the continuous entry
    x[0, 1] = 0.75  # + 0.25 -> total 2.25 <= 2.5
    ok = check_feasibility(inst, FeatureConfig(values=x))
    assert ok.within_budget and ok.feasible
    x[1, 1] = 0.3  # + 4 * 0.1 -> total 2.65 > 2.5
    over = check_feasibility(inst, FeatureConfig(values=x))
    assert not over.within_budget and not over.feasible
    assert over.cost == pytest.approx(2.65)


def test_constraint_violation_indexed():
    inst = FdpInstance(
        n=1, m=2, kinds=("binary", "binary"),
        actual=np.array([[0.0, 1.0]]), losses=np.array([0.2]),
        radii=np.ones((1, 2)), costs=np.ones((1, 2)), budget=10.0,
        linear_constraints=(
            LinearConstraint(target=0, terms=((0, 1.0), (1, 1.0)),
                             relation="leq", rhs=1.0),
        ),
    )
    both_on = FeatureConfig(values=np.array([[1.0, 1.0]]))
    assert check_feasibility(inst, both_on).constraint_violations == (0,)


# -- cost and loss -----------------------------------------------------------


def test_deception_cost_hand_value():
    inst = mixed_instance()
    x = np.array([[0.0, 0.6], [0.0, 0.15]])
    # 2*1 + 1*0.1 + 3*0 + 4*0.05
    assert deception_cost(inst, FeatureConfig(values=x)) == pytest.approx(2.3)


def test_expected_loss_hand_value():
    inst = mixed_instance()
    model = Classical(weights=np.array([1.0, -2.0]))
    x = inst.actual
    f = np.exp(x @ model.weights)
    want = float(f @ inst.losses / f.sum())
    got = expected_loss(inst, model, inst.actual_config())
    assert got == pytest.approx(want, abs=1e-12)


def test_expected_loss_bounded_by_loss_range():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n, m = rng.integers(1, 6), rng.integers(1, 5)
        losses = rng.uniform(-1, 1, n)
        inst = FdpInstance(
            n=n, m=m, kinds=("continuous",) * m,
            actual=rng.uniform(0, 1, (n, m)), losses=losses,
            radii=np.ones((n, m)), costs=rng.uniform(0, 1, (n, m)),
            budget=math.inf)
        model = Classical(weights=rng.uniform(-2, 2, m))
        u = expected_loss(inst, model, inst.actual_config())
        assert losses.min() - 1e-12 <= u <= losses.max() + 1e-12


# -- serialization -----------------------------------------------------------


def test_instance_json_round_trip():
    inst = mixed_instance()
    back = instance_from_json(instance_to_json(inst))
    assert back.n == inst.n and back.m == inst.m
    assert back.kinds == inst.kinds
    assert np.array_equal(back.actual, inst.actual)
    assert np.array_equal(back.losses, inst.losses)
    assert np.array_equal(back.radii, inst.radii)
    assert np.array_equal(back.costs, inst.costs)
    assert back.budget == inst.budget
    assert back.linear_constraints == inst.linear_constraints


def test_infinite_budget_survives_json():
    inst = FdpInstance(
        n=1, m=1, kinds=("binary",), actual=np.array([[0.0]]),
        losses=np.array([0.5]), radii=np.array([[1.0]]),
        costs=np.array([[1.0]]), budget=math.inf)
    assert instance_from_json(instance_to_json(inst)).budget == math.inf


def test_config_json_round_trip_is_exact():
    values = np.array([[0.1234567890123456, 1.0], [0.0, 0.3333333333333333]])
    back = config_from_json(config_to_json(FeatureConfig(values=values)))
    assert np.array_equal(back.values, values)


def test_instance_json_rejects_tampered_payload():
    text = instance_to_json(mixed_instance())
    with pytest.raises(ValidationError):
        instance_from_json(text.replace('"budget"', '"budgets"'))


# -- properties --------------------------------------------------------------


@st.composite
def small_instances(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    kinds = tuple(draw(st.sampled_from(FeatureKind.ALL)) for _ in range(m))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    actual = rng.uniform(0, 1, (n, m))
    radii = rng.uniform(0, 1, (n, m))
    for k, kind in enumerate(kinds):
        if kind == FeatureKind.BINARY:
            actual[:, k] = rng.integers(0, 2, n)
            radii[:, k] = rng.integers(0, 2, n)
    return FdpInstance(
        n=n, m=m, kinds=kinds, actual=actual, losses=rng.uniform(-1, 1, n),
        radii=radii, costs=rng.uniform(0, 3, (n, m)),
        budget=float(rng.uniform(0, 5)))


@given(small_instances())
@settings(max_examples=60, deadline=None)
def test_actual_is_always_feasible(inst):
    report = check_feasibility(inst, inst.actual_config())
    assert report.feasible and report.cost == 0.0


@given(small_instances(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_cost_is_symmetric_around_actual(inst, seed):
    """Moving an entry by +d or -d from the actual value costs the same."""
    rng = np.random.default_rng(seed)
    i = int(rng.integers(inst.n))
    cont = [k for k in range(inst.m) if not inst.is_binary(k)]
    if not cont:
        return
    k = int(rng.choice(cont))
    d = float(rng.uniform(0, min(inst.actual[i, k], 1 - inst.actual[i, k])))
    up, down = inst.actual.copy(), inst.actual.copy()
    up[i, k] += d
    down[i, k] -= d
    cost_up = deception_cost(inst, FeatureConfig(values=up))
    cost_down = deception_cost(inst, FeatureConfig(values=down))
    assert cost_up == pytest.approx(cost_down, abs=1e-12)


@given(small_instances())
@settings(max_examples=40, deadline=None)
def test_instance_json_round_trip_property(inst):
    back = instance_from_json(instance_to_json(inst))
    assert np.array_equal(back.actual, inst.actual)
    assert np.array_equal(back.costs, inst.costs)
    assert back.kinds == inst.kinds
