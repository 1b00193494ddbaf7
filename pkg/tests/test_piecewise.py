"""Piecewise-linear upper approximation of exp on [-2W, 0]."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdpkit.core import ValidationError
from fdpkit.planning import PiecewiseExpApprox


def test_segment_count():
    pw = PiecewiseExpApprox.from_weights(np.array([1.0, -0.5]), eps=0.1)
    assert pw.W == 1.5
    assert pw.segments == math.ceil(2 * 1.5 / 0.1)


def test_zero_weights_collapse_to_constant_one():
    pw = PiecewiseExpApprox.from_weights(np.zeros(3), eps=0.1)
    assert pw.segments == 0
    np.testing.assert_array_equal(pw.evaluate([0.0]), [1.0])


def test_rejects_eps_outside_unit_interval():
    for eps in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValidationError):
            PiecewiseExpApprox.from_weights(np.array([1.0]), eps=eps)


def test_chords_touch_exp_at_breakpoints():
    pw = PiecewiseExpApprox.from_weights(np.array([0.7, 0.7]), eps=0.25)
    got = pw.evaluate(pw.breakpoints)
    np.testing.assert_allclose(got, np.exp(pw.breakpoints), atol=1e-12)


def test_rejects_points_outside_domain():
    pw = PiecewiseExpApprox.from_weights(np.array([0.5]), eps=0.5)
    with pytest.raises(ValidationError):
        pw.evaluate([0.5])
    with pytest.raises(ValidationError):
        pw.evaluate([-2.1])


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5),
       st.sampled_from([0.5, 0.1, 0.03]),
       st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_sandwich_bound(weights, eps, seed):
    """1 <= fhat(z) / exp(z) <= 1 + eps^2 / 2 across the whole domain."""
    w = np.array(weights)
    pw = PiecewiseExpApprox.from_weights(w, eps=eps)
    if pw.W == 0.0:
        return
    rng = np.random.default_rng(seed)
    z = rng.uniform(-2 * pw.W, 0.0, 200)
    ratio = pw.evaluate(z) / np.exp(z)
    assert ratio.min() >= 1.0 - 1e-10
    assert ratio.max() <= 1.0 + eps**2 / 2 + 1e-10


def test_fill_is_ordered_and_consistent():
    pw = PiecewiseExpApprox.from_weights(np.array([1.2]), eps=0.3)
    for z in (-0.05, -0.31, -1.0, -2.39, 0.0):
        fills = pw.fill(z)
        assert fills.shape == (pw.segments,)
        assert np.all(fills >= 0) and np.all(fills <= pw.caps + 1e-15)
        assert fills.sum() == pytest.approx(-z, abs=1e-12)
        # a segment receives mass only after every earlier one is full
        started = fills > 0
        if started.any():
            last = np.max(np.nonzero(started))
            assert np.all(fills[:last] == pw.caps[:last])
        assert pw.value_from_fill(fills) == pytest.approx(
            float(pw.evaluate([z])[0]), abs=1e-12)


def test_slopes_strictly_decreasing():
    pw = PiecewiseExpApprox.from_weights(np.array([2.0, 1.0]), eps=0.2)
    assert np.all(np.diff(pw.slopes) < 0)
    assert np.all(pw.slopes > 0)
