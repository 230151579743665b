import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphosmd.mirror import (
    Kind,
    MirrorStepError,
    PotentialSpec,
    SeparablePotential,
    local_norm_sq,
    mirror_step_simplex,
    potential_argmin,
    unconstrained_step,
)

from oracles import (
    inverse_hessian_fd,
    mirror_step_grid_2d,
    mirror_step_oracle,
    unconstrained_oracle,
)

ENT = PotentialSpec(Kind.NEGATIVE_ENTROPY, 1.0)
TS = PotentialSpec(Kind.TSALLIS_HALF, 1.0)


def test_zero_loss_is_fixed_point():
    x = np.full(4, 0.25)
    for spec in (ENT, TS):
        np.testing.assert_allclose(mirror_step_simplex(x, np.zeros(4), spec), x, atol=1e-15)


def test_entropy_example():
    out = mirror_step_simplex(np.array([0.5, 0.5]), np.array([1.0, 0.0]), ENT)
    e = math.exp(-1)
    np.testing.assert_allclose(out, [e / (1 + e), 1 / (1 + e)], atol=1e-12)
    np.testing.assert_allclose(out, [0.26894, 0.73106], atol=1e-5)
    np.testing.assert_allclose(out, mirror_step_grid_2d([0.5, 0.5], [1, 0], [0, 0], [1, 1]), atol=1e-6)


def test_tsallis_example():
    out = mirror_step_simplex(np.array([0.5, 0.5]), np.array([1.0, 0.0]), TS, step=0.1)
    np.testing.assert_allclose(out, [0.430, 0.570], atol=5e-4)
    np.testing.assert_allclose(out, mirror_step_oracle([0.5, 0.5], [0.1, 0.0], [1, 1], [1, 1]), atol=1e-8)
    np.testing.assert_allclose(out, mirror_step_grid_2d([0.5, 0.5], [1, 0], [1, 1], [1, 1], step=0.1), atol=1e-6)


def test_step_scales_rate():
    y = np.array([0.2, 0.3, 0.5])
    loss = np.array([0.4, 2.0, 0.0])
    a = mirror_step_simplex(y, loss, PotentialSpec(Kind.TSALLIS_HALF, 0.3), step=2.0)
    b = mirror_step_simplex(y, loss, PotentialSpec(Kind.TSALLIS_HALF, 0.6))
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_zero_coordinates_stay_zero():
    y = np.array([0.0, 0.4, 0.6])
    out = mirror_step_simplex(y, np.array([5.0, -1.0, 1.0]), TS)
    assert out[0] == 0.0
    assert out.sum() == pytest.approx(1.0)


def test_input_checks():
    with pytest.raises(ValueError):
        mirror_step_simplex(np.ones(2) / 2, np.ones(3), ENT)
    with pytest.raises(ValueError):
        mirror_step_simplex(np.ones(2) / 2, np.array([np.nan, 0.0]), ENT)
    with pytest.raises(ValueError):
        PotentialSpec(Kind.TSALLIS_HALF, 0.0)


@st.composite
def mixed_instances(draw):
    d = draw(st.integers(2, 4))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=d, max_size=d))
    y = np.array(raw) / sum(raw)
    loss = np.array(draw(st.lists(st.floats(-1.0, 3.0), min_size=d, max_size=d)))
    kinds = draw(st.lists(st.sampled_from([0, 1]), min_size=d, max_size=d))
    rates = draw(st.lists(st.floats(0.05, 1.0), min_size=d, max_size=d))
    return y, loss, kinds, rates


@given(mixed_instances())
@settings(max_examples=200, deadline=None)
def test_matches_bisection_oracle(inst):
    y, loss, kinds, rates = inst
    pot = SeparablePotential(np.array(kinds, dtype=np.int64), np.array(rates))
    out = mirror_step_simplex(y, loss, pot)
    ref = mirror_step_oracle(y, loss, kinds, rates)
    np.testing.assert_allclose(out, ref, atol=1e-7)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    # a lower loss never gets less weight than under a uniform start
    if np.all(y == y[0]) and len(set(kinds)) == 1 and len(set(rates)) == 1:
        order = np.argsort(loss)
        assert np.all(np.diff(out[order]) <= 1e-12)


def test_potential_argmin_uniform_for_common_entropy():
    np.testing.assert_allclose(potential_argmin(SeparablePotential.uniform("negative_entropy", 0.3, 5)), 0.2)


@given(st.lists(st.tuples(st.sampled_from([0, 1]), st.floats(1e-4, 2.0)), min_size=2, max_size=6))
@settings(max_examples=100, deadline=None)
def test_potential_argmin_is_stationary(specs):
    kinds = np.array([k for k, _ in specs], dtype=np.int64)
    rates = np.array([r for _, r in specs])
    y = potential_argmin(SeparablePotential(kinds, rates))
    assert y.sum() == pytest.approx(1.0, abs=1e-12)
    assert y.min() >= 0
    # very unequal rates can push an entropy coordinate below the float range
    live = y > 1e-200
    k, r, y = kinds[live], rates[live], y[live]
    grads = np.where(k == 0, (np.log(y) + 1) / r, -0.5 / np.sqrt(y) / r)
    np.testing.assert_allclose(grads, grads[0], rtol=1e-7, atol=1e-7 * abs(grads[0]))


def test_potential_argmin_large_horizon_no_overflow():
    import warnings

    rates = np.array([1e-4, 3e-4, 1e-3])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        y = potential_argmin(SeparablePotential(np.array([1, 1, 0]), rates))
    assert y.sum() == pytest.approx(1.0)


# -- unconstrained step -------------------------------------------------------


def test_unconstrained_zero_loss():
    y = np.array([0.1, 0.9])
    for spec in (ENT, TS):
        np.testing.assert_array_equal(unconstrained_step(y, np.zeros(2), spec), y)


def test_unconstrained_zero_y():
    out = unconstrained_step(np.array([0.0, 1.0]), np.array([-3.0, 0.5]), TS)
    assert out[0] == 0.0


def test_unconstrained_tsallis_boundary_example():
    # rate * L = -1/8 at Y = 1/4 gives denominator 1 - 1/8
    w = unconstrained_step(np.array([0.25]), np.array([-0.125]), TS)[0]
    assert w == pytest.approx(0.25 * (8 / 7) ** 2, abs=1e-12)
    assert w == pytest.approx(0.32653, abs=1e-5)
    assert w == pytest.approx(unconstrained_oracle(1, 1.0, 0.25, -0.125), abs=1e-7)


@given(
    st.sampled_from([0, 1]),
    st.floats(1e-3, 2.0),
    st.floats(1e-3, 1.0),
    st.floats(-0.25, 2.0),
)
@settings(max_examples=200, deadline=None)
def test_unconstrained_matches_numeric_minimum(kind, rate, y, scaled):
    loss = scaled / rate
    w = unconstrained_step(np.array([y]), np.array([loss]), PotentialSpec(Kind(kind), rate))[0]
    ref = unconstrained_oracle(kind, rate, y, loss)
    assert w == pytest.approx(ref, rel=1e-6, abs=1e-10)
    assert w <= 4 * y


def test_unconstrained_tsallis_undefined_past_pole():
    with pytest.raises(MirrorStepError):
        unconstrained_step(np.array([1.0]), np.array([-1.0]), TS)


# -- local norm ---------------------------------------------------------------


def test_local_norm_zero_loss():
    assert local_norm_sq(np.zeros(3), np.full(3, 1 / 3), ENT) == 0.0


def test_local_norm_entropy_example():
    assert local_norm_sq(np.array([2.0, 0.0]), np.array([0.5, 0.5]), ENT) == pytest.approx(2.0)


def test_local_norm_tsallis_example():
    spec = PotentialSpec(Kind.TSALLIS_HALF, 0.1)
    val = local_norm_sq(np.array([4.0]), np.array([0.25]), spec)
    assert val == pytest.approx(0.8, abs=1e-12)
    assert val == pytest.approx(16 * inverse_hessian_fd(1, 0.1, 0.25), rel=1e-6)


def test_local_norm_rejects_loss_on_zero_coordinate():
    with pytest.raises(ValueError):
        local_norm_sq(np.array([1.0]), np.array([0.0]), ENT)
