from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from mgdispatch import ccgt
from mgdispatch.ccgt import ArmaParams, STATE_DIM

# sum(b) / (1 - sum(a)) in exact arithmetic from the four-digit coefficients
GAIN_EXACT = Fraction(104051, 6870)

gas_values = st.floats(min_value=0.9, max_value=3.4, allow_nan=False)
heat_levels = st.floats(min_value=15.0, max_value=50.0, allow_nan=False)


def test_gain_matches_exact_fraction():
    assert_allclose(ArmaParams().gain, float(GAIN_EXACT), rtol=1e-12)


def test_default_model_is_stable():
    rho = ccgt.spectral_radius(ArmaParams().step_matrix())
    assert 0.8 < rho < 1.0


def test_unstable_coefficients_rejected():
    with pytest.raises(ValueError, match='unstable'):
        ArmaParams(a=(1.2, 0.0, 0.0, 0.0))


def test_wrong_coefficient_count_rejected():
    with pytest.raises(ValueError):
        ArmaParams(a=(0.5, 0.1, 0.1))


def test_step_matrix_companion_structure():
    A = ArmaParams().step_matrix()
    assert_array_equal(A[:-1, 1:], np.eye(STATE_DIM - 1))
    assert_array_equal(A[:-1, 0], 0.0)
    assert_array_equal(A[-1], [0, 0, 0, 0.2570, -0.3266, -0.6292, 1.6301])


def test_dead_time_of_three_samples():
    # a gas step reaches the heat output on the fourth sample
    params = ArmaParams()
    x = np.zeros(STATE_DIM)
    out = ccgt.simulate_samples(x, [1.0] * 6, params)
    assert_array_equal(out[:3], 0.0)
    assert out[3] == pytest.approx(params.b[0])


@given(heat_levels)
def test_steady_state_is_fixed_point(q):
    params = ArmaParams()
    x = ccgt.steady_state(q, params)
    assert ccgt.heat_output(x, params) == pytest.approx(q, rel=1e-12)
    x1 = ccgt.step(x, q / params.gain, params)
    assert_allclose(x1, x, rtol=1e-12)


@given(heat_levels, st.floats(min_value=-5.0, max_value=5.0))
def test_shift_output_moves_heat_exactly(q, delta):
    params = ArmaParams()
    x = ccgt.shift_output(ccgt.steady_state(q, params), delta, params)
    assert ccgt.heat_output(x, params) == pytest.approx(q + delta, abs=1e-10)


@given(st.lists(gas_values, min_size=1, max_size=60), heat_levels)
def test_companion_form_matches_difference_equation(gas, q0):
    params = ArmaParams()
    g0 = q0 / params.gain
    x = ccgt.steady_state(q0, params)
    direct = ccgt.simulate_reference([q0] * 4, [g0] * 7, gas, params)
    # the state form consumes g(k-1) on step k
    via_state = ccgt.simulate_samples(x, [g0] + list(gas[:-1]), params)
    assert_allclose(via_state, direct, atol=1e-9)


@given(st.lists(st.floats(-10, 10), min_size=STATE_DIM, max_size=STATE_DIM), gas_values)
def test_period_lift_equals_step_composition(x0, g):
    params = ArmaParams()
    lift = ccgt.build_period_lift(params)
    x = np.array(x0)
    for _ in range(params.samples_per_period):
        x = ccgt.step(x, g, params)
    assert_allclose(ccgt.apply_lift(lift, x0, g), x, atol=1e-10)


def test_period_mean_lift_matches_trace_mean(lift):
    params = ArmaParams()
    x0 = ccgt.steady_state(30.0, params)
    trace, end = ccgt.intra_period_trace(x0, 2.5, params)
    mean = lift.output @ (lift.A_mean @ x0 + lift.B_mean * 2.5)
    assert mean == pytest.approx(trace.mean(), rel=1e-12)
    assert_allclose(end, ccgt.apply_lift(lift, x0, 2.5), atol=1e-12)


def test_heat_per_gas_is_below_gain(lift):
    # one period is shorter than the settling time, so part of the gain is missing
    assert 0.0 < lift.heat_per_gas < ArmaParams().gain


def test_reference_rejects_short_history():
    with pytest.raises(ValueError):
        ccgt.arma_reference([1, 2, 3], [0] * 7)


def test_intra_period_trace_length():
    params = ArmaParams()
    trace, end = ccgt.intra_period_trace(ccgt.steady_state(20.0, params), 1.5, params)
    assert trace.shape == (18,)
    assert trace[-1] == pytest.approx(ccgt.heat_output(end, params))
