from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from mgdispatch import ccgt
from mgdispatch.model import (Decision, ExogenousSample, ForecastRow, MicrogridParams,
                              StorageParams, UnitParams, ccgt_electric_output, hp_power,
                              initial_state, realized_state, stage_cost, transition)

GAIN = 104051 / 6870


def test_electric_map_oracle(params):
    # gas range is the heat range over the gain; the affine map sends it onto [6, 43]
    emap = params.electric_map
    assert emap.gas_min == pytest.approx(15.0 / GAIN, rel=1e-12)
    assert emap.gas_max == pytest.approx(50.0 / GAIN, rel=1e-12)
    assert emap.b0 == pytest.approx(37.0 * GAIN / 35.0, rel=1e-12)
    assert emap.a0 == pytest.approx(-69.0 / 7.0, rel=1e-12)


def test_electric_map_endpoints(params):
    emap = params.electric_map
    assert ccgt_electric_output(emap.gas_min, params) == pytest.approx(6.0)
    assert ccgt_electric_output(emap.gas_max, params) == pytest.approx(43.0)


def test_zero_gas_means_unit_off(params):
    assert ccgt_electric_output(0.0, params) == 0.0


@pytest.mark.parametrize('unit, up', [('fc', 1.75), ('ccgt_electric', 9.5), ('grid', 1.5),
                                      ('gb', 45.0), ('hp', 75.0), ('ccgt_heat', 7.5)])
def test_ramp_per_period(params, unit, up):
    u = getattr(params, unit)
    assert u.ramp_up_per_period(params.dt) == pytest.approx(up)
    assert u.ramp_down_per_period(params.dt) == pytest.approx(up)


def test_unit_validation():
    with pytest.raises(ValueError):
        UnitParams(5.0, 1.0)
    with pytest.raises(ValueError):
        UnitParams(0.0, 1.0, ramp_unit='kW/s')
    with pytest.raises(ValueError):
        UnitParams(0.0, 1.0, ramp_up=0.0)


def test_storage_validation():
    with pytest.raises(ValueError):
        StorageParams(soc_initial=20.0)
    with pytest.raises(ValueError):
        StorageParams(eta_charge=1.5)


def test_params_reject_mismatched_sampling():
    with pytest.raises(ValueError, match='tile'):
        MicrogridParams(dt=0.5)


def test_params_reject_bad_heat_balance():
    with pytest.raises(ValueError):
        MicrogridParams(heat_balance='peak')


def test_decision_rejects_both_flags():
    with pytest.raises(ValueError):
        Decision(charge_flag=1, discharge_flag=1)


def test_stage_cost_by_hand(params, start_state):
    state = replace(start_state, price=80.0)
    gas = 2.0
    d = Decision(fc_power=3.0, gas_flow=gas, grid_power=-1.5, gb_heat=4.0,
                 wind_curtail=0.2, load_curtail=0.1, heat_curtail=0.3, heat_vent=0.05)
    p_ccgt = -69.0 / 7.0 + 37.0 * GAIN / 35.0 * gas
    hourly = (65 * 3.0 + 92 * p_ccgt + 300 * 4.0 + 80.0 * -1.5
              + 200 * 0.2 + 150 * 0.1 + 350 * 0.3 + 1000 * 0.05)
    assert stage_cost(state, d, params) == pytest.approx(0.25 * hourly, rel=1e-12)


def test_hp_power_uses_cop(params):
    assert hp_power(4.5, params) == pytest.approx(1.5)


def test_realized_state_floors_at_zero():
    row = ForecastRow(3, 1.0, 30.0, 50.0, 40.0)
    out = realized_state(row, ExogenousSample(-2.0, 1.0, -60.0, 0.5))
    assert out == (0.0, 31.0, 0.0, 40.5)


def test_initial_state(params, forecast):
    s = initial_state(params, forecast.row(0))
    assert s.period == 0
    assert s.soc == 7.5
    assert s.ccgt_heat(params) == pytest.approx(20.0, rel=1e-12)
    assert s.ccgt_power == pytest.approx(ccgt_electric_output(20.0 / GAIN, params))
    assert s.hp_heat_prev == 5.0 and s.gb_heat_prev == 1.0


def test_transition_storage_and_memory(params, forecast, start_state, lift):
    d = Decision(fc_power=2.5, gas_flow=1.6, charge_power=2.0, charge_flag=1,
                 gb_heat=3.0, hp_heat=2.0, grid_power=1.0)
    nxt = transition(start_state, d, ExogenousSample(), forecast.row(1), params, lift)
    assert nxt.period == 1
    assert nxt.soc == pytest.approx(7.5 + 2.0 * 0.9 * 0.25)
    assert nxt.fc_power_prev == 2.5 and nxt.gb_heat_prev == 3.0
    assert nxt.hp_heat_prev == 2.0 and nxt.grid_power_prev == 1.0
    assert_allclose(nxt.ccgt_aug, ccgt.apply_lift(lift, start_state.ccgt_aug, 1.6))
    assert nxt.demand_q == pytest.approx(forecast.demand_q[1])


def test_transition_discharge_efficiency(params, forecast, start_state):
    d = Decision(discharge_power=1.8, discharge_flag=1, gas_flow=1.5)
    nxt = transition(start_state, d, ExogenousSample(), forecast.row(1), params)
    assert nxt.soc == pytest.approx(7.5 - 1.8 / 0.9 * 0.25)


def test_transition_checks_period_order(params, forecast, start_state):
    with pytest.raises(ValueError):
        transition(start_state, Decision(gas_flow=1.5), ExogenousSample(), forecast.row(2),
                   params)


@given(st.floats(0.9904, 3.3012), st.floats(0.9904, 3.3012))
def test_stage_cost_is_affine_in_gas(params, g1, g2):
    s = initial_state(params, ForecastRow(0, 1.0, 30.0, 60.0, 40.0))
    c1 = stage_cost(s, Decision(gas_flow=g1), params)
    c2 = stage_cost(s, Decision(gas_flow=g2), params)
    cm = stage_cost(s, Decision(gas_flow=0.5 * (g1 + g2)), params)
    assert cm == pytest.approx(0.5 * (c1 + c2), rel=1e-10, abs=1e-9)
