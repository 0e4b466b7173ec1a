"""Independent feasibility check of a dispatch decision.

Nothing here reuses the LP builder: balances, bounds and ramps are
re-derived from the parameters, and the CCGT heat is obtained by stepping
the ARMA model sample by sample rather than through the period lift.
"""
from typing import NamedTuple

import numpy as np

from . import ccgt
from .model import ccgt_electric_output, hp_power

__all__ = ['Violation', 'audit_decision', 'audit_trajectory']


class Violation(NamedTuple):
    period: int
    constraint: str
    amount: float


def _heat_samples(state, gas, params):
    x = np.asarray(state.ccgt_aug, dtype=float)
    out = []
    for _ in range(params.arma.samples_per_period):
        x = ccgt.step(x, gas, params.arma)
        out.append(ccgt.heat_output(x, params.arma))
    return np.array(out)


def audit_decision(state, decision, params, tol=1e-7):
    """Return the list of constraints the decision violates by more than `tol`."""
    out = []
    t = state.period

    def check(name, excess):
        if excess > tol:
            out.append(Violation(t, name, float(excess)))

    def within(name, value, lo, hi):
        check(f'{name}_min', lo - value)
        check(f'{name}_max', value - hi)

    dt = params.dt
    d = decision
    st = params.storage
    emap = params.electric_map
    p_ccgt = ccgt_electric_output(d.gas_flow, params)
    heat = _heat_samples(state, d.gas_flow, params)
    q_end = heat[-1]
    q_bal = q_end if params.heat_balance == 'end' else heat.mean()
    q_prev = ccgt.heat_output(state.ccgt_aug, params.arma)

    supply = (d.fc_power + p_ccgt + d.grid_power
              + (d.discharge_power * d.discharge_flag - d.charge_power * d.charge_flag)
              + (state.wind_available - d.wind_curtail) - hp_power(d.hp_heat, params)
              + d.load_curtail)
    check('power_balance', abs(supply - state.demand_e))
    check('heat_balance', abs(d.gb_heat + q_bal + d.hp_heat + d.heat_curtail - d.heat_vent
                              - state.demand_q))

    within('fc', d.fc_power, params.fc.power_min, params.fc.power_max)
    within('ccgt_power', p_ccgt, params.ccgt_electric.power_min, params.ccgt_electric.power_max)
    within('gas', d.gas_flow, emap.gas_min, emap.gas_max)
    within('grid', d.grid_power, params.grid.power_min, params.grid.power_max)
    within('gb', d.gb_heat, params.gb.power_min, params.gb.power_max)
    within('hp', d.hp_heat, params.hp.power_min, params.hp.power_max)
    within('ccgt_heat', q_end, params.ccgt_heat.power_min, params.ccgt_heat.power_max)

    for name, unit, now, prev in (
            ('fc', params.fc, d.fc_power, state.fc_power_prev),
            ('ccgt_power', params.ccgt_electric, p_ccgt, state.ccgt_power),
            ('grid', params.grid, d.grid_power, state.grid_power_prev),
            ('gb', params.gb, d.gb_heat, state.gb_heat_prev),
            ('hp', params.hp, d.hp_heat, state.hp_heat_prev),
            ('ccgt_heat', params.ccgt_heat, q_end, q_prev)):
        check(f'{name}_ramp_up', (now - prev) - unit.ramp_up_per_period(dt))
        check(f'{name}_ramp_down', (prev - now) - unit.ramp_down_per_period(dt))

    if d.charge_flag not in (0, 1) or d.discharge_flag not in (0, 1):
        out.append(Violation(t, 'flags_binary', 1.0))
    check('flags_exclusive', d.charge_flag + d.discharge_flag - 1)
    within('charge', d.charge_power, d.charge_flag * st.charge_min, d.charge_flag * st.charge_max)
    within('discharge', d.discharge_power, d.discharge_flag * st.discharge_min,
           d.discharge_flag * st.discharge_max)
    soc_next = state.soc + (d.charge_power * st.eta_charge
                            - d.discharge_power / st.eta_discharge) * dt
    within('soc', soc_next, st.soc_min, st.soc_max)

    within('wind_curtail', d.wind_curtail, 0.0, state.wind_available)
    within('load_curtail', d.load_curtail, 0.0, state.demand_e)
    within('heat_curtail', d.heat_curtail, 0.0, state.demand_q)
    within('heat_vent', d.heat_vent, 0.0, q_bal)
    return out


def audit_trajectory(states, decisions, params, tol=1e-7):
    out = []
    for s, d in zip(states, decisions):
        out.extend(audit_decision(s, d, params, tol))
    return out
