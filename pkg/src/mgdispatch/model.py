"""Microgrid domain types, stage cost and one-period state transition."""
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from . import ccgt
from .ccgt import ArmaParams

__all__ = ['UnitParams', 'StorageParams', 'PenaltyParams', 'CcgtElectricMap',
           'MicrogridParams', 'InitialConditions', 'SystemState', 'Decision',
           'ExogenousSample', 'ForecastRow', 'DayAheadForecast',
           'derive_electric_map', 'ccgt_electric_output', 'hp_power',
           'stage_cost', 'realized_state', 'transition', 'initial_state',
           'period_lift']

_MINUTES = {'MW/h': 60.0, 'MW/min': 1.0}


@dataclass(frozen=True)
class UnitParams:
    power_min: float
    power_max: float
    ramp_up: float = float('inf')
    ramp_down: float = float('inf')
    cost_coefficient: float = 0.0       # $/MWh of delivered output
    ramp_unit: str = 'MW/h'

    def __post_init__(self):
        if self.power_min > self.power_max:
            raise ValueError(f'power_min {self.power_min} > power_max {self.power_max}')
        if self.ramp_unit not in _MINUTES:
            raise ValueError(f'unknown ramp unit {self.ramp_unit!r}')
        if not (self.ramp_up > 0 and self.ramp_down > 0):
            raise ValueError('ramp rates must be positive')

    def ramp_up_per_period(self, dt_hours):
        return self.ramp_up * dt_hours * 60.0 / _MINUTES[self.ramp_unit]

    def ramp_down_per_period(self, dt_hours):
        return self.ramp_down * dt_hours * 60.0 / _MINUTES[self.ramp_unit]


@dataclass(frozen=True)
class StorageParams:
    soc_min: float = 1.5          # MWh
    soc_max: float = 15.0         # MWh
    charge_min: float = 0.0       # MW, applies when the charge flag is set
    charge_max: float = 3.0
    discharge_min: float = 0.0
    discharge_max: float = 3.0
    eta_charge: float = 0.9
    eta_discharge: float = 0.9
    soc_initial: float = 7.5

    def __post_init__(self):
        if not 0.0 <= self.soc_min <= self.soc_initial <= self.soc_max:
            raise ValueError('need 0 <= soc_min <= soc_initial <= soc_max')
        for name in ('eta_charge', 'eta_discharge'):
            eta = getattr(self, name)
            if not 0.0 < eta <= 1.0:
                raise ValueError(f'{name} must lie in (0, 1], got {eta}')
        if not (0.0 <= self.charge_min <= self.charge_max
                and 0.0 <= self.discharge_min <= self.discharge_max):
            raise ValueError('storage power limits inconsistent')


@dataclass(frozen=True)
class PenaltyParams:
    wind_curtailment: float = 200.0   # $/MWh
    load_curtailment: float = 150.0
    heat_curtailment: float = 350.0
    heat_vent: float = 1000.0         # surplus CCGT heat released unused; a last resort

    def __post_init__(self):
        if min(self.wind_curtailment, self.load_curtailment, self.heat_curtailment,
               self.heat_vent) < 0:
            raise ValueError('penalties must be nonnegative')


@dataclass(frozen=True)
class CcgtElectricMap:
    """Electric output ``a0 + b0 * gas`` of the CCGT and the gas-flow range."""
    a0: float
    b0: float
    gas_min: float
    gas_max: float

    def __post_init__(self):
        if self.b0 <= 0:
            raise ValueError('b0 must be positive')
        if self.gas_min > self.gas_max:
            raise ValueError('gas_min > gas_max')


def derive_electric_map(arma, heat_min, heat_max, power_min, power_max):
    """Gas bounds from the heat range through the steady-state gain, then
    the affine map sending them onto the electric range."""
    gas_min = heat_min / arma.gain
    gas_max = heat_max / arma.gain
    b0 = (power_max - power_min) / (gas_max - gas_min)
    a0 = power_min - b0 * gas_min
    return CcgtElectricMap(a0=a0, b0=b0, gas_min=gas_min, gas_max=gas_max)


@dataclass(frozen=True)
class InitialConditions:
    """Operating point carried into the first period."""
    fc_power: float = 2.0
    grid_power: float = 0.0
    gb_heat: float = 1.0
    hp_heat: float = 5.0
    ccgt_heat: float = 20.0


@dataclass(frozen=True)
class MicrogridParams:
    fc: UnitParams = UnitParams(0.8, 7.0, 7.0, 7.0, 65.0)
    ccgt_electric: UnitParams = UnitParams(6.0, 43.0, 38.0, 38.0, 92.0)
    grid: UnitParams = UnitParams(-6.0, 6.0, 6.0, 6.0, 0.0)
    gb: UnitParams = UnitParams(1.0, 15.0, 3.0, 3.0, 300.0, 'MW/min')
    hp: UnitParams = UnitParams(0.0, 5.0, 5.0, 5.0, 0.0, 'MW/min')
    ccgt_heat: UnitParams = UnitParams(15.0, 50.0, 0.5, 0.5, 0.0, 'MW/min')
    wind_max: float = 3.6
    storage: StorageParams = StorageParams()
    penalties: PenaltyParams = PenaltyParams()
    arma: ArmaParams = ArmaParams()
    electric_map: Optional[CcgtElectricMap] = None
    hp_cop: float = 3.0
    dt: float = 0.25              # h
    periods: int = 96
    heat_balance: str = 'end'     # 'end' or 'average' CCGT heat in the heat balance
    initial: InitialConditions = InitialConditions()

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError('dt must be positive')
        if self.periods < 1:
            raise ValueError('periods must be >= 1')
        if self.hp_cop <= 0:
            raise ValueError('hp_cop must be positive')
        if self.heat_balance not in ('end', 'average'):
            raise ValueError("heat_balance must be 'end' or 'average'")
        if abs(self.arma.period_seconds - self.dt * 3600.0) > 1e-9:
            raise ValueError('ARMA sampling does not tile the dispatch period: '
                             f'{self.arma.period_seconds} s vs {self.dt * 3600.0} s')
        if self.electric_map is None:
            emap = derive_electric_map(self.arma, self.ccgt_heat.power_min,
                                       self.ccgt_heat.power_max,
                                       self.ccgt_electric.power_min,
                                       self.ccgt_electric.power_max)
            object.__setattr__(self, 'electric_map', emap)
        emap = self.electric_map
        tol = 1e-9
        if (emap.a0 + emap.b0 * emap.gas_min < self.ccgt_electric.power_min - tol
                or emap.a0 + emap.b0 * emap.gas_max > self.ccgt_electric.power_max + tol):
            raise ValueError('CCGT electric map leaves the electric output range')


class ForecastRow(NamedTuple):
    period: int
    wind: float
    demand_e: float
    price: float
    demand_q: float


@dataclass(frozen=True)
class DayAheadForecast:
    wind: np.ndarray
    demand_e: np.ndarray
    price: np.ndarray
    demand_q: np.ndarray

    def __post_init__(self):
        n = len(self.wind)
        for f in fields(self):
            arr = np.array(getattr(self, f.name), dtype=float)
            if arr.shape != (n,):
                raise ValueError('forecast arrays must share one length')
            if np.any(arr < 0):
                raise ValueError(f'negative values in forecast {f.name}')
            arr.setflags(write=False)
            object.__setattr__(self, f.name, arr)

    def __len__(self):
        return len(self.wind)

    def row(self, t):
        return ForecastRow(t, float(self.wind[t]), float(self.demand_e[t]),
                           float(self.price[t]), float(self.demand_q[t]))

    def as_array(self):
        return np.column_stack([self.wind, self.demand_e, self.price, self.demand_q])


class ExogenousSample(NamedTuple):
    wind_error: float = 0.0
    demand_e_error: float = 0.0
    price_error: float = 0.0
    demand_q_error: float = 0.0


@dataclass(frozen=True)
class SystemState:
    period: int
    fc_power_prev: float
    ccgt_power: float
    soc: float
    wind_available: float
    demand_e: float
    price: float
    gb_heat_prev: float
    hp_heat_prev: float
    ccgt_aug: np.ndarray = field(repr=False)
    demand_q: float
    grid_power_prev: float

    def __post_init__(self):
        aug = np.array(self.ccgt_aug, dtype=float)
        if aug.shape != (ccgt.STATE_DIM,):
            raise ValueError('ccgt_aug must have 7 components')
        aug.setflags(write=False)
        object.__setattr__(self, 'ccgt_aug', aug)

    def ccgt_heat(self, params):
        """CCGT heat at the period start (end of the previous period)."""
        return ccgt.heat_output(self.ccgt_aug, params.arma)


@dataclass(frozen=True)
class Decision:
    fc_power: float = 0.0
    gas_flow: float = 0.0
    grid_power: float = 0.0
    charge_power: float = 0.0
    discharge_power: float = 0.0
    charge_flag: int = 0
    discharge_flag: int = 0
    wind_curtail: float = 0.0
    load_curtail: float = 0.0
    gb_heat: float = 0.0
    hp_heat: float = 0.0
    heat_curtail: float = 0.0
    heat_vent: float = 0.0

    def __post_init__(self):
        if self.charge_flag not in (0, 1) or self.discharge_flag not in (0, 1):
            raise ValueError('storage flags must be binary')
        if self.charge_flag + self.discharge_flag > 1:
            raise ValueError('cannot charge and discharge in the same period')

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@lru_cache(maxsize=16)
def period_lift(arma):
    return ccgt.build_period_lift(arma)


def ccgt_electric_output(gas_flow, params):
    """Electric output for a gas flow.  Zero gas means the unit is off."""
    emap = params.electric_map
    if gas_flow == 0.0:
        # an off unit with a positive intercept is held at its minimum output
        return 0.0 if emap.a0 <= 0.0 else params.ccgt_electric.power_min
    return emap.a0 + emap.b0 * gas_flow


def hp_power(hp_heat, params):
    return hp_heat / params.hp_cop


def stage_cost(state, decision, params):
    """Operating cost of one period in $.

    Fuel/operation cost on FC electric, CCGT electric and GB heat output,
    signed grid trade at the period price, and curtailment and heat-vent
    penalties.
    """
    pen = params.penalties
    fuel = (params.fc.cost_coefficient * decision.fc_power
            + params.ccgt_electric.cost_coefficient
            * ccgt_electric_output(decision.gas_flow, params)
            + params.gb.cost_coefficient * decision.gb_heat)
    trade = state.price * decision.grid_power
    curtail = (pen.wind_curtailment * decision.wind_curtail
               + pen.load_curtailment * decision.load_curtail
               + pen.heat_curtailment * decision.heat_curtail
               + pen.heat_vent * decision.heat_vent)
    return params.dt * (fuel + trade + curtail)


def realized_state(forecast_row, exo):
    """Forecast plus error, floored at zero.

    Returns
    -------
    tuple of float
        ``(wind, demand_e, price, demand_q)``
    """
    return (max(forecast_row.wind + exo.wind_error, 0.0),
            max(forecast_row.demand_e + exo.demand_e_error, 0.0),
            max(forecast_row.price + exo.price_error, 0.0),
            max(forecast_row.demand_q + exo.demand_q_error, 0.0))


def transition(state, decision, exo, forecast_next, params, lift=None):
    """State at the next period boundary."""
    if forecast_next.period != state.period + 1:
        raise ValueError(f'forecast row for period {forecast_next.period} does not '
                         f'follow state period {state.period}')
    if forecast_next.period >= params.periods:
        raise ValueError(f'period {forecast_next.period} is beyond the horizon')
    lift = lift or period_lift(params.arma)
    st = params.storage
    soc = state.soc + (decision.charge_power * st.eta_charge
                       - decision.discharge_power / st.eta_discharge) * params.dt
    wind, demand_e, price, demand_q = realized_state(forecast_next, exo)
    return SystemState(
        period=state.period + 1,
        fc_power_prev=decision.fc_power,
        ccgt_power=ccgt_electric_output(decision.gas_flow, params),
        soc=soc,
        wind_available=wind,
        demand_e=demand_e,
        price=price,
        gb_heat_prev=decision.gb_heat,
        hp_heat_prev=decision.hp_heat,
        ccgt_aug=ccgt.apply_lift(lift, state.ccgt_aug, decision.gas_flow),
        demand_q=demand_q,
        grid_power_prev=decision.grid_power,
    )


def initial_state(params, first_row, exo=None):
    """State at the first period from the configured initial conditions."""
    exo = exo or ExogenousSample()
    wind, demand_e, price, demand_q = realized_state(first_row, exo)
    init = params.initial
    gas = init.ccgt_heat / params.arma.gain
    return SystemState(
        period=first_row.period,
        fc_power_prev=init.fc_power,
        ccgt_power=ccgt_electric_output(gas, params),
        soc=params.storage.soc_initial,
        wind_available=wind,
        demand_e=demand_e,
        price=price,
        gb_heat_prev=init.gb_heat,
        hp_heat_prev=init.hp_heat,
        ccgt_aug=ccgt.steady_state(init.ccgt_heat, params.arma),
        demand_q=demand_q,
        grid_power_prev=init.grid_power,
    )


def with_exogenous(state, wind, demand_e, price, demand_q):
    return replace(state, wind_available=wind, demand_e=demand_e, price=price,
                   demand_q=demand_q)
