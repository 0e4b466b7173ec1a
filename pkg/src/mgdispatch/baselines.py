"""Reference policies: myopic, receding-horizon MPC and full-day schedules."""
from dataclasses import dataclass, replace

import numpy as np

from .adp import PiecewiseLinearVfa, Trajectory, simulate_policy
from .audit import audit_decision
from .dispatch import (DispatchError, build_subproblem, decision_from_solution,
                       solve_multi_period, solve_period)
from .lp import INFEASIBLE, OPTIMAL, solve_lp
from .model import initial_state, period_lift, transition

__all__ = ['MpcConfig', 'myopic_decide', 'myopic_policy', 'mpc_decide', 'mpc_policy',
           'schedule_policy', 'full_horizon_milp', 'day_ahead_milp', 'static_hub_variant',
           'static_heat_trace', 'max_jump', 'Schedule', 'DEFAULT_SEGMENTS']

DEFAULT_SEGMENTS = 35


def _zero_slopes(segments):
    return np.zeros(segments)


def myopic_decide(state, params, lift=None, segments=DEFAULT_SEGMENTS):
    """Best decision for the current period alone (zero continuation value).

    The zero value function keeps its segment variables so that the program
    is the one an untrained ADP policy solves.
    """
    return solve_period(state, _zero_slopes(segments), params, lift).decision


def myopic_policy(params, lift=None, segments=DEFAULT_SEGMENTS):
    lift = lift or period_lift(params.arma)

    def decide(state, forecast=None):
        return myopic_decide(state, params, lift, segments)
    decide.name = 'myopic'
    return decide


@dataclass(frozen=True)
class MpcConfig:
    """Receding-horizon settings.

    forecast : {'day-ahead', 'perfect'}
        Exogenous values assumed beyond the current period: the day-ahead
        forecast, or the realized series of the scenario being simulated.
    terminal_vfa : PiecewiseLinearVfa, optional
        Value of the end heat of the last period in the window.
    """
    horizon: int = 8
    forecast: str = 'day-ahead'
    terminal_vfa: PiecewiseLinearVfa = None
    binary_mode: str = 'branch_and_bound'

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError('MPC horizon must be at least 1 period')
        if self.forecast not in ('day-ahead', 'perfect'):
            raise ValueError("MPC forecast must be 'day-ahead' or 'perfect'")


def mpc_decide(state, t, config, forecasts, params, lift=None):
    """First decision of the lookahead program over ``min(H, T - t)`` periods.

    Parameters
    ----------
    forecasts : sequence of ForecastRow
        Exogenous values assumed for periods ``0..T-1``; only the rows after
        `t` are used, since period `t` itself is known from `state`.
    """
    lift = lift or period_lift(params.arma)
    T = params.periods
    if not 0 <= t < T:
        raise ValueError(f'period {t} outside the horizon')
    H = min(config.horizon, T - t)
    last = t + H - 1
    terminal = None
    if config.terminal_vfa is not None:
        terminal = config.terminal_vfa.slopes[last]
    if H == 1:
        slopes = terminal if terminal is not None else _zero_slopes(DEFAULT_SEGMENTS)
        return solve_period(state, slopes, params, lift).decision
    rows = [forecasts[s] for s in range(t + 1, t + H)]
    res = solve_multi_period(state, rows, params, lift, terminal_slopes=terminal,
                             binary_mode=config.binary_mode)
    return res.decisions[0]


def mpc_policy(config, params, lift=None, realized=None):
    """Receding-horizon decision rule.

    `realized` is the scenario the policy will be run on; it is only read
    when ``config.forecast == 'perfect'``.
    """
    lift = lift or period_lift(params.arma)
    if config.forecast == 'perfect' and realized is None:
        raise ValueError('perfect-forecast MPC needs the realized scenario')

    def decide(state, forecast):
        if config.forecast == 'perfect':
            rows = [realized.realized_row(s) for s in range(len(realized))]
        else:
            rows = [forecast.row(s) for s in range(len(forecast))]
        return mpc_decide(state, state.period, config, rows, params, lift)
    decide.name = f'mpc{config.horizon}'
    return decide


def schedule_policy(decisions, name='schedule'):
    """Replay a fixed list of decisions, one per period."""
    def decide(state, forecast=None):
        return decisions[state.period]
    decide.name = name
    return decide


@dataclass
class Schedule:
    """A full-day plan and its replay through the state transition."""
    trajectory: Trajectory
    planned_cost: float
    heat_model: str
    nodes: int = 0

    @property
    def decisions(self):
        return self.trajectory.decisions

    @property
    def total_cost(self):
        return self.trajectory.total_cost

    @property
    def heat_trace(self):
        return self.trajectory.heat_trace


def _full_day(scenario, params, lift, binary_mode, heat_model, method):
    s0 = initial_state(params, scenario.forecast_row(0), scenario.exogenous(0))
    rows = [scenario.realized_row(t) for t in range(1, params.periods)]
    return solve_multi_period(s0, rows, params, lift, binary_mode=binary_mode,
                              heat_model=heat_model, method=method)


def full_horizon_milp(scenario, params, lift=None, binary_mode='branch_and_bound',
                      method='auto'):
    """Perfect-foresight schedule over the whole day.

    The program sees the realized series of `scenario` from the start.  Its
    decisions are replayed through `transition`, which gives the per-period
    costs and the CCGT heat at every ARMA sample (1728 points for a day).
    """
    lift = lift or period_lift(params.arma)
    res = _full_day(scenario, params, lift, binary_mode, 'dynamic', method)
    traj = simulate_policy(schedule_policy(res.decisions, 'milp'), scenario, params, lift)
    return Schedule(trajectory=traj, planned_cost=res.objective, heat_model='dynamic',
                    nodes=res.nodes)


def day_ahead_milp(scenario, params, lift=None, binary_mode='branch_and_bound',
                   method='auto'):
    """Schedule on the day-ahead forecast, then operate it against realizations.

    Each period keeps the planned gas flow and storage action.  The other
    units keep their planned setpoints where the realized state allows,
    with curtailment and the grid absorbing the forecast error.  If that is
    infeasible the period is re-dispatched with only gas and storage fixed,
    and failing that by the myopic rule.
    """
    lift = lift or period_lift(params.arma)
    det = replace(scenario, errors=np.zeros_like(scenario.errors))
    plan = _full_day(det, params, lift, binary_mode, 'dynamic', method).decisions
    fallbacks = []

    def decide(state, forecast=None):
        d, stage = _follow_plan(state, plan[state.period], params, lift)
        if stage:
            fallbacks.append((state.period, stage))
        return d
    decide.name = 'milp-dayahead'
    traj = simulate_policy(decide, scenario, params, lift)
    sched = Schedule(trajectory=traj, planned_cost=float('nan'), heat_model='dynamic')
    sched.fallbacks = fallbacks
    return sched


_PLAN_FIXED = (('fc', 'fc_power'), ('gas', 'gas_flow'), ('gb', 'gb_heat'), ('hp', 'hp_heat'),
               ('pc', 'charge_power'), ('pd', 'discharge_power'))


def _follow_plan(state, planned, params, lift):
    flags = (planned.charge_flag, planned.discharge_flag)
    zero = _zero_slopes(DEFAULT_SEGMENTS)
    for stage, keep in ((0, _PLAN_FIXED), (1, (_PLAN_FIXED[1],) + _PLAN_FIXED[4:])):
        try:
            lp = build_subproblem(state, zero, flags, params, lift)
        except DispatchError:
            continue
        for short, field_name in keep:
            j = lp.var_names.index(f'{short}_t0')
            v = float(np.clip(getattr(planned, field_name), lp.lb[j], lp.ub[j]))
            lp.lb[j] = lp.ub[j] = v
        sol = solve_lp(lp)
        if sol.status == OPTIMAL:
            return decision_from_solution(lp, sol.x, 0, flags), stage
        if sol.status != INFEASIBLE:
            raise DispatchError(f'period {state.period}: plan-following LP {sol.status}',
                                sol.status, state.period)
    return myopic_decide(state, params, lift), 2


def static_hub_variant(scenario, params, lift=None, binary_mode='branch_and_bound',
                       method='auto'):
    """Perfect-foresight schedule with the CCGT as a memoryless heat source.

    Heat equals ``gain * gas`` within each period.  Returns the schedule and
    its own cost, the instantaneous heat trace, and the audit findings of
    replaying the same gas flows through the dynamic model.
    """
    lift = lift or period_lift(params.arma)
    res = _full_day(scenario, params, lift, binary_mode, 'static', method)
    gas = np.array([d.gas_flow for d in res.decisions])
    # dynamic replay of the static plan
    state = initial_state(params, scenario.forecast_row(0), scenario.exogenous(0))
    violations = []
    for t, d in enumerate(res.decisions):
        violations.extend(audit_decision(state, d, params))
        if t + 1 < params.periods:
            state = transition(state, d, scenario.exogenous(t + 1),
                               scenario.forecast_row(t + 1), params, lift)
    return StaticSchedule(decisions=res.decisions, cost=res.objective,
                          heat_trace=static_heat_trace(gas, params.arma),
                          dynamic_violations=violations)


@dataclass
class StaticSchedule:
    decisions: list
    cost: float
    heat_trace: np.ndarray
    dynamic_violations: list


def static_heat_trace(gas, arma):
    """Energy-hub heat at every ARMA sample: ``gain * gas`` held per period."""
    return np.repeat(arma.gain * np.asarray(gas, dtype=float), arma.samples_per_period)


def max_jump(trace):
    """Largest absolute change between consecutive samples."""
    trace = np.asarray(trace, dtype=float)
    return float(np.max(np.abs(np.diff(trace)), initial=0.0))
