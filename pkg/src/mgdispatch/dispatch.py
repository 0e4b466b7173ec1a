"""Dispatch linear programs over one or more periods.

A single builder writes the horizon program used everywhere: the one-period
subproblem with value-function segments (ADP and myopic decisions), the
receding-horizon lookahead, and the full-day schedule.  Storage flags are
either fixed (the subproblem enumerates the three admissible pairs) or
continuous in [0, 1] and resolved by depth-first branch and bound.
"""
from dataclasses import dataclass, field

import numpy as np

from . import ccgt
from .lp import LpBuilder, solve_lp, OPTIMAL, INFEASIBLE
from .model import Decision, period_lift

__all__ = ['SubproblemResult', 'HorizonResult', 'DispatchError',
           'FLAG_PAIRS', 'build_horizon_lp', 'build_subproblem', 'solve_period',
           'solve_multi_period', 'decision_from_solution', 'continuous_fields']

FLAG_PAIRS = ((0, 0), (1, 0), (0, 1))

# decision fields that are LP variables, in column order
continuous_fields = ('fc_power', 'gas_flow', 'grid_power', 'charge_power',
                     'discharge_power', 'wind_curtail', 'load_curtail', 'gb_heat',
                     'hp_heat', 'heat_curtail', 'heat_vent')
_SHORT = dict(zip(continuous_fields,
                  ('fc', 'gas', 'grid', 'pc', 'pd', 'wcur', 'lcur', 'gb', 'hp', 'qcur',
                   'qvent')))

_COEF_CUTOFF = 1e-13
_ACTIVE = 1e-9


class DispatchError(RuntimeError):
    """A dispatch program could not be solved."""

    def __init__(self, message, status=None, period=None):
        super().__init__(message)
        self.status = status
        self.period = period


@dataclass
class SubproblemResult:
    decision: Decision
    objective: float
    post_decision_heat: float
    segments: np.ndarray
    flags: tuple = (0, 0)


@dataclass
class HorizonResult:
    decisions: list
    objective: float
    post_decision_heats: np.ndarray
    status: str = OPTIMAL
    nodes: int = 0
    lp_solves: int = 0
    x: np.ndarray = field(default=None, repr=False)


def _exogenous(state, rows, k):
    if k == 0:
        return state.wind_available, state.demand_e, state.price, state.demand_q
    row = rows[k - 1]
    return row.wind, row.demand_e, row.price, row.demand_q


def _heat_chain(state, params, lift, horizon, static):
    """Affine end-of-period (and mean) heat of each period in the gas values.

    Returns ``(end_const, end_coef, mean_const, mean_coef)`` where
    ``end_coef[k, s]`` multiplies the gas of period ``s``.
    """
    H = horizon
    c = lift.output
    if static:
        gain = params.arma.gain
        coef = np.diag(np.full(H, gain))
        return np.zeros(H), coef, np.zeros(H), coef.copy()
    Ad, Bd = lift.A_delta, lift.B_delta
    # start-of-period state of period k: const_state[k] + sum_s state_coef[k][s] g_s
    const_state = [np.asarray(state.ccgt_aug, dtype=float)]
    for _ in range(H):
        const_state.append(Ad @ const_state[-1])
    # response at lag j (j periods after the gas period ends) of a unit gas input
    resp = [Bd]
    for _ in range(H):
        resp.append(Ad @ resp[-1])
    end_const = np.array([c @ const_state[k + 1] for k in range(H)])
    mean_const = np.array([c @ (lift.A_mean @ const_state[k]) for k in range(H)])
    end_coef = np.zeros((H, H))
    mean_coef = np.zeros((H, H))
    c_mean = c @ lift.A_mean
    for k in range(H):
        for s in range(k + 1):
            end_coef[k, s] = c @ resp[k - s]
        mean_coef[k, k] = c @ lift.B_mean
        for s in range(k):
            mean_coef[k, s] = c_mean @ resp[k - 1 - s]
    end_coef[np.abs(end_coef) < _COEF_CUTOFF] = 0.0
    mean_coef[np.abs(mean_coef) < _COEF_CUTOFF] = 0.0
    return end_const, end_coef, mean_const, mean_coef


def build_horizon_lp(state, rows, params, lift=None, vfa_slopes=None, flags='relaxed',
                     heat_model='dynamic'):
    """Build the dispatch program over ``1 + len(rows)`` periods.

    Parameters
    ----------
    state : SystemState
        State at the first period; supplies its realized exogenous values.
    rows : sequence of ForecastRow
        Exogenous values assumed for the following periods.
    vfa_slopes : dict {k: array}, optional
        Value-function slopes applied to the end-of-period CCGT heat of
        period ``k``; must be nondecreasing.
    flags : 'relaxed' or tuple
        'relaxed' adds charge/discharge flag variables in [0, 1]; a pair
        ``(u_c, u_d)`` fixes them for a single-period program.
    heat_model : {'dynamic', 'static'}
        'static' replaces the CCGT dynamics by the instantaneous gain.
    """
    lift = lift or period_lift(params.arma)
    H = 1 + len(rows)
    vfa_slopes = vfa_slopes or {}
    if flags != 'relaxed':
        if H != 1:
            raise ValueError('fixed flags are only supported for one period')
        if tuple(flags) not in FLAG_PAIRS:
            raise ValueError(f'flag pair {flags} violates u_c + u_d <= 1')
    dt = params.dt
    st = params.storage
    emap = params.electric_map
    pen = params.penalties
    qh = params.ccgt_heat
    bld = LpBuilder()
    static = heat_model == 'static'
    end_const, end_coef, mean_const, mean_coef = _heat_chain(state, params, lift, H, static)

    prev_heat = ccgt.heat_output(state.ccgt_aug, params.arma)
    gas_lo = max(emap.gas_min, (params.ccgt_electric.power_min - emap.a0) / emap.b0)
    gas_hi = min(emap.gas_max, (params.ccgt_electric.power_max - emap.a0) / emap.b0)

    for k in range(H):
        wind, dem_e, price, dem_q = _exogenous(state, rows, k)
        v = lambda name: f'{name}_t{k}'
        bld.add_var(v('fc'), params.fc.power_min, params.fc.power_max,
                    dt * params.fc.cost_coefficient)
        bld.add_var(v('gas'), gas_lo, gas_hi,
                    dt * params.ccgt_electric.cost_coefficient * emap.b0)
        bld.offset += dt * params.ccgt_electric.cost_coefficient * emap.a0
        bld.add_var(v('grid'), params.grid.power_min, params.grid.power_max, dt * price)
        bld.add_var(v('pc'), 0.0, st.charge_max)
        bld.add_var(v('pd'), 0.0, st.discharge_max)
        bld.add_var(v('wcur'), 0.0, wind, dt * pen.wind_curtailment)
        bld.add_var(v('lcur'), 0.0, dem_e, dt * pen.load_curtailment)
        bld.add_var(v('gb'), params.gb.power_min, params.gb.power_max,
                    dt * params.gb.cost_coefficient)
        bld.add_var(v('hp'), params.hp.power_min, params.hp.power_max)
        bld.add_var(v('qcur'), 0.0, dem_q, dt * pen.heat_curtailment)
        bld.add_var(v('q'), qh.power_min, qh.power_max)
        bld.add_var(v('qvent'), 0.0, qh.power_max, dt * pen.heat_vent)
        bld.add_var(v('soc'), st.soc_min, st.soc_max)

        if flags == 'relaxed':
            bld.add_var(v('uc'), 0.0, 1.0)
            bld.add_var(v('ud'), 0.0, 1.0)
            bld.add_row(v('charge_gate_hi'), {v('pc'): 1.0, v('uc'): -st.charge_max}, '<', 0.0)
            bld.add_row(v('discharge_gate_hi'), {v('pd'): 1.0, v('ud'): -st.discharge_max},
                        '<', 0.0)
            if st.charge_min > 0:
                bld.add_row(v('charge_gate_lo'), {v('pc'): 1.0, v('uc'): -st.charge_min},
                            '>', 0.0)
            if st.discharge_min > 0:
                bld.add_row(v('discharge_gate_lo'),
                            {v('pd'): 1.0, v('ud'): -st.discharge_min}, '>', 0.0)
            bld.add_row(v('flag_exclusive'), {v('uc'): 1.0, v('ud'): 1.0}, '<', 1.0)
        else:
            uc, ud = flags
            bld.set_bounds(v('pc'), lb=uc * st.charge_min, ub=uc * st.charge_max)
            bld.set_bounds(v('pd'), lb=ud * st.discharge_min, ub=ud * st.discharge_max)

        # electric balance
        bld.add_row(v('power_balance'),
                    {v('fc'): 1.0, v('gas'): emap.b0, v('grid'): 1.0, v('pd'): 1.0,
                     v('pc'): -1.0, v('wcur'): -1.0, v('hp'): -1.0 / params.hp_cop,
                     v('lcur'): 1.0},
                    '=', dem_e - wind - emap.a0)
        # CCGT end-of-period heat as an affine function of the gas decisions
        coefs = {v('q'): 1.0}
        for s in range(k + 1):
            if end_coef[k, s] != 0.0:
                coefs[f'gas_t{s}'] = -end_coef[k, s]
        bld.add_row(v('ccgt_heat'), coefs, '=', end_const[k])
        heat_terms = {v('gb'): 1.0, v('hp'): 1.0, v('qcur'): 1.0, v('qvent'): -1.0}
        heat_rhs = dem_q
        if params.heat_balance == 'average':
            for s in range(k + 1):
                if mean_coef[k, s] != 0.0:
                    heat_terms[f'gas_t{s}'] = heat_terms.get(f'gas_t{s}', 0.0) + mean_coef[k, s]
            heat_rhs -= mean_const[k]
        else:
            heat_terms[v('q')] = 1.0
        bld.add_row(v('heat_balance'), heat_terms, '=', heat_rhs)
        # state of charge
        soc_terms = {v('soc'): 1.0, v('pc'): -st.eta_charge * dt,
                     v('pd'): dt / st.eta_discharge}
        soc_rhs = 0.0
        if k == 0:
            soc_rhs = state.soc
        else:
            soc_terms[f'soc_t{k - 1}'] = -1.0
        bld.add_row(v('soc'), soc_terms, '=', soc_rhs)

        # ramps: folded into bounds against the state, rows between periods
        ramps = (('fc', params.fc, 1.0, state.fc_power_prev),
                 ('grid', params.grid, 1.0, state.grid_power_prev),
                 ('gb', params.gb, 1.0, state.gb_heat_prev),
                 ('hp', params.hp, 1.0, state.hp_heat_prev),
                 ('q', qh, 1.0, prev_heat),
                 ('gas', params.ccgt_electric, emap.b0, state.ccgt_power - emap.a0))
        for name, unit, scale, prev in ramps:
            up = unit.ramp_up_per_period(dt)
            down = unit.ramp_down_per_period(dt)
            if k == 0:
                lo, hi = bld.bounds(v(name))
                lo = max(lo, (prev - down) / scale)
                hi = min(hi, (prev + up) / scale)
                if lo > hi:
                    raise DispatchError(f'ramp window for {v(name)} is empty '
                                        f'([{lo:.6g}, {hi:.6g}])', INFEASIBLE, state.period)
                bld.set_bounds(v(name), lb=lo, ub=hi)
            else:
                if np.isfinite(up):
                    bld.add_row(v(f'{name}_ramp_up'),
                                {v(name): scale, f'{name}_t{k - 1}': -scale}, '<', up)
                if np.isfinite(down):
                    bld.add_row(v(f'{name}_ramp_down'),
                                {v(name): scale, f'{name}_t{k - 1}': -scale}, '>', -down)

        slopes = vfa_slopes.get(k)
        if slopes is not None:
            slopes = np.asarray(slopes, dtype=float)
            if np.any(np.diff(slopes) < 0):
                raise ValueError('value-function slopes must be nondecreasing')
            width = (qh.power_max - qh.power_min) / len(slopes)
            link = {v('q'): -1.0}
            for a, d in enumerate(slopes):
                name = f'r_t{k}_{a}'
                bld.add_var(name, 0.0, width, float(d))
                link[name] = 1.0
            bld.add_row(v('vfa_link'), link, '=', -qh.power_min)
    return bld.build()


def build_subproblem(state, slopes, flags, params, lift=None):
    """One-period program: stage cost plus the value of the post-decision heat."""
    return build_horizon_lp(state, [], params, lift, vfa_slopes={0: slopes}, flags=flags)


def decision_from_solution(lp, x, k=0, flags=None):
    """Read the decision of period `k` out of a solution vector."""
    idx = {name: j for j, name in enumerate(lp.var_names)}
    vals = {f: float(x[idx[f'{_SHORT[f]}_t{k}']]) for f in continuous_fields}
    if flags is None:
        uc = int(vals['charge_power'] > _ACTIVE)
        ud = int(vals['discharge_power'] > _ACTIVE)
        if uc and ud:
            raise ValueError(f'period {k}: simultaneous charge and discharge')
        flags = (uc, ud)
    for f in ('charge_power', 'discharge_power'):
        if vals[f] <= _ACTIVE:
            vals[f] = 0.0
    return Decision(charge_flag=int(flags[0]), discharge_flag=int(flags[1]), **vals)


def _segments(lp, x, k, n):
    idx = {name: j for j, name in enumerate(lp.var_names)}
    return np.array([x[idx[f'r_t{k}_{a}']] for a in range(n)])


def solve_period(state, slopes, params, lift=None, method='auto'):
    """Best decision over the three admissible storage flag pairs.

    Ties go to the earlier pair in `FLAG_PAIRS`, i.e. toward no storage action.
    """
    best = None
    statuses = []
    for flags in FLAG_PAIRS:
        try:
            lp = build_subproblem(state, slopes, flags, params, lift)
        except DispatchError as exc:
            statuses.append(exc.status)
            continue
        sol = solve_lp(lp, method)
        statuses.append(sol.status)
        if sol.status == INFEASIBLE:
            continue
        if sol.status != OPTIMAL:
            raise DispatchError(f'period {state.period} flags {flags}: LP {sol.status}',
                                sol.status, state.period)
        if best is None or sol.objective < best[0] - 1e-9 * max(1.0, abs(best[0])):
            best = (sol.objective, lp, sol.x, flags)
    if best is None:
        raise DispatchError(f'period {state.period}: no feasible dispatch '
                            f'(statuses {statuses})', INFEASIBLE, state.period)
    obj, lp, x, flags = best
    idx = lp.var_names.index('q_t0')
    return SubproblemResult(decision=decision_from_solution(lp, x, 0, flags),
                            objective=obj, post_decision_heat=float(x[idx]),
                            segments=_segments(lp, x, 0, len(slopes)), flags=flags)


def _flag_consistent(pc, pd, st):
    """Whether (pc, pd) is reachable by some admissible integer flag pair."""
    charging = pc > _ACTIVE
    discharging = pd > _ACTIVE
    if charging and discharging:
        return False
    if charging and pc < st.charge_min - _ACTIVE:
        return False
    if discharging and pd < st.discharge_min - _ACTIVE:
        return False
    return True


def solve_multi_period(state, rows, params, lift=None, terminal_slopes=None,
                       binary_mode='branch_and_bound', heat_model='dynamic',
                       method='auto', node_limit=20000):
    """Jointly dispatch ``1 + len(rows)`` coupled periods.

    Parameters
    ----------
    binary_mode : {'relaxed', 'branch_and_bound'}
        'relaxed' returns the LP relaxation of the storage flags (its
        objective is a lower bound); 'branch_and_bound' searches flag pairs
        depth first with LP bounds and returns an integer-feasible optimum.
    terminal_slopes : array, optional
        Value-function slopes on the last period's end heat.
    """
    H = 1 + len(rows)
    vfa = {H - 1: terminal_slopes} if terminal_slopes is not None else None
    lp = build_horizon_lp(state, rows, params, lift, vfa_slopes=vfa, flags='relaxed',
                          heat_model=heat_model)
    idx = {name: j for j, name in enumerate(lp.var_names)}
    pc_idx = np.array([idx[f'pc_t{k}'] for k in range(H)])
    pd_idx = np.array([idx[f'pd_t{k}'] for k in range(H)])
    uc_idx = np.array([idx[f'uc_t{k}'] for k in range(H)])
    ud_idx = np.array([idx[f'ud_t{k}'] for k in range(H)])
    q_idx = np.array([idx[f'q_t{k}'] for k in range(H)])
    st = params.storage
    base_lb, base_ub = lp.lb.copy(), lp.ub.copy()

    def solve_node(fixed):
        lp.lb, lp.ub = base_lb.copy(), base_ub.copy()
        for k, (uc, ud) in fixed.items():
            lp.lb[uc_idx[k]] = lp.ub[uc_idx[k]] = uc
            lp.lb[ud_idx[k]] = lp.ub[ud_idx[k]] = ud
        return solve_lp(lp, method)

    def finish(x, objective, status, nodes, solves, relaxed):
        decisions = []
        for k in range(H):
            if relaxed:
                flags = (int(x[pc_idx[k]] > _ACTIVE), int(x[pd_idx[k]] > _ACTIVE))
                if flags == (1, 1):
                    flags = (int(x[uc_idx[k]] >= x[ud_idx[k]]), int(x[uc_idx[k]] < x[ud_idx[k]]))
            else:
                flags = None
            decisions.append(decision_from_solution(lp, x, k, flags))
        return HorizonResult(decisions=decisions, objective=objective,
                             post_decision_heats=x[q_idx].copy(), status=status,
                             nodes=nodes, lp_solves=solves, x=x)

    root = solve_node({})
    if root.status != OPTIMAL:
        bad = _diagnose(lp)
        raise DispatchError(f'horizon program from period {state.period}: {root.status}'
                            + (f' (violates {bad})' if bad else ''), root.status, state.period)
    if binary_mode == 'relaxed':
        return finish(root.x, root.objective, OPTIMAL, 1, 1, relaxed=True)
    if binary_mode != 'branch_and_bound':
        raise ValueError(f'unknown binary mode {binary_mode!r}')

    incumbent = None
    nodes = 0
    solves = 1
    stack = [({}, root)]
    status = OPTIMAL
    while stack:
        fixed, sol = stack.pop()
        if sol is None:
            sol = solve_node(fixed)
            solves += 1
        nodes += 1
        if nodes > node_limit:
            status = 'node_limit'
            break
        if sol.status == INFEASIBLE:
            continue
        if sol.status != OPTIMAL:
            raise DispatchError(f'branch and bound node LP {sol.status}', sol.status,
                                state.period)
        if incumbent is not None and sol.objective >= incumbent[0] - 1e-9 * max(1.0, abs(incumbent[0])):
            continue
        pc, pd = sol.x[pc_idx], sol.x[pd_idx]
        bad = [k for k in range(H) if k not in fixed and not _flag_consistent(pc[k], pd[k], st)]
        if not bad:
            incumbent = (sol.objective, sol.x.copy())
            continue
        k = bad[0]
        # children pushed so the pair nearest the relaxation is explored first
        order = sorted(FLAG_PAIRS, key=lambda f: -(f[0] * pc[k] + f[1] * pd[k]))
        for pair in reversed(order):
            child = dict(fixed)
            child[k] = pair
            stack.append((child, None))
    if incumbent is None:
        raise DispatchError(f'no integer-feasible schedule from period {state.period}',
                            INFEASIBLE, state.period)
    lp.lb, lp.ub = base_lb, base_ub
    return finish(incumbent[1], incumbent[0], status, nodes, solves, relaxed=False)


def _diagnose(lp):
    """Name a row or bound that is violated by every point, if one is obvious."""
    for j in range(lp.n_vars):
        if lp.lb[j] > lp.ub[j]:
            return lp.var_names[j]
    # a row is statically infeasible if its range over the box misses the rhs
    with np.errstate(invalid='ignore'):
        lo = np.where(lp.A > 0, lp.A * lp.lb, np.where(lp.A < 0, lp.A * lp.ub, 0.0)).sum(axis=1)
        hi = np.where(lp.A > 0, lp.A * lp.ub, np.where(lp.A < 0, lp.A * lp.lb, 0.0)).sum(axis=1)
    for i in range(lp.n_rows):
        s, b = lp.sense[i], lp.b[i]
        if (s in '<=' and lo[i] > b + 1e-9) or (s in '>=' and hi[i] < b - 1e-9):
            return lp.row_names[i]
    return None
