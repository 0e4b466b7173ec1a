"""Command-line entry point: train, evaluate, compare, gen-profiles.

Exit status is 0 on success, 2 for configuration problems (including a
missing value-function file) and 3 when a dispatch program cannot be solved.
"""
import argparse
import csv
import io
import json
import logging
import os
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adp import PiecewiseLinearVfa, simulate_policy, train, vfa_policy
from .baselines import (MpcConfig, full_horizon_milp, mpc_policy, myopic_policy,
                        static_hub_variant)
from .config import ConfigError, load_config
from .dispatch import DispatchError
from .model import (ccgt_electric_output, initial_state, period_lift, stage_cost,
                    transition)
from .scenarios import (EVALUATION_STREAM, TRAINING_STREAM, ScenarioSet, default_profiles,
                        load_profiles_csv, save_profiles_csv)

__all__ = ['main', 'build_parser', 'RunManifest', 'POLICIES', 'DISPATCH_UNITS']

log = logging.getLogger('mgdispatch')

POLICIES = ('adp', 'myopic', 'mpc', 'milp', 'milp-static')
COMPARED = ('milp', 'adp', 'mpc', 'myopic')
# rows of the per-scenario dispatch CSV, in order
DISPATCH_UNITS = ('fc_power', 'gas_flow', 'ccgt_power', 'grid_power', 'charge_power',
                  'discharge_power', 'charge_flag', 'discharge_flag', 'wind_curtail',
                  'load_curtail', 'gb_heat', 'hp_heat', 'heat_curtail', 'heat_vent',
                  'ccgt_heat_end', 'soc', 'stage_cost')
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


@dataclass
class RunManifest:
    config: str
    command: str
    seed: int
    out: str
    build: str
    timings: dict = field(default_factory=dict)

    def write(self, path):
        _write_text(path, json.dumps(self.__dict__, indent=2, sort_keys=True) + '\n')


def _build_id():
    try:
        rev = subprocess.run(['git', 'rev-parse', '--short', 'HEAD'], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        if rev.returncode == 0 and rev.stdout.strip():
            return f'{__version__}+g{rev.stdout.strip()}'
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _write_text(path, text):
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.')
    try:
        with os.fdopen(fd, 'w', newline='') as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return f'{float(v):.10g}'


# --- run context -----------------------------------------------------------

@dataclass
class _Run:
    cfg: object
    out: Path
    jobs: int

    @property
    def params(self):
        return self.cfg.params

    def forecast(self):
        sc = self.cfg.scenarios
        if sc.profiles is None:
            return default_profiles(self.params, sc.prices)
        try:
            fc = load_profiles_csv(sc.profiles)
        except (OSError, ValueError) as exc:
            raise ConfigError('scenarios.profiles', str(exc)) from None
        if len(fc) != self.params.periods:
            raise ConfigError('scenarios.profiles',
                              f'{len(fc)} rows, expected {self.params.periods} periods')
        return fc

    def evaluation_set(self):
        sc = self.cfg.scenarios
        return ScenarioSet(self.forecast(), sc.rel_std, sc.seed, sc.count, EVALUATION_STREAM)

    def training_set(self):
        sc = self.cfg.scenarios
        return ScenarioSet(self.forecast(), sc.rel_std, sc.seed, self.cfg.training.scenarios,
                           TRAINING_STREAM)

    def vfa_path(self):
        return self.out / 'vfa.json'

    def load_vfa(self, why):
        path = self.vfa_path()
        if not path.is_file():
            raise ConfigError('', f'{why} needs a trained value function; {path} not found '
                                  '(run the train command first)')
        try:
            vfa = PiecewiseLinearVfa.load(path)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError('', f'{path}: {exc}') from None
        if vfa.periods != self.params.periods:
            raise ConfigError('', f'{path} has {vfa.periods} periods, '
                                  f'config has {self.params.periods}')
        return vfa


def _apply_overrides(args):
    over = {}
    if args.seed is not None:
        over['scenarios'] = {'seed': args.seed}
        over['training'] = {'seed': args.seed}
    if args.scenarios is not None:
        key = 'training' if args.command == 'train' else 'scenarios'
        over.setdefault(key, {})['scenarios' if key == 'training' else 'count'] = args.scenarios
    return over


# --- policy evaluation -----------------------------------------------------

@dataclass
class _Outcome:
    policy: str
    scenario: int
    total_cost: float
    curtailment: dict
    rows: list                 # (period, unit, value)
    heat: np.ndarray           # one value per ARMA sample
    violations: int
    extra: dict = field(default_factory=dict)


def _dispatch_rows(states, decisions, costs, post_heat, params):
    rows = []
    for t, (s, d) in enumerate(zip(states, decisions)):
        vals = d.as_dict()
        vals['ccgt_power'] = ccgt_electric_output(d.gas_flow, params)
        vals['ccgt_heat_end'] = post_heat[t]
        vals['soc'] = s.soc
        vals['stage_cost'] = costs[t]
        rows.extend((t, u, vals[u]) for u in DISPATCH_UNITS)
    return rows


def _policy_rule(name, run, scenario, lift, vfa):
    cfg, params = run.cfg, run.params
    if name == 'adp':
        return vfa_policy(vfa, params, lift)
    if name == 'myopic':
        return myopic_policy(params, lift, cfg.training.segments)
    if name == 'mpc':
        mc = MpcConfig(horizon=cfg.mpc.horizon, forecast=cfg.mpc.forecast,
                       terminal_vfa=vfa if cfg.mpc.terminal_vfa == 'trained' else None,
                       binary_mode=cfg.solver.binary_mode)
        return mpc_policy(mc, params, lift, realized=scenario)
    raise ValueError(name)


def _evaluate_one(name, run, scenario, vfa):
    params = run.params
    lift = period_lift(params.arma)
    dt = params.dt
    if name == 'milp-static':
        st = static_hub_variant(scenario, params, lift, run.cfg.solver.binary_mode,
                                run.cfg.solver.method)
        costs = np.zeros(params.periods)
        state = initial_state(params, scenario.forecast_row(0), scenario.exogenous(0))
        states = []
        for t, d in enumerate(st.decisions):
            states.append(state)
            costs[t] = stage_cost(state, d, params)
            if t + 1 < params.periods:
                state = transition(state, d, scenario.exogenous(t + 1),
                                   scenario.forecast_row(t + 1), params, lift)
        post = st.heat_trace[params.arma.samples_per_period - 1::params.arma.samples_per_period]
        curt = {k: dt * sum(getattr(d, k) for d in st.decisions)
                for k in ('wind_curtail', 'load_curtail', 'heat_curtail', 'heat_vent')}
        return _Outcome(name, scenario.index, float(np.sum(costs)), curt,
                        _dispatch_rows(states, st.decisions, costs, post, params),
                        st.heat_trace, len(st.dynamic_violations),
                        {'planned_cost': st.cost})
    if name == 'milp':
        sched = full_horizon_milp(scenario, params, lift, run.cfg.solver.binary_mode,
                                  run.cfg.solver.method)
        traj = sched.trajectory
        extra = {'planned_cost': sched.planned_cost, 'nodes': sched.nodes}
    else:
        traj = simulate_policy(_policy_rule(name, run, scenario, lift, vfa), scenario, params,
                               lift, name=name)
        extra = {}
    return _Outcome(name, scenario.index, traj.total_cost, traj.curtailment(dt),
                    _dispatch_rows(traj.states, traj.decisions, traj.costs,
                                   traj.post_decision_heat, params),
                    traj.heat_trace, len(traj.violations(params)), extra)


def _evaluate_star(job):
    return _evaluate_one(*job)


def _evaluate(name, run, scenarios, vfa):
    jobs = [(name, run, sc, vfa) for sc in scenarios]
    if run.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            return list(pool.map(_evaluate_star, jobs))
    return [_evaluate_star(j) for j in jobs]


def _write_outcomes(name, run, outcomes, scenario_set):
    folder = run.out / name
    spp = run.params.arma.samples_per_period
    for o in outcomes:
        _write_text(folder / f'dispatch_{o.scenario:03d}.csv',
                    _csv_text(('period', 'unit', 'value'),
                              [(t, u, _fmt(v)) for t, u, v in o.rows]))
        _write_text(folder / f'heat_{o.scenario:03d}.csv',
                    _csv_text(('period', 'sample', 'heat_mw'),
                              [(k // spp, k % spp, _fmt(h)) for k, h in enumerate(o.heat)]))
    keys = ('wind_curtail', 'load_curtail', 'heat_curtail', 'heat_vent')
    _write_text(folder / 'totals.csv',
                _csv_text(('scenario', 'total_cost') + keys + ('violations',),
                          [(o.scenario, _fmt(o.total_cost))
                           + tuple(_fmt(o.curtailment[k]) for k in keys) + (o.violations,)
                           for o in outcomes]))
    totals = np.array([o.total_cost for o in outcomes])
    summary = {
        'policy': name,
        'scenarios': scenario_set.manifest(),
        'mean_cost': float(totals.mean()),
        'std_cost': float(totals.std(ddof=1)) if len(totals) > 1 else 0.0,
        'curtailment_mwh': {k: float(sum(o.curtailment[k] for o in outcomes)) for k in keys},
        'violations': int(sum(o.violations for o in outcomes)),
        'per_scenario': [dict({'scenario': o.scenario, 'total_cost': o.total_cost,
                               'curtailment_mwh': o.curtailment}, **o.extra)
                         for o in outcomes],
    }
    _write_text(run.out / f'summary_{name}.json', json.dumps(summary, indent=2) + '\n')
    return summary


# --- commands --------------------------------------------------------------

def cmd_train(run):
    scenarios = run.training_set()
    items = list(scenarios)

    def progress(n, trace):
        log.info('iteration %d: scenario %d, cost %.2f', n, trace.scenario[-1], trace.costs[-1])

    vfa, trace = train(run.cfg.training, items, run.params, period_lift(run.params.arma),
                       progress=progress)
    _write_text(run.vfa_path(), json.dumps(vfa.to_json(), indent=1) + '\n')
    _write_text(run.out / 'convergence.csv', _trace_csv(trace))
    _write_text(run.out / 'training_scenarios.json',
                json.dumps(scenarios.manifest(), indent=2) + '\n')
    if trace.converged_at is not None:
        print(f'converged after {trace.converged_at} iterations')
    else:
        change = trace.relative_change(run.cfg.training.window)
        detail = f'relative change {change:.4%}' if np.isfinite(change) else 'too few iterations'
        print(f'not converged after {len(trace)} iterations ({detail})')
    return {'iterations': len(trace), 'converged_at': trace.converged_at}


def _trace_csv(trace):
    rows = [(n, sc, _fmt(c), _fmt(s)) for n, (c, s, sc)
            in enumerate(zip(trace.costs, trace.slope_change, trace.scenario), 1)]
    return _csv_text(('iteration', 'scenario', 'total_cost', 'slope_change'), rows)


def _needs_vfa(name, cfg):
    return name == 'adp' or (name == 'mpc' and cfg.mpc.terminal_vfa == 'trained')


def cmd_evaluate(run, policy):
    vfa = run.load_vfa(f'policy {policy}') if _needs_vfa(policy, run.cfg) else None
    scenarios = run.evaluation_set()
    _write_text(run.out / 'evaluation_scenarios.json',
                json.dumps(scenarios.manifest(), indent=2) + '\n')
    outcomes = _evaluate(policy, run, list(scenarios), vfa)
    summary = _write_outcomes(policy, run, outcomes, scenarios)
    print(f"{policy}: mean cost {summary['mean_cost']:.2f} over {len(outcomes)} scenarios, "
          f"{summary['violations']} constraint violations")
    return summary


def cmd_compare(run):
    needs = [p for p in COMPARED if _needs_vfa(p, run.cfg)]
    vfa = run.load_vfa('compare') if needs else None
    scenarios = run.evaluation_set()
    _write_text(run.out / 'evaluation_scenarios.json',
                json.dumps(scenarios.manifest(), indent=2) + '\n')
    items = list(scenarios)
    table, timings = [], {}
    for name in COMPARED:
        t0 = time.perf_counter()
        outcomes = _evaluate(name, run, items, vfa)
        timings[name] = time.perf_counter() - t0
        summary = _write_outcomes(name, run, outcomes, scenarios)
        table.append((name, summary['mean_cost'], summary['std_cost'], summary['violations']))
    base = dict((n, c) for n, c, _, _ in table)['myopic']
    rows = [(n, _fmt(c), _fmt(s), _fmt(100.0 * (base - c) / base), f'{timings[n]:.3f}', v)
            for n, c, s, v in table]
    _write_text(run.out / 'compare.csv',
                _csv_text(('policy', 'mean_cost', 'std_cost', 'saving_vs_myopic_pct',
                           'runtime_s', 'violations'), rows))
    print(f"{'policy':<8} {'mean cost':>12} {'std':>10} {'vs myopic':>10} {'runtime s':>10}")
    for n, c, s, pct, rt, _ in rows:
        print(f'{n:<8} {float(c):12.2f} {float(s):10.2f} {float(pct):9.2f}% {float(rt):10.2f}')
    return {'table': rows, 'timings': timings}


def cmd_gen_profiles(run):
    fc = run.forecast()
    path = run.out / 'profiles.csv'
    with tempfile.TemporaryDirectory(dir=run.out) as tmp:
        save_profiles_csv(fc, Path(tmp) / 'profiles.csv')
        os.replace(Path(tmp) / 'profiles.csv', path)
    scenarios = run.evaluation_set()
    rows = []
    for sc in scenarios:
        for t in range(len(sc)):
            r = sc.realized_row(t)
            rows.append((sc.index, t, _fmt(r.wind), _fmt(r.demand_e), _fmt(r.price),
                         _fmt(r.demand_q)))
    _write_text(run.out / 'scenarios.csv',
                _csv_text(('scenario', 'period', 'wind', 'demand_e', 'price', 'demand_q'),
                          rows))
    _write_text(run.out / 'evaluation_scenarios.json',
                json.dumps(scenarios.manifest(), indent=2) + '\n')
    print(f'wrote {path} and {len(scenarios)} realized scenarios')
    return {}


# --- entry point -----------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML file laid over the built-in defaults')
    common.add_argument('--seed', type=int, help='scenario and training seed')
    common.add_argument('--scenarios', type=int, metavar='N',
                        help='scenario count (training scenarios for train)')
    common.add_argument('--out', default='runs', metavar='DIR', help='output directory')
    common.add_argument('--jobs', type=int, default=1, help='worker processes for evaluation')
    common.add_argument('-v', '--verbose', action='store_true')

    parser = argparse.ArgumentParser(prog='mgdispatch',
                                     description='Microgrid dispatch with a dynamic CCGT model.')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('train', parents=[common], help='fit the value functions')
    ev = sub.add_parser('evaluate', parents=[common], help='run one policy on the scenarios')
    ev.add_argument('--policy', choices=POLICIES, required=True)
    sub.add_parser('compare', parents=[common], help='cost table of all policies')
    sub.add_parser('gen-profiles', parents=[common], help='write the day profile and scenarios')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(message)s')
    start = time.perf_counter()
    try:
        if args.jobs < 1:
            raise ConfigError('--jobs', 'must be at least 1')
        if args.scenarios is not None and args.scenarios < 1:
            raise ConfigError('--scenarios', 'must be at least 1')
        cfg = load_config(args.config, _apply_overrides(args))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        run = _Run(cfg, out, args.jobs)
        if args.command == 'train':
            result = cmd_train(run)
        elif args.command == 'evaluate':
            result = cmd_evaluate(run, args.policy)
        elif args.command == 'compare':
            result = cmd_compare(run)
        else:
            result = cmd_gen_profiles(run)
    except ConfigError as exc:
        print(f'config error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    except DispatchError as exc:
        print(f'solver failure: {exc}', file=sys.stderr)
        return EXIT_SOLVER
    timings = {'total_s': time.perf_counter() - start}
    timings.update({f'{k}_s': v for k, v in result.get('timings', {}).items()})
    command = args.command + (f' --policy {args.policy}' if args.command == 'evaluate' else '')
    RunManifest(config=cfg.source or '<defaults>', command=command,
                seed=cfg.scenarios.seed, out=str(out), build=_build_id(),
                timings=timings).write(out / f'manifest_{args.command}.json')
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
