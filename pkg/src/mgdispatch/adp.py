"""Piecewise-linear value-function ADP over the CCGT post-decision heat.

Each period carries a convex piecewise-linear function of the heat the CCGT
delivers at the end of the period.  Training rolls forward through a day,
deciding with the current slopes, and after each decision perturbs the
incoming heat to observe a marginal value for the previous period.  The
observation is smoothed into one slope with a generalized harmonic stepsize
and monotonicity is restored by pooling adjacent violators around the
updated segment.
"""
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import ccgt
from .audit import audit_decision
from .dispatch import DispatchError, solve_period
from .model import initial_state, period_lift, stage_cost, transition

__all__ = ['PiecewiseLinearVfa', 'StepsizeRule', 'TrainingConfig', 'ConvergenceTrace',
           'Trajectory', 'evaluate_vfa', 'spar_project', 'update_slope',
           'sample_marginal', 'segment_for_difference', 'train', 'simulate_policy',
           'vfa_policy', 'VFA_FORMAT_VERSION']

log = logging.getLogger(__name__)

VFA_FORMAT_VERSION = 1


@dataclass
class PiecewiseLinearVfa:
    """Per-period slopes over ``[q_min, q_max]`` split into equal segments."""
    slopes: np.ndarray          # shape (periods, segments)
    q_min: float
    q_max: float

    def __post_init__(self):
        self.slopes = np.array(self.slopes, dtype=float)
        if self.slopes.ndim != 2 or self.slopes.shape[1] < 1:
            raise ValueError('slopes must be a (periods, segments) array')
        if not self.q_max > self.q_min:
            raise ValueError('q_max must exceed q_min')

    @classmethod
    def zeros(cls, periods, segments, q_min, q_max):
        return cls(np.zeros((periods, segments)), q_min, q_max)

    @property
    def periods(self):
        return self.slopes.shape[0]

    @property
    def segments(self):
        return self.slopes.shape[1]

    @property
    def width(self):
        return (self.q_max - self.q_min) / self.segments

    def segment_of(self, q):
        """Index of the segment containing heat level `q` (clamped)."""
        a = int(np.floor((q - self.q_min) / self.width))
        return min(max(a, 0), self.segments - 1)

    def is_monotone(self):
        return bool(np.all(np.diff(self.slopes, axis=1) >= 0))

    def copy(self):
        return PiecewiseLinearVfa(self.slopes.copy(), self.q_min, self.q_max)

    def to_json(self):
        return {'version': VFA_FORMAT_VERSION,
                'periods': {str(t): {'q_min': self.q_min, 'q_max': self.q_max,
                                     'slopes': [float(v) for v in self.slopes[t]]}
                            for t in range(self.periods)}}

    @classmethod
    def from_json(cls, doc):
        if doc.get('version') != VFA_FORMAT_VERSION:
            raise ValueError(f"unsupported VFA format version {doc.get('version')!r}")
        rows = doc['periods']
        keys = sorted(rows, key=int)
        if [int(k) for k in keys] != list(range(len(keys))):
            raise ValueError('VFA periods must run 0..T-1')
        q_min = {rows[k]['q_min'] for k in keys}
        q_max = {rows[k]['q_max'] for k in keys}
        if len(q_min) != 1 or len(q_max) != 1:
            raise ValueError('all periods must share one heat range')
        return cls(np.array([rows[k]['slopes'] for k in keys]), q_min.pop(), q_max.pop())

    def save(self, path):
        with open(path, 'w') as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write('\n')

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def evaluate_vfa(slopes, q, q_min, q_max):
    """Value of a convex piecewise-linear function at `q` (zero at `q_min`)."""
    slopes = np.asarray(slopes, dtype=float)
    if not q_min - 1e-12 <= q <= q_max + 1e-12:
        raise ValueError(f'heat {q} outside [{q_min}, {q_max}]')
    width = (q_max - q_min) / len(slopes)
    fill = np.clip(q - q_min - width * np.arange(len(slopes)), 0.0, width)
    return float(slopes @ fill)


@dataclass(frozen=True)
class StepsizeRule:
    """Generalized harmonic stepsize ``a / (a + n - 1)`` for iteration n >= 1."""
    a: float = 20.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError('harmonic stepsize parameter must be positive')

    def __call__(self, n):
        if n < 1:
            raise ValueError('iterations are numbered from 1')
        return self.a / (self.a + n - 1)


def spar_project(slopes, index):
    """Restore nondecreasing slopes after the entry at `index` was changed.

    The changed entry is pooled with its violating neighbours, moving left
    for a downward change and right for an upward one, and the pooled block
    takes its mean.  For a single violated position this is the Euclidean
    projection onto the nondecreasing cone.
    """
    d = np.array(slopes, dtype=float)
    n = len(d)
    lo = hi = index
    total = d[index]
    while True:
        mean = total / (hi - lo + 1)
        if lo > 0 and d[lo - 1] > mean:
            lo -= 1
            total += d[lo]
        elif hi < n - 1 and d[hi + 1] < mean:
            hi += 1
            total += d[hi]
        else:
            break
    d[lo:hi + 1] = total / (hi - lo + 1)
    return d


def update_slope(slopes, index, observation, n, rule):
    """Smooth one observation into segment `index` and re-project."""
    d = np.array(slopes, dtype=float)
    alpha = rule(n)
    d[index] = alpha * observation + (1.0 - alpha) * d[index]
    return spar_project(d, index)


def segment_for_difference(vfa, q_high, rho):
    """Segment credited with the difference quotient over ``[q_high - rho, q_high]``.

    The observation goes to the segment containing the incoming heat level
    `q_high`.  When `q_high` sits inside a segment the slope of the part
    above it is revised too, so repeated passes can move the heat level
    upward one segment at a time.
    """
    return vfa.segment_of(q_high)


def sample_marginal(state, slopes, rho, params, lift=None, base=None, q_min=None):
    """Observed marginal value ($ per MW) of the heat entering `state`.

    Solves the period problem from `state` and from `state` with its CCGT
    heat lowered by `rho`, and returns the backward difference quotient.

    Parameters
    ----------
    base : SubproblemResult, optional
        Already-solved problem at `state`, to avoid solving it again.
    q_min : float, optional
        Lowest heat the difference may reach; defaults to the CCGT minimum.

    Returns
    -------
    observation : float
    q_high : float
        Incoming heat level; the difference spans ``[q_high - rho, q_high]``.
    """
    lift = lift or period_lift(params.arma)
    q_min = params.ccgt_heat.power_min if q_min is None else q_min
    q = ccgt.heat_output(state.ccgt_aug, params.arma)
    if q - rho < q_min - 1e-9:
        raise ValueError(f'incoming heat {q:.4g} MW leaves no room for a {rho} MW perturbation')
    if base is None:
        base = solve_period(state, slopes, params, lift)
    lowered = replace(state, ccgt_aug=ccgt.shift_output(state.ccgt_aug, -rho, params.arma))
    low = solve_period(lowered, slopes, params, lift)
    return (base.objective - low.objective) / rho, q


@dataclass
class TrainingConfig:
    iterations: int = 60
    window: int = 10
    tolerance: float = 0.01
    rho: float = 1.0
    segments: int = 35
    stepsize: StepsizeRule = StepsizeRule()
    seed: int = 0
    scenarios: int = 20
    batch: int = 1               # observations averaged per update
    stop_on_convergence: bool = True

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError('rho must be positive')
        if self.iterations < 1:
            raise ValueError('iteration budget must be at least 1')
        if self.window < 1 or self.tolerance <= 0:
            raise ValueError('bad convergence window or tolerance')
        if self.batch < 1:
            raise ValueError('batch must be at least 1')


@dataclass
class ConvergenceTrace:
    costs: list = field(default_factory=list)
    slope_change: list = field(default_factory=list)
    scenario: list = field(default_factory=list)
    converged_at: int = None

    def __len__(self):
        return len(self.costs)

    def relative_change(self, window):
        """Relative change between the means of the last two windows."""
        if len(self.costs) < 2 * window:
            return np.inf
        c = np.asarray(self.costs)
        prev = c[-2 * window:-window].mean()
        last = c[-window:].mean()
        return abs(last - prev) / abs(prev)

    def write_csv(self, path):
        with open(path, 'w') as fh:
            fh.write('iteration,scenario,total_cost,slope_change\n')
            for n, (c, s, sc) in enumerate(zip(self.costs, self.slope_change, self.scenario), 1):
                fh.write(f'{n},{sc},{c:.10g},{s:.10g}\n')


def vfa_policy(vfa, params, lift=None):
    """Decision rule using the value function of each period."""
    lift = lift or period_lift(params.arma)

    def decide(state, forecast=None):
        return solve_period(state, vfa.slopes[state.period], params, lift).decision
    decide.name = 'adp'
    return decide


def train(config, scenarios, params, lift=None, vfa=None, progress=None):
    """Fit the value functions by forward passes over sampled scenarios.

    Parameters
    ----------
    config : TrainingConfig
    scenarios : sequence of Scenario
        Training realizations; one is drawn per iteration.
    vfa : PiecewiseLinearVfa, optional
        Starting slopes; zeros by default, so the first pass is myopic.
    progress : callable, optional
        Called as ``progress(n, trace)`` after each iteration.

    Returns
    -------
    vfa : PiecewiseLinearVfa
    trace : ConvergenceTrace
    """
    if len(scenarios) == 0:
        raise ValueError('no training scenarios')
    lift = lift or period_lift(params.arma)
    qh = params.ccgt_heat
    T = params.periods
    if vfa is None:
        vfa = PiecewiseLinearVfa.zeros(T, config.segments, qh.power_min, qh.power_max)
    else:
        vfa = vfa.copy()
    rng = np.random.default_rng(config.seed)
    trace = ConvergenceTrace()
    rho = config.rho

    for n in range(1, config.iterations + 1):
        sc = scenarios[int(rng.integers(len(scenarios)))]
        start = vfa.slopes.copy()
        state = initial_state(params, sc.forecast_row(0), sc.exogenous(0))
        total = 0.0
        pending = {}
        for t in range(T):
            try:
                res = solve_period(state, vfa.slopes[t], params, lift)
            except DispatchError as exc:
                raise DispatchError(f'iteration {n}: {exc}', exc.status, t) from exc
            if t > 0:
                _observe(vfa, state, t, res, rho, params, lift, n, config, pending)
            total += stage_cost(state, res.decision, params)
            if t + 1 < T:
                state = transition(state, res.decision, sc.exogenous(t + 1),
                                   sc.forecast_row(t + 1), params, lift)
        trace.costs.append(total)
        trace.slope_change.append(float(np.linalg.norm(vfa.slopes - start)))
        trace.scenario.append(sc.index)
        if progress is not None:
            progress(n, trace)
        if trace.converged_at is None and trace.relative_change(config.window) < config.tolerance:
            trace.converged_at = n
            if config.stop_on_convergence:
                break
    return vfa, trace


def _observe(vfa, state, t, res, rho, params, lift, n, config, pending):
    """Sample a marginal value at period `t` and update period ``t-1``."""
    q = ccgt.heat_output(state.ccgt_aug, params.arma)
    try:
        if q - rho >= vfa.q_min:
            obs, q_high = sample_marginal(state, vfa.slopes[t], rho, params, lift, base=res)
        else:
            # too close to the floor: difference forward instead
            raised = replace(state, ccgt_aug=ccgt.shift_output(state.ccgt_aug, rho, params.arma))
            obs, q_high = sample_marginal(raised, vfa.slopes[t], rho, params, lift)
    except DispatchError:
        log.debug('period %d: perturbed problem infeasible, no observation', t)
        return
    a = segment_for_difference(vfa, q_high, rho)
    if config.batch > 1:
        key = (t - 1, a)
        bucket = pending.setdefault(key, [])
        bucket.append(obs)
        if len(bucket) < config.batch:
            return
        obs = float(np.mean(pending.pop(key)))
    vfa.slopes[t - 1] = update_slope(vfa.slopes[t - 1], a, obs, n, config.stepsize)


@dataclass
class Trajectory:
    policy: str
    scenario: int
    states: list
    decisions: list
    costs: np.ndarray
    heat_trace: np.ndarray        # CCGT heat every ARMA sample, whole day
    post_decision_heat: np.ndarray

    @property
    def total_cost(self):
        return float(np.sum(self.costs))

    def curtailment(self, dt):
        """Curtailed wind, electric load and heat load, and vented heat (MWh)."""
        return {name: dt * sum(getattr(d, name) for d in self.decisions)
                for name in ('wind_curtail', 'load_curtail', 'heat_curtail', 'heat_vent')}

    def violations(self, params, tol=1e-7):
        out = []
        for s, d in zip(self.states, self.decisions):
            out.extend(audit_decision(s, d, params, tol))
        return out


def simulate_policy(policy, scenario, params, lift=None, name=None):
    """Roll a decision rule through one scenario.

    `policy` is called as ``policy(state, forecast)`` and returns a
    `Decision`; it sees the day-ahead forecast but none of the realizations
    ahead of the state it is given.
    """
    lift = lift or period_lift(params.arma)
    T = params.periods
    state = initial_state(params, scenario.forecast_row(0), scenario.exogenous(0))
    states, decisions, costs, trace, post = [], [], [], [], []
    for t in range(T):
        d = policy(state, scenario.forecast)
        states.append(state)
        decisions.append(d)
        costs.append(stage_cost(state, d, params))
        samples, end = ccgt.intra_period_trace(state.ccgt_aug, d.gas_flow, params.arma)
        trace.append(samples)
        post.append(samples[-1])
        if t + 1 < T:
            state = transition(state, d, scenario.exogenous(t + 1),
                               scenario.forecast_row(t + 1), params, lift)
    return Trajectory(policy=name or getattr(policy, 'name', 'policy'),
                      scenario=scenario.index, states=states, decisions=decisions,
                      costs=np.array(costs), heat_trace=np.concatenate(trace),
                      post_decision_heat=np.array(post))
