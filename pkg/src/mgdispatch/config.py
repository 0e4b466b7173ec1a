"""Run configuration: YAML file to typed parameter objects and back.

The shipped ``data/default.yaml`` holds every model constant.  A user file
is laid over it key by key, so it only has to name what it changes.  Every
validation failure is a `ConfigError` naming the dotted path of the field.
"""
import copy
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .adp import StepsizeRule, TrainingConfig
from .ccgt import ArmaParams
from .model import (CcgtElectricMap, InitialConditions, MicrogridParams, PenaltyParams,
                    StorageParams, UnitParams)
from .scenarios import QUANTITIES, PriceSchedule

__all__ = ['ConfigError', 'RunConfig', 'ScenarioSettings', 'MpcSettings', 'SolverSettings',
           'default_document', 'load_config', 'parse_config', 'dump_config', 'UNIT_NAMES']

UNIT_NAMES = ('fc', 'ccgt_electric', 'grid', 'gb', 'hp', 'ccgt_heat')
_LP_METHODS = ('auto', 'simplex', 'highs')
_BINARY_MODES = ('branch_and_bound', 'relaxed')


class ConfigError(ValueError):
    """Invalid configuration; `field` is the dotted path of the culprit."""

    def __init__(self, field, message):
        super().__init__(f'{field}: {message}' if field else message)
        self.field = field


@dataclass(frozen=True)
class ScenarioSettings:
    seed: int = 0
    count: int = 20
    rel_std: tuple = (0.10, 0.05, 0.05, 0.05)
    profiles: Optional[str] = None
    prices: PriceSchedule = PriceSchedule()


@dataclass(frozen=True)
class MpcSettings:
    horizon: int = 8
    forecast: str = 'day-ahead'
    terminal_vfa: str = 'none'


@dataclass(frozen=True)
class SolverSettings:
    method: str = 'auto'
    binary_mode: str = 'branch_and_bound'


@dataclass(frozen=True)
class RunConfig:
    params: MicrogridParams
    scenarios: ScenarioSettings
    training: TrainingConfig
    mpc: MpcSettings
    solver: SolverSettings
    source: Optional[str] = None


def default_document():
    """The shipped defaults as a plain nested dict."""
    text = resources.files('mgdispatch').joinpath('data/default.yaml').read_text()
    return yaml.safe_load(text)


def _merge(base, override, path):
    if not isinstance(override, dict):
        raise ConfigError(path, 'expected a mapping')
    out = dict(base)
    for key, value in override.items():
        where = f'{path}.{key}' if path else str(key)
        if key not in base:
            raise ConfigError(where, 'unknown key')
        if isinstance(base[key], dict) and value is not None:
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


class _Reader:
    """Typed access to one mapping, with dotted paths in the errors."""

    def __init__(self, doc, path):
        if not isinstance(doc, dict):
            raise ConfigError(path, 'expected a mapping')
        self.doc = doc
        self.path = path

    def where(self, key):
        return f'{self.path}.{key}' if self.path else key

    def raw(self, key):
        if key not in self.doc:
            raise ConfigError(self.where(key), 'missing')
        return self.doc[key]

    def number(self, key):
        v = self.raw(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self.where(key), f'expected a number, got {v!r}')
        return float(v)

    def integer(self, key):
        v = self.raw(key)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self.where(key), f'expected an integer, got {v!r}')
        return v

    def flag(self, key):
        v = self.raw(key)
        if not isinstance(v, bool):
            raise ConfigError(self.where(key), f'expected true or false, got {v!r}')
        return v

    def choice(self, key, options):
        v = self.raw(key)
        if v not in options:
            raise ConfigError(self.where(key), f'expected one of {list(options)}, got {v!r}')
        return v

    def numbers(self, key, length=None):
        v = self.raw(key)
        if not isinstance(v, (list, tuple)) or (length is not None and len(v) != length):
            want = f'a list of {length} numbers' if length else 'a list of numbers'
            raise ConfigError(self.where(key), f'expected {want}')
        for i, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ConfigError(f'{self.where(key)}[{i}]', f'expected a number, got {x!r}')
        return tuple(float(x) for x in v)

    def sub(self, key):
        return _Reader(self.raw(key), self.where(key))

    def build(self, cls, **kw):
        try:
            return cls(**kw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(self.path, str(exc)) from None


def _unit(r):
    return r.build(UnitParams, power_min=r.number('power_min'), power_max=r.number('power_max'),
                   ramp_up=r.number('ramp_up'), ramp_down=r.number('ramp_down'),
                   cost_coefficient=r.number('cost'),
                   ramp_unit=r.choice('ramp_unit', ('MW/h', 'MW/min')))


def _numbers_of(r, cls):
    return r.build(cls, **{f.name: r.number(f.name) for f in fields(cls)})


def _params(root):
    units = root.sub('units')
    kw = {name: _unit(units.sub(name)) for name in UNIT_NAMES}
    ccgt = root.sub('ccgt')
    ar = ccgt.sub('arma')
    kw['arma'] = ar.build(ArmaParams, a=ar.numbers('a', 4), b=ar.numbers('b', 4),
                          sample_interval=ar.number('sample_interval'),
                          samples_per_period=ar.integer('samples_per_period'))
    if ccgt.raw('electric_map') is not None:
        kw['electric_map'] = _numbers_of(ccgt.sub('electric_map'), CcgtElectricMap)
    kw['storage'] = _numbers_of(root.sub('storage'), StorageParams)
    kw['penalties'] = _numbers_of(root.sub('penalties'), PenaltyParams)
    kw['initial'] = _numbers_of(root.sub('initial'), InitialConditions)
    return root.build(MicrogridParams, wind_max=root.number('wind_max'),
                      hp_cop=root.number('hp_cop'), dt=root.number('dt'),
                      periods=root.integer('periods'),
                      heat_balance=root.choice('heat_balance', ('end', 'average')), **kw)


def _scenarios(r):
    std = r.sub('rel_std')
    rel_std = tuple(std.number(q) for q in QUANTITIES)
    if min(rel_std) < 0:
        raise ConfigError(r.where('rel_std'), 'standard deviations must be nonnegative')
    pr = r.sub('prices')
    tiers = pr.raw('tiers') or []
    if not isinstance(tiers, list):
        raise ConfigError(pr.where('tiers'), 'expected a list of [first, last, price]')
    parsed = []
    for i, tier in enumerate(tiers):
        where = f'{pr.where("tiers")}[{i}]'
        if (not isinstance(tier, (list, tuple)) or len(tier) != 3
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in tier[:2])
                or isinstance(tier[2], bool) or not isinstance(tier[2], (int, float))):
            raise ConfigError(where, 'expected [first, last, price] with integer periods')
        parsed.append((tier[0], tier[1], float(tier[2])))
    prices = pr.build(PriceSchedule, tiers=tuple(parsed), base_price=pr.number('base'))
    profiles = r.raw('profiles')
    if profiles is not None and not isinstance(profiles, str):
        raise ConfigError(r.where('profiles'), 'expected a file path or null')
    seed, count = r.integer('seed'), r.integer('count')
    if seed < 0 or count < 1:
        raise ConfigError(r.path, 'seed must be nonnegative and count positive')
    return ScenarioSettings(seed=seed, count=count, rel_std=rel_std, profiles=profiles,
                            prices=prices)


def _training(r):
    st = r.build(StepsizeRule, a=r.number('stepsize_a'))
    return r.build(TrainingConfig, iterations=r.integer('iterations'),
                   window=r.integer('window'), tolerance=r.number('tolerance'),
                   rho=r.number('rho'), segments=r.integer('segments'), stepsize=st,
                   seed=r.integer('seed'), scenarios=r.integer('scenarios'),
                   batch=r.integer('batch'), stop_on_convergence=r.flag('stop_on_convergence'))


def _mpc(r):
    horizon = r.integer('horizon')
    if horizon < 1:
        raise ConfigError(r.where('horizon'), 'must be at least 1')
    return MpcSettings(horizon=horizon, forecast=r.choice('forecast', ('day-ahead', 'perfect')),
                       terminal_vfa=r.choice('terminal_vfa', ('none', 'trained')))


def parse_config(doc, source=None):
    """Validate a document already merged over the defaults."""
    root = _Reader(doc, '')
    cfg = RunConfig(params=_params(root), scenarios=_scenarios(root.sub('scenarios')),
                    training=_training(root.sub('training')), mpc=_mpc(root.sub('mpc')),
                    solver=SolverSettings(
                        method=root.sub('solver').choice('method', _LP_METHODS),
                        binary_mode=root.sub('solver').choice('binary_mode', _BINARY_MODES)),
                    source=source)
    if cfg.training.segments < 1:
        raise ConfigError('training.segments', 'must be at least 1')
    if cfg.training.scenarios < 1:
        raise ConfigError('training.scenarios', 'must be at least 1')
    return cfg


def load_config(path=None, overrides=None):
    """Read `path` (or only the defaults) and return a validated `RunConfig`.

    `overrides` is a nested dict applied last, with the same key checks as
    the file.
    """
    doc = default_document()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError('', f'config file {path} not found')
        try:
            user = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError('', f'{path}: not valid YAML ({exc})') from None
        if user is not None:
            doc = _merge(doc, user, '')
    if overrides:
        doc = _merge(doc, overrides, '')
    cfg = parse_config(doc, source=str(path) if path else None)
    if cfg.scenarios.profiles is not None and path is not None:
        prof = Path(cfg.scenarios.profiles)
        if not prof.is_absolute():
            prof = path.parent / prof
        cfg = replace(cfg, scenarios=replace(cfg.scenarios, profiles=str(prof)))
    return cfg


def _unit_doc(u):
    return {'power_min': u.power_min, 'power_max': u.power_max, 'ramp_up': u.ramp_up,
            'ramp_down': u.ramp_down, 'cost': u.cost_coefficient, 'ramp_unit': u.ramp_unit}


def dump_config(cfg):
    """Inverse of `parse_config`: a document that loads back to `cfg`."""
    p = cfg.params
    sc = cfg.scenarios
    tr = cfg.training
    doc = copy.deepcopy(default_document())
    doc['units'] = {name: _unit_doc(getattr(p, name)) for name in UNIT_NAMES}
    doc.update(wind_max=p.wind_max, hp_cop=p.hp_cop, dt=p.dt, periods=p.periods,
               heat_balance=p.heat_balance, storage=asdict(p.storage),
               penalties=asdict(p.penalties), initial=asdict(p.initial))
    doc['ccgt'] = {'arma': {'a': list(p.arma.a), 'b': list(p.arma.b),
                            'sample_interval': p.arma.sample_interval,
                            'samples_per_period': p.arma.samples_per_period},
                   'electric_map': asdict(p.electric_map)}
    doc['scenarios'] = {'seed': sc.seed, 'count': sc.count,
                        'rel_std': dict(zip(QUANTITIES, sc.rel_std)), 'profiles': sc.profiles,
                        'prices': {'base': sc.prices.base_price,
                                   'tiers': [list(t) for t in sc.prices.tiers]}}
    doc['training'] = {'iterations': tr.iterations, 'window': tr.window,
                       'tolerance': tr.tolerance, 'rho': tr.rho, 'segments': tr.segments,
                       'stepsize_a': tr.stepsize.a, 'seed': tr.seed, 'scenarios': tr.scenarios,
                       'batch': tr.batch, 'stop_on_convergence': tr.stop_on_convergence}
    doc['mpc'] = asdict(cfg.mpc)
    doc['solver'] = asdict(cfg.solver)
    return doc
