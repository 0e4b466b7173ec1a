"""Day-ahead profiles and seeded forecast-error scenarios."""
import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .model import DayAheadForecast, ExogenousSample, ForecastRow

__all__ = ['PriceSchedule', 'ScenarioSet', 'Scenario', 'default_profiles',
           'sample_errors', 'load_profiles_csv', 'save_profiles_csv',
           'QUANTITIES', 'EVALUATION_STREAM', 'TRAINING_STREAM']

QUANTITIES = ('wind', 'demand_e', 'price', 'demand_q')


@dataclass(frozen=True)
class PriceSchedule:
    """Tiered price.  Tiers are ``(first, last, price)`` with 1-based,
    inclusive period numbers; periods not covered get `base_price`."""
    tiers: tuple = ((1, 24, 35.0), (41, 60, 95.0), (73, 84, 95.0))
    base_price: float = 60.0

    def __post_init__(self):
        if self.base_price <= 0 or any(p <= 0 for _, _, p in self.tiers):
            raise ValueError('tier prices must be positive')
        spans = sorted((a, b) for a, b, _ in self.tiers)
        for (a, b), (c, _) in zip(spans, spans[1:]):
            if c <= b:
                raise ValueError('price tiers overlap')
        if any(a > b or a < 1 for a, b in spans):
            raise ValueError('bad tier bounds')

    def prices(self, periods):
        out = np.full(periods, self.base_price)
        for first, last, price in self.tiers:
            out[first - 1:min(last, periods)] = price
        return out


# (1-based period, MW) knots of the synthetic day
_DEMAND_E_KNOTS = ((1, 26.0), (16, 24.0), (28, 30.0), (36, 34.0), (44, 38.0),
                   (52, 40.0), (60, 37.0), (68, 36.0), (73, 43.0), (76, 46.0),
                   (80, 45.0), (84, 41.0), (90, 34.0), (96, 28.0))
# heat demand jumps by about 15 MW in one period several times a day, faster
# than the CCGT heat ramp, and falls back gently
_DEMAND_Q_KNOTS = ((1, 30.0), (6, 29.0), (7, 44.0), (10, 42.0), (17, 29.0), (18, 44.0),
                   (21, 42.0), (28, 31.0), (29, 46.0), (32, 44.0), (40, 34.0), (43, 34.0),
                   (44, 54.0), (46, 58.0), (52, 58.0), (56, 50.0), (60, 45.0), (62, 40.0),
                   (63, 55.0), (66, 52.0), (72, 42.0), (80, 40.0), (81, 58.0), (86, 58.0),
                   (89, 46.0), (90, 60.0), (93, 56.0), (96, 48.0))


def _knots(knots, periods):
    x, y = np.array(knots).T
    return np.interp(np.arange(1, periods + 1), x, y)


def default_profiles(params, prices=None):
    """Synthetic day-ahead forecast for ``params.periods`` periods.

    Wind stays below the turbine rating and electric demand peaks in
    periods 73-80.  Heat demand steps up by about 15 MW in a single period
    seven times, more than the CCGT heat ramp allows, and exceeds the CCGT
    plus heat-pump capacity in periods 46-52, 82-86 and 90-93.  The price
    follows `prices`.
    """
    T = params.periods
    prices = prices or PriceSchedule()
    t = np.arange(T)
    hour = t * params.dt
    wind = 2.0 + 0.9 * np.sin(2 * np.pi * (hour - 3.0) / 24.0) + 0.4 * np.sin(2 * np.pi * hour / 5.3)
    wind = np.clip(wind, 0.0, params.wind_max)
    demand_e = _knots(_DEMAND_E_KNOTS, T) + 0.8 * np.sin(2 * np.pi * t / 9.0)
    demand_q = _knots(_DEMAND_Q_KNOTS, T) + 1.2 * np.sin(2 * np.pi * t / 7.0)
    return DayAheadForecast(wind=wind, demand_e=demand_e, price=prices.prices(T),
                            demand_q=demand_q)


EVALUATION_STREAM = 0
TRAINING_STREAM = 1


@dataclass(frozen=True)
class ScenarioSet:
    """Seeded forecast-error scenarios around one day-ahead forecast.

    Scenario ``i`` of stream ``k`` is drawn from a Philox generator keyed by
    ``(seed, k * 2**32 + i)``, so its content depends on nothing else.
    Training and evaluation use different streams of the same seed.
    """
    forecast: DayAheadForecast
    rel_std: tuple = (0.10, 0.05, 0.05, 0.05)   # wind, demand_e, price, demand_q
    seed: int = 0
    count: int = 20
    stream: int = EVALUATION_STREAM

    def __post_init__(self):
        if len(self.rel_std) != 4 or min(self.rel_std) < 0:
            raise ValueError('rel_std needs four nonnegative entries')
        if self.seed < 0 or self.count < 0:
            raise ValueError('seed and count must be nonnegative')
        if not 0 <= self.stream < 2**31:
            raise ValueError('stream must be a nonnegative 31-bit integer')

    def errors(self, index):
        """Forecast errors of one scenario, shape (periods, 4)."""
        key = np.array([self.seed, (self.stream << 32) + index], dtype=np.uint64)
        bitgen = np.random.Philox(key=key)
        z = np.random.Generator(bitgen).standard_normal((len(self.forecast), 4))
        return z * np.asarray(self.rel_std) * self.forecast.as_array()

    def scenario(self, index):
        if not 0 <= index < self.count:
            raise IndexError(f'scenario {index} outside 0..{self.count - 1}')
        return Scenario(index=index, forecast=self.forecast, errors=self.errors(index))

    def __iter__(self):
        return (self.scenario(i) for i in range(self.count))

    def __len__(self):
        return self.count

    def manifest(self):
        return {'seed': self.seed, 'stream': self.stream, 'count': self.count,
                'periods': len(self.forecast), 'rel_std': dict(zip(QUANTITIES, self.rel_std))}

    def write_manifest(self, path):
        with open(path, 'w') as fh:
            json.dump(self.manifest(), fh, indent=2)
            fh.write('\n')


def sample_errors(scenarios, index, period):
    return ExogenousSample(*scenarios.errors(index)[period])


@dataclass(frozen=True)
class Scenario:
    """One realization: the forecast plus a table of errors per period."""
    index: int
    forecast: DayAheadForecast
    errors: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.forecast)

    def exogenous(self, t):
        return ExogenousSample(*(float(v) for v in self.errors[t]))

    def forecast_row(self, t):
        return self.forecast.row(t)

    @property
    def realized(self):
        return np.maximum(self.forecast.as_array() + self.errors, 0.0)

    def realized_row(self, t):
        w, de, p, dq = self.realized[t]
        return ForecastRow(t, float(w), float(de), float(p), float(dq))

    @classmethod
    def deterministic(cls, forecast, index=0):
        return cls(index=index, forecast=forecast, errors=np.zeros((len(forecast), 4)))


def save_profiles_csv(forecast, path):
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh)
        w.writerow(('period',) + QUANTITIES)
        for t in range(len(forecast)):
            w.writerow([t] + [repr(v) for v in forecast.row(t)[1:]])


def load_profiles_csv(path):
    """Read a profile table with header ``period,wind,demand_e,price,demand_q``."""
    with open(path, newline='') as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f'{path}: no profile rows')
    missing = set(('period',) + QUANTITIES) - set(rows[0])
    if missing:
        raise ValueError(f'{path}: missing columns {sorted(missing)}')
    rows.sort(key=lambda r: int(r['period']))
    if [int(r['period']) for r in rows] != list(range(len(rows))):
        raise ValueError(f'{path}: periods must run 0..{len(rows) - 1}')
    cols = {q: np.array([float(r[q]) for r in rows]) for q in QUANTITIES}
    return DayAheadForecast(**cols)
