"""CCGT heat dynamics.

The plant's heat output follows a 4th-order ARMA difference equation driven
by the gas flow with a 3-sample dead time, sampled every 50 s.  It is carried
in the dispatch state as a 7-dimensional companion-form vector ``x`` whose
components are delayed values of an auxiliary sequence ``z``::

    z(k+1) = a1 z(k) + a2 z(k-1) + a3 z(k-2) + a4 z(k-3) + g(k)
    Q(k)   = b1 z(k-3) + b2 z(k-4) + b3 z(k-5) + b4 z(k-6)

with ``x = (z(k-6), ..., z(k))``.  Gas is held constant over a dispatch
period, so one period is ``samples_per_period`` single steps, which
`build_period_lift` collapses into one affine map.
"""
from dataclasses import dataclass

import numpy as np

__all__ = ['ArmaParams', 'PeriodLift', 'AugmentedCcgtState', 'STATE_DIM',
           'arma_reference', 'step', 'heat_output', 'build_period_lift',
           'apply_lift', 'intra_period_trace', 'shift_output',
           'steady_state', 'simulate_samples', 'simulate_reference']

STATE_DIM = 7

# The augmented state is a plain length-7 float array.
AugmentedCcgtState = np.ndarray


@dataclass(frozen=True)
class ArmaParams:
    """ARMA coefficients of the CCGT heat response.

    ``a`` are the autoregressive coefficients on past heat output, ``b`` the
    coefficients (MW per unit gas flow) on lagged gas input.
    """
    a: tuple = (1.6301, -0.6292, -0.3266, 0.2570)
    b: tuple = (0.2087, 0.06311, 0.3656, 0.4031)
    sample_interval: float = 50.0       # s
    samples_per_period: int = 18

    def __post_init__(self):
        if len(self.a) != 4 or len(self.b) != 4:
            raise ValueError('ARMA model needs exactly 4 AR and 4 MA coefficients')
        if self.samples_per_period < 1:
            raise ValueError('samples_per_period must be positive')
        object.__setattr__(self, 'a', tuple(float(v) for v in self.a))
        object.__setattr__(self, 'b', tuple(float(v) for v in self.b))
        rho = spectral_radius(self.step_matrix())
        if not rho < 1.0:
            raise ValueError(f'ARMA model is unstable (spectral radius {rho:.6g})')

    @property
    def period_seconds(self):
        return self.sample_interval * self.samples_per_period

    @property
    def gain(self):
        """Steady-state heat per unit of constant gas flow."""
        return sum(self.b) / (1.0 - sum(self.a))

    def step_matrix(self):
        a1, a2, a3, a4 = self.a
        A = np.zeros((STATE_DIM, STATE_DIM))
        A[:-1, 1:] = np.eye(STATE_DIM - 1)
        A[-1, 3:] = (a4, a3, a2, a1)
        return A

    def input_vector(self):
        B = np.zeros(STATE_DIM)
        B[-1] = 1.0
        return B

    def output_row(self):
        b1, b2, b3, b4 = self.b
        return np.array([b4, b3, b2, b1, 0.0, 0.0, 0.0])


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


@dataclass(frozen=True)
class PeriodLift:
    """Affine map from the state at a period start to the period end.

    ``A_delta @ x + B_delta * g`` is the state after ``samples_per_period``
    steps with constant gas ``g``.  ``A_mean``/``B_mean`` give the mean of
    the states after steps 1..N, used when the heat balance is written on
    the period-average output.
    """
    A_delta: np.ndarray
    B_delta: np.ndarray
    A_mean: np.ndarray
    B_mean: np.ndarray
    output: np.ndarray
    arma: ArmaParams

    @property
    def heat_per_gas(self):
        """End-of-period heat gained per unit gas, from a zero state."""
        return float(self.output @ self.B_delta)


def arma_reference(heat_history, gas_history, gas_now=None, params=None):
    """Next heat output by direct evaluation of the difference equation.

    Parameters
    ----------
    heat_history : sequence of 4 floats
        ``Q(k-1), Q(k-2), Q(k-3), Q(k-4)``, most recent first.
    gas_history : sequence of 7 floats
        ``g(k-1), ..., g(k-7)``, most recent first.  Only lags 4..7 enter.
    gas_now : float, optional
        ``g(k)``; accepted for interface symmetry, it has no effect because
        of the dead time.
    params : ArmaParams, optional

    Returns
    -------
    float
        ``Q(k) = sum_m a_m Q(k-m) + b_m g(k-m-3)``.
    """
    params = params or ArmaParams()
    heat_history = np.asarray(heat_history, dtype=float)
    gas_history = np.asarray(gas_history, dtype=float)
    if heat_history.shape != (4,) or gas_history.shape != (7,):
        raise ValueError('need 4 heat lags and 7 gas lags')
    # g(k-m-3) for m=1..4 sits at position m+2 of the most-recent-first list
    lagged_gas = gas_history[3:7]
    return float(np.dot(params.a, heat_history) + np.dot(params.b, lagged_gas))


def step(state, gas, params=None):
    """Advance the augmented state by one 50-second sample."""
    params = params or ArmaParams()
    x = np.asarray(state, dtype=float)
    a1, a2, a3, a4 = params.a
    nxt = np.empty(STATE_DIM)
    nxt[:-1] = x[1:]
    nxt[-1] = a4 * x[3] + a3 * x[4] + a2 * x[5] + a1 * x[6] + gas
    return nxt


def heat_output(state, params=None):
    params = params or ArmaParams()
    x = np.asarray(state, dtype=float)
    b1, b2, b3, b4 = params.b
    return float(b4 * x[0] + b3 * x[1] + b2 * x[2] + b1 * x[3])


def build_period_lift(params=None):
    """Compose the single-sample dynamics over one dispatch period.

    The result is checked against explicit step-by-step composition.
    """
    params = params or ArmaParams()
    A = params.step_matrix()
    B = params.input_vector()
    n = params.samples_per_period

    A_pow = np.eye(STATE_DIM)
    B_acc = np.zeros(STATE_DIM)
    A_sum = np.zeros((STATE_DIM, STATE_DIM))
    B_sum = np.zeros(STATE_DIM)
    for _ in range(n):
        # state after one more step: A^k x + sum_{i<k} A^i B g
        B_acc = A @ B_acc + B
        A_pow = A @ A_pow
        A_sum += A_pow
        B_sum += B_acc
    lift = PeriodLift(A_delta=A_pow, B_delta=B_acc, A_mean=A_sum / n,
                      B_mean=B_sum / n, output=params.output_row(), arma=params)

    probe = np.linspace(-1.0, 1.0, STATE_DIM)
    x = probe.copy()
    for _ in range(n):
        x = step(x, 0.5, params)
    if not np.allclose(apply_lift(lift, probe, 0.5), x, rtol=1e-10, atol=1e-10):
        raise RuntimeError('period lift disagrees with step composition')
    return lift


def apply_lift(lift, state, gas):
    return lift.A_delta @ np.asarray(state, dtype=float) + lift.B_delta * gas


def intra_period_trace(state, gas, params=None):
    """Heat output after each sample of one period at constant gas.

    Returns
    -------
    trace : ndarray, shape (samples_per_period,)
    end_state : ndarray, shape (7,)
    """
    params = params or ArmaParams()
    x = np.asarray(state, dtype=float)
    trace = np.empty(params.samples_per_period)
    for k in range(params.samples_per_period):
        x = step(x, gas, params)
        trace[k] = heat_output(x, params)
    return trace, x


def shift_output(state, delta_heat, params=None):
    """Uniformly shift the state so that heat output moves by `delta_heat`."""
    params = params or ArmaParams()
    total_b = sum(params.b)
    if total_b == 0.0:
        raise ValueError('sum of MA coefficients is zero; output cannot be shifted')
    return np.asarray(state, dtype=float) + delta_heat / total_b


def steady_state(heat, params=None):
    """Augmented state in equilibrium at the given heat output.

    This is the fixed point under constant gas ``heat / gain``; every
    component equals ``heat / sum(b)``.
    """
    params = params or ArmaParams()
    return np.full(STATE_DIM, heat / sum(params.b))


def simulate_samples(state, gas_samples, params=None):
    """Heat output after each step for an arbitrary per-sample gas sequence."""
    params = params or ArmaParams()
    x = np.asarray(state, dtype=float)
    out = np.empty(len(gas_samples))
    for k, g in enumerate(gas_samples):
        x = step(x, g, params)
        out[k] = heat_output(x, params)
    return out


def simulate_reference(heat_init, gas_init, gas_samples, params=None):
    """Run the difference equation directly.

    Parameters
    ----------
    heat_init : sequence of 4 floats
        ``Q(-1), ..., Q(-4)``, most recent first.
    gas_init : sequence of 7 floats
        ``g(-1), ..., g(-7)``, most recent first.
    gas_samples : sequence
        ``g(0), g(1), ...``.

    Returns
    -------
    ndarray
        ``Q(0), Q(1), ...``.  Note ``Q(k)`` depends on ``g(k-4)`` and older,
        so the last three inputs do not reach the returned outputs.
    """
    params = params or ArmaParams()
    heat = list(np.asarray(heat_init, dtype=float))
    gas = list(np.asarray(gas_init, dtype=float))
    out = np.empty(len(gas_samples))
    for k, g in enumerate(gas_samples):
        q = arma_reference(heat[:4], gas[:7], g, params)
        out[k] = q
        heat.insert(0, q)
        gas.insert(0, float(g))
    return out
