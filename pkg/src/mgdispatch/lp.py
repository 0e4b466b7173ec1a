"""Dense linear programs and a bounded-variable primal simplex.

`solve_lp` minimizes ``c @ x + offset`` subject to row constraints
``A[i] @ x (<=|=|>=) b[i]`` and ``lb <= x <= ub``.  The built-in solver is a
two-phase tableau simplex that keeps nonbasic variables at either bound, so
variable bounds never become rows.  Entering variables follow Dantzig's
largest-reduced-cost rule; after a run of degenerate pivots the solver
switches to Bland's smallest-index rule until progress resumes, which rules
out cycling.  Large programs can be routed to HiGHS through scipy.
"""
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

__all__ = ['LinearProgram', 'LpSolution', 'LpBuilder', 'solve_lp',
           'simplex', 'write_lp_file', 'read_lp_file',
           'OPTIMAL', 'INFEASIBLE', 'UNBOUNDED', 'ITERATION_LIMIT',
           'NUMERICAL_FAILURE']

OPTIMAL = 'optimal'
INFEASIBLE = 'infeasible'
UNBOUNDED = 'unbounded'
ITERATION_LIMIT = 'iteration_limit'
NUMERICAL_FAILURE = 'numerical_failure'

SENSES = ('<', '=', '>')

# rows above this go to HiGHS when method='auto'
AUTO_SIMPLEX_MAX_ROWS = 400


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    sense: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    offset: float = 0.0
    var_names: list = field(default_factory=list)
    row_names: list = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        m = self.A.shape[0]
        self.b = np.asarray(self.b, dtype=float).reshape(m)
        self.sense = np.asarray(self.sense, dtype='<U1').reshape(m)
        self.lb = np.asarray(self.lb, dtype=float).reshape(n)
        self.ub = np.asarray(self.ub, dtype=float).reshape(n)
        if not set(self.sense.tolist()) <= set(SENSES):
            raise ValueError(f'row senses must be among {SENSES}')
        if np.any(self.lb > self.ub):
            bad = int(np.argmax(self.lb > self.ub))
            raise ValueError(f'lower bound above upper bound for variable '
                             f'{self.var_name(bad)}')
        if not self.var_names:
            self.var_names = [f'x{j}' for j in range(n)]
        if not self.row_names:
            self.row_names = [f'r{i}' for i in range(m)]
        if len(self.var_names) != n or len(self.row_names) != m:
            raise ValueError('name annotations do not match dimensions')

    @property
    def n_vars(self):
        return self.c.size

    @property
    def n_rows(self):
        return self.A.shape[0]

    def var_name(self, j):
        return self.var_names[j] if self.var_names else f'x{j}'

    def objective(self, x):
        return float(self.c @ x + self.offset)

    def max_violation(self, x):
        """Largest constraint or bound violation of a point."""
        x = np.asarray(x, dtype=float)
        viol = [0.0]
        if self.n_rows:
            lhs = self.A @ x
            r = lhs - self.b
            viol.append(np.max(np.where(self.sense == '<', r, 0.0), initial=0.0))
            viol.append(np.max(np.where(self.sense == '>', -r, 0.0), initial=0.0))
            viol.append(np.max(np.where(self.sense == '=', np.abs(r), 0.0), initial=0.0))
        viol.append(np.max(self.lb - x, initial=0.0))
        viol.append(np.max(x - self.ub, initial=0.0))
        return float(max(viol))


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray
    iterations: int = 0
    message: str = ''

    @property
    def optimal(self):
        return self.status == OPTIMAL


class LpBuilder:
    """Incremental construction of a `LinearProgram` by variable name."""

    def __init__(self):
        self._names = []
        self._index = {}
        self._lb = []
        self._ub = []
        self._c = []
        self._rows = []
        self._b = []
        self._sense = []
        self._row_names = []
        self.offset = 0.0

    def add_var(self, name, lb=0.0, ub=np.inf, cost=0.0):
        if name in self._index:
            raise ValueError(f'duplicate variable {name}')
        self._index[name] = len(self._names)
        self._names.append(name)
        self._lb.append(lb)
        self._ub.append(ub)
        self._c.append(cost)
        return self._index[name]

    def index(self, name):
        return self._index[name]

    def add_cost(self, name, cost):
        self._c[self._index[name]] += cost

    def bounds(self, name):
        j = self._index[name]
        return self._lb[j], self._ub[j]

    def set_bounds(self, name, lb=None, ub=None):
        j = self._index[name]
        if lb is not None:
            self._lb[j] = lb
        if ub is not None:
            self._ub[j] = ub

    def add_row(self, name, coefs, sense, rhs):
        """Add ``sum(coef * var) sense rhs`` with `coefs` a {var name: coef} map."""
        if sense not in SENSES:
            raise ValueError(f'bad sense {sense!r}')
        self._rows.append({self._index[k]: float(v) for k, v in coefs.items()})
        self._sense.append(sense)
        self._b.append(float(rhs))
        self._row_names.append(name)

    def build(self):
        n = len(self._names)
        A = np.zeros((len(self._rows), n))
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                A[i, j] += v
        return LinearProgram(c=np.array(self._c, dtype=float), A=A,
                             b=np.array(self._b), sense=np.array(self._sense, dtype='<U1'),
                             lb=np.array(self._lb, dtype=float),
                             ub=np.array(self._ub, dtype=float), offset=self.offset,
                             var_names=list(self._names), row_names=list(self._row_names))


def solve_lp(lp, method='auto', **options):
    """Solve a linear program.

    Parameters
    ----------
    lp : LinearProgram
    method : {'auto', 'simplex', 'highs'}
        'auto' uses the built-in simplex for programs with at most
        ``AUTO_SIMPLEX_MAX_ROWS`` rows and HiGHS above that.
    **options
        Passed to `simplex` (``max_iter``, ``bland_after``, ``tol``).

    Returns
    -------
    LpSolution
    """
    if method == 'auto':
        method = 'simplex' if lp.n_rows <= AUTO_SIMPLEX_MAX_ROWS else 'highs'
    if method == 'simplex':
        return simplex(lp, **options)
    if method == 'highs':
        return _solve_highs(lp)
    raise ValueError(f'unknown LP method {method!r}')


def _solve_highs(lp):
    n = lp.n_vars
    kw = {}
    ub_rows = lp.sense != '='
    if np.any(ub_rows):
        sign = np.where(lp.sense[ub_rows] == '>', -1.0, 1.0)
        kw['A_ub'] = sparse.csr_matrix(lp.A[ub_rows] * sign[:, None])
        kw['b_ub'] = lp.b[ub_rows] * sign
    if np.any(~ub_rows):
        kw['A_eq'] = sparse.csr_matrix(lp.A[~ub_rows])
        kw['b_eq'] = lp.b[~ub_rows]
    bounds = np.column_stack([lp.lb, lp.ub])
    bounds = [(None if np.isinf(l) else l, None if np.isinf(u) else u) for l, u in bounds]
    try:
        res = linprog(lp.c, bounds=bounds, method='highs', **kw)
    except ValueError as exc:
        return LpSolution(NUMERICAL_FAILURE, np.nan, np.full(n, np.nan), 0, str(exc))
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(
        res.status, NUMERICAL_FAILURE)
    if status != OPTIMAL:
        return LpSolution(status, np.nan, np.full(n, np.nan), int(res.nit), res.message)
    x = np.clip(res.x, lp.lb, lp.ub)
    return LpSolution(OPTIMAL, lp.objective(x), x, int(res.nit), res.message)


def _standard_form(lp):
    """Shift/flip/split variables so every column lives in ``[0, u]``.

    Returns the column map back to the original variables, the standard
    matrix with slack columns appended, the right-hand side, costs, upper
    bounds, and for each row the index of a slack usable as an initial
    basic column (or -1).
    """
    n = lp.n_vars
    cols_orig, cols_sign, upper = [], [], []
    shift = np.zeros(n)
    for j in range(n):
        l, u = lp.lb[j], lp.ub[j]
        if np.isfinite(l):
            shift[j] = l
            cols_orig.append(j)
            cols_sign.append(1.0)
            upper.append(u - l)
        elif np.isfinite(u):
            shift[j] = u
            cols_orig.append(j)
            cols_sign.append(-1.0)
            upper.append(np.inf)
        else:
            cols_orig += [j, j]
            cols_sign += [1.0, -1.0]
            upper += [np.inf, np.inf]
    cols_orig = np.array(cols_orig, dtype=int)
    cols_sign = np.array(cols_sign)
    m = lp.n_rows
    A_struct = lp.A[:, cols_orig] * cols_sign
    b = lp.b - lp.A @ shift
    c = lp.c[cols_orig] * cols_sign

    ineq = np.flatnonzero(lp.sense != '=')
    n_s = len(ineq)
    S = np.zeros((m, n_s))
    S[ineq, np.arange(n_s)] = np.where(lp.sense[ineq] == '<', 1.0, -1.0)
    A_std = np.hstack([A_struct, S])
    c_std = np.concatenate([c, np.zeros(n_s)])
    u_std = np.concatenate([upper, np.full(n_s, np.inf)])

    flip = b < 0
    A_std[flip] *= -1.0
    b = np.abs(b)
    slack_basic = np.full(m, -1)
    n_struct = len(cols_orig)
    for k, i in enumerate(ineq):
        if A_std[i, n_struct + k] > 0:
            slack_basic[i] = n_struct + k
    return cols_orig, cols_sign, shift, A_std, b, c_std, u_std, slack_basic


def simplex(lp, max_iter=None, bland_after=50, tol=1e-9):
    """Two-phase bounded-variable primal simplex on a dense tableau.

    The pivoting sequence is fully determined by the input, so identical
    programs give bit-identical solutions.

    Parameters
    ----------
    lp : LinearProgram
    max_iter : int, optional
        Pivot/bound-flip budget; defaults to ``50 * (rows + columns)``.
    bland_after : int
        Consecutive degenerate iterations tolerated under Dantzig's rule
        before switching to Bland's rule.
    tol : float
        Pivot, optimality and feasibility tolerance.
    """
    n = lp.n_vars
    fail_x = np.full(n, np.nan)
    try:
        (cols_orig, cols_sign, shift, A_std, b, c_std, u_std,
         slack_basic) = _standard_form(lp)
    except (ValueError, FloatingPointError) as exc:
        return LpSolution(NUMERICAL_FAILURE, np.nan, fail_x, 0, str(exc))
    m, n_std = A_std.shape

    need_art = np.flatnonzero(slack_basic < 0)
    n_art = len(need_art)
    art = np.zeros((m, n_art))
    art[need_art, np.arange(n_art)] = 1.0
    T = np.hstack([A_std, art])
    T0 = T.copy()
    N = n_std + n_art
    upper = np.concatenate([u_std, np.full(n_art, np.inf)])
    basis = slack_basic.copy()
    basis[need_art] = n_std + np.arange(n_art)
    at_upper = np.zeros(N, dtype=bool)
    beta = b.copy()

    cost1 = np.zeros(N)
    cost1[n_std:] = 1.0
    cost2 = np.concatenate([c_std, np.zeros(n_art)])
    d1 = cost1 - cost1[basis] @ T
    d2 = cost2 - cost2[basis] @ T
    if max_iter is None:
        max_iter = 50 * (m + N) + 100

    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    iterations = 0

    def run(d_main, d_other, allowed):
        nonlocal T, beta, iterations
        degenerate_run = 0
        is_basic = np.zeros(N, dtype=bool)
        while True:
            is_basic[:] = False
            is_basic[basis] = True
            room = allowed & ~is_basic & (upper > 0)
            cand_up = room & ~at_upper & (d_main < -tol)
            cand_dn = room & at_upper & (d_main > tol)
            cand = cand_up | cand_dn
            if not np.any(cand):
                return OPTIMAL
            if iterations >= max_iter:
                return ITERATION_LIMIT
            use_bland = degenerate_run >= bland_after
            if use_bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d_main), -1.0)
                j = int(np.argmax(score))
            s = 1.0 if cand_up[j] else -1.0
            col = T[:, j]
            # basic values move as beta - s * theta * col
            rate = s * col
            theta = upper[j]
            leave, leave_to_upper = -1, False
            with np.errstate(divide='ignore', invalid='ignore'):
                dec = rate > tol
                lim_lo = np.where(dec, beta / np.where(dec, rate, 1.0), np.inf)
                inc = (rate < -tol) & np.isfinite(upper[basis])
                lim_hi = np.where(inc, (upper[basis] - beta) / np.where(inc, -rate, 1.0),
                                  np.inf)
            lim = np.minimum(lim_lo, lim_hi)
            lim = np.maximum(lim, 0.0)
            if lim.size:
                best = float(np.min(lim))
                if best < theta:
                    ties = np.flatnonzero(lim <= best + tol * max(1.0, abs(best)))
                    if use_bland:
                        r = int(ties[np.argmin(basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(col[ties]))])
                    theta = best
                    leave = r
                    leave_to_upper = lim_hi[r] <= lim_lo[r]
            if not np.isfinite(theta):
                return UNBOUNDED
            iterations += 1
            degenerate_run = degenerate_run + 1 if theta <= tol else 0
            beta = beta - s * theta * col
            if leave < 0:
                at_upper[j] = not at_upper[j]
                continue
            entering_value = (upper[j] - theta) if at_upper[j] else theta
            old = basis[leave]
            at_upper[old] = bool(leave_to_upper)
            at_upper[j] = False
            piv = T[leave, j]
            if abs(piv) < tol:
                raise FloatingPointError('pivot element too small')
            T[leave] /= piv
            col_j = T[:, j].copy()
            col_j[leave] = 0.0
            T -= np.outer(col_j, T[leave])
            d_main -= d_main[j] * T[leave]
            d_other -= d_other[j] * T[leave]
            basis[leave] = j
            beta[leave] = entering_value

    try:
        with np.errstate(over='raise', invalid='raise'):
            status = OPTIMAL
            if n_art:
                allowed = np.ones(N, dtype=bool)
                status = run(d1, d2, allowed)
                if status != OPTIMAL:
                    return LpSolution(status if status == ITERATION_LIMIT else NUMERICAL_FAILURE,
                                      np.nan, fail_x, iterations)
                art_value = np.sum(beta[basis >= n_std])
                if art_value > 1e-7 * scale:
                    return LpSolution(INFEASIBLE, np.nan, fail_x, iterations,
                                      f'phase 1 residual {art_value:.3g}')
                upper[n_std:] = 0.0
            allowed = np.ones(N, dtype=bool)
            allowed[n_std:] = False
            status = run(d2, d1, allowed)
    except FloatingPointError as exc:
        return LpSolution(NUMERICAL_FAILURE, np.nan, fail_x, iterations, str(exc))
    if status != OPTIMAL:
        return LpSolution(status, np.nan, fail_x, iterations)

    y = np.where(at_upper, upper, 0.0)
    y[basis] = beta
    y = _polish(T0, b, basis, at_upper, upper, y)
    y = np.clip(y[:n_std], 0.0, u_std)
    x = shift.copy()
    np.add.at(x, cols_orig, cols_sign * y[:len(cols_orig)])
    x = np.clip(x, lp.lb, lp.ub)
    return LpSolution(OPTIMAL, lp.objective(x), x, iterations)


def _polish(full, b, basis, at_upper, upper, y):
    """Recompute basic values from the original rows to shed pivot drift."""
    nonbasic = np.ones(full.shape[1], dtype=bool)
    nonbasic[basis] = False
    rhs = b - full[:, nonbasic] @ np.where(at_upper, upper, 0.0)[nonbasic]
    try:
        xb = np.linalg.solve(full[:, basis], rhs)
    except np.linalg.LinAlgError:
        return y
    out = y.copy()
    out[basis] = xb
    return out


def _fmt_terms(coefs, names):
    parts = []
    for j in np.flatnonzero(coefs):
        v = coefs[j]
        parts.append(f"{'-' if v < 0 else '+'} {abs(v):.17g} {names[j]}")
    if not parts:
        return '0 ' + names[0]
    s = ' '.join(parts)
    return s[2:] if s.startswith('+ ') else s


def write_lp_file(lp, path):
    """Write the program in CPLEX LP text format.

    Layout: one ``obj:`` line, one line per constraint under ``Subject To``,
    one line per variable under ``Bounds``.  The constant objective offset is
    written as a comment since the format has no portable constant term.
    """
    names = [re.sub(r'[^A-Za-z0-9_.]', '_', v) for v in lp.var_names]
    rows = [re.sub(r'[^A-Za-z0-9_.]', '_', r) for r in lp.row_names]
    op = {'<': '<=', '=': '=', '>': '>='}
    lines = [f'\\ objective offset {lp.offset:.17g}', 'Minimize',
             f' obj: {_fmt_terms(lp.c, names)}', 'Subject To']
    for i in range(lp.n_rows):
        lines.append(f' {rows[i]}: {_fmt_terms(lp.A[i], names)} '
                     f'{op[lp.sense[i]]} {lp.b[i]:.17g}')
    lines.append('Bounds')
    for j, name in enumerate(names):
        lo, hi = lp.lb[j], lp.ub[j]
        lo_s = '-inf' if np.isneginf(lo) else f'{lo:.17g}'
        hi_s = '+inf' if np.isposinf(hi) else f'{hi:.17g}'
        lines.append(f' {lo_s} <= {name} <= {hi_s}')
    lines.append('End')
    with open(path, 'w') as fh:
        fh.write('\n'.join(lines) + '\n')


_TERM = re.compile(r'([+-]?)\s*([0-9.eE+-]+)\s+([A-Za-z_][A-Za-z0-9_.]*)')


def read_lp_file(path):
    """Read back a file written by `write_lp_file`."""
    with open(path) as fh:
        text = fh.read().splitlines()
    offset = 0.0
    section = None
    obj_terms, rows, bounds = '', [], []
    for line in text:
        s = line.strip()
        if s.startswith('\\'):
            m = re.match(r'\\ objective offset (\S+)', s)
            if m:
                offset = float(m.group(1))
            continue
        if s in ('Minimize', 'Subject To', 'Bounds', 'End'):
            section = s
            continue
        if section == 'Minimize':
            obj_terms = s.split(':', 1)[1]
        elif section == 'Subject To':
            name, rest = s.split(':', 1)
            m = re.match(r'(.*)\s(<=|>=|=)\s(\S+)$', rest.strip())
            rows.append((name.strip(), m.group(1), m.group(2), float(m.group(3))))
        elif section == 'Bounds':
            lo, name, hi = re.match(r'(\S+) <= (\S+) <= (\S+)', s).groups()
            bounds.append((name, float(lo), float(hi)))
    names = [b[0] for b in bounds]
    index = {v: j for j, v in enumerate(names)}

    def parse(expr):
        vec = np.zeros(len(names))
        for sign, val, var in _TERM.findall(expr):
            vec[index[var]] += (-1.0 if sign == '-' else 1.0) * float(val)
        return vec

    sense_map = {'<=': '<', '=': '=', '>=': '>'}
    A = np.array([parse(r[1]) for r in rows]).reshape(len(rows), len(names))
    return LinearProgram(c=parse(obj_terms), A=A, b=[r[3] for r in rows],
                         sense=[sense_map[r[2]] for r in rows],
                         lb=[b[1] for b in bounds], ub=[b[2] for b in bounds],
                         offset=offset, var_names=names,
                         row_names=[r[0] for r in rows])
