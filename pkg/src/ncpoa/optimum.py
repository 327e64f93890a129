"""Socially optimal allocations for the three surplus-maximization problems.

The structure is the same everywhere: at an optimum every active user's
marginal utility equals the marginal cost of the load it creates, so the
optimum is the fixed point of a scalar, monotone demand map in the total
load q.  All-linear instances short-circuit to closed forms; the pair of
coding users in problem 2 collapses (their rates are equal at optimality)
into a single pseudo-user whose marginal is the sum of the pair's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from . import model
from .model import FlowAllocation, Linear, Scenario
from .numerics import SEARCH_CAP, decreasing_root

#: Relative width of the band in which a linear slope counts as tied with
#: the market-clearing price (the flat marginal makes the demand set-valued
#: there; tied users split the residual load equally).
TIE_BAND = 1e-7

_ZTOL = 1e-12


class Method(str, Enum):
    CLOSED_FORM_LINEAR = "closed_form_linear"
    FIXED_POINT = "fixed_point"
    COORDINATE_ASCENT = "coordinate_ascent"


@dataclass(frozen=True)
class OptimumResult:
    profile: object
    surplus: float
    method: Method
    kkt_residual: float


class ConvergenceError(RuntimeError):
    """Coordinate ascent ran out of sweeps; carries the best iterate found."""

    def __init__(self, message: str, best: OptimumResult):
        super().__init__(message)
        self.best = best


def _require_valid(s: Scenario, need_side: bool | None = None):
    bad = model.validate_scenario(s)
    if bad:
        raise ValueError("invalid scenario: " + "; ".join(bad))
    if need_side is True and s.side is None:
        raise ValueError("this problem requires side links in the scenario")
    if need_side is False and s.side is not None:
        raise ValueError("this problem is defined for scenarios without side links")


def _demand_upper(u, m: float) -> float:
    """Demand at marginal price m, upper envelope: linear ties count as +inf."""
    if m <= 0.0:
        return math.inf
    if isinstance(u, Linear):
        return math.inf if u.gamma >= m else 0.0
    try:
        return (m / u.scale) ** (-1.0 / u.alpha)
    except OverflowError:
        return math.inf


def _pair_marginal(u1, uN, t: float) -> float:
    return u1.marginal(t) + uN.marginal(t)


def _pair_demand_upper(u1, uN, m: float) -> float:
    if m <= 0.0:
        return math.inf
    if isinstance(u1, Linear) and isinstance(uN, Linear):
        return math.inf if u1.gamma + uN.gamma >= m else 0.0
    t = decreasing_root(lambda t: _pair_marginal(u1, uN, t) - m)
    return math.inf if t >= SEARCH_CAP else t


def _tie_split(q_star: float, entries) -> dict:
    """Resolve linear ties at the clearing price.

    ``entries`` maps key -> (demand or None); None marks a tied linear
    entry.  The residual load q* - sum(known demands) is split equally
    among the ties.
    """
    known = sum(v for v in entries.values() if v is not None)
    ties = [k for k, v in entries.items() if v is None]
    out = {k: v for k, v in entries.items() if v is not None}
    if ties:
        share = max(q_star - known, 0.0) / len(ties)
        for k in ties:
            out[k] = share
    return out


def solve_p1(s: Scenario) -> OptimumResult:
    """Maximize sum of utilities minus (a/2) * (total load)^2.

    Bisection on total load q: each user's demand at price a*q is
    non-increasing in q, so sum(demand) - q has a unique sign change.
    """
    _require_valid(s)
    if s.is_linear():
        return _p1_linear(s)

    a = s.a

    def excess(q):
        return sum(_demand_upper(u, a * q) for u in s.utilities) - q

    q_star = decreasing_root(excess)
    entries = {}
    band = TIE_BAND * max(1.0, a * q_star)
    for i, u in enumerate(s.utilities):
        if isinstance(u, Linear):
            if u.gamma < a * q_star - band:
                entries[i] = 0.0
            else:
                entries[i] = None  # tied (or pinned) at the clearing price
        else:
            entries[i] = _demand_upper(u, a * q_star)
    rates = _tie_split(q_star, entries)
    x = tuple(rates[i] for i in range(s.n_users))
    return OptimumResult(x, model.surplus(1, s, x), Method.FIXED_POINT, _p1_residual(s, x))


def _p1_linear(s: Scenario) -> OptimumResult:
    gammas = s.gammas()
    gmax = max(gammas)
    tied = [i for i, g in enumerate(gammas) if g >= gmax * (1.0 - 1e-12)]
    q = gmax / s.a
    x = [0.0] * s.n_users
    for i in tied:
        x[i] = q / len(tied)
    x = tuple(x)
    return OptimumResult(x, model.surplus(1, s, x), Method.CLOSED_FORM_LINEAR,
                         _p1_residual(s, x))


def _p1_residual(s: Scenario, x) -> float:
    price = s.a * model.routed_load(x)
    r = 0.0
    for u, t in zip(s.utilities, x):
        m = u.marginal(t)
        r = max(r, abs(m - price) if t > _ZTOL else max(0.0, m - price))
    return r


def solve_p2(s: Scenario) -> OptimumResult:
    """Problem-2 optimum with the pair's rates tied together.

    The pair provably holds equal rates at optimality, so it enters the
    load fixed point as one pseudo-user with marginal U0' + UN'.  For
    all-linear instances the whole load sigma/a sits on the argmax of
    {gamma_mid ..., gamma_0 + gamma_N} and the surplus is sigma^2/(2a).
    """
    _require_valid(s, need_side=False)
    if s.is_linear():
        return _p2_linear(s)

    a = s.a
    mids = s.utilities[1:-1]
    u1, uN = s.utilities[0], s.utilities[-1]

    def excess(q):
        total = _pair_demand_upper(u1, uN, a * q)
        for u in mids:
            total += _demand_upper(u, a * q)
        return total - q

    q_star = decreasing_root(excess)
    band = TIE_BAND * max(1.0, a * q_star)
    entries = {}
    for i, u in enumerate(mids, start=1):
        if isinstance(u, Linear):
            entries[i] = 0.0 if u.gamma < a * q_star - band else None
        else:
            entries[i] = _demand_upper(u, a * q_star)
    if isinstance(u1, Linear) and isinstance(uN, Linear):
        entries["pair"] = 0.0 if u1.gamma + uN.gamma < a * q_star - band else None
    else:
        entries["pair"] = _pair_demand_upper(u1, uN, a * q_star)
    rates = _tie_split(q_star, entries)
    t = rates["pair"]
    x = tuple([t] + [rates[i] for i in range(1, s.n_users - 1)] + [t])
    return OptimumResult(x, model.surplus(2, s, x), Method.FIXED_POINT, _p2_residual(s, x))


def _p2_linear(s: Scenario) -> OptimumResult:
    gammas = s.gammas()
    candidates = [("pair", gammas[0] + gammas[-1])]
    candidates += [(i, gammas[i]) for i in range(1, s.n_users - 1)]
    sigma = max(v for _, v in candidates)
    tied = [k for k, v in candidates if v >= sigma * (1.0 - 1e-12)]
    share = sigma / s.a / len(tied)
    t = share if "pair" in tied else 0.0
    x = [0.0] * s.n_users
    x[0] = x[-1] = t
    for k in tied:
        if k != "pair":
            x[k] = share
    x = tuple(x)
    return OptimumResult(x, model.surplus(2, s, x), Method.CLOSED_FORM_LINEAR,
                         _p2_residual(s, x))


def _p2_residual(s: Scenario, x) -> float:
    price = s.a * model.coded_load(x)
    r = 0.0
    for u, t in zip(s.utilities[1:-1], x[1:-1]):
        m = u.marginal(t)
        r = max(r, abs(m - price) if t > _ZTOL else max(0.0, m - price))
    t = x[0]
    m = _pair_marginal(s.utilities[0], s.utilities[-1], t)
    r = max(r, abs(m - price) if t > _ZTOL else max(0.0, m - price))
    return r


def linear_sigma(s: Scenario) -> float:
    """max{gamma_mid..., gamma_0 + gamma_N}: the slope that carries the load."""
    gammas = s.gammas()
    return max([gammas[0] + gammas[-1]] + list(gammas[1:-1]))


def solve_p3_linear(s: Scenario) -> OptimumResult:
    """Closed-form problem-3 optimum for all-linear utilities.

    With gmax the largest slope and M its argmax set, the optimum is one
    of three regimes: everything coded, coded plus routed load on the
    argmax users, or no coding at all.  Adjacent regimes agree on their
    shared boundary, so boundary instances may take either branch.
    """
    _require_valid(s, need_side=True)
    if not s.is_linear():
        raise ValueError("solve_p3_linear requires linear utilities")
    gammas = s.gammas()
    a, a1, aN = s.a, s.side.a1, s.side.aN
    gmax = max(gammas)
    tied = [i for i, g in enumerate(gammas) if g >= gmax * (1.0 - 1e-12)]
    m_size = len(tied)
    pair = gammas[0] + gammas[-1]

    y = [0.0] * s.n_users
    if pair >= (1.0 + (a1 + aN) / a) * gmax:
        w = pair / (a + a1 + aN)
    elif pair >= gmax:
        w = (pair - gmax) / (a1 + aN)
        ym = ((a + a1 + aN) * gmax - a * pair) / (a * m_size * (a1 + aN))
        for i in tied:
            y[i] = ym
    else:
        w = 0.0
        for i in tied:
            y[i] = gmax / (a * m_size)
    fa = FlowAllocation(tuple(y), w, w, w, w)
    return OptimumResult(fa, model.surplus(3, s, fa), Method.CLOSED_FORM_LINEAR,
                         _p3_residual(s, fa))


def solve_p3(s: Scenario, max_sweeps: int = 10_000, sweep_tol: float = 1e-12,
             residual_tol: float = 1e-9) -> OptimumResult:
    """Problem-3 optimum by coordinate ascent on (y_0..y_{N-1}, w).

    The coded and remedy rates are equal at optimality, so one variable w
    stands for all four.  Each coordinate update is an exact concave 1-D
    maximization (root of a decreasing derivative).  Sweeps repeat until a
    full pass improves the objective by less than ``sweep_tol`` *and* the
    stationarity residual is below ``residual_tol``: the improvement test
    alone can stop with the gradient still around 1e-6, because near the
    optimum per-sweep gains scale with the squared distance.
    """
    _require_valid(s, need_side=True)
    a, a1, aN = s.a, s.side.a1, s.side.aN
    u1, uN = s.utilities[0], s.utilities[-1]
    mids = s.utilities[1:-1]
    n = s.n_users

    y = [0.0] * n
    w = 0.0

    def objective():
        load = sum(y) + w
        val = u1.value(y[0] + w) + uN.value(y[-1] + w)
        val += sum(u.value(t) for u, t in zip(mids, y[1:-1]))
        return val - 0.5 * a * load * load - 0.5 * (a1 + aN) * w * w

    best = objective()
    converged = False
    for _ in range(max_sweeps):
        for i in range(n):
            rest = sum(y) - y[i] + w
            if i == 0:
                util = u1
                off = w
            elif i == n - 1:
                util = uN
                off = w
            else:
                util = s.utilities[i]
                off = 0.0
            y[i] = decreasing_root(lambda t: util.marginal(t + off) - a * (rest + t))
        total_y = sum(y)
        w = decreasing_root(
            lambda t: u1.marginal(y[0] + t) + uN.marginal(y[-1] + t)
            - a * (total_y + t) - (a1 + aN) * t
        )
        val = objective()
        small_step = val - best < sweep_tol
        best = max(best, val)
        if small_step and _p3_residual(s, FlowAllocation(tuple(y), w, w, w, w)) <= residual_tol:
            converged = True
            break

    fa = FlowAllocation(tuple(y), w, w, w, w)
    result = OptimumResult(fa, model.surplus(3, s, fa), Method.COORDINATE_ASCENT,
                           _p3_residual(s, fa))
    if not converged:
        raise ConvergenceError(
            f"coordinate ascent did not converge within {max_sweeps} sweeps "
            "(unexpected for a concave objective)", result)
    return result


def _p3_residual(s: Scenario, fa: FlowAllocation) -> float:
    """Clipped stationarity residual of the symmetric reduced objective."""
    a, a1, aN = s.a, s.side.a1, s.side.aN
    w = fa.z1
    load = sum(fa.y) + w
    price = a * load
    u1, uN = s.utilities[0], s.utilities[-1]
    r = 0.0
    for i, t in enumerate(fa.y):
        if i == 0:
            m = u1.marginal(t + w)
        elif i == s.n_users - 1:
            m = uN.marginal(t + w)
        else:
            m = s.utilities[i].marginal(t)
        r = max(r, abs(m - price) if t > _ZTOL else max(0.0, m - price))
    g = u1.marginal(fa.y[0] + w) + uN.marginal(fa.y[-1] + w) - price - (a1 + aN) * w
    r = max(r, abs(g) if w > _ZTOL else max(0.0, g))
    return r
