"""Best responses, Nash equilibria, and independent deviation checking.

World 2 with all-linear utilities is the interesting case: the coding
pair's payoff kink produces either a unique equilibrium point or a whole
interval of equilibria with the pair's rates equal (a ``Segment``).  The
closed-form case analysis lives in :func:`game2_linear_branches`; its
boundaries are non-strict, so an instance sitting exactly on a boundary
can match two branches at once, and both are reported.

Every equilibrium this module produces can be re-validated with
:func:`verify_nash`, which searches each user's unilateral deviations
numerically and knows nothing about the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from . import model
from .model import FlowAllocation, Linear, Scenario
from .numerics import decreasing_root, golden_max

#: Default tolerance for the non-strict case-membership inequalities.
CASE_TOL = 1e-9
#: Widened tolerance used on retry when no case matched numerically.
CASE_TOL_WIDE = 1e-7

_STEP_TOL = 1e-9


@dataclass(frozen=True)
class Point:
    """A single equilibrium profile (flat rates, or a FlowAllocation)."""

    profile: object


@dataclass(frozen=True)
class Segment:
    """A continuum of equilibria parameterized by the pair's common rate.

    Every x1 in [x1_lo, x1_hi] maps through ``sampler`` to a full profile
    with both coding users at x1 and the routing rates re-solved to their
    own fixed point given x1.
    """

    x1_lo: float
    x1_hi: float
    sampler: Callable[[float], tuple]

    def sample(self, count: int) -> list:
        if count < 2 or self.x1_hi <= self.x1_lo:
            return [self.sampler(self.x1_lo)]
        step = (self.x1_hi - self.x1_lo) / (count - 1)
        return [self.sampler(self.x1_lo + i * step) for i in range(count)]


NashOutcome = object  # Point | Segment


@dataclass(frozen=True)
class IterationResult:
    """Outcome of damped synchronous best-response iteration."""

    point: Point
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class DeviationReport:
    passed: bool
    worst_gain: float
    worst_user: int
    gains: tuple


@dataclass(frozen=True)
class Game2Branches:
    """All closed-form equilibrium branches whose case test matched."""

    branches: tuple  # of (case_label, outcome)
    boundary_hit: bool
    tol_used: float

    def outcomes(self) -> list:
        return [out for _, out in self.branches]


def strategy_cap(s: Scenario, profiles: Sequence = ()) -> float:
    """Rate beyond which every payoff is strictly decreasing.

    Doubles until each user's marginal utility at the cap is below the
    cheapest possible marginal charge beta * a * cap; also covers any
    rates already present in ``profiles``.
    """
    cap = 1.0
    floor = s.beta * s.a
    while any(u.marginal(cap) >= floor * cap for u in s.utilities):
        cap *= 2.0
        if cap >= 1e9:
            break
    for p in profiles:
        rates = list(p.y) + [p.z1, p.zN, p.v1, p.vN] if isinstance(p, FlowAllocation) else p
        cap = max(cap, 2.0 * max(rates, default=0.0))
    return cap


def br_routing(s: Scenario, n: int, profile, game: int = 2) -> float:
    """Payoff-maximizing rate of a routing user given everyone else.

    Solves U'(t) = a * (others' load) + 2 a t, clipped at zero.  In game
    1 every user is a routing user; in game 2 this applies to users
    1..N-2 and the others' load counts max(x0, xN) once.
    """
    if game == 2 and not 0 < n < s.n_users - 1:
        raise IndexError(f"user {n} is not a routing user in a {s.n_users}-user game")
    if game == 1:
        load = sum(profile) - profile[n]
    else:
        load = sum(profile[1:-1]) - profile[n] + max(profile[0], profile[-1])
    u = s.utilities[n]
    a = s.a
    return decreasing_root(lambda t: u.marginal(t) - a * load - 2.0 * a * t)


def br_nc(s: Scenario, which: int, profile) -> float:
    """Best response of coding user ``which`` (0 or N-1) in game 2.

    Two candidates, one per side of the payoff kink at the peer's rate:
    the above-peer stationary point (clipped below at the peer) and the
    below-peer one (clipped into [0, peer]; for a linear utility that
    subproblem is linear in the rate, so the sign of gamma - beta * a *
    (routing load + peer) decides, with the tie resolved to the peer).
    The candidate with the larger payoff wins; ties go to the above-peer
    branch.
    """
    n = s.n_users
    if which not in (0, n - 1):
        raise IndexError(f"user {which} is not a coding user")
    peer_idx = n - 1 if which == 0 else 0
    peer = profile[peer_idx]
    q_r = sum(profile[1:-1])
    u = s.utilities[which]
    a, beta = s.a, s.beta

    root = decreasing_root(
        lambda t: u.marginal(t) - a * (q_r + 2.0 * t) + a * (1.0 - beta) * peer
    )
    cand_hi = max(root, peer)

    m = beta * a * (q_r + peer)
    if isinstance(u, Linear):
        cand_lo = peer if u.gamma >= m else 0.0
    else:
        cand_lo = min(peer, decreasing_root(lambda t: u.marginal(t) - m))

    trial = list(profile)
    trial[which] = cand_hi
    pay_hi = model.payoff(2, s, which, tuple(trial))
    trial[which] = cand_lo
    pay_lo = model.payoff(2, s, which, tuple(trial))
    return cand_hi if pay_hi >= pay_lo else cand_lo


def nash_game1(s: Scenario, hi: float | None = None) -> Point:
    """The unique world-1 equilibrium, by bisection on the total load q.

    At equilibrium each rate solves U'(x) = a q + a x (clipped at 0),
    and each such rate shrinks as q grows, so sum(x(q)) - q crosses zero
    exactly once.
    """
    _check_valid(s)
    a = s.a

    def rate(u, q):
        if isinstance(u, Linear):
            return max(0.0, (u.gamma - a * q) / a)
        return decreasing_root(lambda t: u.marginal(t) - a * q - a * t)

    q_star = decreasing_root(
        lambda q: sum(rate(u, q) for u in s.utilities) - q, hi=hi
    )
    return Point(tuple(rate(u, q_star) for u in s.utilities))


def _check_valid(s: Scenario, need_side: bool | None = None):
    bad = model.validate_scenario(s)
    if bad:
        raise ValueError("invalid scenario: " + "; ".join(bad))
    if need_side is True and s.side is None:
        raise ValueError("this game requires side links in the scenario")
    if need_side is False and s.side is not None:
        raise ValueError("this game is defined for scenarios without side links")


def _routing_fixed_load(gam_mid, a: float, x1: float) -> float:
    """Routing users' aggregate equilibrium load given the pair's max rate."""
    if not gam_mid:
        return 0.0
    hi = sum(gam_mid) / a + 1.0
    return decreasing_root(
        lambda q: sum(max(0.0, g / a - q - x1) for g in gam_mid) - q, hi=hi
    )


def game2_linear_branches(s: Scenario, tol: float = CASE_TOL) -> Game2Branches:
    """Closed-form world-2 equilibria for all-linear utilities.

    Internally relabels so the first coding user has the larger slope,
    resolves each case's coupled fixed point (the candidate rate x1 and
    the routing load q(x1) determine each other), tests the case's
    inequalities at the resolved point, and keeps every case that
    matches.  More than one match means the instance sits on a case
    boundary; the distinct equilibria are then all reported.
    """
    _check_valid(s, need_side=False)
    if not s.is_linear():
        raise ValueError("game2_linear_branches requires linear utilities")

    gammas = s.gammas()
    swapped = gammas[-1] > gammas[0]
    g1, gn = (gammas[-1], gammas[0]) if swapped else (gammas[0], gammas[-1])
    gam_mid = gammas[1:-1]
    a, beta = s.a, s.beta
    n = s.n_users

    def q_of(x1: float) -> float:
        return _routing_fixed_load(gam_mid, a, x1)

    def assemble(x1: float, xn: float) -> tuple:
        q = q_of(x1)
        mids = [max(0.0, g / a - q - x1) for g in gam_mid]
        first, last = (xn, x1) if swapped else (x1, xn)
        return tuple([first] + mids + [last])

    branches = []

    # case of equal pair rates: an interval of equilibria
    lo = decreasing_root(
        lambda x: max(0.0, (g1 - a * q_of(x)) / (a * (1.0 + beta))) - x
    )
    hi_end = decreasing_root(
        lambda x: max(0.0, (gn - beta * a * q_of(x)) / (beta * a)) - x
    )
    if hi_end >= lo - tol:
        q_lo = q_of(lo)
        if g1 <= (1.0 + 1.0 / beta) * gn - beta * a * q_lo + tol:
            hi_end = max(hi_end, lo)
            if hi_end - lo <= 1e-12:
                branches.append(("equal-rates", Point(assemble(lo, lo))))
            else:
                sampler = (lambda t: assemble(t, t))
                branches.append(("equal-rates", Segment(lo, hi_end, sampler)))

    # case of distinct positive rates (needs beta < 1: the formula has a
    # 1/(1-beta) factor and the case interval is empty at beta = 1)
    if beta < 1.0 - 1e-12:
        x1b = decreasing_root(lambda x: gn / (beta * a) - q_of(x) - x)
        qb = q_of(x1b)
        lo_ok = (1.0 + 1.0 / beta) * gn - beta * a * qb <= g1 + tol
        hi_ok = g1 <= (2.0 / beta) * gn - a * qb + tol
        if lo_ok and hi_ok:
            xnb = ((2.0 / beta) * gn - g1 - a * qb) / (a * (1.0 - beta))
            xnb = min(max(xnb, 0.0), x1b)
            branches.append(("unequal-rates", Point(assemble(x1b, xnb))))

    # case of the weaker user silenced
    x1c = decreasing_root(lambda x: max(0.0, (g1 - a * q_of(x)) / (2.0 * a)) - x)
    qc = q_of(x1c)
    if g1 >= (2.0 / beta) * gn - a * qc - tol:
        branches.append(("silenced-peer", Point(assemble(x1c, 0.0))))

    if not branches and tol < CASE_TOL_WIDE:
        return game2_linear_branches(s, tol=CASE_TOL_WIDE)
    if not branches:
        raise RuntimeError("no equilibrium case matched; this is a bug")
    return Game2Branches(tuple(branches), boundary_hit=len(branches) > 1, tol_used=tol)


def nash_game2_linear(s: Scenario):
    """Primary world-2 equilibrium outcome for all-linear utilities.

    Prefers the Segment when the instance admits one; on a case boundary
    the remaining coincident equilibria are available through
    :func:`game2_linear_branches`.
    """
    result = game2_linear_branches(s)
    for _, out in result.branches:
        if isinstance(out, Segment):
            return out
    return result.branches[0][1]


def _prox_response_nc(s: Scenario, which: int, x, kappa: float) -> float:
    """Proximal response of a coding user: argmax of payoff minus
    (kappa/2)(t - current)^2.

    Single-valued and continuous in the profile, with exactly the Nash
    profiles as fixed points.  The exact best response is set-valued at
    the lower-branch slope tie and jumps across it, which makes plain
    best-response dynamics cycle around unequal-rate equilibria; the
    proximal term removes the jump without moving the fixed points.
    """
    n = s.n_users
    peer = x[n - 1 if which == 0 else 0]
    cur = x[which]
    q_r = sum(x[1:-1])
    u, a, beta = s.utilities[which], s.a, s.beta

    root_hi = decreasing_root(
        lambda t: u.marginal(t) - a * (q_r + 2.0 * t) + a * (1.0 - beta) * peer
        - kappa * (t - cur)
    )
    cand_hi = max(root_hi, peer)
    root_lo = decreasing_root(
        lambda t: u.marginal(t) - beta * a * (q_r + peer) - kappa * (t - cur)
    )
    cand_lo = min(root_lo, peer)

    def prox_obj(t):
        trial = list(x)
        trial[which] = t
        return model.payoff(2, s, which, tuple(trial)) - 0.5 * kappa * (t - cur) ** 2

    return cand_hi if prox_obj(cand_hi) >= prox_obj(cand_lo) else cand_lo


def nash_game2_iter(s: Scenario, damping: float = 0.5, max_iter: int = 10_000,
                    tol: float = _STEP_TOL) -> IterationResult:
    """Damped synchronous proximal-response iteration from the origin.

    Numerical fallback for world-2 equilibria with arbitrary concave
    utilities.  Each user moves toward its proximal response (payoff
    regularized by a quadratic around the current rate, stiffness a);
    the regularization leaves the equilibrium set untouched but makes
    the coding users' response maps continuous, which plain best
    responses are not.  On instances with a whole equilibrium interval
    the iterate lands on *some* point of it; which one is not specified.
    """
    _check_valid(s, need_side=False)
    if not 0.0 < damping <= 1.0:
        raise ValueError(f"damping must lie in (0,1], got {damping}")
    n = s.n_users
    kappa = s.a
    x = [0.0] * n
    step = math.inf
    for it in range(1, max_iter + 1):
        target = list(x)
        target[0] = _prox_response_nc(s, 0, tuple(x), kappa)
        target[-1] = _prox_response_nc(s, n - 1, tuple(x), kappa)
        for i in range(1, n - 1):
            target[i] = br_routing(s, i, tuple(x), game=2)
        nxt = [(1.0 - damping) * xi + damping * ti for xi, ti in zip(x, target)]
        step = max(abs(b - a) for a, b in zip(x, nxt))
        x = nxt
        if step < tol:
            return IterationResult(Point(tuple(x)), it, step, True)
    return IterationResult(Point(tuple(x)), max_iter, step, False)


def nash_game3(s: Scenario) -> Point:
    """The unique world-3 equilibrium: nobody codes, nobody sends remedies.

    Remedy traffic only ever costs its sender, so it is zero at any best
    response; with zero remedies inbound, coded traffic cannot be decoded
    and is zero too.  What remains is exactly the world-1 game on y.
    """
    _check_valid(s, need_side=True)
    base = nash_game1(s)
    return Point(FlowAllocation.routing_only(base.profile))


def verify_nash(s: Scenario, game: int, profile, tol: float = 1e-6,
                users: Sequence | None = None) -> DeviationReport:
    """Check a profile for profitable unilateral deviations, numerically.

    For each user the payoff is maximized over that user's own strategy
    with everyone else frozen: golden-section in 1-D (split at the kink
    for world-2 coding users), and for world-3 coding users a coarse
    grid over (y, z, v) followed by coordinate-wise golden refinement.
    Passes iff nobody gains more than ``tol``.
    """
    n = s.n_users
    idx = list(range(n)) if users is None else list(users)
    cap = strategy_cap(s, [profile])
    gains = []
    worst_gain, worst_user = -math.inf, -1

    for i in idx:
        current = model.payoff(game, s, i, profile)
        if game == 1:
            best = _best_1d(_game1_payoff_fn(s, i, profile), cap)
        elif game == 2:
            if i in (0, n - 1):
                fn = _game2_nc_payoff_fn(s, i, profile)
                peer = profile[n - 1 if i == 0 else 0]
                best = max(_best_1d(fn, peer, lo=0.0), _best_1d(fn, cap, lo=peer))
            else:
                best = _best_1d(_game2_routing_payoff_fn(s, i, profile), cap)
        elif game == 3:
            if i in (0, n - 1):
                best = _best_game3_nc(s, i, profile, cap)
            else:
                best = _best_1d(_game3_routing_payoff_fn(s, i, profile), cap)
        else:
            raise ValueError(f"game must be 1, 2, or 3, got {game}")
        gain = best - current
        gains.append(gain)
        if gain > worst_gain:
            worst_gain, worst_user = gain, i
    return DeviationReport(worst_gain <= tol, worst_gain, worst_user, tuple(gains))


def _best_1d(fn, hi: float, lo: float = 0.0) -> float:
    if hi <= lo:
        return fn(lo)
    _, val = golden_max(fn, lo, hi, xtol=1e-10 * max(1.0, hi))
    return max(val, fn(lo), fn(hi))


def _game1_payoff_fn(s, i, profile):
    u, a = s.utilities[i], s.a
    others = sum(profile) - profile[i]
    return lambda t: u.value(t) - t * a * (others + t)


def _game2_routing_payoff_fn(s, i, profile):
    u, a = s.utilities[i], s.a
    others = sum(profile[1:-1]) - profile[i] + max(profile[0], profile[-1])
    return lambda t: u.value(t) - t * a * (others + t)


def _game2_nc_payoff_fn(s, i, profile):
    u, a, beta = s.utilities[i], s.a, s.beta
    peer = profile[s.n_users - 1 if i == 0 else 0]
    q_r = sum(profile[1:-1])
    return lambda t: (
        u.value(t)
        - (t - (1.0 - beta) * min(t, peer)) * a * (q_r + max(t, peer))
    )


def _game3_routing_payoff_fn(s, i, profile):
    u, a = s.utilities[i], s.a
    others = sum(profile.y) - profile.y[i] + max(profile.z1, profile.zN)
    return lambda t: u.value(t) - t * a * (others + t)


def _best_game3_nc(s, i, profile, cap: float) -> float:
    u, a, beta = s.utilities[i], s.a, s.beta
    first = i == 0
    a_side = s.side.a1 if first else s.side.aN
    peer_z = profile.zN if first else profile.z1
    peer_v = profile.vN if first else profile.v1
    y_others = sum(profile.y) - profile.y[i]

    def pay(ty, tz, tv):
        decoded = ty + min(tz, peer_v)
        charged = ty + tz - (1.0 - beta) * min(tz, peer_z)
        load = y_others + ty + max(tz, peer_z)
        return u.value(decoded) - tv * a_side * tv - charged * a * load

    grid = [cap * k / 16.0 for k in range(17)]
    own = (profile.y[i], profile.z1 if first else profile.zN,
           profile.v1 if first else profile.vN)
    best_pt, best_val = own, pay(*own)
    for ty in grid:
        for tz in grid:
            for tv in grid:
                v = pay(ty, tz, tv)
                if v > best_val:
                    best_pt, best_val = (ty, tz, tv), v

    pt = list(best_pt)
    for _ in range(3):
        for k in range(3):
            def slice_fn(t, k=k):
                trial = list(pt)
                trial[k] = t
                return pay(*trial)
            pt[k], best_val = golden_max(slice_fn, 0.0, cap, xtol=1e-10 * max(1.0, cap))
    return max(best_val, pay(*own))
