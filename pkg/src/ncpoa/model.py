"""Domain types and exact payoff/surplus arithmetic.

Users are indexed 0..N-1.  Users 0 and N-1 are the pair that can encode
their flows together on the shared bottleneck; users 1..N-2 are plain
routing users.  Three worlds share these types:

* world 1 -- everything is forwarded, bottleneck load is sum(x)
* world 2 -- the pair's flows are jointly encoded, load is
  sum(x[1:-1]) + max(x[0], x[-1]); side links are free
* world 3 -- side links cost money, so the pair splits its traffic into
  routed rate y, coded rate z, and remedy rate v (a ``FlowAllocation``)

All quantities are dimensionless floats, every value here is immutable,
and every function is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union


class _AnyRate:
    """Marker for an indeterminate inverse-marginal (linear slope tie)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ANY_RATE"


#: Returned by :func:`inverse_marginal` when a linear utility's slope equals
#: the requested marginal: any rate is then optimal and callers resolve the
#: tie themselves.
ANY_RATE = _AnyRate()


@dataclass(frozen=True)
class Linear:
    """Linear utility ``gamma * x`` with slope gamma > 0."""

    gamma: float

    def value(self, x: float) -> float:
        return self.gamma * x

    def marginal(self, x: float) -> float:
        return self.gamma


@dataclass(frozen=True)
class AlphaFair:
    """Fairness-family utility ``scale * x^(1-alpha) / (1-alpha)``.

    Requires alpha in (0, 1) and scale > 0.  Strictly concave, zero at
    zero, and its marginal ``scale * x^(-alpha)`` blows up at the origin,
    so an optimizing user always takes a strictly positive rate.
    """

    alpha: float
    scale: float = 1.0

    def value(self, x: float) -> float:
        return self.scale * x ** (1.0 - self.alpha) / (1.0 - self.alpha)

    def marginal(self, x: float) -> float:
        if x == 0.0:
            return math.inf
        return self.scale * x ** (-self.alpha)


UtilityFunction = Union[Linear, AlphaFair]


def utility_value(u: UtilityFunction, x: float) -> float:
    if x < 0.0:
        raise ValueError(f"rate must be >= 0, got {x}")
    return u.value(x)


def marginal_utility(u: UtilityFunction, x: float) -> float:
    """First derivative of the utility at x; +inf at 0 for AlphaFair."""
    if x < 0.0:
        raise ValueError(f"rate must be >= 0, got {x}")
    return u.marginal(x)


def inverse_marginal(u: UtilityFunction, m: float):
    """The unique x >= 0 with marginal(x) == m, when one exists.

    A linear slope has a flat marginal, so the preimage is degenerate:
    +inf when gamma > m, 0 when gamma < m, and :data:`ANY_RATE` at the
    tie gamma == m (the caller decides how to split the tie).
    """
    if m <= 0.0:
        raise ValueError(f"marginal must be > 0, got {m}")
    if isinstance(u, Linear):
        if u.gamma > m:
            return math.inf
        if u.gamma < m:
            return 0.0
        return ANY_RATE
    return (m / u.scale) ** (-1.0 / u.alpha)


def link_price(a: float, q: float) -> float:
    """Congestion price a * q of a link with slope a under load q."""
    if q < 0.0:
        raise ValueError(f"load must be >= 0, got {q}")
    return a * q


def link_cost(a: float, q: float) -> float:
    """Quadratic link cost (a/2) * q^2, the integral of the price."""
    if q < 0.0:
        raise ValueError(f"load must be >= 0, got {q}")
    return 0.5 * a * q * q


@dataclass(frozen=True)
class SideLinks:
    """Price slopes of the two side links (world 3 only)."""

    a1: float
    aN: float


@dataclass(frozen=True)
class Scenario:
    """One complete game/problem instance.

    ``side`` present selects the costly-side-link world (games/problems 3);
    absent selects the free-side-link worlds (1 and 2).  ``beta`` in (0, 1]
    is the discount applied to the price of coded packets; beta = 1 means a
    single price for everything, beta = 1/2 splits the coded charge between
    the two encoding users.
    """

    utilities: tuple
    a: float
    beta: float = 0.5
    side: SideLinks | None = None

    @property
    def n_users(self) -> int:
        return len(self.utilities)

    def is_linear(self) -> bool:
        return all(isinstance(u, Linear) for u in self.utilities)

    def gammas(self) -> tuple:
        if not self.is_linear():
            raise ValueError("gammas() requires all-linear utilities")
        return tuple(u.gamma for u in self.utilities)


def linear_scenario(gammas: Sequence[float], a: float = 1.0, beta: float = 0.5,
                    side: SideLinks | None = None) -> Scenario:
    return Scenario(tuple(Linear(g) for g in gammas), a=a, beta=beta, side=side)


@dataclass(frozen=True)
class FlowAllocation:
    """World-3 strategy profile: routed rates y, coded rates z, remedy rates v."""

    y: tuple
    z1: float
    zN: float
    v1: float
    vN: float

    @staticmethod
    def routing_only(y: Sequence[float]) -> "FlowAllocation":
        return FlowAllocation(tuple(float(t) for t in y), 0.0, 0.0, 0.0, 0.0)


def validate_scenario(s: Scenario) -> list:
    """Collect invariant violations; an empty list means the scenario is valid."""
    bad = []
    if s.n_users < 2:
        bad.append("n_users must be >= 2")
    if not (s.a > 0.0 and math.isfinite(s.a)):
        bad.append("a must be > 0")
    if not (0.0 < s.beta <= 1.0):
        bad.append("beta must lie in (0,1]")
    if s.side is not None:
        if not (s.side.a1 > 0.0 and math.isfinite(s.side.a1)):
            bad.append("side.a1 must be > 0")
        if not (s.side.aN > 0.0 and math.isfinite(s.side.aN)):
            bad.append("side.aN must be > 0")
    for i, u in enumerate(s.utilities):
        if isinstance(u, Linear):
            if not (u.gamma > 0.0 and math.isfinite(u.gamma)):
                bad.append(f"utilities[{i}]: gamma must be > 0")
        elif isinstance(u, AlphaFair):
            if not (0.0 < u.alpha < 1.0):
                bad.append(f"utilities[{i}]: alpha must lie in (0,1)")
            if not (u.scale > 0.0 and math.isfinite(u.scale)):
                bad.append(f"utilities[{i}]: scale must be > 0")
        else:
            bad.append(f"utilities[{i}]: unknown utility variant {type(u).__name__}")
    return bad


def _check_rates(x, n: int):
    if len(x) != n:
        raise ValueError(f"profile has {len(x)} rates, scenario has {n} users")
    for i, t in enumerate(x):
        if not (t >= 0.0 and math.isfinite(t)):
            raise ValueError(f"rate[{i}] must be a finite non-negative real, got {t}")


def routed_load(x) -> float:
    """World-1 bottleneck load: every flow is forwarded."""
    return float(sum(x))


def coded_load(x) -> float:
    """World-2 bottleneck load: the pair's common part rides once."""
    return float(sum(x[1:-1]) + max(x[0], x[-1]))


def world3_bottleneck_load(fa: FlowAllocation) -> float:
    return float(sum(fa.y) + max(fa.z1, fa.zN))


def _require_flow(s: Scenario, profile) -> FlowAllocation:
    if not isinstance(profile, FlowAllocation):
        raise TypeError("world 3 takes a FlowAllocation profile")
    if s.side is None:
        raise ValueError("world 3 requires a scenario with side links")
    _check_rates(profile.y, s.n_users)
    for name in ("z1", "zN", "v1", "vN"):
        t = getattr(profile, name)
        if not (t >= 0.0 and math.isfinite(t)):
            raise ValueError(f"{name} must be a finite non-negative real, got {t}")
    return profile


def payoff(game: int, s: Scenario, user: int, profile) -> float:
    """Exact payoff of one user at a strategy profile.

    Game 1: utility minus rate times the anticipated single price.
    Game 2: the pair's coded overlap min(x[0], x[-1]) is charged at the
    discounted price beta*mu, so user 0 pays
    ``(x0 - (1-beta) * min(x0, xN)) * mu`` (symmetrically for user N-1),
    while routing users pay ``x_n * mu``; the price mu is a * load with
    load ``sum(x[1:-1]) + max(x0, xN)``.
    Game 3: user 0 decodes ``y0 + min(z1, vN)`` (coded data is useless
    beyond the remedy rate the peer sends), pays the side link
    ``v1 * a1 * v1``, and pays the bottleneck for ``y0 + z1 -
    (1-beta) * min(z1, zN)`` at price a * (sum(y) + max(z1, zN)).
    """
    n = s.n_users
    if not 0 <= user < n:
        raise IndexError(f"user index {user} out of range for {n} users")
    u = s.utilities[user]

    if game == 1:
        if isinstance(profile, FlowAllocation):
            raise TypeError("game 1 takes a flat rate profile, not a FlowAllocation")
        _check_rates(profile, n)
        mu = link_price(s.a, routed_load(profile))
        return u.value(profile[user]) - profile[user] * mu

    if game == 2:
        if isinstance(profile, FlowAllocation):
            raise TypeError("game 2 takes a flat rate profile, not a FlowAllocation")
        _check_rates(profile, n)
        mu = link_price(s.a, coded_load(profile))
        xn = profile[user]
        if user in (0, n - 1):
            overlap = min(profile[0], profile[-1])
            return u.value(xn) - (xn - (1.0 - s.beta) * overlap) * mu
        return u.value(xn) - xn * mu

    if game == 3:
        fa = _require_flow(s, profile)
        mu = link_price(s.a, world3_bottleneck_load(fa))
        if user == 0:
            decoded = fa.y[0] + min(fa.z1, fa.vN)
            overlap = min(fa.z1, fa.zN)
            side_pay = fa.v1 * link_price(s.side.a1, fa.v1)
            return u.value(decoded) - side_pay - (fa.y[0] + fa.z1 - (1.0 - s.beta) * overlap) * mu
        if user == n - 1:
            decoded = fa.y[-1] + min(fa.zN, fa.v1)
            overlap = min(fa.z1, fa.zN)
            side_pay = fa.vN * link_price(s.side.aN, fa.vN)
            return u.value(decoded) - side_pay - (fa.y[-1] + fa.zN - (1.0 - s.beta) * overlap) * mu
        return u.value(fa.y[user]) - fa.y[user] * mu

    raise ValueError(f"game must be 1, 2, or 3, got {game}")


def surplus(problem: int, s: Scenario, profile) -> float:
    """Total utility minus total link cost (the social objective)."""
    n = s.n_users
    if problem == 1:
        _check_rates(profile, n)
        util = sum(u.value(x) for u, x in zip(s.utilities, profile))
        return util - link_cost(s.a, routed_load(profile))

    if problem == 2:
        _check_rates(profile, n)
        util = sum(u.value(x) for u, x in zip(s.utilities, profile))
        return util - link_cost(s.a, coded_load(profile))

    if problem == 3:
        fa = _require_flow(s, profile)
        util = s.utilities[0].value(fa.y[0] + min(fa.z1, fa.vN))
        util += s.utilities[-1].value(fa.y[-1] + min(fa.zN, fa.v1))
        util += sum(u.value(t) for u, t in zip(s.utilities[1:-1], fa.y[1:-1]))
        cost = link_cost(s.a, world3_bottleneck_load(fa))
        cost += link_cost(s.side.a1, fa.v1) + link_cost(s.side.aN, fa.vN)
        return util - cost

    raise ValueError(f"problem must be 1, 2, or 3, got {problem}")


def total_payments(game: int, s: Scenario, profile) -> float:
    """Sum over users of what they pay the links (for audit identities)."""
    return sum(
        s.utilities[i].value(_rate_of(game, s, i, profile)) - payoff(game, s, i, profile)
        for i in range(s.n_users)
    )


def _rate_of(game: int, s: Scenario, user: int, profile) -> float:
    if game == 3:
        fa = profile
        if user == 0:
            return fa.y[0] + min(fa.z1, fa.vN)
        if user == s.n_users - 1:
            return fa.y[-1] + min(fa.zN, fa.v1)
        return fa.y[user]
    return profile[user]
