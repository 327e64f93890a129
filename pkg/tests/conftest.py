"""Shared oracles for the test suite.

These helpers are deliberately independent of the package's solvers:
plain grid enumeration over the raw objectives, used to check that the
closed forms and fixed-point solvers do not undershoot.
"""

import numpy as np

from ncpoa.model import AlphaFair, Linear, Scenario


def value_vec(u, x):
    x = np.asarray(x, dtype=float)
    if isinstance(u, Linear):
        return u.gamma * x
    return u.scale * x ** (1.0 - u.alpha) / (1.0 - u.alpha)


def grid_best_p1(s: Scenario, bound: float, step: float = 1e-2) -> float:
    """Best problem-1 surplus on an exhaustive grid (2 or 3 users)."""
    axis = np.arange(0.0, bound + step, step)
    if s.n_users == 2:
        x0, x1 = np.meshgrid(axis, axis, indexing="ij")
        total = x0 + x1
        util = value_vec(s.utilities[0], x0) + value_vec(s.utilities[1], x1)
        return float(np.max(util - 0.5 * s.a * total**2))
    if s.n_users == 3:
        best = -np.inf
        v1, v2 = np.meshgrid(axis, axis, indexing="ij")
        u1 = value_vec(s.utilities[1], v1)
        u2 = value_vec(s.utilities[2], v2)
        for x0 in axis:
            total = x0 + v1 + v2
            surf = value_vec(s.utilities[0], x0) + u1 + u2 - 0.5 * s.a * total**2
            best = max(best, float(np.max(surf)))
        return best
    raise ValueError("grid oracle supports 2 or 3 users")


def grid_best_p2(s: Scenario, bound: float, step: float = 1e-2) -> float:
    """Best problem-2 surplus on an exhaustive grid (2 or 3 users)."""
    axis = np.arange(0.0, bound + step, step)
    if s.n_users == 2:
        x0, x1 = np.meshgrid(axis, axis, indexing="ij")
        load = np.maximum(x0, x1)
        util = value_vec(s.utilities[0], x0) + value_vec(s.utilities[1], x1)
        return float(np.max(util - 0.5 * s.a * load**2))
    if s.n_users == 3:
        best = -np.inf
        vm, v2 = np.meshgrid(axis, axis, indexing="ij")
        um = value_vec(s.utilities[1], vm)
        u2 = value_vec(s.utilities[2], v2)
        for x0 in axis:
            load = vm + np.maximum(x0, v2)
            surf = value_vec(s.utilities[0], x0) + um + u2 - 0.5 * s.a * load**2
            best = max(best, float(np.max(surf)))
        return best
    raise ValueError("grid oracle supports 2 or 3 users")


def grid_best_p3_pairwise(s: Scenario, bound: float, step: float = 1e-2) -> float:
    """Best problem-3 surplus over (y0, y1, w) with coded = remedy = w.

    Two-user instances only; w rides the bottleneck once and each side
    link once.
    """
    if s.n_users != 2:
        raise ValueError("reduced grid oracle supports 2 users")
    axis = np.arange(0.0, bound + step, step)
    a1, aN = s.side.a1, s.side.aN
    best = -np.inf
    v1, w = np.meshgrid(axis, axis, indexing="ij")
    for y0 in axis:
        util = value_vec(s.utilities[0], y0 + w) + value_vec(s.utilities[1], v1 + w)
        load = y0 + v1 + w
        surf = util - 0.5 * s.a * load**2 - 0.5 * (a1 + aN) * w**2
        best = max(best, float(np.max(surf)))
    return best


def grid_best_p3_full(s: Scenario, bound: float, step: float) -> float:
    """Best problem-3 surplus over the raw (y, z1, zN, v1, vN) box.

    Coarse 6-D enumeration for two users; exists to sanity-check the
    equal-coded-and-remedy-rates reduction, not for precision.
    """
    if s.n_users != 2:
        raise ValueError("full grid oracle supports 2 users")
    axis = np.arange(0.0, bound + step, step)
    a, a1, aN = s.a, s.side.a1, s.side.aN
    u0, u1 = s.utilities
    z1g, zNg, v1g, vNg = np.meshgrid(axis, axis, axis, axis, indexing="ij")
    best = -np.inf
    for y0 in axis:
        for y1 in axis:
            util = value_vec(u0, y0 + np.minimum(z1g, vNg))
            util = util + value_vec(u1, y1 + np.minimum(zNg, v1g))
            load = y0 + y1 + np.maximum(z1g, zNg)
            cost = 0.5 * a * load**2 + 0.5 * a1 * v1g**2 + 0.5 * aN * vNg**2
            best = max(best, float(np.max(util - cost)))
    return best


def best_response_grid(fn, bound: float, step: float = 1e-4):
    """Argmax of a 1-D payoff over [0, bound] by enumeration."""
    axis = np.arange(0.0, bound + step, step)
    vals = np.array([fn(t) for t in axis])
    i = int(np.argmax(vals))
    return float(axis[i]), float(vals[i])


def random_linear_scenario(rng, n: int, beta: float, a_range=(0.5, 3.0),
                           gamma_range=(0.1, 5.0)) -> Scenario:
    gammas = rng.uniform(*gamma_range, size=n)
    return Scenario(tuple(Linear(float(g)) for g in gammas),
                    a=float(rng.uniform(*a_range)), beta=beta)


def random_alpha_scenario(rng, n: int, beta: float, a_range=(0.5, 3.0),
                          alpha_range=(0.1, 0.9), scale_range=(0.5, 2.0)) -> Scenario:
    utilities = tuple(
        AlphaFair(float(rng.uniform(*alpha_range)), float(rng.uniform(*scale_range)))
        for _ in range(n)
    )
    return Scenario(utilities, a=float(rng.uniform(*a_range)), beta=beta)
