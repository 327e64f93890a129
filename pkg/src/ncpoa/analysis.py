"""Efficiency ratios and worst-case (price-of-anarchy) experiments.

Efficiency of an instance is equilibrium surplus over optimal surplus for
the matching world (game 1 vs problem 1, and so on).  Worst cases for the
scans are searched over all-linear utility families only: any equilibrium
of a concave-utility instance is also an equilibrium of the linearized
instance with the same first derivatives, and the linearized instance is
weakly less efficient, so linear families attain the global worst case.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import equilibrium, model, optimum
from .equilibrium import Segment
from .model import AlphaFair, Scenario, SideLinks, linear_scenario

#: Opt surplus below this means the ratio is meaningless.
DEGENERATE_OPT = 1e-12


class DegenerateScenarioError(ValueError):
    """Optimal surplus is numerically zero; efficiency is undefined."""


@dataclass(frozen=True)
class EfficiencyReport:
    ne_surplus_min: float
    ne_surplus_max: float
    opt_surplus: float
    efficiency_min: float
    efficiency_max: float
    outcome_kind: str  # "point" or "segment"
    scenario_digest: Scenario
    boundary_hit: bool = False
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True)
class WorstCaseFamily:
    family_id: str
    scenario: Scenario
    predicted_efficiency: float
    sigma: float


@dataclass(frozen=True)
class ScanResult:
    minimum: EfficiencyReport
    rows: list


@dataclass(frozen=True)
class MonteCarloRanges:
    a: tuple = (0.0, 10.0)
    alpha: tuple = (0.0, 1.0)
    scale: tuple = (0.5, 2.0)
    side: tuple = (0.0, 5.0)


def _problem_optimum(s: Scenario, game: int) -> optimum.OptimumResult:
    if game == 1:
        return optimum.solve_p1(s)
    if game == 2:
        return optimum.solve_p2(s)
    if game == 3:
        return optimum.solve_p3_linear(s) if s.is_linear() else optimum.solve_p3(s)
    raise ValueError(f"game must be 1, 2, or 3, got {game}")


def efficiency(s: Scenario, game: int, segment_samples: int = 33) -> EfficiencyReport:
    """Equilibrium-vs-optimum surplus ratio for one instance.

    All-linear world-2 instances go through the closed-form case
    analysis; a Segment outcome is sampled at its endpoints plus
    ``segment_samples`` interior points and the min/max surplus over the
    samples (and over any boundary-coincident branches) is reported.
    Other instances use the matching closed-form or iterative solver.
    """
    ne_vals = []
    kind = "point"
    boundary = False
    converged = True
    iterations = 0

    if game == 2 and s.is_linear():
        result = equilibrium.game2_linear_branches(s)
        boundary = result.boundary_hit
        for out in result.outcomes():
            if isinstance(out, Segment):
                kind = "segment"
                for p in out.sample(segment_samples + 2):
                    ne_vals.append(model.surplus(2, s, p))
            else:
                ne_vals.append(model.surplus(2, s, out.profile))
    elif game == 2:
        it = equilibrium.nash_game2_iter(s)
        converged, iterations = it.converged, it.iterations
        ne_vals.append(model.surplus(2, s, it.point.profile))
    elif game == 1:
        out = equilibrium.nash_game1(s)
        ne_vals.append(model.surplus(1, s, out.profile))
    elif game == 3:
        out = equilibrium.nash_game3(s)
        ne_vals.append(model.surplus(3, s, out.profile))
    else:
        raise ValueError(f"game must be 1, 2, or 3, got {game}")

    opt = _problem_optimum(s, game)
    if opt.surplus < DEGENERATE_OPT:
        raise DegenerateScenarioError(
            f"optimal surplus {opt.surplus!r} is numerically zero")
    ne_min, ne_max = min(ne_vals), max(ne_vals)
    return EfficiencyReport(
        ne_surplus_min=ne_min,
        ne_surplus_max=ne_max,
        opt_surplus=opt.surplus,
        efficiency_min=ne_min / opt.surplus,
        efficiency_max=ne_max / opt.surplus,
        outcome_kind=kind,
        scenario_digest=s,
        boundary_hit=boundary,
        converged=converged,
        iterations=iterations,
    )


def make_worst_family(family_id: str, n_users: int | None = None,
                      beta: float = 0.5, eps: float = 1e-4) -> WorstCaseFamily:
    """Instantiate one of the known worst-case linear families.

    * ``game1-jt``: one slope-1 user among slope-2/3 users; efficiency
      approaches 2/3 from above as the population grows.
    * ``game2-twouser``: two coding users with slope ratio 2/beta;
      efficiency 3/(2+beta)^2 (1/3 at beta=1, 12/25 at beta=1/2).
    * ``game2-general``: coding pair pushed to zero rate by a large
      routing population; efficiency tends to 1/4 regardless of beta.
    * ``game2-subcase``: variant with the pair's rates pinned at zero by
      slopes below the routing price; tuned so the equilibrium load over
      sigma is sqrt(2/(2 beta^2 + 4 beta + 3)), which makes the
      efficiency approach that bound (4/11 at beta=1/2).
    * ``game3-general``: costly side links with slope eps; the coding
      pair would carry half the optimal surplus but routes instead;
      efficiency tends to 1/5 as eps -> 0 and the population grows.
    """
    fam = family_id.lower()
    if n_users is None:
        raise ValueError("n_users is required")

    if fam == "game1-jt":
        if n_users < 2:
            raise ValueError("game1-jt needs n_users >= 2")
        gammas = [1.0] + [2.0 / 3.0] * (n_users - 1)
        s = linear_scenario(gammas, a=1.0, beta=beta)
        return WorstCaseFamily(fam, s, 2.0 / 3.0, _sigma(s))

    if fam == "game2-twouser":
        s = linear_scenario([1.0, beta / 2.0], a=1.0, beta=beta)
        return WorstCaseFamily(fam, s, 3.0 / (2.0 + beta) ** 2, _sigma(s))

    if fam == "game2-general":
        if n_users < 3:
            raise ValueError("game2-general needs n_users >= 3")
        mid = 0.5 + 1.0 / (2.0 * (n_users - 2))
        gammas = [0.5] + [mid] * (n_users - 2) + [0.5]
        s = linear_scenario(gammas, a=1.0, beta=beta)
        return WorstCaseFamily(fam, s, 0.25, _sigma(s))

    if fam == "game2-subcase":
        if n_users < 3:
            raise ValueError("game2-subcase needs n_users >= 3")
        bound = 2.0 / (2.0 * beta * beta + 4.0 * beta + 3.0)
        qbar = math.sqrt(bound)
        if qbar < 0.5:
            raise ValueError(
                f"game2-subcase is infeasible at beta={beta}: the pinned "
                "equilibrium needs load >= sigma/2")
        mid = qbar * (n_users - 1) / (n_users - 2)
        gammas = [qbar] + [mid] * (n_users - 2) + [1.0 - qbar]
        s = linear_scenario(gammas, a=1.0, beta=beta)
        return WorstCaseFamily(fam, s, bound, _sigma(s))

    if fam == "game3-general":
        if n_users < 3:
            raise ValueError("game3-general needs n_users >= 3")
        mid = 1.0 + 1.0 / (2.0 * (n_users - 2))
        gammas = [1.25] + [mid] * (n_users - 2) + [1.25]
        s = linear_scenario(gammas, a=1.0, beta=beta, side=SideLinks(eps, eps))
        return WorstCaseFamily(fam, s, 0.2, _sigma(s))

    raise ValueError(f"unknown family id {family_id!r}")


def _sigma(s: Scenario) -> float:
    return optimum.linear_sigma(s)


def poa_scan(game: int, beta: float, gamma_ratios: Sequence,
             n_list: Sequence = (2,), routing_gammas: Sequence = (1.0,),
             side_slopes: Sequence = (0.1,), a: float = 1.0,
             segment_samples: int = 33) -> ScanResult:
    """Grid scan of efficiency over all-linear families.

    Ratios are gamma_first / gamma_last with gamma_last = 1; instances
    with more than two users put ``routing_gamma`` on every middle user.
    Game 3 additionally sweeps the side-link slope.  Returns every row
    plus the report of the minimizer.
    """
    rows = []
    worst = None
    sides = side_slopes if game == 3 else (None,)
    for n in n_list:
        for rg in (routing_gammas if n > 2 else (None,)):
            for e in sides:
                for ratio in gamma_ratios:
                    gammas = [float(ratio)] + [rg] * (n - 2) + [1.0]
                    side = SideLinks(e, e) if e is not None else None
                    s = linear_scenario(gammas, a=a, beta=beta, side=side)
                    rep = efficiency(s, game, segment_samples=segment_samples)
                    rows.append({
                        "n": n, "ratio": float(ratio),
                        "routing_gamma": rg if rg is not None else "",
                        "side": e if e is not None else "",
                        "efficiency_min": rep.efficiency_min,
                        "efficiency_max": rep.efficiency_max,
                        "ne_surplus_min": rep.ne_surplus_min,
                        "opt_surplus": rep.opt_surplus,
                        "outcome_kind": rep.outcome_kind,
                        "is_argmin": 0,
                    })
                    if worst is None or rep.efficiency_min < worst.efficiency_min:
                        worst = rep
                        argmin_idx = len(rows) - 1
    if worst is None:
        raise ValueError("empty scan grid")
    rows[argmin_idx]["is_argmin"] = 1
    return ScanResult(worst, rows)


def monte_carlo(game: int, n_scenarios: int, seed: int,
                ranges: MonteCarloRanges | None = None, beta: float = 0.5,
                n_users: int = 2, max_workers: int | None = None) -> list:
    """Random fairness-utility instances; deterministic given the seed.

    Each row records the drawn parameters, the minimum equilibrium
    surplus, the optimal surplus, their ratio, and the iterative
    solver's convergence diagnostics (non-converged rows are flagged,
    never dropped).  Rows may be evaluated in parallel; parameters are
    drawn up front in a fixed order so workers do not affect output.
    """
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be >= 1")
    r = ranges or MonteCarloRanges()
    rng = np.random.default_rng(seed)
    draws = []
    for i in range(n_scenarios):
        d = {
            "seed_index": i,
            "a": float(rng.uniform(*r.a)),
            "alphas": [float(rng.uniform(*r.alpha)) for _ in range(n_users)],
            "scales": [float(rng.uniform(*r.scale)) for _ in range(n_users)],
        }
        if game == 3:
            d["a1"] = float(rng.uniform(*r.side))
            d["aN"] = float(rng.uniform(*r.side))
        # the open-interval ranges exclude their endpoints; an exact
        # endpoint draw has measure zero but would fail validation
        if d["a"] <= 0.0 or any(not 0.0 < al < 1.0 for al in d["alphas"]) \
                or d.get("a1") == 0.0 or d.get("aN") == 0.0:
            d["a"] = max(d["a"], 1e-6)
            d["alphas"] = [min(max(al, 1e-9), 1.0 - 1e-9) for al in d["alphas"]]
            if game == 3:
                d["a1"] = max(d["a1"], 1e-9)
                d["aN"] = max(d["aN"], 1e-9)
        draws.append(d)

    def evaluate(d):
        utilities = tuple(AlphaFair(al, sc) for al, sc in zip(d["alphas"], d["scales"]))
        side = SideLinks(d["a1"], d["aN"]) if game == 3 else None
        s = Scenario(utilities, a=d["a"], beta=beta, side=side)
        rep = efficiency(s, game)
        row = dict(d)
        row["alphas"] = ";".join(f"{x:.10g}" for x in d["alphas"])
        row["scales"] = ";".join(f"{x:.10g}" for x in d["scales"])
        row.update({
            "ne_surplus_min": rep.ne_surplus_min,
            "opt_surplus": rep.opt_surplus,
            "efficiency_min": rep.efficiency_min,
            "converged": rep.converged,
            "iterations": rep.iterations,
        })
        return row

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(evaluate, draws))
    return [evaluate(d) for d in draws]


def sweep_side_cost(side_values: Sequence | None = None, n_users: int = 500,
                    a: float = 1.0, nc_gamma: float = 1.0,
                    routing_gamma: float = 0.8, beta: float = 0.5) -> list:
    """Game-3 efficiency as the side-link cost slope varies.

    Defaults reproduce the canonical curve: equal unit slopes on the
    coding pair, 4/5 on a large routing population, side slopes swept
    from effectively zero upward.  Cheap side links make coding carry
    the whole optimum while the equilibrium never codes, so efficiency
    starts near 1/5 and rises as the side links price coding out of the
    optimum too.
    """
    if side_values is None:
        side_values = np.geomspace(1e-4, 10.0, 25)
    gammas = [nc_gamma] + [routing_gamma] * (n_users - 2) + [nc_gamma]
    rows = []
    for v in side_values:
        s = linear_scenario(gammas, a=a, beta=beta, side=SideLinks(float(v), float(v)))
        rep = efficiency(s, 3)
        rows.append({
            "a1": float(v), "aN": float(v),
            "ne_surplus": rep.ne_surplus_min,
            "opt_surplus": rep.opt_surplus,
            "efficiency": rep.efficiency_min,
        })
    return rows
