"""Numerical lab for rate-allocation games on a shared bottleneck with an
inter-session coding pair: social optima, Nash equilibria, and worst-case
efficiency experiments."""

from .analysis import (
    DegenerateScenarioError,
    EfficiencyReport,
    MonteCarloRanges,
    ScanResult,
    WorstCaseFamily,
    efficiency,
    make_worst_family,
    monte_carlo,
    poa_scan,
    sweep_side_cost,
)
from .equilibrium import (
    DeviationReport,
    Game2Branches,
    IterationResult,
    Point,
    Segment,
    br_nc,
    br_routing,
    game2_linear_branches,
    nash_game1,
    nash_game2_iter,
    nash_game2_linear,
    nash_game3,
    verify_nash,
)
from .model import (
    ANY_RATE,
    AlphaFair,
    FlowAllocation,
    Linear,
    Scenario,
    SideLinks,
    inverse_marginal,
    linear_scenario,
    link_cost,
    link_price,
    marginal_utility,
    payoff,
    surplus,
    utility_value,
    validate_scenario,
)
from .optimum import (
    ConvergenceError,
    Method,
    OptimumResult,
    solve_p1,
    solve_p2,
    solve_p3,
    solve_p3_linear,
)

__all__ = [
    "ANY_RATE", "AlphaFair", "ConvergenceError", "DegenerateScenarioError",
    "DeviationReport", "EfficiencyReport", "FlowAllocation", "Game2Branches",
    "IterationResult", "Linear", "Method", "MonteCarloRanges", "OptimumResult",
    "Point", "ScanResult", "Scenario", "Segment", "SideLinks",
    "WorstCaseFamily", "br_nc", "br_routing", "efficiency",
    "game2_linear_branches", "inverse_marginal", "linear_scenario",
    "link_cost", "link_price", "make_worst_family", "marginal_utility",
    "monte_carlo", "nash_game1", "nash_game2_iter", "nash_game2_linear",
    "nash_game3", "payoff", "poa_scan", "solve_p1", "solve_p2", "solve_p3",
    "solve_p3_linear", "surplus", "sweep_side_cost", "utility_value",
    "validate_scenario", "verify_nash",
]

__version__ = "0.1.0"
