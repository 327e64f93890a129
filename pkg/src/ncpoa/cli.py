"""Batch command-line front end.

Every run is described by a flat key/value config (the same schema is
embedded in every output file, so results are self-describing and any
emitted file can be re-ingested with ``--config`` to reproduce the run
byte-for-byte, modulo the optional timestamp header).

Exit codes: 0 success, 1 config/validation error, 2 solver
non-convergence on a single-instance command.  Monte-Carlo rows flag
non-convergence in-row and exit 0.  The environment variable
NC_POA_THREADS caps batch-row parallelism (0 or unset means auto).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import analysis, equilibrium, model, optimum
from .equilibrium import Segment
from .model import AlphaFair, FlowAllocation, Linear, Scenario, SideLinks


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(t) for t in v)
    return "" if v is None else str(v)


def _json_value(v):
    if isinstance(v, float):
        return float(f"{v:.10g}")
    if isinstance(v, (list, tuple)):
        return [_json_value(t) for t in v]
    return v


def thread_count() -> int:
    raw = os.environ.get("NC_POA_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"NC_POA_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise CliError("NC_POA_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# utilities <-> strings

def format_utilities(utilities) -> str:
    parts = []
    for u in utilities:
        if isinstance(u, Linear):
            parts.append(f"linear:{_fmt(u.gamma)}")
        else:
            parts.append(f"alpha:{_fmt(u.alpha)}:{_fmt(u.scale)}")
    return ",".join(parts)


def parse_utilities(text: str):
    utilities = []
    for part in text.split(","):
        fields = part.strip().split(":")
        try:
            if fields[0] == "linear" and len(fields) == 2:
                utilities.append(Linear(float(fields[1])))
            elif fields[0] == "alpha" and len(fields) in (2, 3):
                scale = float(fields[2]) if len(fields) == 3 else 1.0
                utilities.append(AlphaFair(float(fields[1]), scale))
            else:
                raise ValueError
        except ValueError:
            raise CliError(
                f"bad utility spec {part!r}; use linear:<gamma> or alpha:<alpha>[:<scale>]")
    return tuple(utilities)


def _scenario_from_config(cfg: dict) -> Scenario:
    if "utilities" not in cfg:
        raise CliError("missing utilities (use --linear or --alpha)")
    side = None
    if cfg.get("a1") or cfg.get("an"):
        if not (cfg.get("a1") and cfg.get("an")):
            raise CliError("side links need both a1 and aN")
        side = SideLinks(float(cfg["a1"]), float(cfg["an"]))
    s = Scenario(parse_utilities(cfg["utilities"]), a=float(cfg.get("a", "1")),
                 beta=float(cfg.get("beta", "0.5")), side=side)
    bad = model.validate_scenario(s)
    if bad:
        raise CliError("invalid scenario: " + "; ".join(bad))
    return s


# ---------------------------------------------------------------------------
# config files

def parse_config_text(text: str) -> dict:
    cfg = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("# config."):
            line = line[len("# config."):]
        elif line.startswith("#") or not line:
            continue
        if "=" not in line:
            continue
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def read_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        cfg = obj.get("config", obj)
        return {k: str(v) for k, v in cfg.items()}
    return parse_config_text(text)


# ---------------------------------------------------------------------------
# output

def _emit(cfg: dict, columns, rows, stream) -> None:
    # the output path is not part of the experiment definition
    cfg = {k: v for k, v in cfg.items() if k != "out"}
    fmt = cfg.get("format", "csv")
    if fmt == "json":
        doc = {"config": dict(sorted(cfg.items()))}
        if cfg.get("timestamp", "on") == "on":
            doc["generated"] = datetime.now(timezone.utc).isoformat()
        doc["rows"] = [
            {c: _json_value(row.get(c)) for c in columns} for row in rows
        ]
        json.dump(doc, stream, indent=2, sort_keys=False)
        stream.write("\n")
    elif fmt == "csv":
        if cfg.get("timestamp", "on") == "on":
            stream.write(f"# generated = {datetime.now(timezone.utc).isoformat()}\n")
        for key in sorted(cfg):
            stream.write(f"# config.{key} = {cfg[key]}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
    else:
        raise CliError(f"unknown format {fmt!r}")


def _write(cfg: dict, columns, rows) -> None:
    out = cfg.get("out", "-")
    if out in ("-", ""):
        _emit(cfg, columns, rows, sys.stdout)
    else:
        buf = io.StringIO()
        _emit(cfg, columns, rows, buf)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# commands

def _profile_cells(profile) -> dict:
    if isinstance(profile, FlowAllocation):
        return {"profile": list(profile.y), "z1": profile.z1, "zN": profile.zN,
                "v1": profile.v1, "vN": profile.vN}
    return {"profile": list(profile), "z1": "", "zN": "", "v1": "", "vN": ""}


def _cmd_optimal(cfg: dict):
    problem = int(cfg["problem"])
    s = _scenario_from_config(cfg)
    if problem == 1:
        res = optimum.solve_p1(s)
    elif problem == 2:
        res = optimum.solve_p2(s)
    elif problem == 3:
        res = optimum.solve_p3_linear(s) if s.is_linear() else optimum.solve_p3(s)
    else:
        raise CliError(f"problem must be 1, 2, or 3, got {problem}")
    row = {"problem": problem, "method": res.method.value,
           "surplus": res.surplus, "kkt_residual": res.kkt_residual}
    row.update(_profile_cells(res.profile))
    cols = ["problem", "method", "surplus", "kkt_residual", "profile",
            "z1", "zN", "v1", "vN"]
    return cols, [row], 0


def _cmd_nash(cfg: dict):
    game = int(cfg["game"])
    s = _scenario_from_config(cfg)
    code = 0
    boundary = False
    if game == 1:
        outcomes = [equilibrium.nash_game1(s)]
    elif game == 2:
        if s.is_linear():
            res = equilibrium.game2_linear_branches(s)
            outcomes = res.outcomes()
            boundary = res.boundary_hit
        else:
            it = equilibrium.nash_game2_iter(s)
            outcomes = [it.point]
            if not it.converged:
                code = 2
    elif game == 3:
        outcomes = [equilibrium.nash_game3(s)]
    else:
        raise CliError(f"game must be 1, 2, or 3, got {game}")

    rows = []
    for out in outcomes:
        if isinstance(out, Segment):
            surpluses = [model.surplus(game, s, p) for p in out.sample(35)]
            row = {"game": game, "kind": "segment", "x1_lo": out.x1_lo,
                   "x1_hi": out.x1_hi, "ne_surplus_min": min(surpluses),
                   "ne_surplus_max": max(surpluses), "boundary": boundary}
            row.update(_profile_cells(out.sampler(out.x1_lo)))
        else:
            val = model.surplus(game, s, out.profile)
            row = {"game": game, "kind": "point", "x1_lo": "", "x1_hi": "",
                   "ne_surplus_min": val, "ne_surplus_max": val,
                   "boundary": boundary}
            row.update(_profile_cells(out.profile))
        rows.append(row)
    cols = ["game", "kind", "x1_lo", "x1_hi", "profile", "z1", "zN", "v1", "vN",
            "ne_surplus_min", "ne_surplus_max", "boundary"]
    return cols, rows, code


def _efficiency_row(game: int, rep: analysis.EfficiencyReport) -> dict:
    return {
        "game": game, "outcome_kind": rep.outcome_kind,
        "ne_surplus_min": rep.ne_surplus_min, "ne_surplus_max": rep.ne_surplus_max,
        "opt_surplus": rep.opt_surplus, "efficiency_min": rep.efficiency_min,
        "efficiency_max": rep.efficiency_max, "boundary": rep.boundary_hit,
        "converged": rep.converged, "iterations": rep.iterations,
    }


_EFF_COLS = ["game", "outcome_kind", "ne_surplus_min", "ne_surplus_max",
             "opt_surplus", "efficiency_min", "efficiency_max", "boundary",
             "converged", "iterations"]


def _cmd_efficiency(cfg: dict):
    game = int(cfg["game"])
    s = _scenario_from_config(cfg)
    rep = analysis.efficiency(s, game)
    return _EFF_COLS, [_efficiency_row(game, rep)], 0 if rep.converged else 2


def _cmd_poa_scan(cfg: dict):
    game = int(cfg["game"])
    lo = float(cfg.get("ratio_min", "1"))
    hi = float(cfg.get("ratio_max", "8"))
    step = float(cfg.get("ratio_step", "0.01"))
    if step <= 0 or hi < lo:
        raise CliError("need ratio_min <= ratio_max and ratio_step > 0")
    count = int(round((hi - lo) / step)) + 1
    ratios = [lo + i * step for i in range(count)]
    n_list = [int(t) for t in cfg.get("n_list", "2").split(";")]
    routing = [float(t) for t in cfg.get("routing_gammas", "1").split(";")]
    sides = [float(t) for t in cfg.get("side_slopes", "0.1").split(";")]
    res = analysis.poa_scan(game, float(cfg.get("beta", "0.5")), ratios,
                            n_list=n_list, routing_gammas=routing,
                            side_slopes=sides)
    cols = ["n", "ratio", "routing_gamma", "side", "efficiency_min",
            "efficiency_max", "ne_surplus_min", "opt_surplus", "outcome_kind",
            "is_argmin"]
    return cols, res.rows, 0


def _cmd_montecarlo(cfg: dict):
    if "seed" not in cfg:
        raise CliError("montecarlo requires --seed")
    game = int(cfg["game"])
    rows = analysis.monte_carlo(
        game, int(cfg.get("count", "200")), int(cfg["seed"]),
        beta=float(cfg.get("beta", "0.5")), n_users=int(cfg.get("n", "2")),
        max_workers=thread_count())
    cols = ["seed_index", "a", "alphas", "scales", "a1", "aN",
            "ne_surplus_min", "opt_surplus", "efficiency_min", "converged",
            "iterations"]
    return cols, rows, 0


def _cmd_sweep(cfg: dict):
    lo = float(cfg.get("side_min", "1e-4"))
    hi = float(cfg.get("side_max", "10"))
    pts = int(cfg.get("side_points", "25"))
    if not (0 < lo <= hi and pts >= 1):
        raise CliError("need 0 < side_min <= side_max and side_points >= 1")
    values = np.geomspace(lo, hi, pts)
    rows = analysis.sweep_side_cost(values, n_users=int(cfg.get("n", "500")),
                                    beta=float(cfg.get("beta", "0.5")))
    return ["a1", "aN", "ne_surplus", "opt_surplus", "efficiency"], rows, 0


def _cmd_worst_family(cfg: dict):
    if "family" not in cfg:
        raise CliError("worst-family requires --id")
    fam = analysis.make_worst_family(
        cfg["family"], n_users=int(cfg.get("n", "500")),
        beta=float(cfg.get("beta", "0.5")), eps=float(cfg.get("eps", "1e-4")))
    game = {"game1-jt": 1, "game3-general": 3}.get(fam.family_id, 2)
    rep = analysis.efficiency(fam.scenario, game)
    row = {
        "family": fam.family_id, "n": fam.scenario.n_users,
        "beta": fam.scenario.beta, "a": fam.scenario.a,
        "eps": fam.scenario.side.a1 if fam.scenario.side else "",
        "sigma": fam.sigma, "predicted_efficiency": fam.predicted_efficiency,
        "efficiency_min": rep.efficiency_min, "efficiency_max": rep.efficiency_max,
        "utilities": format_utilities(fam.scenario.utilities),
    }
    cols = ["family", "n", "beta", "a", "eps", "sigma", "predicted_efficiency",
            "efficiency_min", "efficiency_max", "utilities"]
    return cols, [row], 0


_COMMANDS = {
    "optimal": _cmd_optimal,
    "nash": _cmd_nash,
    "efficiency": _cmd_efficiency,
    "poa-scan": _cmd_poa_scan,
    "montecarlo": _cmd_montecarlo,
    "sweep-side-cost": _cmd_sweep,
    "worst-family": _cmd_worst_family,
}


def run_config(cfg: dict) -> int:
    command = cfg.get("command")
    if command not in _COMMANDS:
        raise CliError(f"unknown command {command!r}")
    cols, rows, code = _COMMANDS[command](cfg)
    _write(cfg, cols, rows)
    return code


# ---------------------------------------------------------------------------
# argument parsing

def _add_output_flags(p):
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the generated-at header line")


def _add_scenario_flags(p):
    p.add_argument("--linear", help="comma-separated linear slopes, e.g. 1,1")
    p.add_argument("--alpha", help="comma-separated fairness exponents")
    p.add_argument("--scale", help="comma-separated scales for --alpha")
    p.add_argument("--a", type=float, default=1.0, help="bottleneck price slope")
    p.add_argument("--beta", type=float, default=0.5, help="coded-price discount in (0,1]")
    p.add_argument("--a1", type=float, help="first side-link price slope")
    p.add_argument("--aN", type=float, help="second side-link price slope")


def _utilities_arg(args) -> str | None:
    if args.linear and args.alpha:
        raise CliError("give either --linear or --alpha, not both")
    if args.linear:
        return ",".join(f"linear:{t.strip()}" for t in args.linear.split(","))
    if args.alpha:
        alphas = [t.strip() for t in args.alpha.split(",")]
        scales = [t.strip() for t in args.scale.split(",")] if args.scale else ["1"] * len(alphas)
        if len(scales) != len(alphas):
            raise CliError("--scale must list one value per --alpha entry")
        return ",".join(f"alpha:{al}:{sc}" for al, sc in zip(alphas, scales))
    return None


def build_parser() -> _Parser:
    parser = _Parser(prog="nc-poa", description=__doc__)
    parser.add_argument("--config", help="run from a flat key=value or JSON config file")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("optimal", help="socially optimal allocation")
    p.add_argument("--problem", type=int, required=True)
    _add_scenario_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("nash", help="Nash equilibrium (point or segment)")
    p.add_argument("--game", type=int, required=True)
    _add_scenario_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("efficiency", help="equilibrium vs optimum surplus ratio")
    p.add_argument("--game", type=int, required=True)
    _add_scenario_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("poa-scan", help="worst-case scan over linear families")
    p.add_argument("--game", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--ratio-min", type=float, default=1.0)
    p.add_argument("--ratio-max", type=float, default=8.0)
    p.add_argument("--ratio-step", type=float, default=0.01)
    p.add_argument("--n", default="2", help="semicolon-separated user counts")
    p.add_argument("--routing-gamma", default="1", help="semicolon-separated middle slopes")
    p.add_argument("--side-slope", default="0.1", help="semicolon-separated side slopes (game 3)")
    _add_output_flags(p)

    p = sub.add_parser("montecarlo", help="random fairness-utility scenarios")
    p.add_argument("--game", type=int, required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--n", type=int, default=2, help="users per scenario")
    _add_output_flags(p)

    p = sub.add_parser("sweep-side-cost", help="efficiency vs side-link cost slope")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--side-min", type=float, default=1e-4)
    p.add_argument("--side-max", type=float, default=10.0)
    p.add_argument("--side-points", type=int, default=25)
    _add_output_flags(p)

    p = sub.add_parser("worst-family", help="instantiate a known worst-case family")
    p.add_argument("--id", required=True, dest="family")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=1e-4)
    _add_output_flags(p)

    return parser


def config_from_args(args) -> dict:
    cfg = {"command": args.command,
           "format": args.format,
           "timestamp": "off" if args.no_timestamp else "on",
           "out": args.out}
    simple = {"game": "game", "problem": "problem", "a": "a", "beta": "beta",
              "a1": "a1", "aN": "an", "count": "count", "seed": "seed",
              "family": "family", "eps": "eps", "ratio_min": "ratio_min",
              "ratio_max": "ratio_max", "ratio_step": "ratio_step",
              "side_min": "side_min", "side_max": "side_max",
              "side_points": "side_points"}
    for attr, key in simple.items():
        if hasattr(args, attr) and getattr(args, attr) is not None:
            v = getattr(args, attr)
            cfg[key] = _fmt(float(v)) if isinstance(v, float) else str(v)
    if hasattr(args, "linear"):
        utilities = _utilities_arg(args)
        if utilities:
            cfg["utilities"] = utilities
    if args.command == "poa-scan":
        cfg["n_list"] = args.n
        cfg["routing_gammas"] = args.routing_gamma
        cfg["side_slopes"] = args.side_slope
    elif hasattr(args, "n") and args.n is not None:
        cfg["n"] = str(args.n)
    return cfg


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            cfg = read_config(args.config)
        elif args.command:
            cfg = config_from_args(args)
        else:
            raise CliError("give a command or --config FILE (see --help)")
        return run_config(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except optimum.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
