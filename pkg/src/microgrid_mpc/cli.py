"""Command-line surface: generate scenarios, run simulations, report
forecast errors.

Exit statuses partition cleanly: 0 success, 1 invalid input, 2 internal
solver error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import battery as bat
from . import forecast as fc
from . import scenario as sc
from .battery import BatteryError, BatteryParams
from .engine import EngineConfig, EngineError, MpcEngine, Weights
from .forecast import ForecastError
from .milp import MilpError
from .scenario import ScenarioError

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2

TRACE_HEADER = ("hour,mode,p_ch,p_dis,soc,essential_shed,regular_shed,"
                "surplus,expected_ri")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with user-error exit status 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_scenario_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="CSV", help="scenario CSV file")
    src.add_argument("--synthetic", action="store_true",
                     help="use the built-in synthetic storm scenario")
    p.add_argument("--seed", type=int, default=sc.BUNDLED_SEED,
                   help="generator seed for --synthetic (default %(default)s)")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w-bat", type=float, default=Weights.w_bat)
    p.add_argument("--w-blc", type=float, default=Weights.w_blc)
    p.add_argument("--w-t", type=float, default=Weights.w_t)
    p.add_argument("--w-r", type=float, default=Weights.w_r)
    p.add_argument("--w-essential", type=float, default=Weights.w_essential)
    p.add_argument("--w-regular", type=float, default=Weights.w_regular)
    p.add_argument("--stride", choices=("hour", "day"), default="hour",
                   help="slide the lookahead window by 1 hour or by a full day")
    p.add_argument("--sim-hours", type=int, default=72,
                   help="number of simulated decision hours (default %(default)s)")
    p.add_argument("--curve", metavar="CSV",
                   help="battery lifecycle curve file (dod,cycles)")
    p.add_argument("--e-max", type=float, default=BatteryParams.e_max,
                   help="battery capacity in kWh")
    p.add_argument("--p-max", type=float, default=BatteryParams.p_max,
                   help="battery power limit in kW")
    p.add_argument("--soc-init", type=float, default=BatteryParams.soc_init,
                   help="initial state of charge")
    p.add_argument("--dump-milp", metavar="DIR",
                   help="write each decision hour's MILP in LP-like text form")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="microgrid-mpc",
                     description="Resilient microgrid energy management simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_sim = sub.add_parser("simulate", help="run the sliding-window simulation")
    _add_scenario_source(p_sim)
    _add_run_flags(p_sim)
    p_sim.add_argument("-o", "--output", default="out", metavar="DIR",
                       help="output directory (default %(default)s)")

    p_gen = sub.add_parser("generate", help="write a synthetic scenario CSV")
    p_gen.add_argument("--seed", type=int, default=sc.BUNDLED_SEED)
    p_gen.add_argument("--hours", type=int, default=sc.DEFAULT_SERIES_HOURS)
    p_gen.add_argument("-o", "--output", required=True, metavar="CSV")

    p_rmse = sub.add_parser("rmse", help="report forecaster error over the "
                                         "scenario's comm-loss window")
    _add_scenario_source(p_rmse)
    return parser


def _load_series(args) -> sc.ScenarioTimeSeries:
    if args.scenario is not None:
        return sc.load_scenario(args.scenario)
    return sc.generate_synthetic(args.seed)


def _engine_config(args) -> EngineConfig:
    weights = Weights(w_bat=args.w_bat, w_blc=args.w_blc, w_t=args.w_t,
                      w_r=args.w_r, w_essential=args.w_essential,
                      w_regular=args.w_regular)
    params = BatteryParams(e_max=args.e_max, p_max=args.p_max,
                           soc_init=args.soc_init)
    curve = bat.load_blc_curve(args.curve) if args.curve else bat.DEFAULT_BLC_CURVE
    lookahead = 24
    return EngineConfig(weights=weights, params=params, curve=curve,
                        simulation_hours=args.sim_hours, lookahead=lookahead,
                        stride=1 if args.stride == "hour" else lookahead)


def _write_outputs(result, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trace.csv"), "w", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in result.records:
            fh.write(",".join([
                str(r.hour), str(r.mode), repr(r.p_ch), repr(r.p_dis),
                repr(r.soc_after), repr(r.essential_shed), repr(r.regular_shed),
                repr(r.surplus), repr(r.expected_ri),
            ]) + "\n")
    with open(os.path.join(out_dir, "ri_curve.csv"), "w", newline="\n") as fh:
        fh.write("decision_hour,expected_ri\n")
        for i, v in enumerate(result.expected_ri_curve):
            fh.write(f"{i},{float(v)!r}\n")
    summary = result.summary()
    summary.setdefault("rmse", None)
    with open(os.path.join(out_dir, "summary.json"), "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args) -> int:
    series = _load_series(args)
    config = _engine_config(args)
    engine = MpcEngine(config)
    if args.dump_milp:
        os.makedirs(args.dump_milp, exist_ok=True)

        def dump(hour, hp):
            path = os.path.join(args.dump_milp, f"milp_hour_{hour:03d}.lp")
            with open(path, "w", newline="\n") as fh:
                hp.problem.dump(fh)

        engine.set_dump_hook(dump)
    result = engine.run(series)
    _write_outputs(result, args.output)
    print(json.dumps(result.summary(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = sc.GeneratorConfig(hours=args.hours)
    series = sc.generate_synthetic(args.seed, cfg)
    sc.write_scenario(series, args.output)
    print(f"wrote {series.hours}-hour scenario to {args.output}")
    return EXIT_OK


def cmd_rmse(args) -> int:
    series = _load_series(args)
    comm = sorted(series.comm_loss_hours)
    usable = [h for h in comm if h >= 2]
    if not usable:
        print("no comm-loss window")
        return EXIT_OK
    # one-step two-hour-average predictions: actual loads are revealed after
    # every hour, so hour h is always predicted from actuals at h-1 and h-2
    report = {}
    for name, arr in (("essential", series.essential_load),
                      ("regular", series.regular_load),
                      ("total", series.total_load)):
        predicted = [(arr[h - 1] + arr[h - 2]) / 2.0 for h in usable]
        actual = [arr[h] for h in usable]
        report[name] = fc.rmse(actual, predicted)
        print(f"{name}_rmse_kw={report[name]:.6f}")
    return EXIT_OK


_COMMANDS = {"simulate": cmd_simulate, "generate": cmd_generate, "rmse": cmd_rmse}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USER_ERROR
    except (ScenarioError, BatteryError, ForecastError, MilpError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except EngineError as exc:
        print(f"internal solver error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
