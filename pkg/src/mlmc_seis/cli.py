"""Command-line entry point.

Subcommands: synth, verify, plan, run, report, attencmp.  The first
positional argument of each is the TOML config path.  Exit codes:
0 success, 2 config error, 3 infeasible tolerance, 4 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from mlmc_seis import report as report_mod
from mlmc_seis import runner, store
from mlmc_seis.config import ConfigError, load_config
from mlmc_seis.plan import InfeasibleToleranceError
from mlmc_seis.solver import SolverBlowUpError, StabilityError

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlmc-seis",
        description="Multilevel Monte Carlo studies of seismic misfit quantities",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synth", "generate the synthetic dataset"),
        ("verify", "run the verification study and calibrate rate models"),
        ("plan", "plan MC and MLMC hierarchies for the tolerance schedule"),
        ("run", "execute the tolerance study and write the report"),
        ("report", "render CSV tables and SVG figures from the report"),
        ("attencmp", "compare both misfits with attenuation on/off"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path, help="path to the TOML run configuration")
        if name == "report":
            p.add_argument("--no-plots", action="store_true", help="tables only")
        if name == "attencmp":
            p.add_argument("--levels", default="1,2",
                           help="comma-separated level indices (default 1,2)")
    return parser


def _print_plans(rows: list[dict]) -> None:
    for row in rows:
        tol = row["tol"]
        mlmc = row.get("mlmc")
        if mlmc is None:
            print(f"tol {tol:.4e}: infeasible ({row.get('infeasible', '')})")
            continue
        counts = ", ".join(
            f"l{l}={n}" for l, n in zip(range(mlmc["l0"], mlmc["top"] + 1),
                                        mlmc["n_samples"])
        )
        print(f"tol {tol:.4e}: MLMC [{counts}] theta={mlmc['theta']:.3f} "
              f"predicted {mlmc['predicted_work']:.4g} s", end="")
        mc = row.get("mc")
        if mc is None:
            print("  |  MC infeasible")
        else:
            print(f"  |  MC l={mc['top']} N={mc['n_samples'][0]} "
                  f"predicted {mc['predicted_work']:.4g} s")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "synth":
            runner.cmd_synth(config)
        elif args.command == "verify":
            runner.cmd_verify(config)
        elif args.command == "plan":
            _print_plans(runner.cmd_plan(config))
        elif args.command == "run":
            report = runner.cmd_run(config)
            done = [e for e in report["tolerances"] if "mlmc" in e]
            for e in done:
                print(f"tol {e['tol']:.4e}: estimate {e['mlmc']['estimate']:.6g} "
                      f"work {e['mlmc']['measured_work']:.4g} s")
            if "reference" in report:
                print(f"reference value {report['reference']['value']:.6g}")
        elif args.command == "report":
            paths = report_mod.render(
                store.load_json(runner.report_path(config)),
                config.output / "report",
                plots=not getattr(args, "no_plots", False),
            )
            for p in paths:
                print(p)
        elif args.command == "attencmp":
            levels = tuple(int(x) for x in args.levels.split(","))
            for row in runner.cmd_attencmp(config, levels):
                print(f"Q_{row['qoi']} level {row['level']}: "
                      f"elastic {row['elastic']:.6g} attenuated {row['attenuated']:.6g} "
                      f"change {row['change_pct']:+.1f}%")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleToleranceError as exc:
        print(f"infeasible tolerance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (StabilityError, SolverBlowUpError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
