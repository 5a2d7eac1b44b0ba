"""``bench`` command line: run protocols, build reports, check the noise model.

Exit codes: 0 success, 1 usage error, 2 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import GPBOError, InvalidInputError, ParseError
from .fidelity import FidelityParams, run_final
from .loop import LoopParams, run_preliminary
from .bench.noise import verify_noise
from .bench.problems import make_problem
from .bench.report import build_report, expand_glob
from .bench.runfiles import read_run
from .bench.tracecheck import check_final_trace

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate one optimization run")
    run.add_argument("--protocol", choices=["preliminary", "final"], required=True)
    run.add_argument("--problem", default="branin_grid")
    run.add_argument("--grid", default="50x50")
    run.add_argument("--budget", type=int, default=None,
                     help="evaluations (preliminary, default 100) or fidelity units (final, default 700)")
    run.add_argument("--batch-size", type=int, default=5)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--no-early-stop", action="store_true")
    run.add_argument("--random-search", action="store_true")
    run.add_argument("--out", required=True)

    rep = sub.add_parser("report", help="build CSV tables from run files")
    rep.add_argument("--in", dest="pattern", required=True, help="glob of run JSONL files")
    rep.add_argument("--out-dir", required=True)

    vn = sub.add_parser("verify-noise", help="Monte Carlo check of the partial-reward noise model")
    vn.add_argument("--problem", default="branin_grid")
    vn.add_argument("--grid", default="50x50")
    vn.add_argument("--draws", type=int, default=10_000)
    vn.add_argument("--seed", type=int, default=0)

    ct = sub.add_parser("check-trace", help="audit a final-protocol trace")
    ct.add_argument("--in", dest="path", required=True)
    return parser


def cmd_run(args) -> int:
    if args.batch_size < 1:
        raise UsageError("--batch-size must be >= 1")
    problem = make_problem(args.problem, args.grid, seed=args.seed)
    loop_params = LoopParams(batch_size=args.batch_size, random_search=args.random_search)
    if args.protocol == "preliminary":
        budget = 100 if args.budget is None else args.budget
        report = run_preliminary(problem, budget, loop_params, seed=args.seed)
    else:
        budget = 700 if args.budget is None else args.budget
        if args.no_early_stop:
            params = FidelityParams.without_stopping(fidelity_budget=budget)
        else:
            params = FidelityParams(fidelity_budget=budget)
        report = run_final(problem, params, loop_params, seed=args.seed)
    report.write_jsonl(args.out)
    print(json.dumps({"out": args.out, "best_reward": report.best_reward(), **report.counts}))
    return EXIT_OK


def cmd_report(args) -> int:
    paths = expand_glob(args.pattern)
    if not paths:
        raise UsageError(f"no files match {args.pattern!r}")
    files = build_report(paths, args.out_dir)
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_verify_noise(args) -> int:
    if args.draws < 1:
        raise UsageError("--draws must be >= 1")
    problem = make_problem(args.problem, args.grid, seed=args.seed)
    res = verify_noise(problem, args.draws, args.seed)
    print(f"coverage {res['coverage']:.6f}")
    print(f"exceedance {res['exceedance']:.6f}")
    print(f"widths_strictly_decreasing {str(res['widths_strictly_decreasing']).lower()}")
    print(f"consistency_t7 {res['consistency_t7']:.6f}")
    print(f"consistency_t7_top1pct {res['consistency_t7_top1pct']:.6f}")
    for row in res["per_iteration"]:
        print(f"iteration {row['iteration']} coverage {row['coverage']:.4f} "
              f"exceedance {row['exceedance']:.4f} ci_width {row['ci_width']:.6g}")
    return EXIT_OK


def cmd_check_trace(args) -> int:
    run = read_run(args.path)
    meta = run.meta
    warmup = meta.get("full_evals_before_stopping")
    issues = check_final_trace(
        run,
        warmup=float("inf") if warmup is None else warmup,
        decision_iteration=meta.get("decision_iteration", 7),
        budget=meta.get("budget"),
    )
    for issue in issues:
        print(issue)
    print("ok" if not issues else f"{len(issues)} violation(s)")
    return EXIT_OK if not issues else EXIT_RUNTIME


COMMANDS = {
    "run": cmd_run,
    "report": cmd_report,
    "verify-noise": cmd_verify_noise,
    "check-trace": cmd_check_trace,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except InvalidInputError as exc:
        # Unknown problem names and malformed grids arrive here.
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GPBOError, OSError, ArithmeticError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
