"""Command-line entry point: ``gaussimag <subcommand> ...``.

Exit codes: 0 success, 1 check/validation failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .agents import AGENTS
from .bounds import check_optimism_conditions, tuned_bound
from .envs import SpecError, load_spec
from .harness import (
    TARGETS,
    OptimismPreconditionError,
    RunConfig,
    estimate_information_ratio,
    run_experiment,
    validate_optimism,
    write_trace,
)


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _spec(args):
    if args.config is None:
        raise UsageError("--config is required")
    try:
        spec = load_spec(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except SpecError as exc:
        raise UsageError(f"invalid config: {exc}") from None
    return spec


def _config(args, spec, agent=None):
    seed = spec.seed if args.seed is None else args.seed
    return RunConfig(spec, agent or args.agent, args.reps, seed, realized=getattr(args, "realized", False), workers=args.workers)


def cmd_simulate(args) -> int:
    spec = _spec(args)
    trace = run_experiment(_config(args, spec))
    if args.out is None:
        text = trace.to_csv() if args.format == "csv" else json.dumps(trace.to_dict(), indent=2) + "\n"
        sys.stdout.write(text)
    else:
        write_trace(trace, args.out, args.format)
    return 0


def cmd_bounds(args) -> int:
    spec = _spec(args)
    report = tuned_bound(spec)
    if args.format == "json":
        text = report.to_json() + "\n"
    elif args.format == "csv":
        text = "term,value,formula\n" + "".join(f"{n},{v!r},{f}\n" for n, v, f in report.rows())
    else:
        text = report.format_table() + "\n"
    _emit(text, args.out)
    return 0


def cmd_ir_estimate(args) -> int:
    spec = _spec(args)
    if args.agent == "uniform":
        raise UsageError("ir-estimate needs gaussian-ts or gaussian-ids")
    est = estimate_information_ratio(_config(args, spec), target=args.target, delta_sq=args.delta_sq)
    if args.format == "csv":
        rows = zip(range(est.numerator.size), est.numerator, est.denominator)
        text = "t,numerator,denominator\n" + "".join(f"{t},{n!r},{d!r}\n" for t, n, d in rows)
    else:
        text = json.dumps(est.to_dict(), indent=2) + "\n"
    _emit(text, args.out)
    if args.out is not None:
        print(f"ratio_sup_estimate={est.ratio_sup_estimate:.6g} cap={est.cap:.6g}")
    return 0


def cmd_check_optimism(args) -> int:
    spec = _spec(args)
    passes, violations = check_optimism_conditions(spec)
    doc = {"passes": passes, "violations": violations}
    if passes and args.histories > 0:
        seed = spec.seed if args.seed is None else args.seed
        report = validate_optimism(RunConfig(spec, "gaussian-ts", args.histories, seed), args.histories)
        doc["empirical"] = report.to_dict()
        passes = report.passed
    if args.format == "json":
        text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    else:
        lines = ["conditions hold" if doc["passes"] else "conditions violated:"]
        lines += [f"  {v}" for v in violations]
        if "empirical" in doc:
            emp = doc["empirical"]
            lines.append(f"min margin {emp['min_margin']:.6g} over {emp['num_histories']} histories, {emp['flagged']} flagged")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0 if passes else 1


def cmd_validate(args) -> int:
    from .validation import CRITERIA, run_all

    numbers = None
    if args.only:
        try:
            numbers = [int(x) for x in args.only.split(",")]
        except ValueError:
            raise UsageError("--only takes a comma-separated list of criterion numbers") from None
        unknown = [n for n in numbers if n not in CRITERIA]
        if unknown:
            raise UsageError(f"unknown criteria: {unknown}")
    results = run_all(numbers, echo=print)
    if args.format == "json" and args.out is not None:
        doc = [
            {"number": r.number, "title": r.title, "passed": r.ok, "detail": r.detail, "seconds": r.seconds}
            for r in results
        ]
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    failed = [r.number for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussimag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=("csv", "json"), default="csv"):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="master seed (defaults to the config's)")
        p.add_argument("--reps", type=int, default=1000, help="Monte Carlo replications")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=fmt, default=default)
        p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("simulate", help="simulate an agent and write a regret trace")
    common(p)
    p.add_argument("--agent", choices=AGENTS, default="gaussian-ts")
    p.add_argument("--realized", action="store_true", help="use realized instead of pseudo-regret")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bounds", help="evaluate the tuned regret bound")
    common(p, ("text", "csv", "json"), "text")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("ir-estimate", help="estimate the empirical information ratio")
    common(p, default="json")
    p.add_argument("--agent", choices=AGENTS, default="gaussian-ts")
    p.add_argument("--target", choices=TARGETS, default="theta-hat")
    p.add_argument("--delta-sq", type=float, default=None, help="target perturbation (default: config delta_sq)")
    p.set_defaults(func=cmd_ir_estimate)

    p = sub.add_parser("check-optimism", help="check the optimism conditions, optionally empirically")
    common(p, ("text", "json"), "text")
    p.add_argument("--histories", type=int, default=0, help="sampled histories for the empirical check")
    p.set_defaults(func=cmd_check_optimism)

    p = sub.add_parser("validate", help="run the acceptance suite")
    common(p, ("text", "json"), "text")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "reps", 1) < 1:
        print("error: --reps must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, ValueError, OptimismPreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
