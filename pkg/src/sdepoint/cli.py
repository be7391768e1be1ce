"""Command line entry point ``sdepoint``.

Subcommands ``run``, ``study``, ``compare`` write CSV (to ``--out`` or stdout),
``constants`` prints JSON. Every output starts with a comment line holding the
library version and the full invocation parameters, so identical invocations
give byte-identical files.

Exit codes: 0 success, 2 configuration or domain error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__
from .constants import analytic_constants, mc_constants
from .exceptions import ConfigError, DomainError, NumericError
from .harness import (CSV_COLUMNS, SCHEME_IDS, StudyRow, compare_schemes, constant_target,
                      convergence_study, estimate_error)
from .problem import load_problem

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdepoint", description="Error studies for pathwise SDE schemes at t = 1.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, reps=1000):
        sp.add_argument("--problem", required=True, help="JSON problem file or inline JSON object")
        sp.add_argument("--p", type=float, default=2.0, help="error exponent (>= 1)")
        sp.add_argument("--reps", type=int, default=reps, help="Monte Carlo replications")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (default stdout)")

    run = sub.add_parser("run", help="estimate e_p for one scheme and budget")
    common(run)
    run.add_argument("--scheme", required=True, choices=SCHEME_IDS)
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--m", type=int, help="reference resolution (default max(4096, n^2))")

    study = sub.add_parser("study", help="convergence study over several budgets")
    common(study)
    study.add_argument("--scheme", required=True, choices=SCHEME_IDS)
    study.add_argument("--n", type=_int_list, default=[16, 32, 64, 128], help="comma separated budgets")
    study.add_argument("--m", type=int)

    comp = sub.add_parser("compare", help="matched-budget comparison of several schemes")
    common(comp)
    comp.add_argument("--n", type=int, required=True)
    comp.add_argument("--schemes", default="equi,star,star_star,fixed,milstein")
    comp.add_argument("--m", type=int)

    const = sub.add_parser("constants", help="asymptotic constants, closed form or Monte Carlo")
    common(const, reps=10_000)
    const.add_argument("--mc", action="store_true", help="force the Monte Carlo estimator")
    const.add_argument("--k", type=int, default=256, help="coarse grid for the Monte Carlo estimator")
    return parser


def _header(args) -> str:
    params = {k: v for k, v in sorted(vars(args).items()) if k != "out"}
    return f"# sdepoint {__version__} " + json.dumps(params, sort_keys=True, separators=(",", ":"))


def _csv(rows: list[StudyRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        rec = row.as_record()
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _execute(args) -> str:
    problem = load_problem(args.problem)
    if args.command == "run":
        est = estimate_error(args.scheme, problem, args.p, args.n, args.reps, args.seed, args.m)
        rows = [StudyRow(args.n, est, est.cost_times_e, constant_target(args.scheme, problem, args.p))]
        return _header(args) + "\n" + _csv(rows)
    if args.command == "study":
        st = convergence_study(args.scheme, problem, args.p, args.n, args.reps, args.seed, args.m)
        text = _header(args) + "\n" + _csv(st.rows)
        return text + f"# slope={st.slope!r} guarded_slope={st.guarded_slope!r}\n"
    if args.command == "compare":
        ids = [s.strip() for s in args.schemes.split(",") if s.strip()]
        rows = compare_schemes(problem, args.p, args.n, args.reps, args.seed, ids, args.m)
        return _header(args) + "\n" + _csv(rows)
    consts = None if args.mc else analytic_constants(problem, args.p)
    if consts is None:
        consts = mc_constants(problem.coefficients, args.p, args.k, args.reps, args.seed)
    payload = {"version": __version__, "parameters": json.loads(_header(args).split(" ", 3)[3]),
               "constants": consts.as_dict()}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        text = _execute(args)
    except (ConfigError, DomainError) as exc:
        print(f"sdepoint: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, OverflowError) as exc:
        print(f"sdepoint: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
