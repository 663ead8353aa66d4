"""Command-line front end.

    tpdl check FILE | -e FORMULA   decide satisfiability
    tpdl verify FILE | -e FORMULA  decide, then verify the witness of a SAT answer
    tpdl fuzz                      differential run against the bounded oracle

The first stdout line of check/verify is exactly SAT or UNSAT; everything
else goes to stderr.  Exit codes: 0 SAT (or fuzz clean), 1 UNSAT (or fuzz
violations), 2 input error, 3 resource limit, 4 witness verification failed.
"""
from __future__ import annotations

import argparse
import json
import os
import resource
import sys
from typing import List, Optional

from .engine import Config, ResourceLimitExceeded, solve
from .parser import ParseError, parse, parse_lines

EXIT_SAT, EXIT_UNSAT, EXIT_INPUT, EXIT_LIMIT, EXIT_WITNESS = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


def _read_formulas(args) -> list:
    if args.expr is not None:
        if args.file is not None:
            raise InputError("give either FILE or -e FORMULA, not both")
        formulas = [parse(args.expr)]
    elif args.file is not None:
        try:
            if args.file == "-":
                text = sys.stdin.read()
            else:
                with open(args.file, encoding="utf-8") as fh:
                    text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {args.file}: {exc.strerror}") from None
        formulas = parse_lines(text)
    else:
        raise InputError("no input: give FILE or -e FORMULA")
    if not formulas:
        raise InputError("the input contains no formulas")
    return formulas


def _default_max_nodes() -> Optional[int]:
    raw = os.environ.get("TPDL_MAX_NODES")
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"TPDL_MAX_NODES is not an integer: {raw!r}") from None


def _peak_memory_mb() -> float:
    # ru_maxrss is kilobytes on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _solve_from_args(args):
    formulas = _read_formulas(args)
    max_nodes = args.max_nodes if args.max_nodes is not None else _default_max_nodes()
    config = Config(max_nodes=max_nodes, time_limit=args.time_limit,
                    trace=bool(getattr(args, "trace", None)))
    return solve(formulas, config)


def _report_stats(verdict) -> None:
    stats = verdict.stats.as_dict()
    stats["peak_memory_mb"] = round(_peak_memory_mb(), 1)
    for key, value in stats.items():
        print(f"{key}: {value}", file=sys.stderr)


def cmd_check(args) -> int:
    verdict = _solve_from_args(args)
    print(verdict.answer)
    sys.stdout.flush()
    if args.stats:
        _report_stats(verdict)
    if args.dot:
        _write(args.dot, verdict.tableau.to_dot())
    if args.trace:
        _write(args.trace, "".join(json.dumps(e) + "\n" for e in verdict.trace))
    if args.model_out:
        if verdict.satisfiable:
            from .witness import verify_tableau
            check = verify_tableau(verdict.tableau, verdict.root_formulas)
            out = {"structure": check.structure.to_dict() if check.structure else None,
                   "witness_state": check.state, "verified": check.ok}
            _write(args.model_out, json.dumps(out, indent=2))
        else:
            print("no model written: the input is unsatisfiable", file=sys.stderr)
    return EXIT_SAT if verdict.satisfiable else EXIT_UNSAT


def cmd_verify(args) -> int:
    from .witness import verify_tableau
    verdict = _solve_from_args(args)
    print(verdict.answer)
    sys.stdout.flush()
    if not verdict.satisfiable:
        return EXIT_UNSAT
    check = verify_tableau(verdict.tableau, verdict.root_formulas)
    if check.report is not None:
        print(f"hintikka: {check.report.summary()}", file=sys.stderr)
    if check.structure is not None:
        print(f"states: {len(check.structure.labels)}  witness state: {check.state}",
              file=sys.stderr)
    print(f"witness: {check.describe()}", file=sys.stderr)
    if args.model_out and check.structure is not None:
        _write(args.model_out, check.structure.to_json())
    return EXIT_SAT if check.ok else EXIT_WITNESS


def cmd_fuzz(args) -> int:
    from .oracle import GenConfig, differential_run
    cfg = GenConfig(seed=args.seed, max_size=args.max_size)
    max_nodes = args.max_nodes if args.max_nodes is not None else _default_max_nodes()
    report = differential_run(args.n, cfg, max_states=args.max_states,
                              solver_config=Config(max_nodes=max_nodes or 200_000))
    print(report.summary())
    if args.json:
        _write(args.json, report.to_json())
    return EXIT_SAT if report.ok else EXIT_UNSAT


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("file", nargs="?", help="formula file, one formula per line ('-' for stdin)")
    p.add_argument("-e", "--expr", help="a single formula given inline")
    p.add_argument("--max-nodes", type=int, default=None,
                   help="node budget (default: $TPDL_MAX_NODES or unlimited)")
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--model-out", metavar="PATH", help="write the witness structure as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpdl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="decide satisfiability")
    _add_input(check)
    check.add_argument("--dot", metavar="PATH", help="write the tableau in DOT")
    check.add_argument("--trace", metavar="PATH", help="write construction events as JSON lines")
    check.add_argument("--stats", action="store_true", help="print counters to stderr")
    check.set_defaults(run=cmd_check)

    verify = sub.add_parser("verify", help="decide and verify the witness")
    _add_input(verify)
    verify.set_defaults(run=cmd_verify)

    fuzz = sub.add_parser("fuzz", help="differential run on random formulas")
    fuzz.add_argument("--n", type=int, default=100)
    fuzz.add_argument("--seed", type=int, default=0)
    fuzz.add_argument("--max-size", type=int, default=15)
    fuzz.add_argument("--max-states", type=int, default=3)
    fuzz.add_argument("--max-nodes", type=int, default=None)
    fuzz.add_argument("--json", metavar="PATH", help="write the report as JSON")
    fuzz.set_defaults(run=cmd_fuzz)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (ParseError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceLimitExceeded as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
