"""Command-line entry point: ``branchflow {eval,decompose,optimize,oracle,verify}``.

stdout carries JSON only; diagnostics go to stderr.

Exit codes: 0 success, 2 unreadable or malformed input, 3 balance or
feasibility failure, 4 instance too large for the oracle, 5 inequality
violation found by ``verify``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .cost import m_alpha, m_alpha_c, mass, size
from .cycles import decompose
from .errors import Infeasible, MissingBoundaryVertex, ParseError, TooLarge, UnsupportedDimension
from .graph import check_balance
from .io import dumps, graph_to_json, load_problem
from .search import OracleConfig, optimize, oracle_best
from .suite import run_suite
from .svg import RenderSpec, render_svg

EXIT_PARSE = 2
EXIT_BALANCE = 3
EXIT_TOO_LARGE = 4
EXIT_VIOLATION = 5

log = logging.getLogger("branchflow")


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj) + "\n")


def _balanced(g, p) -> bool:
    try:
        report = check_balance(g, p)
    except MissingBoundaryVertex as exc:
        print(f"balance: {exc}", file=sys.stderr)
        return False
    if not report.ok:
        print(f"balance violated (max residual {report.max_abs!r}):", file=sys.stderr)
        for vid, r in sorted(report.violations().items()):
            print(f"  vertex {vid}: {r!r}", file=sys.stderr)
    return report.ok


def cmd_eval(args) -> int:
    p, g = load_problem(args.file, args.alpha, args.capacity)
    if g is None:
        raise ParseError("eval needs a graph in the problem file")
    if not _balanced(g, p):
        return EXIT_BALANCE
    breakdown = m_alpha_c(g, p.params)
    _emit({
        "total": breakdown.total,
        "m_alpha": m_alpha(g, p.params.alpha),
        "mass": mass(g),
        "size": size(g),
        "per_edge": [
            {"id": e.edge_id, "integer": e.integer_part, "fractional": e.fractional_part}
            for e in breakdown.per_edge
        ],
    })
    return 0


def cmd_decompose(args) -> int:
    p, g = load_problem(args.file, args.alpha, args.capacity)
    if g is None:
        raise ParseError("decompose needs a graph in the problem file")
    if not _balanced(g, p):
        return EXIT_BALANCE
    d = decompose(g, p.params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cert = d.certificate.as_json()
    (out / "t1.json").write_text(dumps(graph_to_json(d.t1)) + "\n", encoding="utf-8")
    (out / "t2.json").write_text(dumps(graph_to_json(d.t2)) + "\n", encoding="utf-8")
    (out / "certificate.json").write_text(dumps(cert) + "\n", encoding="utf-8")
    _emit(cert)
    return 0


def _result_json(res) -> dict:
    return {**res.as_json(), "graph": graph_to_json(res.graph)}


def cmd_optimize(args) -> int:
    p, g = load_problem(args.file, args.alpha, args.capacity)
    if g is not None and not _balanced(g, p):
        return EXIT_BALANCE
    ref = None
    if args.oracle:
        ref = oracle_best(p, OracleConfig(grid=args.grid))
    try:
        res = optimize(g, p, p.params, max_passes=args.max_passes)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_BALANCE
    out = {"optimize": _result_json(res)}
    if ref is not None:
        out["oracle"] = _result_json(ref)
        out["difference"] = res.cost - ref.cost
    if args.svg:
        Path(args.svg).write_text(render_svg(res.graph, RenderSpec(labels=args.labels), p.params),
                                  encoding="utf-8")
    _emit(out)
    return 0


def cmd_oracle(args) -> int:
    p, _ = load_problem(args.file, args.alpha, args.capacity)
    res = oracle_best(p, OracleConfig(grid=args.grid))
    if args.svg:
        Path(args.svg).write_text(render_svg(res.graph, RenderSpec(labels=args.labels), p.params),
                                  encoding="utf-8")
    _emit(_result_json(res))
    return 0


def cmd_verify(args) -> int:
    report = run_suite(args.trials, args.seed, args.alpha, args.capacity)
    for fam, (ok, total) in report.counts.items():
        print(f"{fam}: {ok}/{total}", file=sys.stderr)
    _emit(report.as_json())
    return 0 if report.passed else EXIT_VIOLATION


def _default_seed() -> int:
    env = os.environ.get("BRANCHFLOW_SEED")
    if env is None:
        return 42
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"BRANCHFLOW_SEED must be an integer, got {env!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchflow", description="Capacity-constrained branched transport toolkit."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def problem_cmd(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("file", help="problem JSON file")
        sp.add_argument("--alpha", type=float, help="override the file's alpha")
        sp.add_argument("--capacity", type=float, help="override the file's capacity")
        return sp

    sp = problem_cmd("eval", "print the cost breakdown of the file's graph")
    sp.set_defaults(func=cmd_eval)

    sp = problem_cmd("decompose", "split the graph into integer and residual parts")
    sp.add_argument("--out", default=".", help="directory for t1.json, t2.json, certificate.json")
    sp.set_defaults(func=cmd_decompose)

    for name, func, text in (
        ("optimize", cmd_optimize, "heuristic cost descent from the file's graph or the star"),
        ("oracle", cmd_oracle, "brute-force best tree for at most three sources and one sink"),
    ):
        sp = problem_cmd(name, text)
        if name == "optimize":
            sp.add_argument("--oracle", action="store_true", help="also run the brute-force oracle")
            sp.add_argument("--max-passes", type=int, default=50)
        sp.add_argument("--svg", help="write the resulting network as SVG")
        sp.add_argument("--labels", action="store_true", help="label SVG edges with weights")
        sp.add_argument("--grid", type=int, default=64, help="oracle grid points per axis")
        sp.set_defaults(func=func)

    sp = sub.add_parser("verify", help="run the randomized inequality suites")
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=None, help="RNG seed (default $BRANCHFLOW_SEED or 42)")
    sp.add_argument("--alpha", type=float, help="fix alpha instead of sampling it")
    sp.add_argument("--capacity", type=float, help="fix capacity instead of sampling it")
    sp.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    if getattr(args, "seed", 0) is None:
        args.seed = _default_seed()
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_BALANCE
    except TooLarge as exc:
        print(f"too large: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except UnsupportedDimension as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
