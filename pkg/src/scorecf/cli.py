"""Command line front door.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 hit a resource limit
with no incumbent, 1 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .bench import bench_rows, render_bench
from .errors import (
    ArgumentError,
    BuildError,
    DecodeError,
    EmptyDataError,
    InternalError,
    NumericalError,
    SchemaError,
    SingularityError,
    SizeError,
    TargetTypeError,
    ValidationError,
)
from .milp.model import write_lp
from .multiobjective import Degradation
from .oracle import oracle_multi, oracle_single
from .report import (
    apply_overrides,
    parse_query_document,
    prepare_model,
    render_json,
    render_table,
    resolve_query,
    run_query,
)
from .scorecard import Scorecard, parse_scorecard
from .stats import align_rows

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4

INPUT_ERRORS = (
    SchemaError,
    ValidationError,
    TargetTypeError,
    EmptyDataError,
    SingularityError,
    BuildError,
    SizeError,
    ArgumentError,
)


def _load_json(path: str, what: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"{what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what} {path}: not valid JSON ({exc})") from exc


def _load_scorecard(path: str) -> Scorecard:
    return parse_scorecard(_load_json(path, "scorecard"))


def _parse_lambdas(text: str | None):
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) != 3:
        raise ArgumentError("--lambdas takes three comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ArgumentError(f"--lambdas: {exc}") from exc


def _parse_priority(text: str | None):
    if text is None:
        return None
    terms = tuple(t.strip() for t in text.split(",") if t.strip())
    if not terms:
        raise ArgumentError("--priority must list at least one objective term")
    return terms


def _parse_degradation(text: str | None):
    if text is None:
        return None
    head, sep, tail = text.partition(":")
    modes = {"rel": "relative", "relative": "relative", "abs": "absolute", "absolute": "absolute"}
    if not sep or head not in modes:
        raise ArgumentError("--degradation looks like rel:0.1 or abs:0.2")
    try:
        value = float(tail)
    except ValueError as exc:
        raise ArgumentError(f"--degradation: {exc}") from exc
    return Degradation(mode=modes[head], value=value)


def _int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ArgumentError(f"{flag}: {exc}") from exc
    if not values:
        raise ArgumentError(f"{flag} must list at least one integer")
    return values


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def cmd_generate(args) -> int:
    scorecard = _load_scorecard(args.scorecard)
    doc = _load_json(args.query, "query")
    rows = align_rows(scorecard, args.stats_data) if args.stats_data else None
    overrides = dict(
        method=args.method,
        lambdas=_parse_lambdas(args.lambdas),
        priority=_parse_priority(args.priority),
        degradation=_parse_degradation(args.degradation),
    )
    if args.dump_lp:
        _, built, _ = prepare_model(
            scorecard, doc, rows=rows, ridge=args.ridge, weights_method=args.weights, **overrides
        )
        with open(args.dump_lp, "w", encoding="utf-8") as fh:
            fh.write(write_lp(built.model))
    report = run_query(
        scorecard,
        doc,
        rows=rows,
        ridge=args.ridge,
        weights_method=args.weights,
        time_limit=args.time_limit,
        **overrides,
    )
    _emit(render_json(report) if args.format == "json" else render_table(report))
    if report["status"] == "infeasible":
        return EXIT_INFEASIBLE
    if report["status"] == "time_limit_no_solution":
        return EXIT_LIMIT
    if report["status"] == "unbounded":
        # counterfactual models are box-bounded, so this is never expected
        print("internal error: model reported unbounded", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _assignment_json(scorecard, assignment) -> dict:
    return {
        "changes": [
            {
                "feature": scorecard.features[i].name,
                "bin_index": j,
                "new_value": float(assignment.point[i]),
            }
            for i, j in assignment.changes
        ],
        "score": float(assignment.score),
        "objective": float(assignment.objective),
        "terms": {name: float(v) for name, v in assignment.terms},
    }


def cmd_oracle(args) -> int:
    scorecard = _load_scorecard(args.scorecard)
    doc = _load_json(args.query, "query")
    rows = align_rows(scorecard, args.stats_data) if args.stats_data else None
    parsed = parse_query_document(scorecard, doc)
    apply_overrides(parsed, None, _parse_lambdas(args.lambdas), None, None)
    query, stats, pwl, _ = resolve_query(scorecard, parsed, rows, args.ridge, args.weights)

    if parsed.diversity is not None:
        cfg = parsed.diversity
        res = oracle_multi(
            scorecard,
            query,
            cfg.k,
            hard_feature_sets=cfg.hard_feature_sets,
            hard_feature_values=cfg.hard_feature_values,
            lambda_features=cfg.lambda_features,
            lambda_values=cfg.lambda_values,
            stats=stats,
            pwl=pwl,
        )
        body = {
            "status": res.status,
            "objective": None if res.objective is None else float(res.objective),
            "enumerated": res.enumerated,
            "singles": res.singles,
            "solutions": [
                [_assignment_json(scorecard, a) for a in group] for group in res.best
            ],
        }
    else:
        res = oracle_single(scorecard, query, stats=stats, pwl=pwl)
        body = {
            "status": res.status,
            "objective": None if res.objective is None else float(res.objective),
            "enumerated": res.enumerated,
            "solutions": [_assignment_json(scorecard, a) for a in res.best],
        }

    if args.format == "json":
        _emit(json.dumps(body, indent=2, sort_keys=True) + "\n")
    else:
        lines = [f"status: {body['status']}"]
        if body["objective"] is not None:
            lines.append(f"objective: {body['objective']:.6g}")
        lines.append(f"enumerated: {body['enumerated']}")
        lines.append(f"optima: {len(body['solutions'])}")
        _emit("\n".join(lines) + "\n")
    return EXIT_OK if body["status"] == "optimal" else EXIT_INFEASIBLE


def cmd_bench(args) -> int:
    approaches = {
        "weighted": ("weighted",),
        "hierarchical": ("hierarchical",),
        "both": ("weighted", "hierarchical"),
    }[args.approach]
    rows = bench_rows(
        args.seed,
        ks=_int_list(args.ks, "--ks"),
        thetas=_int_list(args.thetas, "--thetas"),
        approaches=approaches,
        time_limit=args.time_limit if args.time_limit is not None else 30.0,
    )
    if args.format == "json":
        _emit(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    else:
        _emit(render_bench(rows))
    return EXIT_OK


def cmd_dump_lp(args) -> int:
    scorecard = _load_scorecard(args.scorecard)
    doc = _load_json(args.query, "query")
    rows = align_rows(scorecard, args.stats_data) if args.stats_data else None
    _, built, _ = prepare_model(
        scorecard,
        doc,
        rows=rows,
        ridge=args.ridge,
        weights_method=args.weights,
        method=args.method,
        lambdas=_parse_lambdas(args.lambdas),
        priority=_parse_priority(args.priority),
        degradation=_parse_degradation(args.degradation),
    )
    text = write_lp(built.model)
    if args.output == "-":
        _emit(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app()
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _add_shared(sub: argparse.ArgumentParser, scorecard: bool = True) -> None:
    if scorecard:
        sub.add_argument("--scorecard", required=True, help="scorecard document path")
        sub.add_argument("--query", required=True, help="query document path")
        sub.add_argument("--stats-data", help="delimited transform-space sample rows")
        sub.add_argument("--ridge", type=float, help="ridge added before inverting the covariance")
        sub.add_argument("--weights", choices=("range", "mad"), help="proximity weighting")
    sub.add_argument("--time-limit", type=float, help="solver wall-clock budget in seconds")
    sub.add_argument("--seed", type=int, default=1, help="seed for synthetic instances")
    sub.add_argument("--format", choices=("table", "json"), default="table")


def _add_strategy(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--method", choices=("weighted", "hierarchical"))
    sub.add_argument("--lambdas", help="objective weights, e.g. 1,1,0")
    sub.add_argument("--priority", help="hierarchical term order, e.g. proximity,closeness")
    sub.add_argument("--degradation", help="allowed worsening per stage, rel:0.1 or abs:0.2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorecf",
        description="Optimal counterfactual explanations for binned scorecard models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="solve a query and print the report")
    _add_shared(gen)
    _add_strategy(gen)
    gen.add_argument("--dump-lp", help="also write the built model as LP text")
    gen.set_defaults(func=cmd_generate)

    orc = subs.add_parser("oracle", help="brute-force the same query by enumeration")
    _add_shared(orc)
    orc.add_argument("--lambdas", help="objective weights, e.g. 1,1,0")
    orc.set_defaults(func=cmd_oracle)

    ben = subs.add_parser("bench", help="run the synthetic benchmark grid")
    _add_shared(ben, scorecard=False)
    ben.add_argument("--ks", default="3,4", help="comma-separated K values")
    ben.add_argument("--thetas", default="2,3", help="comma-separated sparsity caps")
    ben.add_argument(
        "--approach", choices=("weighted", "hierarchical", "both"), default="weighted"
    )
    ben.set_defaults(func=cmd_bench)

    dmp = subs.add_parser("dump-lp", help="write the model as LP text without solving")
    _add_shared(dmp)
    _add_strategy(dmp)
    dmp.add_argument("--output", default="-", help="destination path, - for standard output")
    dmp.set_defaults(func=cmd_dump_lp)

    srv = subs.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8700)
    srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DecodeError, NumericalError, InternalError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
