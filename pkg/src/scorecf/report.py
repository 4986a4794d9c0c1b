"""Query documents in, run reports out.

This is the orchestration seam shared by the command line and the HTTP
service: parse a query document against a scorecard, resolve weights and
statistics, build the right formulation, solve it under the requested
strategy, and assemble a report whose metrics are recomputed from the
decoded counterfactuals rather than copied out of the solver.
"""

from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .diversity import DiversityConfig, build_multi_cf, measure_diversity
from .errors import SchemaError, ValidationError
from .formulations import (
    BinaryOutcome,
    CfQuery,
    ContinuousOutcome,
    Counterfactual,
    PiecewiseApprox,
    ProbabilityOutcome,
    build_single_cf,
    decode_solutions,
    piecewise_logistic,
)
from .milp import SolverLimits, solve_milp
from .multiobjective import Degradation, solve_hierarchical
from .scorecard import DataPoint, Scorecard, score_bounds
from .stats import compute_gaussian_stats, compute_weights

DEFAULT_TIME_LIMIT = 30.0
DEFAULT_PW_STRATEGY = "greedy"
DEFAULT_PW_SEGMENTS = 64
DEFAULT_PW_EPS = 5e-3

# A probability query on a point with no candidate moves has a one-point
# score interval; the logistic fit still needs real width to be meaningful.
DEGENERATE_SPAN = 1e-6
DEGENERATE_PAD = 0.5

_TOP_KEYS = {
    "input",
    "outcome",
    "theta",
    "lambdas",
    "epsilon",
    "actionable",
    "piecewise",
    "diversity",
    "strategy",
    "weights",
    "time_limit",
    "display_input",
}
_RELATIONS = {"le": "le", "<=": "le", "ge": "ge", ">=": "ge", "closest": "closest"}


def _fail(path: str, message: str) -> None:
    raise SchemaError(f"{path}: {message}")


def _as_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    return value


def _no_extras(doc: dict, allowed: set, path: str) -> None:
    extras = sorted(set(doc) - allowed)
    if extras:
        _fail(path, f"unknown key(s) {extras}")


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    if not math.isfinite(value):
        _fail(path, "must be finite")
    return float(value)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, "expected an integer")
    return value


def _as_positive(value, path: str) -> float:
    num = _as_number(value, path)
    if num <= 0:
        _fail(path, "must be positive")
    return num


@dataclass
class ParsedQuery:
    """A validated query document with every default materialized."""

    point: DataPoint
    input_values: dict[str, float]
    outcome: BinaryOutcome | ProbabilityOutcome | ContinuousOutcome
    theta: int
    lambdas: tuple[float, float, float]
    epsilon: float
    actionable: frozenset[str] | None
    pw_strategy: str
    pw_segments: int
    pw_eps: float
    diversity: DiversityConfig | None
    method: str
    priority: tuple[str, ...] | None
    degradation: Degradation
    weights_method: str | None
    time_limit: float | None
    display_input: dict = field(default_factory=dict)


def _parse_outcome(raw, path: str):
    doc = _as_mapping(raw, path)
    _no_extras(doc, {"type", "value", "relation"}, path)
    if "type" not in doc or "value" not in doc:
        _fail(path, "needs both 'type' and 'value'")
    kind = doc["type"]
    if kind == "binary":
        if "relation" in doc:
            _fail(f"{path}.relation", "binary outcomes take no relation")
        value = doc["value"]
        if isinstance(value, bool) or value not in (0, 1):
            _fail(f"{path}.value", "must be 0 or 1")
        return BinaryOutcome(int(value))
    if kind not in ("probability", "continuous"):
        _fail(f"{path}.type", "must be one of binary, probability, continuous")
    relation = doc.get("relation", "closest")
    if relation not in _RELATIONS:
        _fail(f"{path}.relation", "must be one of le, ge, closest")
    relation = _RELATIONS[relation]
    value = _as_number(doc["value"], f"{path}.value")
    if kind == "probability":
        if not 0.0 < value < 1.0:
            _fail(f"{path}.value", "probability target must lie strictly in (0, 1)")
        return ProbabilityOutcome(value, relation)
    return ContinuousOutcome(value, relation)


def _parse_piecewise(raw, path: str) -> tuple[str, int, float]:
    doc = _as_mapping(raw, path)
    _no_extras(doc, {"strategy", "R", "eps"}, path)
    strategy = doc.get("strategy", DEFAULT_PW_STRATEGY)
    if strategy not in ("uniform", "greedy"):
        _fail(f"{path}.strategy", "must be 'uniform' or 'greedy'")
    segments = DEFAULT_PW_SEGMENTS
    if "R" in doc:
        segments = _as_int(doc["R"], f"{path}.R")
        if segments < 1:
            _fail(f"{path}.R", "must be at least 1")
    eps = DEFAULT_PW_EPS
    if "eps" in doc and doc["eps"] is not None:
        eps = _as_positive(doc["eps"], f"{path}.eps")
    return strategy, segments, eps


def _parse_diversity(raw, path: str) -> DiversityConfig:
    doc = _as_mapping(raw, path)
    _no_extras(doc, {"k", "hard", "soft"}, path)
    if "k" not in doc:
        _fail(path, "needs 'k'")
    k = _as_int(doc["k"], f"{path}.k")
    hard = doc.get("hard", [])
    if not isinstance(hard, list) or any(h not in ("features", "values") for h in hard):
        _fail(f"{path}.hard", "must be a list drawn from ['features', 'values']")
    soft = _as_mapping(doc.get("soft", {}), f"{path}.soft")
    _no_extras(soft, {"lambda3", "lambda4"}, f"{path}.soft")
    lam3 = _as_number(soft.get("lambda3", 0.1), f"{path}.soft.lambda3")
    lam4 = _as_number(soft.get("lambda4", 0.05), f"{path}.soft.lambda4")
    try:
        return DiversityConfig(
            k=k,
            hard_feature_sets="features" in hard,
            hard_feature_values="values" in hard,
            lambda_features=lam3,
            lambda_values=lam4,
        )
    except Exception as exc:
        _fail(path, str(exc))


def _parse_strategy(raw, path: str):
    doc = _as_mapping(raw, path)
    _no_extras(doc, {"kind", "priority", "degradation"}, path)
    kind = doc.get("kind", "weighted")
    if kind not in ("weighted", "hierarchical"):
        _fail(f"{path}.kind", "must be 'weighted' or 'hierarchical'")
    priority = None
    degradation = Degradation()
    if kind == "weighted":
        _no_extras(doc, {"kind"}, path)
        return kind, priority, degradation
    raw_priority = doc.get("priority")
    if not isinstance(raw_priority, list) or not raw_priority or not all(
        isinstance(t, str) for t in raw_priority
    ):
        _fail(f"{path}.priority", "must be a non-empty list of objective term names")
    priority = tuple(raw_priority)
    if "degradation" in doc:
        deg = _as_mapping(doc["degradation"], f"{path}.degradation")
        _no_extras(deg, {"relative", "absolute"}, f"{path}.degradation")
        if len(deg) != 1:
            _fail(f"{path}.degradation", "needs exactly one of 'relative' or 'absolute'")
        mode, value = next(iter(deg.items()))
        amount = _as_number(value, f"{path}.degradation.{mode}")
        if amount < 0:
            _fail(f"{path}.degradation.{mode}", "must be nonnegative")
        degradation = Degradation(mode=mode, value=amount)
    return kind, priority, degradation


def parse_query_document(scorecard: Scorecard, doc) -> ParsedQuery:
    """Validate a query document; every diagnostic names the offending field."""
    doc = _as_mapping(doc, "query")
    _no_extras(doc, _TOP_KEYS, "query")
    if "input" not in doc or "outcome" not in doc:
        _fail("query", "needs both 'input' and 'outcome'")

    raw_input = _as_mapping(doc["input"], "input")
    try:
        point = DataPoint.from_mapping(scorecard, raw_input)
    except (ValidationError, TypeError) as exc:
        _fail("input", str(exc))
    input_values = {f.name: float(raw_input[f.name]) for f in scorecard.features}
    outcome = _parse_outcome(doc["outcome"], "outcome")

    theta = 1
    if "theta" in doc:
        theta = _as_int(doc["theta"], "theta")
        if theta < 1:
            _fail("theta", "must be at least 1")

    lambdas = (1.0, 0.0, 0.0)
    if "lambdas" in doc:
        raw = doc["lambdas"]
        if not isinstance(raw, list) or len(raw) != 3:
            _fail("lambdas", "must be a list of three numbers")
        lambdas = tuple(_as_number(v, f"lambdas[{i}]") for i, v in enumerate(raw))
        for i, lam in enumerate(lambdas):
            if lam < 0:
                _fail(f"lambdas[{i}]", "must be nonnegative")

    epsilon = 1e-6
    if "epsilon" in doc:
        epsilon = _as_positive(doc["epsilon"], "epsilon")

    actionable = None
    if "actionable" in doc and doc["actionable"] is not None:
        raw = doc["actionable"]
        if not isinstance(raw, list) or not all(isinstance(n, str) for n in raw):
            _fail("actionable", "must be a list of feature names")
        unknown = sorted(set(raw) - set(scorecard.feature_names))
        if unknown:
            _fail("actionable", f"unknown feature(s) {unknown}")
        actionable = frozenset(raw)

    pw_strategy, pw_segments, pw_eps = DEFAULT_PW_STRATEGY, DEFAULT_PW_SEGMENTS, DEFAULT_PW_EPS
    if "piecewise" in doc:
        pw_strategy, pw_segments, pw_eps = _parse_piecewise(doc["piecewise"], "piecewise")

    diversity = None
    if "diversity" in doc and doc["diversity"] is not None:
        diversity = _parse_diversity(doc["diversity"], "diversity")

    method, priority, degradation = "weighted", None, Degradation()
    if "strategy" in doc and doc["strategy"] is not None:
        method, priority, degradation = _parse_strategy(doc["strategy"], "strategy")

    weights_method = None
    if "weights" in doc and doc["weights"] is not None:
        if doc["weights"] not in ("range", "mad"):
            _fail("weights", "must be 'range' or 'mad'")
        weights_method = doc["weights"]

    time_limit = None
    if "time_limit" in doc and doc["time_limit"] is not None:
        time_limit = _as_positive(doc["time_limit"], "time_limit")

    display_input = {}
    if "display_input" in doc and doc["display_input"] is not None:
        raw = _as_mapping(doc["display_input"], "display_input")
        unknown = sorted(set(raw) - set(scorecard.feature_names))
        if unknown:
            _fail("display_input", f"unknown feature(s) {unknown}")
        for name, value in raw.items():
            if not isinstance(value, (str, int, float)) or isinstance(value, bool):
                _fail(f"display_input.{name}", "must be a string or number")
        display_input = dict(raw)

    return ParsedQuery(
        point=point,
        input_values=input_values,
        outcome=outcome,
        theta=theta,
        lambdas=lambdas,
        epsilon=epsilon,
        actionable=actionable,
        pw_strategy=pw_strategy,
        pw_segments=pw_segments,
        pw_eps=pw_eps,
        diversity=diversity,
        method=method,
        priority=priority,
        degradation=degradation,
        weights_method=weights_method,
        time_limit=time_limit,
        display_input=display_input,
    )


def _echo_outcome(outcome) -> dict:
    if isinstance(outcome, BinaryOutcome):
        return {"type": "binary", "value": outcome.value}
    kind = "probability" if isinstance(outcome, ProbabilityOutcome) else "continuous"
    return {"type": kind, "value": outcome.value, "relation": outcome.relation}


def _echo_query(parsed: ParsedQuery, weights_method: str, time_limit: float) -> dict:
    echo = {
        "input": {name: value for name, value in parsed.input_values.items()},
        "outcome": _echo_outcome(parsed.outcome),
        "theta": parsed.theta,
        "lambdas": list(parsed.lambdas),
        "epsilon": parsed.epsilon,
        "actionable": sorted(parsed.actionable) if parsed.actionable is not None else None,
        "weights": weights_method,
        "time_limit": time_limit,
    }
    if isinstance(parsed.outcome, ProbabilityOutcome):
        echo["piecewise"] = {
            "strategy": parsed.pw_strategy,
            "R": parsed.pw_segments,
            "eps": parsed.pw_eps,
        }
    if parsed.diversity is not None:
        cfg = parsed.diversity
        hard = []
        if cfg.hard_feature_sets:
            hard.append("features")
        if cfg.hard_feature_values:
            hard.append("values")
        echo["diversity"] = {
            "k": cfg.k,
            "hard": hard,
            "soft": {"lambda3": cfg.lambda_features, "lambda4": cfg.lambda_values},
        }
    if parsed.method == "hierarchical":
        echo["strategy"] = {
            "kind": "hierarchical",
            "priority": list(parsed.priority or ()),
            "degradation": {parsed.degradation.mode: parsed.degradation.value},
        }
    else:
        echo["strategy"] = {"kind": "weighted"}
    if parsed.display_input:
        echo["display_input"] = dict(parsed.display_input)
    return echo


def _change_json(change, display_input: dict) -> dict:
    current = display_input.get(change.feature, change.current_value)
    if isinstance(current, (int, float)):
        current = float(current)
    return {
        "feature": change.feature,
        "current_value": current,
        "required_bin": change.bin_label,
        "required_interval": change.required_text,
        "bin_index": change.bin_index,
        "new_transform_value": float(change.new_value),
    }


def _cf_json(cf: Counterfactual, display_input: dict) -> dict:
    return {
        "changes": [_change_json(c, display_input) for c in cf.changes],
        "achieved_score": float(cf.achieved_score),
        "achieved_probability": None
        if cf.achieved_probability is None
        else float(cf.achieved_probability),
        "model_probability": None
        if cf.model_probability is None
        else float(cf.model_probability),
        "objective_terms": {k: float(v) for k, v in cf.objective_terms.items()},
    }


def _metrics(cfs: list[Counterfactual]) -> dict:
    out = {
        "proximity": None,
        "closeness": None,
        "outcome": None,
        "d_f": None,
        "d_fv": None,
        "pd_min": None,
        "pd_max": None,
    }
    if not cfs:
        return out
    out["proximity"] = float(
        sum(c.objective_terms["proximity"] for c in cfs) / len(cfs)
    )
    if all("closeness" in c.objective_terms for c in cfs):
        out["closeness"] = float(
            sum(c.objective_terms["closeness"] for c in cfs) / len(cfs)
        )
    scores = [float(c.achieved_score) for c in cfs]
    out["outcome"] = {"min": min(scores), "max": max(scores)}
    if len(cfs) >= 2:
        div = measure_diversity(cfs)
        out["d_f"] = div.feature_distance
        out["d_fv"] = div.value_distance
    probs = [float(c.achieved_probability) for c in cfs if c.achieved_probability is not None]
    if probs:
        out["pd_min"] = min(probs)
        out["pd_max"] = max(probs)
    return out


def apply_overrides(
    parsed: ParsedQuery,
    method: str | None,
    lambdas: tuple[float, float, float] | None,
    priority: tuple[str, ...] | None,
    degradation: Degradation | None,
) -> None:
    """Fold command-line style overrides into a parsed document, in place."""
    if lambdas is not None:
        if len(lambdas) != 3:
            _fail("lambdas", "must be three numbers")
        parsed.lambdas = tuple(float(v) for v in lambdas)
    if method is not None:
        if method not in ("weighted", "hierarchical"):
            _fail("method", "must be 'weighted' or 'hierarchical'")
        parsed.method = method
    if priority is not None:
        parsed.priority = tuple(priority)
    if degradation is not None:
        parsed.degradation = degradation
    if parsed.method == "hierarchical" and not parsed.priority:
        _fail("strategy.priority", "hierarchical runs need a priority order")


def resolve_query(
    scorecard: Scorecard,
    parsed: ParsedQuery,
    rows: np.ndarray | None = None,
    ridge: float | None = None,
    weights_method: str | None = None,
):
    """Turn a parsed document into the engine-level query plus its inputs."""
    applied_weights = weights_method or parsed.weights_method or "range"
    weights = compute_weights(scorecard, parsed.point, applied_weights, rows)
    stats = None
    if parsed.lambdas[1] > 0.0 and rows is not None:
        stats = compute_gaussian_stats(rows, ridge)

    query = CfQuery(
        point=parsed.point,
        outcome=parsed.outcome,
        weights=weights,
        theta=parsed.theta,
        lambdas=parsed.lambdas,
        epsilon=parsed.epsilon,
        actionable_override=parsed.actionable,
    )

    pwl: PiecewiseApprox | None = None
    if isinstance(parsed.outcome, ProbabilityOutcome):
        lo, hi = score_bounds(scorecard, parsed.point)
        if hi - lo < DEGENERATE_SPAN:
            lo -= DEGENERATE_PAD
            hi += DEGENERATE_PAD
        pwl = piecewise_logistic(
            lo,
            hi,
            segments=parsed.pw_segments,
            strategy=parsed.pw_strategy,
            eps=parsed.pw_eps,
        )
    return query, stats, pwl, applied_weights


def prepare_model(
    scorecard: Scorecard,
    doc,
    *,
    rows: np.ndarray | None = None,
    ridge: float | None = None,
    weights_method: str | None = None,
    method: str | None = None,
    lambdas: tuple[float, float, float] | None = None,
    priority: tuple[str, ...] | None = None,
    degradation: Degradation | None = None,
):
    """Parse, resolve and build without solving; the dump path uses this too."""
    parsed = parse_query_document(scorecard, doc)
    apply_overrides(parsed, method, lambdas, priority, degradation)
    query, stats, pwl, applied_weights = resolve_query(
        scorecard, parsed, rows, ridge, weights_method
    )
    if parsed.diversity is not None:
        built = build_multi_cf(scorecard, query, parsed.diversity, stats=stats, pwl=pwl)
    else:
        built = build_single_cf(scorecard, query, stats=stats, pwl=pwl)
    return parsed, built, applied_weights


def run_query(
    scorecard: Scorecard,
    doc,
    *,
    rows: np.ndarray | None = None,
    ridge: float | None = None,
    weights_method: str | None = None,
    time_limit: float | None = None,
    default_time_limit: float = DEFAULT_TIME_LIMIT,
    max_time_limit: float | None = None,
    method: str | None = None,
    lambdas: tuple[float, float, float] | None = None,
    priority: tuple[str, ...] | None = None,
    degradation: Degradation | None = None,
) -> dict:
    """Run one query document end to end and return the report.

    Keyword overrides take precedence over the corresponding document
    fields, so a command line flag always wins over the query file.
    """
    t_start = time.perf_counter()
    parsed, built, applied_weights = prepare_model(
        scorecard,
        doc,
        rows=rows,
        ridge=ridge,
        weights_method=weights_method,
        method=method,
        lambdas=lambdas,
        priority=priority,
        degradation=degradation,
    )
    build_seconds = time.perf_counter() - t_start

    applied_limit = time_limit if time_limit is not None else parsed.time_limit
    if applied_limit is None:
        applied_limit = default_time_limit
    if max_time_limit is not None:
        applied_limit = min(applied_limit, max_time_limit)

    limits = SolverLimits(time_limit=applied_limit)
    t_solve = time.perf_counter()
    stages = None
    if parsed.method == "hierarchical":
        outcome = solve_hierarchical(built.model, list(parsed.priority), parsed.degradation, limits)
        result = outcome.result
        stages = outcome.stages
    else:
        result = solve_milp(built.model, limits)
    solve_seconds = time.perf_counter() - t_solve

    cfs: list[Counterfactual] = []
    if result.has_solution:
        cfs = decode_solutions(built, result.values)

    report = {
        "query": _echo_query(parsed, applied_weights, applied_limit),
        "status": result.status,
        "counterfactuals": [_cf_json(c, parsed.display_input) for c in cfs],
        "metrics": _metrics(cfs),
        "solver": {
            "status": result.status,
            "objective": None if result.objective_total is None else float(result.objective_total),
            "best_bound": None if result.best_bound is None else float(result.best_bound),
            "gap": None if result.gap is None else float(result.gap),
            "nodes": result.nodes_explored,
            "wall_time": result.wall_time,
        },
        "timing": {
            "build": build_seconds,
            "solve": solve_seconds,
            "total": time.perf_counter() - t_start,
        },
    }
    if stages is not None:
        report["stages"] = [
            {
                "term": s.term,
                "sense": s.sense,
                "optimum": float(s.optimum),
                "allowance": float(s.allowance),
                "nodes": s.nodes,
                "wall_time": s.wall_time,
            }
            for s in stages
        ]
    return report


def mask_timing(report: dict) -> dict:
    """Zero every wall-clock field so two reports can be compared exactly."""
    out = copy.deepcopy(report)
    for key in ("build", "solve", "total"):
        out["timing"][key] = 0.0
    out["solver"]["wall_time"] = 0.0
    for stage in out.get("stages", []):
        stage["wall_time"] = 0.0
    return out


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(value, digits: int = 6) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


def _pad_rows(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]


def render_table(report: dict) -> str:
    """Human-readable report: one block per counterfactual plus summary lines."""
    lines: list[str] = []
    status = report["status"]
    timing = report["timing"]
    solver = report["solver"]
    if not report["counterfactuals"]:
        lines.append(f"status: {status} (solve {timing['solve']:.1f}s)")
        if status == "infeasible":
            lines.append("no counterfactual satisfies the requested outcome")
        return "\n".join(lines) + "\n"

    lines.append(f"status: {status}")
    lines.append(
        f"objective: {_fmt(solver['objective'])}"
        f" (nodes {solver['nodes']}, wall {solver['wall_time']:.3f}s)"
    )
    for idx, cf in enumerate(report["counterfactuals"], start=1):
        header = f"counterfactual {idx}: score {_fmt(cf['achieved_score'])}"
        if cf["achieved_probability"] is not None:
            header += f", probability {_fmt(cf['achieved_probability'])}"
        lines.append("")
        lines.append(header)
        if not cf["changes"]:
            lines.append("  (no changes needed)")
            continue
        rows = [["feature", "current", "required bin", "interval", "new value"]]
        for ch in cf["changes"]:
            rows.append(
                [
                    ch["feature"],
                    _fmt(ch["current_value"]),
                    ch["required_bin"],
                    ch["required_interval"],
                    _fmt(ch["new_transform_value"]),
                ]
            )
        lines.extend("  " + line for line in _pad_rows(rows))

    metrics = report["metrics"]
    lines.append("")
    summary = [
        f"proximity {_fmt(metrics['proximity'])}",
        f"closeness {_fmt(metrics['closeness'])}",
    ]
    if metrics["pd_min"] is not None:
        summary.append(f"PD [{_fmt(metrics['pd_min'])}, {_fmt(metrics['pd_max'])}]")
    if metrics["outcome"] is not None:
        summary.append(
            f"outcome [{_fmt(metrics['outcome']['min'])}, {_fmt(metrics['outcome']['max'])}]"
        )
    if metrics["d_f"] is not None:
        summary.append(f"D_F {metrics['d_f']}")
    if metrics["d_fv"] is not None:
        summary.append(f"D_FV {metrics['d_fv']}")
    lines.append("metrics: " + "  ".join(summary))

    if "stages" in report:
        lines.append("stages:")
        for i, stage in enumerate(report["stages"], start=1):
            lines.append(
                f"  {i}. {stage['term']} ({stage['sense']})"
                f" optimum {_fmt(stage['optimum'])}"
                f" allowance {_fmt(stage['allowance'])}"
                f" nodes {stage['nodes']}"
            )
    lines.append(
        f"timing: build {timing['build']:.3f}s"
        f"  solve {timing['solve']:.3f}s"
        f"  total {timing['total']:.3f}s"
    )
    return "\n".join(lines) + "\n"
