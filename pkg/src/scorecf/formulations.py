"""Counterfactual MILP formulations over binned scorecards.

A counterfactual keeps each feature at its current transform value or moves
it to another bin's value.  Bin choices are binary selections; change
indicators cap sparsity and gate actionability; validity pins the achieved
score (or its piecewise-logistic probability) to the requested outcome.
All formulation variables live in one model so a solver run certifies the
blend of proximity, closeness and outcome-gap objectives at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, BuildError, DecodeError, TargetTypeError, ValidationError
from .milp.model import BINARY, CONTINUOUS, MilpModel
from .scorecard import (
    DataPoint,
    Scorecard,
    candidate_values,
    logistic,
    score_bounds,
)
from .stats import GaussianStats, ProximityWeights

RELATIONS = ("le", "ge", "closest")

DEFAULT_EPSILON = 1e-6
# Piecewise defaults: greedy refinement, 5e-3 target error, at most 64 pieces.
DEFAULT_PW_STRATEGY = "greedy"
DEFAULT_PW_EPS = 5e-3
DEFAULT_PW_SEGMENTS = 64

SCORE_MATCH_TOL = 1e-7


@dataclass(frozen=True)
class BinaryOutcome:
    """Ask for the other side of the decision boundary: value is 0 or 1."""

    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ArgumentError("binary outcome value must be 0 or 1")


@dataclass(frozen=True)
class ProbabilityOutcome:
    """Target event probability with a relation: le, ge or closest."""

    value: float
    relation: str = "closest"

    def __post_init__(self):
        if not 0.0 < self.value < 1.0:
            raise ArgumentError("probability target must lie strictly inside (0, 1)")
        if self.relation not in RELATIONS:
            raise ArgumentError(f"relation must be one of {RELATIONS}")


@dataclass(frozen=True)
class ContinuousOutcome:
    """Target raw score with a relation: le, ge or closest."""

    value: float
    relation: str = "closest"

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ArgumentError("continuous target must be finite")
        if self.relation not in RELATIONS:
            raise ArgumentError(f"relation must be one of {RELATIONS}")


@dataclass(frozen=True)
class CfQuery:
    """One counterfactual request against a scorecard.

    lambdas weighs (proximity, closeness, outcome gap).  actionable_override,
    when given, replaces the scorecard's own actionability flags.
    """

    point: DataPoint
    outcome: BinaryOutcome | ProbabilityOutcome | ContinuousOutcome
    weights: ProximityWeights
    theta: int = 1
    lambdas: tuple[float, float, float] = (1.0, 0.0, 0.0)
    epsilon: float = DEFAULT_EPSILON
    actionable_override: frozenset[str] | None = None

    def __post_init__(self):
        if not isinstance(self.theta, int) or self.theta < 1:
            raise ArgumentError("theta must be an integer >= 1")
        if len(self.lambdas) != 3:
            raise ArgumentError("lambdas must have exactly three entries")
        if any((not math.isfinite(l)) or l < 0 for l in self.lambdas):
            raise ArgumentError("lambdas must be finite and nonnegative")
        if not any(l > 0 for l in self.lambdas):
            raise ArgumentError("at least one lambda must be positive")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ArgumentError("epsilon must be a positive real")


@dataclass(frozen=True)
class PiecewiseApprox:
    """Continuous piecewise-linear fit of the logistic on an interval.

    Segment r covers [breakpoints[r], breakpoints[r+1]] with value
    slopes[r] * x + intercepts[r]; adjacent segments agree at their shared
    breakpoint because every piece interpolates the logistic at both ends.
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]
    strategy: str
    max_error: float

    @property
    def segments(self) -> int:
        return len(self.slopes)

    def covers(self, lo: float, hi: float, tol: float = 1e-9) -> bool:
        return self.breakpoints[0] <= lo + tol and self.breakpoints[-1] >= hi - tol

    def value(self, x: float) -> float:
        bp = self.breakpoints
        if x < bp[0] - 1e-9 or x > bp[-1] + 1e-9:
            raise ArgumentError(f"{x} is outside the approximated interval")
        r = int(np.searchsorted(bp, x, side="right")) - 1
        r = min(max(r, 0), len(self.slopes) - 1)
        return self.slopes[r] * x + self.intercepts[r]


def _secant_pieces(breakpoints: np.ndarray) -> tuple[tuple[float, ...], tuple[float, ...]]:
    vals = np.array([logistic(b) for b in breakpoints])
    slopes = (vals[1:] - vals[:-1]) / (breakpoints[1:] - breakpoints[:-1])
    intercepts = vals[:-1] - slopes * breakpoints[:-1]
    return tuple(slopes), tuple(intercepts)


def _grid_error(breakpoints: np.ndarray, slopes, intercepts, lo: float, hi: float) -> float:
    grid = np.linspace(lo, hi, 10_000)
    seg = np.clip(np.searchsorted(breakpoints, grid, side="right") - 1, 0, len(slopes) - 1)
    approx = np.asarray(slopes)[seg] * grid + np.asarray(intercepts)[seg]
    exact = 1.0 / (1.0 + np.exp(-grid))
    return float(np.abs(approx - exact).max())


def piecewise_logistic(
    lo: float,
    hi: float,
    segments: int = DEFAULT_PW_SEGMENTS,
    strategy: str = DEFAULT_PW_STRATEGY,
    eps: float | None = DEFAULT_PW_EPS,
) -> PiecewiseApprox:
    """Fit the logistic on [lo, hi] with interpolating secant pieces.

    "uniform" spaces breakpoints evenly.  "greedy" starts from one piece and
    repeatedly splits at the worst-error point until the error target is met
    or the segment budget runs out.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise ArgumentError("need a finite interval with lo < hi")
    if segments < 1:
        raise ArgumentError("segment budget must be >= 1")
    if strategy not in ("uniform", "greedy"):
        raise ArgumentError(f"unknown strategy {strategy!r}")
    if eps is not None and eps <= 0:
        raise ArgumentError("error target must be positive")

    if strategy == "uniform":
        bp = np.linspace(lo, hi, segments + 1)
    else:
        bp = np.array([lo, hi])
        while len(bp) - 1 < segments:
            worst_err = -1.0
            worst_x = None
            for r in range(len(bp) - 1):
                grid = np.linspace(bp[r], bp[r + 1], 129)
                exact = 1.0 / (1.0 + np.exp(-grid))
                slope = (exact[-1] - exact[0]) / (bp[r + 1] - bp[r])
                approx = exact[0] + slope * (grid - bp[r])
                errs = np.abs(approx - exact)
                i = int(np.argmax(errs))
                if errs[i] > worst_err:
                    worst_err = float(errs[i])
                    worst_x = float(grid[i])
            if eps is not None and worst_err <= eps:
                break
            if worst_x is None or worst_x in bp:
                break
            bp = np.sort(np.append(bp, worst_x))

    slopes, intercepts = _secant_pieces(bp)
    err = _grid_error(bp, slopes, intercepts, lo, hi)
    return PiecewiseApprox(
        breakpoints=tuple(float(b) for b in bp),
        slopes=slopes,
        intercepts=intercepts,
        strategy=strategy,
        max_error=err,
    )


@dataclass(frozen=True)
class Change:
    feature: str
    current_value: float
    bin_index: int
    bin_label: str
    required_text: str
    new_value: float


@dataclass(frozen=True)
class Counterfactual:
    """A decoded solution: the moves plus recomputed quality numbers."""

    changes: tuple[Change, ...]
    values: tuple[float, ...]
    achieved_score: float
    achieved_probability: float | None
    model_probability: float | None
    objective_terms: dict[str, float]

    @property
    def cost(self) -> float:
        return self.objective_terms.get("proximity", 0.0) + self.objective_terms.get("closeness", 0.0)


@dataclass
class CfModel:
    """A built formulation plus everything needed to decode its solutions."""

    model: MilpModel
    scorecard: Scorecard
    query: CfQuery
    stats: GaussianStats | None
    pwl: PiecewiseApprox | None
    candidates: list[list[tuple[int, float]]]
    prefixes: list[str]

    @property
    def k(self) -> int:
        return len(self.prefixes)


def effective_actionable(scorecard: Scorecard, query: CfQuery) -> list[bool]:
    """Resolve per-feature actionability, applying the query's override."""
    if query.actionable_override is None:
        return [f.actionable for f in scorecard.features]
    names = set(scorecard.feature_names)
    unknown = set(query.actionable_override) - names
    if unknown:
        raise ValidationError(f"actionable override names unknown feature(s): {sorted(unknown)}")
    if not query.actionable_override:
        raise BuildError("actionable override leaves no feature changeable")
    return [f.name in query.actionable_override for f in scorecard.features]


def _check_target(scorecard: Scorecard, outcome) -> None:
    if isinstance(outcome, (BinaryOutcome, ProbabilityOutcome)):
        if scorecard.target_type != "binary":
            raise TargetTypeError("this outcome type needs a binary scorecard")
    else:
        if scorecard.target_type != "continuous":
            raise TargetTypeError("a raw-score outcome needs a continuous scorecard")


def _add_point_block(
    m: MilpModel,
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None,
    cands: list[list[tuple[int, float]]],
    actionable: list[bool],
    prefix: str,
) -> tuple[dict[str, float], dict[str, float]]:
    """Variables and constraints describing one counterfactual point."""
    x = query.point.values
    lam1, lam2, _ = query.lambdas
    w = query.weights.values
    p = len(scorecard.features)

    prox_coeffs: dict[str, float] = {}
    for i, f in enumerate(scorecard.features):
        vals = [x[i]] + [v for _, v in cands[i]]
        m.add_variable(f"{prefix}xp_{i}", lower=min(vals), upper=max(vals))
        for j, _v in cands[i]:
            m.add_variable(f"{prefix}z_{i}_{j}", kind=BINARY)
        m.add_variable(f"{prefix}a_{i}", kind=BINARY)
        m.add_variable(f"{prefix}tp_{i}", lower=0.0)
        m.add_variable(f"{prefix}tm_{i}", lower=0.0)
        prox_coeffs[f"{prefix}tp_{i}"] = w[i]
        prox_coeffs[f"{prefix}tm_{i}"] = w[i]

    for i in range(p):
        # t+ - t- = x_i - x'_i
        m.add_constraint(
            f"{prefix}tdef_{i}",
            {f"{prefix}tp_{i}": 1.0, f"{prefix}tm_{i}": -1.0, f"{prefix}xp_{i}": 1.0},
            "=",
            x[i],
        )
        # x'_i = x_i + sum_j (v_ij - x_i) z_ij
        coeffs = {f"{prefix}xp_{i}": 1.0}
        for j, v in cands[i]:
            coeffs[f"{prefix}z_{i}_{j}"] = -(v - x[i])
        m.add_constraint(f"{prefix}xdef_{i}", coeffs, "=", x[i])
        # t+ + t- = |x_i - v_ij| of the chosen bin (zero when unchanged).
        # Implied at integer points, but it makes the relaxation charge the
        # expected move cost instead of the cheaper mixed-value envelope,
        # which is what lets branch and bound prune.
        coeffs = {f"{prefix}tp_{i}": 1.0, f"{prefix}tm_{i}": 1.0}
        for j, v in cands[i]:
            coeffs[f"{prefix}z_{i}_{j}"] = -abs(x[i] - v)
        m.add_constraint(f"{prefix}tmag_{i}", coeffs, "=", 0.0)
        # a_i counts whether any bin was selected; at most one selection
        coeffs = {f"{prefix}a_{i}": 1.0}
        for j, _v in cands[i]:
            coeffs[f"{prefix}z_{i}_{j}"] = -1.0
        m.add_constraint(f"{prefix}adef_{i}", coeffs, "=", 0.0)
        m.add_constraint(f"{prefix}acap_{i}", {f"{prefix}a_{i}": 1.0}, "<=", 1.0)
        if not actionable[i]:
            m.add_constraint(f"{prefix}afix_{i}", {f"{prefix}a_{i}": 1.0}, "=", 0.0)

    m.add_constraint(
        f"{prefix}sparsity",
        {f"{prefix}a_{i}": 1.0 for i in range(p)},
        "<=",
        float(query.theta),
    )

    close_coeffs: dict[str, float] = {}
    if lam2 > 0.0:
        F = stats.factor
        mu = stats.mean
        for i in range(p):
            m.add_variable(f"{prefix}mp_{i}", lower=0.0)
            m.add_variable(f"{prefix}mm_{i}", lower=0.0)
            close_coeffs[f"{prefix}mp_{i}"] = 1.0
            close_coeffs[f"{prefix}mm_{i}"] = 1.0
            # m+ - m- = sum_{j<=i} F_ij (x'_j - mu_j)
            coeffs = {f"{prefix}mp_{i}": 1.0, f"{prefix}mm_{i}": -1.0}
            rhs = 0.0
            for j in range(i + 1):
                if F[i, j] != 0.0:
                    coeffs[f"{prefix}xp_{j}"] = -float(F[i, j])
                    rhs -= float(F[i, j] * mu[j])
            m.add_constraint(f"{prefix}mdef_{i}", coeffs, "=", rhs)

    return prox_coeffs, close_coeffs


def _score_coeffs(scorecard: Scorecard, prefix: str) -> dict[str, float]:
    return {
        f"{prefix}xp_{i}": f.coefficient
        for i, f in enumerate(scorecard.features)
        if f.coefficient != 0.0
    }


def _build_common(scorecard, query, stats):
    if query.lambdas[1] > 0.0 and stats is None:
        raise BuildError("closeness weighting needs gaussian stats")
    if len(query.point.values) != len(scorecard.features):
        raise ValidationError("query point does not match the scorecard")
    if len(query.weights.values) != len(scorecard.features):
        raise ValidationError("proximity weights do not match the scorecard")
    actionable = effective_actionable(scorecard, query)
    cands = candidate_values(scorecard, query.point)
    return actionable, cands


def _attach_objective(m, name, coeffs, weight):
    if coeffs:
        m.add_objective_term(name, coeffs, weight)


def add_counterfactual_block(
    m: MilpModel,
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None,
    pwl: PiecewiseApprox | None,
    cands: list[list[tuple[int, float]]],
    actionable: list[bool],
    prefix: str,
) -> tuple[dict[str, float], dict[str, float], dict[str, float]]:
    """One full counterfactual copy: point block plus its outcome constraints.

    Returns the objective coefficient dicts (proximity, closeness, gap) so the
    caller can merge copies into shared terms.
    """
    prox, close = _add_point_block(m, scorecard, query, stats, cands, actionable, prefix)
    outcome = query.outcome
    if isinstance(outcome, BinaryOutcome):
        score = _score_coeffs(scorecard, prefix)
        if outcome.value == 1:
            m.add_constraint(
                f"{prefix}validity", score, ">=", query.epsilon - scorecard.intercept
            )
        else:
            m.add_constraint(f"{prefix}validity", score, "<=", -scorecard.intercept)
        gap = {}
    elif isinstance(outcome, ProbabilityOutcome):
        gap = _add_probability_block(m, scorecard, query, pwl, prefix)
    else:
        gap = _add_continuous_goal(m, scorecard, query, prefix)
    return prox, close, gap


def build_binary_cf(
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None = None,
) -> CfModel:
    """Flip a binary decision: score >= epsilon for 1, score <= 0 for 0."""
    _check_target(scorecard, query.outcome)
    if not isinstance(query.outcome, BinaryOutcome):
        raise ArgumentError("binary builder needs a binary outcome")
    actionable, cands = _build_common(scorecard, query, stats)
    m = MilpModel(name="binary_cf")
    prox, close, _ = add_counterfactual_block(
        m, scorecard, query, stats, None, cands, actionable, ""
    )
    _attach_objective(m, "proximity", prox, query.lambdas[0])
    _attach_objective(m, "closeness", close, query.lambdas[1])
    # Change indicators first: fixing them decides cost and validity, the
    # bin picks follow through the selection rows.
    m.branch_hint = [f"a_{i}" for i in range(len(scorecard.features))]
    return CfModel(m, scorecard, query, stats, None, cands, [""])


def _add_probability_block(m, scorecard, query, pwl, prefix):
    """Piecewise probability: segment pick, score split, fitted value."""
    bp = pwl.breakpoints
    R = pwl.segments
    m.add_variable(f"{prefix}f", lower=0.0, upper=1.0)
    hsum = {}
    fdef = {f"{prefix}f": -1.0}
    sone = {}
    for r in range(R):
        m.add_variable(f"{prefix}h_{r}")
        m.add_variable(f"{prefix}s_{r}", kind=BINARY)
        hsum[f"{prefix}h_{r}"] = 1.0
        fdef[f"{prefix}h_{r}"] = pwl.slopes[r]
        fdef[f"{prefix}s_{r}"] = pwl.intercepts[r]
        sone[f"{prefix}s_{r}"] = 1.0
        # b_{r} s_r <= h_r <= b_{r+1} s_r keeps unused pieces at zero
        m.add_constraint(
            f"{prefix}hlo_{r}", {f"{prefix}h_{r}": 1.0, f"{prefix}s_{r}": -bp[r]}, ">=", 0.0
        )
        m.add_constraint(
            f"{prefix}hup_{r}", {f"{prefix}h_{r}": 1.0, f"{prefix}s_{r}": -bp[r + 1]}, "<=", 0.0
        )
    score = _score_coeffs(scorecard, prefix)
    coeffs = dict(hsum)
    for name, c in score.items():
        coeffs[name] = coeffs.get(name, 0.0) - c
    m.add_constraint(f"{prefix}hsum", coeffs, "=", scorecard.intercept)
    m.add_constraint(f"{prefix}fdef", fdef, "=", 0.0)
    m.add_constraint(f"{prefix}sone", sone, "=", 1.0)

    gap = {}
    target = query.outcome.value
    if query.outcome.relation == "le":
        m.add_constraint(f"{prefix}goal", {f"{prefix}f": 1.0}, "<=", target)
    elif query.outcome.relation == "ge":
        m.add_constraint(f"{prefix}goal", {f"{prefix}f": 1.0}, ">=", target)
    else:
        m.add_variable(f"{prefix}qp", lower=0.0)
        m.add_variable(f"{prefix}qm", lower=0.0)
        gap = {f"{prefix}qp": 1.0, f"{prefix}qm": 1.0}
        # q+ - q- = f - target
        m.add_constraint(
            f"{prefix}qdef",
            {f"{prefix}qp": 1.0, f"{prefix}qm": -1.0, f"{prefix}f": -1.0},
            "=",
            -target,
        )
    return gap


def build_probability_cf(
    scorecard: Scorecard,
    query: CfQuery,
    pwl: PiecewiseApprox,
    stats: GaussianStats | None = None,
) -> CfModel:
    """Target an event probability through the piecewise logistic."""
    _check_target(scorecard, query.outcome)
    if not isinstance(query.outcome, ProbabilityOutcome):
        raise ArgumentError("probability builder needs a probability outcome")
    lo, hi = score_bounds(scorecard, query.point)
    if not pwl.covers(lo, hi):
        raise BuildError(
            f"approximation interval [{pwl.breakpoints[0]}, {pwl.breakpoints[-1]}] "
            f"does not contain the reachable scores [{lo}, {hi}]"
        )
    actionable, cands = _build_common(scorecard, query, stats)
    m = MilpModel(name="probability_cf")
    prox, close, gap = add_counterfactual_block(
        m, scorecard, query, stats, pwl, cands, actionable, ""
    )
    _attach_objective(m, "proximity", prox, query.lambdas[0])
    _attach_objective(m, "closeness", close, query.lambdas[1])
    _attach_objective(m, "outcome_gap", gap, query.lambdas[2])
    m.branch_hint = [f"a_{i}" for i in range(len(scorecard.features))]
    return CfModel(m, scorecard, query, stats, pwl, cands, [""])


def _add_continuous_goal(m, scorecard, query, prefix):
    score = _score_coeffs(scorecard, prefix)
    target = query.outcome.value
    gap = {}
    if query.outcome.relation == "le":
        m.add_constraint(f"{prefix}goal", score, "<=", target - scorecard.intercept)
    elif query.outcome.relation == "ge":
        m.add_constraint(f"{prefix}goal", score, ">=", target - scorecard.intercept)
    else:
        m.add_variable(f"{prefix}qp", lower=0.0)
        m.add_variable(f"{prefix}qm", lower=0.0)
        gap = {f"{prefix}qp": 1.0, f"{prefix}qm": 1.0}
        coeffs = {f"{prefix}qp": 1.0, f"{prefix}qm": -1.0}
        for name, c in score.items():
            coeffs[name] = -c
        # q+ - q- = score - target
        m.add_constraint(f"{prefix}qdef", coeffs, "=", scorecard.intercept - target)
    return gap


def build_continuous_cf(
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None = None,
) -> CfModel:
    """Target a raw model score; no equality is ever imposed on the score."""
    _check_target(scorecard, query.outcome)
    if not isinstance(query.outcome, ContinuousOutcome):
        raise ArgumentError("continuous builder needs a continuous outcome")
    actionable, cands = _build_common(scorecard, query, stats)
    m = MilpModel(name="continuous_cf")
    prox, close, gap = add_counterfactual_block(
        m, scorecard, query, stats, None, cands, actionable, ""
    )
    _attach_objective(m, "proximity", prox, query.lambdas[0])
    _attach_objective(m, "closeness", close, query.lambdas[1])
    _attach_objective(m, "outcome_gap", gap, query.lambdas[2])
    m.branch_hint = [f"a_{i}" for i in range(len(scorecard.features))]
    return CfModel(m, scorecard, query, stats, None, cands, [""])


def build_single_cf(
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None = None,
    pwl: PiecewiseApprox | None = None,
) -> CfModel:
    """Dispatch to the right single-counterfactual builder for the outcome."""
    if isinstance(query.outcome, BinaryOutcome):
        return build_binary_cf(scorecard, query, stats)
    if isinstance(query.outcome, ProbabilityOutcome):
        if pwl is None:
            raise BuildError("probability outcomes need a piecewise approximation")
        return build_probability_cf(scorecard, query, pwl, stats)
    return build_continuous_cf(scorecard, query, stats)


def _decode_one(cf: CfModel, values: dict[str, float], prefix: str) -> Counterfactual:
    sc = cf.scorecard
    query = cf.query
    x = query.point.values
    actionable = effective_actionable(sc, query)
    changes = []
    new_vals = []
    for i, f in enumerate(sc.features):
        picked = [
            (j, v) for j, v in cf.candidates[i] if values[f"{prefix}z_{i}_{j}"] > 0.5
        ]
        if len(picked) > 1:
            raise DecodeError(f"{f.name}: multiple bins selected")
        a = values[f"{prefix}a_{i}"]
        if abs(a - len(picked)) > 1e-6:
            raise DecodeError(f"{f.name}: change flag {a} disagrees with selections")
        if picked and not actionable[i]:
            raise DecodeError(f"{f.name}: non-actionable feature was changed")
        if picked:
            j, v = picked[0]
            b = f.bins[j]
            changes.append(
                Change(
                    feature=f.name,
                    current_value=x[i],
                    bin_index=j,
                    bin_label=b.label,
                    required_text=b.interval_text(),
                    new_value=v,
                )
            )
            new_vals.append(v)
        else:
            new_vals.append(x[i])
    if len(changes) > query.theta:
        raise DecodeError("more changes than the sparsity cap allows")

    achieved = sc.intercept + sum(
        f.coefficient * v for f, v in zip(sc.features, new_vals)
    )
    internal = sc.intercept + sum(
        f.coefficient * values[f"{prefix}xp_{i}"] for i, f in enumerate(sc.features)
    )
    if abs(achieved - internal) > SCORE_MATCH_TOL:
        raise DecodeError(
            f"recomputed score {achieved} drifts from the model's {internal}"
        )

    terms: dict[str, float] = {
        "proximity": sum(
            w * abs(a - b) for w, a, b in zip(query.weights.values, x, new_vals)
        )
    }
    if query.lambdas[1] > 0.0 and cf.stats is not None:
        terms["closeness"] = cf.stats.closeness(np.array(new_vals))
    model_prob = None
    if isinstance(query.outcome, ProbabilityOutcome):
        model_prob = cf.pwl.value(achieved)
        if query.outcome.relation == "closest":
            terms["outcome_gap"] = abs(model_prob - query.outcome.value)
    elif isinstance(query.outcome, ContinuousOutcome):
        if query.outcome.relation == "closest":
            terms["outcome_gap"] = abs(achieved - query.outcome.value)
    prob = logistic(achieved) if sc.target_type == "binary" else None
    return Counterfactual(
        changes=tuple(changes),
        values=tuple(new_vals),
        achieved_score=achieved,
        achieved_probability=prob,
        model_probability=model_prob,
        objective_terms=terms,
    )


def decode_solution(cf: CfModel, values: dict[str, float]) -> Counterfactual:
    """Decode a single-counterfactual solve; solver bugs raise DecodeError."""
    if cf.k != 1:
        raise ArgumentError("this model decodes to multiple counterfactuals")
    return _decode_one(cf, values, cf.prefixes[0])


def decode_solutions(cf: CfModel, values: dict[str, float]) -> list[Counterfactual]:
    """Decode all counterfactual copies, cheapest (proximity+closeness) first."""
    out = [_decode_one(cf, values, prefix) for prefix in cf.prefixes]
    return sorted(out, key=lambda c: c.cost)
