"""Brute-force reference enumerator for counterfactual queries.

Everything here re-derives candidates, feasibility and objective values with
its own arithmetic.  It shares only the input data types with the MILP path,
never evaluation code, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement, product

from .errors import BuildError, SizeError, ValidationError
from .formulations import (
    BinaryOutcome,
    CfQuery,
    ContinuousOutcome,
    PiecewiseApprox,
    ProbabilityOutcome,
)
from .scorecard import Scorecard
from .stats import GaussianStats

ENUMERATION_CAP = 10_000_000
TIE_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class OracleAssignment:
    """One enumerated counterfactual: which bins were picked, and its cost."""

    changes: tuple[tuple[int, int], ...]  # (feature index, bin index), sorted
    point: tuple[float, ...]
    score: float
    objective: float
    terms: tuple[tuple[str, float], ...]

    def term(self, name: str) -> float:
        for key, val in self.terms:
            if key == name:
                return val
        return 0.0


@dataclass(frozen=True)
class OracleResult:
    status: str
    objective: float | None
    best: tuple[OracleAssignment, ...]
    enumerated: int


@dataclass(frozen=True)
class OracleMultiResult:
    status: str
    objective: float | None
    best: tuple[tuple[OracleAssignment, ...], ...]
    enumerated: int
    singles: int


def _own_candidates(scorecard: Scorecard, x: tuple[float, ...]) -> list[list[tuple[int, float]]]:
    out = []
    for i, f in enumerate(scorecard.features):
        row = []
        for j, b in enumerate(f.bins):
            if abs(b.transform_value - x[i]) > 1e-12:
                row.append((j, b.transform_value))
        out.append(row)
    return out


def _own_actionable(scorecard: Scorecard, query: CfQuery) -> list[bool]:
    if query.actionable_override is None:
        return [f.actionable for f in scorecard.features]
    known = {f.name for f in scorecard.features}
    missing = set(query.actionable_override) - known
    if missing:
        raise ValidationError(f"actionable override names unknown feature(s): {sorted(missing)}")
    if not query.actionable_override:
        raise BuildError("actionable override leaves no feature changeable")
    return [f.name in query.actionable_override for f in scorecard.features]


def _pw_eval(pwl: PiecewiseApprox, phi: float) -> float:
    bp = pwl.breakpoints
    if phi < bp[0] - 1e-9 or phi > bp[-1] + 1e-9:
        raise BuildError(f"score {phi} escapes the approximated interval")
    r = bisect_right(bp, phi) - 1
    r = min(max(r, 0), len(pwl.slopes) - 1)
    return pwl.slopes[r] * phi + pwl.intercepts[r]


def _closeness(stats: GaussianStats, point: tuple[float, ...]) -> float:
    total = 0.0
    p = len(point)
    for i in range(p):
        acc = 0.0
        for j in range(i + 1):
            acc += float(stats.factor[i, j]) * (point[j] - float(stats.mean[j]))
        total += abs(acc)
    return total


def _evaluate(
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None,
    pwl: PiecewiseApprox | None,
    point: tuple[float, ...],
) -> tuple[bool, float, tuple[tuple[str, float], ...], float]:
    """Feasibility, blended objective, term breakdown and score for one point."""
    lam1, lam2, lam3 = query.lambdas
    phi = scorecard.intercept
    for f, v in zip(scorecard.features, point):
        phi += f.coefficient * v

    outcome = query.outcome
    gap = None
    if isinstance(outcome, BinaryOutcome):
        ok = phi >= query.epsilon if outcome.value == 1 else phi <= 0.0
    elif isinstance(outcome, ProbabilityOutcome):
        fitted = _pw_eval(pwl, phi)
        if outcome.relation == "le":
            ok = fitted <= outcome.value
        elif outcome.relation == "ge":
            ok = fitted >= outcome.value
        else:
            ok = True
            gap = abs(fitted - outcome.value)
    else:
        if outcome.relation == "le":
            ok = phi <= outcome.value
        elif outcome.relation == "ge":
            ok = phi >= outcome.value
        else:
            ok = True
            gap = abs(phi - outcome.value)

    prox = 0.0
    for w, a, b in zip(query.weights.values, query.point.values, point):
        prox += w * abs(a - b)
    terms = [("proximity", prox)]
    obj = lam1 * prox
    if lam2 > 0.0:
        close = _closeness(stats, point)
        terms.append(("closeness", close))
        obj += lam2 * close
    if gap is not None:
        terms.append(("outcome_gap", gap))
        obj += lam3 * gap
    return ok, obj, tuple(terms), phi


def _feasible_assignments(
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None,
    pwl: PiecewiseApprox | None,
):
    """Yield every sparsity-feasible, outcome-feasible assignment."""
    if query.lambdas[1] > 0.0 and stats is None:
        raise BuildError("closeness weighting needs gaussian stats")
    if isinstance(query.outcome, ProbabilityOutcome) and pwl is None:
        raise BuildError("probability outcomes need a piecewise approximation")
    x = query.point.values
    actionable = _own_actionable(scorecard, query)
    cands = _own_candidates(scorecard, x)

    total = 1
    for i, row in enumerate(cands):
        if actionable[i]:
            total *= len(row) + 1
    if total > ENUMERATION_CAP:
        raise SizeError(f"{total} assignments exceed the enumeration cap {ENUMERATION_CAP}")

    open_idx = [i for i in range(len(cands)) if actionable[i] and cands[i]]
    for size in range(min(query.theta, len(open_idx)) + 1):
        for subset in combinations(open_idx, size):
            for picks in product(*[cands[i] for i in subset]):
                point = list(x)
                changes = []
                for i, (j, v) in zip(subset, picks):
                    point[i] = v
                    changes.append((i, j))
                point = tuple(point)
                ok, obj, terms, phi = _evaluate(scorecard, query, stats, pwl, point)
                if ok:
                    yield OracleAssignment(
                        changes=tuple(changes),
                        point=point,
                        score=phi,
                        objective=obj,
                        terms=terms,
                    ), total


def oracle_single(
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None = None,
    pwl: PiecewiseApprox | None = None,
    tie_tol: float = TIE_TOL,
) -> OracleResult:
    """Enumerate every assignment and return the optimum with all its ties."""
    x = query.point.values
    actionable = _own_actionable(scorecard, query)
    cands = _own_candidates(scorecard, x)
    total = 1
    for i, row in enumerate(cands):
        if actionable[i]:
            total *= len(row) + 1

    best: list[OracleAssignment] = []
    best_obj = math.inf
    for asg, total in _feasible_assignments(scorecard, query, stats, pwl):
        if asg.objective < best_obj - tie_tol:
            best = [asg]
            best_obj = asg.objective
        elif asg.objective <= best_obj + tie_tol:
            best.append(asg)
            best_obj = min(best_obj, asg.objective)
    if not best:
        return OracleResult(INFEASIBLE, None, (), total)
    # keep only assignments still within tie_tol of the final optimum
    kept = tuple(a for a in best if a.objective <= best_obj + tie_tol)
    return OracleResult(OPTIMAL, best_obj, kept, total)


def _pair_metrics(a: OracleAssignment, b: OracleAssignment) -> tuple[int, int, bool]:
    """(feature-set distance, bin-choice distance, values-compatible) for a pair."""
    ma = dict(a.changes)
    mb = dict(b.changes)
    d_f = 0
    d_fv = 0
    compatible = True
    for i in set(ma) | set(mb):
        in_a = i in ma
        in_b = i in mb
        if in_a != in_b:
            d_f += 1
            d_fv += 1
        elif ma[i] != mb[i]:
            d_fv += 2
        else:
            compatible = False
    return d_f, d_fv, compatible


def oracle_multi(
    scorecard: Scorecard,
    query: CfQuery,
    k: int,
    hard_feature_sets: bool = False,
    hard_feature_values: bool = False,
    lambda_features: float = 0.0,
    lambda_values: float = 0.0,
    stats: GaussianStats | None = None,
    pwl: PiecewiseApprox | None = None,
    tie_tol: float = TIE_TOL,
) -> OracleMultiResult:
    """Enumerate unordered k-multisets of feasible singles under diversity rules."""
    if k < 2:
        raise BuildError("diverse enumeration needs k >= 2")
    singles = [asg for asg, _total in _feasible_assignments(scorecard, query, stats, pwl)]
    s = len(singles)
    count = math.comb(s + k - 1, k) if s else 0
    if count > ENUMERATION_CAP:
        raise SizeError(f"{count} multisets exceed the enumeration cap {ENUMERATION_CAP}")
    if s == 0:
        return OracleMultiResult(INFEASIBLE, None, (), 0, 0)

    dfm = [[0] * s for _ in range(s)]
    dfvm = [[0] * s for _ in range(s)]
    okm = [[True] * s for _ in range(s)]
    for ia in range(s):
        for ib in range(ia, s):
            d_f, d_fv, compat = _pair_metrics(singles[ia], singles[ib])
            dfm[ia][ib] = dfm[ib][ia] = d_f
            dfvm[ia][ib] = dfvm[ib][ia] = d_fv
            okm[ia][ib] = okm[ib][ia] = compat

    best: list[tuple[OracleAssignment, ...]] = []
    best_obj = math.inf
    for combo in combinations_with_replacement(range(s), k):
        base = sum(singles[i].objective for i in combo)
        reward = 0.0
        feasible = True
        for a in range(k):
            for b in range(a + 1, k):
                ia, ib = combo[a], combo[b]
                if hard_feature_sets and dfm[ia][ib] < 1:
                    feasible = False
                    break
                if hard_feature_values and not okm[ia][ib]:
                    feasible = False
                    break
                reward += lambda_features * dfm[ia][ib] + lambda_values * dfvm[ia][ib]
            if not feasible:
                break
        if not feasible:
            continue
        obj = base - reward
        if obj < best_obj - tie_tol:
            best = [tuple(singles[i] for i in combo)]
            best_obj = obj
        elif obj <= best_obj + tie_tol:
            best.append(tuple(singles[i] for i in combo))
            best_obj = min(best_obj, obj)
    if not best:
        return OracleMultiResult(INFEASIBLE, None, (), count, s)
    return OracleMultiResult(OPTIMAL, best_obj, tuple(best), count, s)
