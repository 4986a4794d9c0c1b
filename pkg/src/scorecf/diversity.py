"""Diverse counterfactual sets: K copies coupled by disagreement rows.

Soft modes count disagreements with pairwise binaries, u for changed
feature sets and d for differing bin picks, and subtract a reward per
disagreement from the objective.  Hard feature-set mode demands a changed
set per pair through the u's; hard value mode needs no counters at all,
since pairwise different picks aggregate to one at-most-one-copy cap per
candidate bin.  Each copy reuses the exact single-counterfactual block, so
a K=1 run and a copy inside a diverse run obey identical constraints.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

from .errors import ArgumentError, BuildError
from .formulations import (
    BinaryOutcome,
    CfModel,
    CfQuery,
    Counterfactual,
    PiecewiseApprox,
    ProbabilityOutcome,
    _build_common,
    _check_target,
    add_counterfactual_block,
)
from .milp.model import BINARY, MilpModel
from .scorecard import Scorecard, score_bounds
from .stats import GaussianStats

MAX_MODEL_VARIABLES = 20_000


@dataclass(frozen=True)
class DiversityConfig:
    """How many counterfactuals to produce and how to keep them apart.

    lambda_features rewards each feature one copy changed and another did
    not; lambda_values rewards each differing bin selection.  Hard modes
    turn the corresponding disagreement into a constraint instead.
    """

    k: int
    hard_feature_sets: bool = False
    hard_feature_values: bool = False
    lambda_features: float = 0.1
    lambda_values: float = 0.05

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 2:
            raise ArgumentError("a diverse set needs k >= 2")
        for lam in (self.lambda_features, self.lambda_values):
            if not math.isfinite(lam) or lam < 0:
                raise ArgumentError("diversity rewards must be finite and nonnegative")


@dataclass(frozen=True)
class DiversityMetrics:
    """Pairwise disagreement counts over a decoded counterfactual set."""

    feature_distance: int
    value_distance: int
    pairwise_features: tuple[tuple[int, ...], ...]
    pairwise_values: tuple[tuple[int, ...], ...]


def _estimate_variables(
    k: int,
    n_features: int,
    n_cands: int,
    with_close: bool,
    outcome,
    pwl: PiecewiseApprox | None,
    want_u: bool,
    want_d: bool,
) -> int:
    per_copy = 4 * n_features + n_cands
    if with_close:
        per_copy += 2 * n_features
    if isinstance(outcome, ProbabilityOutcome):
        per_copy += 1 + 2 * pwl.segments
        if outcome.relation == "closest":
            per_copy += 2
    elif not isinstance(outcome, BinaryOutcome):
        if outcome.relation == "closest":
            per_copy += 2
    pairs = k * (k - 1) // 2
    total = k * per_copy
    if want_u:
        total += pairs * n_features
    if want_d:
        total += pairs * n_cands
    return total


def _empty_change_invalid(scorecard: Scorecard, query: CfQuery) -> bool:
    """True when the unchanged point provably misses a binary target.

    Mirrors the validity row arithmetic, with slack well above the solver
    feasibility tolerance so the claim survives floating-point wiggle.
    Non-binary outcomes return False, the safe direction: callers treat
    False as "the unchanged point might count as a counterfactual".
    """
    if not isinstance(query.outcome, BinaryOutcome):
        return False
    x = query.point.values
    s = sum(
        f.coefficient * x[i]
        for i, f in enumerate(scorecard.features)
        if f.coefficient != 0.0
    )
    margin = 1e-6
    if query.outcome.value == 1:
        return s < query.epsilon - scorecard.intercept - margin
    return s > -scorecard.intercept + margin


def _distinct_cost_floors(
    scorecard: Scorecard,
    query: CfQuery,
    stats: GaussianStats | None,
    pwl: PiecewiseApprox | None,
    cands: list[list[tuple[int, float]]],
    actionable: list[bool],
    count: int,
) -> tuple[list[float], bool]:
    """Cost bounds for the cheapest pairwise-distinct single-copy points.

    Solves the one-copy problem, forbids the assignment it found, and
    repeats.  The j-th bound never exceeds the j-th cheapest distinct valid
    assignment, even when a solve stops at its node limit, because a bound
    is a bound regardless of whether the solve finished.  The flag reports
    that some solve proved no further distinct assignment exists, in which
    case the returned list is the complete census of valid assignments.

    Limits are node-based, not time-based, so the floors (and with them the
    built model) come out identical on any machine.
    """
    from .milp.solver import SolverLimits, solve_milp

    m = MilpModel(name="cost_floor")
    prox, _close, _gap = add_counterfactual_block(
        m, scorecard, query, stats, pwl, cands, actionable, ""
    )
    if not prox:
        return [], False
    m.add_objective_term("proximity", prox, 1.0)
    p = len(scorecard.features)
    m.branch_hint = [f"a_{i}" for i in range(p)]
    limits = SolverLimits(time_limit=math.inf, node_limit=20_000)
    floors: list[float] = []
    for j in range(count):
        res = solve_milp(m, limits)
        if res.status == "infeasible":
            return floors, True
        if not res.has_solution or res.best_bound is None or not math.isfinite(res.best_bound):
            break
        floors.append(float(res.best_bound))
        if j + 1 == count:
            break
        # Forbid exactly the assignment just found: flipping any chosen bin
        # off, or changing any so-far-unchanged feature, breaks the row.
        ones: list[str] = []
        zeros: list[str] = []
        for i in range(p):
            if res.values[f"a_{i}"] > 0.5:
                for cj, _v in cands[i]:
                    key = f"z_{i}_{cj}"
                    (ones if res.values[key] > 0.5 else zeros).append(key)
            else:
                zeros.append(f"a_{i}")
        coeffs = {key: 1.0 for key in ones}
        coeffs.update({key: -1.0 for key in zeros})
        m.add_constraint(f"nogood_{j}", coeffs, "<=", float(len(ones)) - 1.0)
    return floors, False


def build_multi_cf(
    scorecard: Scorecard,
    query: CfQuery,
    cfg: DiversityConfig,
    stats: GaussianStats | None = None,
    pwl: PiecewiseApprox | None = None,
) -> CfModel:
    """Build one model whose solution is a set of k coupled counterfactuals."""
    _check_target(scorecard, query.outcome)
    if isinstance(query.outcome, ProbabilityOutcome):
        if pwl is None:
            raise BuildError("probability outcomes need a piecewise approximation")
        lo, hi = score_bounds(scorecard, query.point)
        if not pwl.covers(lo, hi):
            raise BuildError(
                f"approximation interval [{pwl.breakpoints[0]}, {pwl.breakpoints[-1]}] "
                f"does not contain the reachable scores [{lo}, {hi}]"
            )
    soft_f = cfg.lambda_features > 0.0
    soft_v = cfg.lambda_values > 0.0
    if not (cfg.hard_feature_sets or cfg.hard_feature_values or soft_f or soft_v):
        raise BuildError(
            "k >= 2 needs a diversity mechanism: a hard mode or a positive reward"
        )
    actionable, cands = _build_common(scorecard, query, stats)

    p = len(scorecard.features)
    n_cands = sum(len(row) for row in cands)
    want_u = cfg.hard_feature_sets or soft_f
    # Pairwise pick-disagreement binaries exist only to count the soft
    # reward; the hard mode is the aggregate cap below, which needs none.
    want_d = soft_v
    est = _estimate_variables(
        cfg.k, p, n_cands, query.lambdas[1] > 0.0, query.outcome, pwl, want_u, want_d
    )
    if est > MAX_MODEL_VARIABLES:
        raise BuildError(
            f"the coupled model would need about {est} variables "
            f"(cap {MAX_MODEL_VARIABLES}); shrink k or the bin count, and use the "
            "formulation dump to inspect what a single copy costs"
        )

    if soft_f and query.lambdas[0] > 0.0:
        pairs = cfg.k * (cfg.k - 1) // 2
        max_reward = cfg.lambda_features * pairs * p + cfg.lambda_values * pairs * n_cands
        if max_reward > query.lambdas[0] * query.theta:
            warnings.warn(
                "diversity rewards can outweigh the proximity scale "
                f"({max_reward:.3g} vs {query.lambdas[0] * query.theta:.3g}); "
                "copies may wander far just to disagree",
                stacklevel=2,
            )

    m = MilpModel(name="diverse_cf")
    prefixes = [f"c{k}_" for k in range(cfg.k)]
    prox_all: dict[str, float] = {}
    close_all: dict[str, float] = {}
    gap_all: dict[str, float] = {}
    copy_prox: list[dict[str, float]] = []
    for prefix in prefixes:
        prox, close, gap = add_counterfactual_block(
            m, scorecard, query, stats, pwl, cands, actionable, prefix
        )
        copy_prox.append(prox)
        prox_all.update(prox)
        close_all.update(close)
        gap_all.update(gap)

    u_names: list[str] = []
    d_names: list[str] = []
    for a in range(cfg.k):
        for b in range(a + 1, cfg.k):
            pa, pb = prefixes[a], prefixes[b]
            if want_u:
                for i in range(p):
                    u = f"u_{a}_{b}_{i}"
                    va, vb = f"{pa}a_{i}", f"{pb}a_{i}"
                    # u = a XOR a' linearized.  Binary on purpose: branching
                    # it down welds the pair's change indicators together
                    # through the middle rows, branching it up forces an
                    # exact disagreement through the outer ones, so both
                    # children are strong.
                    m.add_variable(u, kind=BINARY)
                    u_names.append(u)
                    m.add_constraint(f"{u}_le_sum", {u: 1.0, va: -1.0, vb: -1.0}, "<=", 0.0)
                    m.add_constraint(f"{u}_ge_diff", {u: 1.0, va: -1.0, vb: 1.0}, ">=", 0.0)
                    m.add_constraint(f"{u}_ge_rdiff", {u: 1.0, va: 1.0, vb: -1.0}, ">=", 0.0)
                    m.add_constraint(f"{u}_le_slack", {u: 1.0, va: 1.0, vb: 1.0}, "<=", 2.0)
                if cfg.hard_feature_sets:
                    m.add_constraint(
                        f"usep_{a}_{b}",
                        {f"u_{a}_{b}_{i}": 1.0 for i in range(p)},
                        ">=",
                        1.0,
                    )
            if want_d:
                for i in range(p):
                    for j, _v in cands[i]:
                        d = f"d_{a}_{b}_{i}_{j}"
                        za, zb = f"{pa}z_{i}_{j}", f"{pb}z_{i}_{j}"
                        # Same shape as u, for the same branching reason.
                        m.add_variable(d, kind=BINARY)
                        d_names.append(d)
                        m.add_constraint(f"{d}_le_sum", {d: 1.0, za: -1.0, zb: -1.0}, "<=", 0.0)
                        m.add_constraint(f"{d}_ge_diff", {d: 1.0, za: -1.0, zb: 1.0}, ">=", 0.0)
                        m.add_constraint(f"{d}_ge_rdiff", {d: 1.0, za: 1.0, zb: -1.0}, ">=", 0.0)
                        m.add_constraint(f"{d}_le_slack", {d: 1.0, za: 1.0, zb: 1.0}, "<=", 2.0)

    if cfg.hard_feature_values:
        # Two copies moving a shared feature must land in different bins,
        # which over all pairs says each candidate bin is picked at most
        # once.  One row per bin, and the relaxation already has to spread
        # copies across second-best moves instead of stacking the cheapest.
        for i in range(p):
            for j, _v in cands[i]:
                m.add_constraint(
                    f"vcap_{i}_{j}",
                    {f"{prefix}z_{i}_{j}": 1.0 for prefix in prefixes},
                    "<=",
                    1.0,
                )

    # The model is symmetric in the copies, so order them by a fixed
    # weighting of their changed-feature indicators.  Every multiset of
    # counterfactuals keeps at least one copy-permutation satisfying the
    # ordering, so the optimal value is untouched while the search tree
    # loses the k! mirrored subtrees.  The weight cap keeps coefficients
    # tame on wide scorecards at the price of a weaker (still valid) order.
    for a in range(cfg.k - 1):
        coeffs: dict[str, float] = {}
        for i in range(p):
            w = float(2 ** min(i, 20))
            coeffs[f"c{a}_a_{i}"] = w
            coeffs[f"c{a + 1}_a_{i}"] = -w
        m.add_constraint(f"order_{a}", coeffs, ">=", 0.0)

    lam1, lam2, lam3 = query.lambdas

    # Hard feature-set rows force every pair of copies apart outright; the
    # bin caps do too once the unchanged point is off the table.  Distinct
    # copies need distinct valid assignments, so a quick census of cheap
    # single-copy points, each forbidden in turn by a no-good row, can
    # prove the coupled model empty before the search even starts.  Cost
    # floor rows from the same census were tried and rejected: they lift
    # the root bound but derail the branching, and the net is a slower
    # solve, so the census is kept only for its infeasibility certificate.
    distinct_copies = cfg.hard_feature_sets or (
        cfg.hard_feature_values and _empty_change_invalid(scorecard, query)
    )
    need = cfg.k if distinct_copies else 1
    floors, exhausted = _distinct_cost_floors(
        scorecard, query, stats, pwl, cands, actionable, need
    )
    if exhausted and len(floors) < need:
        # A census that came up short is an infeasibility certificate for
        # the coupled model; one unsatisfiable row hands it to the solver.
        m.add_constraint("distinct_deficit", {}, ">=", 1.0)
    if prox_all:
        m.add_objective_term("proximity", prox_all, lam1)
    if close_all:
        m.add_objective_term("closeness", close_all, lam2)
    if gap_all:
        m.add_objective_term("outcome_gap", gap_all, lam3)
    if soft_f and u_names:
        m.add_objective_term(
            "diversity_features", {u: 1.0 for u in u_names}, -cfg.lambda_features
        )
    if soft_v and d_names:
        m.add_objective_term(
            "diversity_values", {d: 1.0 for d in d_names}, -cfg.lambda_values
        )
    # Branch the change indicators first: they steer validity, sparsity,
    # the set-diversity rows, and the per-feature move cost, so fixing them
    # moves the bound where the bin picks merely follow.
    m.branch_hint = [f"{prefix}a_{i}" for prefix in prefixes for i in range(p)]
    return CfModel(m, scorecard, query, stats, pwl, cands, prefixes)


def measure_diversity(counterfactuals: list[Counterfactual]) -> DiversityMetrics:
    """Pairwise disagreement of decoded counterfactuals, counted from changes.

    feature distance counts features changed by exactly one of the pair;
    value distance additionally counts two per feature both changed but to
    different bins (one per differing selection row).
    """
    k = len(counterfactuals)
    sets = [{c.feature: c.bin_index for c in cf.changes} for cf in counterfactuals]
    pf = [[0] * k for _ in range(k)]
    pv = [[0] * k for _ in range(k)]
    for a in range(k):
        for b in range(a + 1, k):
            df = 0
            dv = 0
            for name in set(sets[a]) | set(sets[b]):
                in_a, in_b = name in sets[a], name in sets[b]
                if in_a != in_b:
                    df += 1
                    dv += 1
                elif sets[a][name] != sets[b][name]:
                    dv += 2
            pf[a][b] = pf[b][a] = df
            pv[a][b] = pv[b][a] = dv
    total_f = sum(pf[a][b] for a in range(k) for b in range(a + 1, k))
    total_v = sum(pv[a][b] for a in range(k) for b in range(a + 1, k))
    return DiversityMetrics(
        feature_distance=total_f,
        value_distance=total_v,
        pairwise_features=tuple(tuple(row) for row in pf),
        pairwise_values=tuple(tuple(row) for row in pv),
    )
