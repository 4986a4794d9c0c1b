"""Weighted blends and priority-ordered solves."""

import pytest

import scorecf.multiobjective as mo
from scorecf.errors import ArgumentError, InternalError
from scorecf.formulations import BinaryOutcome, CfQuery, build_binary_cf, decode_solution
from scorecf.milp import MilpResult, SolverLimits
from scorecf.multiobjective import Degradation, solve_hierarchical, solve_weighted
from scorecf.scorecard import DataPoint
from scorecf.stats import compute_weights, gaussian_stats_from_moments


def toy_model(toy_scorecard, lambdas=(1.0, 1.0, 0.0), mean=(0.0, -1.0)):
    point = DataPoint((0.0, 0.0))
    stats = gaussian_stats_from_moments(list(mean), [[1.0, 0.0], [0.0, 1.0]])
    q = CfQuery(
        point=point,
        outcome=BinaryOutcome(1),
        weights=compute_weights(toy_scorecard, point, "range"),
        lambdas=lambdas,
    )
    return build_binary_cf(toy_scorecard, q, stats=stats), q


def test_weighted_override_rescales(toy_scorecard):
    cf, _ = toy_model(toy_scorecard, lambdas=(1.0, 1.0, 0.0))
    base = solve_weighted(cf.model)
    doubled = solve_weighted(cf.model, weights={"proximity": 2.0, "closeness": 2.0})
    assert doubled.objective_total == pytest.approx(2 * base.objective_total, abs=1e-9)
    assert doubled.objective_terms == pytest.approx(base.objective_terms, abs=1e-9)


def test_weighted_sequence_maps_by_order(toy_scorecard):
    cf, _ = toy_model(toy_scorecard)
    named = solve_weighted(cf.model, weights={"proximity": 1.0, "closeness": 0.0})
    ordered = solve_weighted(cf.model, weights=(1.0, 0.0))
    assert ordered.objective_total == pytest.approx(named.objective_total, abs=1e-12)
    with pytest.raises(ArgumentError):
        solve_weighted(cf.model, weights=(1.0,))
    with pytest.raises(ArgumentError):
        solve_weighted(cf.model, weights={"nope": 1.0})


def test_priority_order_changes_the_winner(toy_scorecard):
    # proximity first: the cheap A move wins, closeness then has no room
    cf, _ = toy_model(toy_scorecard)
    hier = solve_hierarchical(
        cf.model, ["proximity", "closeness"], Degradation("relative", 0.0)
    )
    dec = decode_solution(cf, hier.result.values)
    assert dec.changes[0].feature == "A"
    assert hier.stages[0].optimum == pytest.approx(0.4 / 0.9, abs=1e-9)
    assert hier.stages[0].allowance == 0.0

    # closeness first: landing on the population mean beats staying near x
    hier2 = solve_hierarchical(
        cf.model, ["closeness", "proximity"], Degradation("relative", 0.0)
    )
    dec2 = decode_solution(cf, hier2.result.values)
    assert dec2.changes[0].feature == "B"
    assert hier2.stages[0].optimum == pytest.approx(0.0, abs=1e-9)
    assert hier2.stages[1].optimum == pytest.approx(0.5, abs=1e-9)


def test_degradation_opens_the_tradeoff(toy_scorecard):
    cf, _ = toy_model(toy_scorecard)
    # 15% slack on proximity (0.444 -> 0.511) lets the 0.5 B move through,
    # and the second stage takes it for its zero closeness
    hier = solve_hierarchical(
        cf.model, ["proximity", "closeness"], Degradation("relative", 0.15)
    )
    dec = decode_solution(cf, hier.result.values)
    assert dec.changes[0].feature == "B"
    assert hier.stages[0].allowance == pytest.approx(0.15 * 0.4 / 0.9, abs=1e-12)
    assert hier.result.objective_terms["closeness"] == pytest.approx(0.0, abs=1e-9)


def test_absolute_degradation_mode(toy_scorecard):
    cf, _ = toy_model(toy_scorecard)
    hier = solve_hierarchical(
        cf.model, ["proximity", "closeness"], Degradation("absolute", 0.2)
    )
    assert hier.stages[0].allowance == pytest.approx(0.2, abs=1e-15)
    dec = decode_solution(cf, hier.result.values)
    assert dec.changes[0].feature == "B"


def test_tiny_optimum_falls_back_to_absolute(toy_scorecard):
    point = DataPoint((0.0, 0.0))
    q = CfQuery(
        point=point,
        outcome=BinaryOutcome(0),  # already satisfied at the start
        weights=compute_weights(toy_scorecard, point, "range"),
        lambdas=(1.0, 1.0, 0.0),
    )
    stats = gaussian_stats_from_moments([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    cf = build_binary_cf(toy_scorecard, q, stats=stats)
    hier = solve_hierarchical(
        cf.model, ["proximity", "closeness"], Degradation("relative", 0.1)
    )
    assert hier.stages[0].optimum == pytest.approx(0.0, abs=1e-12)
    # a relative allowance of a zero optimum would be zero; the value applies as-is
    assert hier.stages[0].allowance == pytest.approx(0.1, abs=1e-15)


def test_single_stage_equals_weighted(toy_scorecard):
    cf, _ = toy_model(toy_scorecard, lambdas=(1.0, 1.0, 0.0))
    hier = solve_hierarchical(cf.model, ["proximity"])
    weighted = solve_weighted(cf.model, weights={"proximity": 1.0, "closeness": 0.0})
    assert hier.stages[0].optimum == pytest.approx(
        weighted.objective_terms["proximity"], abs=1e-9
    )
    # the final report re-expresses the point under the original blend
    assert set(hier.result.objective_terms) == {"proximity", "closeness"}


def test_reward_terms_are_maximized(toy_scorecard):
    from scorecf.diversity import DiversityConfig, build_multi_cf

    point = DataPoint((0.0, 0.0))
    q = CfQuery(
        point=point,
        outcome=BinaryOutcome(1),
        weights=compute_weights(toy_scorecard, point, "range"),
    )
    cfg = DiversityConfig(k=2, lambda_features=0.1, lambda_values=0.05)
    cf = build_multi_cf(toy_scorecard, q, cfg)
    hier = solve_hierarchical(cf.model, ["diversity_features", "proximity"])
    assert hier.stages[0].sense == "max"
    assert hier.stages[0].optimum == pytest.approx(2.0, abs=1e-9)
    # with both copies forced maximally apart, proximity is the frozen sum
    assert hier.stages[1].optimum == pytest.approx(0.4 / 0.9 + 0.5, abs=1e-9)


def test_priority_validation(toy_scorecard):
    cf, _ = toy_model(toy_scorecard)
    with pytest.raises(ArgumentError):
        solve_hierarchical(cf.model, [])
    with pytest.raises(ArgumentError):
        solve_hierarchical(cf.model, ["proximity", "proximity"])
    with pytest.raises(ArgumentError):
        solve_hierarchical(cf.model, ["nope"])


def test_first_stage_infeasibility_passes_through(toy_scorecard):
    point = DataPoint((0.4, -1.0))
    q = CfQuery(
        point=point,
        outcome=BinaryOutcome(0),
        weights=compute_weights(toy_scorecard, point, "range"),
        actionable_override=frozenset({"A"}),
    )
    cf = build_binary_cf(toy_scorecard, q)
    hier = solve_hierarchical(cf.model, ["proximity"])
    assert hier.result.status == "infeasible"
    assert hier.stages == []


def test_later_stage_infeasibility_is_internal(toy_scorecard, monkeypatch):
    cf, _ = toy_model(toy_scorecard)
    real = mo.solve_milp
    calls = {"n": 0}

    def flaky(model, limits=None):
        calls["n"] += 1
        if calls["n"] == 2:
            return MilpResult(
                status="infeasible",
                values={},
                objective_total=None,
                objective_terms={},
                nodes_explored=1,
                wall_time=0.0,
                best_bound=None,
                gap=None,
            )
        return real(model, limits)

    monkeypatch.setattr(mo, "solve_milp", flaky)
    with pytest.raises(InternalError):
        solve_hierarchical(cf.model, ["proximity", "closeness"])
