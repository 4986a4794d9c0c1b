"""Enumeration oracle: frozen optima on the toy card, and agreement with
the MILP path on randomly generated small instances."""

import copy

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import TOY_DOC, run_single
from scorecf.errors import SizeError
from scorecf.formulations import (
    BinaryOutcome,
    CfQuery,
    ContinuousOutcome,
    ProbabilityOutcome,
    piecewise_logistic,
)
from scorecf.milp import STATUS_INFEASIBLE, STATUS_OPTIMAL
from scorecf.oracle import INFEASIBLE, OPTIMAL, oracle_multi, oracle_single
from scorecf.scorecard import DataPoint, parse_scorecard, score_bounds
from scorecf.stats import compute_weights, gaussian_stats_from_moments


def q_for(sc, values, outcome, **kw):
    point = DataPoint.from_mapping(sc, values)
    return CfQuery(
        point=point, outcome=outcome, weights=compute_weights(sc, point, "range"), **kw
    )


def test_flip_up_frozen(toy_scorecard):
    q = q_for(toy_scorecard, {"A": 0.0, "B": 0.0}, BinaryOutcome(1))
    res = oracle_single(toy_scorecard, q)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(0.4 / 0.9, abs=1e-12)
    assert len(res.best) == 1
    assert res.best[0].changes == ((0, 0),)
    assert res.best[0].score == pytest.approx(0.4, abs=1e-12)
    # (2 moves + stay) for A times (2 moves + stay) for B
    assert res.enumerated == 9


def test_flip_down_frozen(toy_scorecard):
    q = q_for(toy_scorecard, {"A": 0.4, "B": 0.0}, BinaryOutcome(0))
    res = oracle_single(toy_scorecard, q)
    assert res.objective == pytest.approx(0.5, abs=1e-12)
    assert res.best[0].changes == ((1, 0),)
    # A sits exactly on a bin value, so it has one move left: 2 * 3
    assert res.enumerated == 6


def test_zero_change_when_valid(toy_scorecard):
    q = q_for(toy_scorecard, {"A": 0.0, "B": 0.0}, BinaryOutcome(0))
    res = oracle_single(toy_scorecard, q)
    assert res.objective == pytest.approx(0.0, abs=1e-15)
    assert res.best[0].changes == ()


def test_infeasible_and_enumeration_counts_skip_frozen(toy_scorecard):
    q = q_for(
        toy_scorecard,
        {"A": 0.4, "B": -1.0},
        BinaryOutcome(0),
        actionable_override=frozenset({"A"}),
    )
    res = oracle_single(toy_scorecard, q)
    assert res.status == INFEASIBLE
    assert res.objective is None and res.best == ()
    # B is frozen (factor 1); A can stay or move once
    assert res.enumerated == 2


def test_continuous_closest_tie_frozen(toy_continuous):
    q = q_for(
        toy_continuous,
        {"A": 0.0, "B": 0.0},
        ContinuousOutcome(1.2, "closest"),
        theta=2,
        lambdas=(0.0, 0.0, 1.0),
    )
    res = oracle_single(toy_continuous, q)
    assert res.objective == pytest.approx(0.2, abs=1e-12)
    assert len(res.best) == 2
    assert sorted(a.score for a in res.best) == [pytest.approx(1.0), pytest.approx(1.4)]


def test_probability_floor_frozen(toy_scorecard):
    lo, hi = score_bounds(toy_scorecard, DataPoint((0.0, 0.0)))
    pw = piecewise_logistic(lo, hi, segments=64, strategy="greedy", eps=1e-3)
    q = q_for(toy_scorecard, {"A": 0.0, "B": 0.0}, ProbabilityOutcome(0.6, "ge"))
    res = oracle_single(toy_scorecard, q, pwl=pw)
    assert res.objective == pytest.approx(0.5, abs=1e-12)
    assert res.best[0].changes == ((1, 1),)


def test_closeness_term_frozen(toy_scorecard):
    stats = gaussian_stats_from_moments([0.0, -1.0], [[1.0, 0.0], [0.0, 1.0]])
    q = q_for(
        toy_scorecard, {"A": 0.0, "B": 0.0}, BinaryOutcome(1), lambdas=(1.0, 1.0, 0.0)
    )
    res = oracle_single(toy_scorecard, q, stats=stats)
    assert res.objective == pytest.approx(0.5, abs=1e-12)
    assert res.best[0].term("closeness") == pytest.approx(0.0, abs=1e-15)
    assert res.best[0].term("proximity") == pytest.approx(0.5, abs=1e-12)


def test_nonactionable_feature_never_moves():
    doc = copy.deepcopy(TOY_DOC)
    doc["features"][0]["actionable"] = False
    sc = parse_scorecard(doc)
    q = q_for(sc, {"A": 0.0, "B": 0.0}, BinaryOutcome(1))
    res = oracle_single(sc, q)
    assert res.objective == pytest.approx(0.5, abs=1e-12)
    assert all(i != 0 for a in res.best for i, _ in a.changes)
    assert res.enumerated == 3


def test_enumeration_cap_raises():
    features = []
    for i in range(9):
        bins = [
            {"label": f"f{i}b{j}", "lower": float(j), "upper": float(j + 1), "transform_value": j * 0.1}
            for j in range(11)
        ]
        bins[0].pop("lower")
        bins[-1].pop("upper")
        features.append(
            {"name": f"f{i}", "coefficient": 1.0, "actionable": True, "bins": bins}
        )
    sc = parse_scorecard(
        {"version": "1", "target_type": "binary", "intercept": 0.0, "features": features}
    )
    point = DataPoint(tuple([0.0] * 9))
    q = CfQuery(
        point=point,
        outcome=BinaryOutcome(1),
        weights=compute_weights(sc, point, "range"),
        theta=9,
    )
    with pytest.raises(SizeError):
        oracle_single(sc, q)


# ----------------------------------------------------------------- multiset


def test_multi_hard_feature_sets_frozen(toy_scorecard):
    q = q_for(toy_scorecard, {"A": 0.0, "B": 0.0}, BinaryOutcome(1))
    res = oracle_multi(toy_scorecard, q, k=2, hard_feature_sets=True)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(0.4 / 0.9 + 0.5, abs=1e-12)
    assert res.singles == 2
    assert res.enumerated == 3  # multisets of size 2 over 2 singles
    pair = res.best[0]
    assert {a.changes for a in pair} == {((0, 0),), ((1, 1),)}


def test_multi_three_copies_certified_infeasible(toy_scorecard):
    q = q_for(toy_scorecard, {"A": 0.0, "B": 0.0}, BinaryOutcome(1))
    res = oracle_multi(toy_scorecard, q, k=3, hard_feature_sets=True)
    assert res.status == INFEASIBLE
    assert res.enumerated == 4  # C(2+3-1, 3)


def test_multi_soft_rewards_frozen(toy_scorecard):
    q = q_for(toy_scorecard, {"A": 0.0, "B": 0.0}, BinaryOutcome(1))
    res = oracle_multi(
        toy_scorecard, q, k=2, lambda_features=0.1, lambda_values=0.05
    )
    # distinct pair: 0.9444 base minus (0.1 * 2 + 0.05 * 2) reward
    assert res.objective == pytest.approx(0.4 / 0.9 + 0.5 - 0.3, abs=1e-12)


def test_multi_hard_values_allows_idle_copies(toy_continuous):
    q = q_for(
        toy_continuous,
        {"A": 0.0, "B": 0.0},
        ContinuousOutcome(0.0, "closest"),
        lambdas=(1.0, 0.0, 1.0),
    )
    # two unchanged copies never share a moved feature, so values-diversity holds
    res_vals = oracle_multi(toy_continuous, q, k=2, hard_feature_values=True)
    assert res_vals.status == OPTIMAL
    assert res_vals.objective == pytest.approx(0.0, abs=1e-15)
    # set-diversity instead forces one copy to actually move
    res_sets = oracle_multi(toy_continuous, q, k=2, hard_feature_sets=True)
    assert res_sets.status == OPTIMAL
    assert res_sets.objective > 0.1


def test_multi_needs_k_of_two():
    doc = copy.deepcopy(TOY_DOC)
    sc = parse_scorecard(doc)
    q = q_for(sc, {"A": 0.0, "B": 0.0}, BinaryOutcome(1))
    from scorecf.errors import BuildError

    with pytest.raises(BuildError):
        oracle_multi(sc, q, k=1, hard_feature_sets=True)


# ------------------------------------------ random agreement with the MILP


@st.composite
def small_instance(draw):
    eighth = st.integers(-16, 16).map(lambda k: k / 8.0)
    p = draw(st.integers(1, 4))
    target = draw(st.sampled_from(["binary", "continuous"]))
    features = []
    for i in range(p):
        nb = draw(st.integers(2, 3))
        tvs = [draw(eighth) for _ in range(nb)]
        cuts = sorted(set(draw(st.lists(st.integers(-5, 5), min_size=nb - 1, max_size=nb - 1, unique=True))))
        while len(cuts) < nb - 1:
            cuts.append((cuts[-1] if cuts else 0) + 1)
        bins = []
        for j in range(nb):
            b = {"label": f"f{i}b{j}", "transform_value": tvs[j]}
            if j > 0:
                b["lower"] = float(cuts[j - 1])
            if j < nb - 1:
                b["upper"] = float(cuts[j])
            bins.append(b)
        features.append(
            {
                "name": f"f{i}",
                "coefficient": draw(eighth),
                "actionable": draw(st.booleans()),
                "bins": bins,
            }
        )
    doc = {
        "version": "1",
        "target_type": target,
        "intercept": draw(eighth),
        "features": features,
    }
    sc = parse_scorecard(doc)
    start_bins = [draw(st.integers(0, len(f["bins"]) - 1)) for f in features]
    point = DataPoint(
        tuple(features[i]["bins"][start_bins[i]]["transform_value"] for i in range(p))
    )
    theta = draw(st.integers(1, 3))
    if target == "binary":
        kind = draw(st.sampled_from(["flip", "prob"]))
        if kind == "flip":
            outcome = BinaryOutcome(draw(st.integers(0, 1)))
        else:
            outcome = ProbabilityOutcome(
                draw(st.integers(2, 8)) / 10.0, draw(st.sampled_from(["le", "ge", "closest"]))
            )
    else:
        outcome = ContinuousOutcome(draw(eighth), draw(st.sampled_from(["le", "ge", "closest"])))
    with_close = draw(st.booleans())
    lam3 = 1.0 if getattr(outcome, "relation", "") == "closest" else 0.0
    lambdas = (1.0, 0.5 if with_close else 0.0, lam3)
    stats = None
    if with_close:
        mean = [draw(eighth) for _ in range(p)]
        var = [draw(st.sampled_from([0.5, 1.0, 2.0])) for _ in range(p)]
        cov = [[var[i] if i == j else 0.0 for j in range(p)] for i in range(p)]
        stats = gaussian_stats_from_moments(mean, cov)
    return sc, point, outcome, theta, lambdas, stats


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_instance())
def test_oracle_and_milp_agree(inst):
    sc, point, outcome, theta, lambdas, stats = inst
    q = CfQuery(
        point=point,
        outcome=outcome,
        weights=compute_weights(sc, point, "range"),
        theta=theta,
        lambdas=lambdas,
    )
    pwl = None
    if isinstance(outcome, ProbabilityOutcome):
        lo, hi = score_bounds(sc, point)
        if hi - lo < 1e-6:
            lo, hi = lo - 0.5, hi + 0.5
        pwl = piecewise_logistic(lo, hi, segments=48, strategy="greedy", eps=1e-4)
    ref = oracle_single(sc, q, stats=stats, pwl=pwl)
    cf, result, dec = run_single(sc, q, stats=stats, pwl=pwl)
    if ref.status == INFEASIBLE:
        assert result.status == STATUS_INFEASIBLE
        return
    assert result.status == STATUS_OPTIMAL
    assert result.objective_total == pytest.approx(ref.objective, abs=1e-6)
    # the decoded point must be one the oracle also considers optimal
    changed = tuple(
        (sc.feature_index(c.feature), c.bin_index) for c in dec.changes
    )
    assert changed in {a.changes for a in ref.best}
