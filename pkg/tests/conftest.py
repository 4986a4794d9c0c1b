"""Shared fixtures: the two-feature reference scorecard used across suites."""

import copy

import pytest

from scorecf.formulations import build_single_cf, decode_solution
from scorecf.milp import SolverLimits, solve_milp
from scorecf.scorecard import DataPoint, parse_scorecard

# Two features, intercept 0, coefficients (1, -1).  Small enough to check by
# hand, rich enough to exercise signs: the negative coefficient makes naive
# min/max-over-values bounds wrong, which several tests rely on.
TOY_DOC = {
    "version": "1",
    "target_type": "binary",
    "intercept": 0.0,
    "features": [
        {
            "name": "A",
            "coefficient": 1.0,
            "actionable": True,
            "bins": [
                {"label": "a1", "upper": 10.0, "transform_value": 0.4},
                {"label": "a2", "lower": 10.0, "transform_value": -0.5},
            ],
        },
        {
            "name": "B",
            "coefficient": -1.0,
            "actionable": True,
            "bins": [
                {"label": "b1", "upper": 5.0, "transform_value": 1.0},
                {"label": "b2", "lower": 5.0, "transform_value": -1.0},
            ],
        },
    ],
}


@pytest.fixture
def toy_scorecard():
    return parse_scorecard(TOY_DOC)


@pytest.fixture
def toy_origin(toy_scorecard):
    return DataPoint.from_mapping(toy_scorecard, {"A": 0.0, "B": 0.0})


@pytest.fixture
def toy_continuous():
    doc = copy.deepcopy(TOY_DOC)
    doc["target_type"] = "continuous"
    return parse_scorecard(doc)


def run_single(scorecard, query, stats=None, pwl=None, time_limit=20.0):
    """Build, solve and (when solvable) decode one query; returns (cf, result, decoded)."""
    cf = build_single_cf(scorecard, query, stats=stats, pwl=pwl)
    result = solve_milp(cf.model, SolverLimits(time_limit=time_limit))
    decoded = decode_solution(cf, result.values) if result.has_solution else None
    return cf, result, decoded
