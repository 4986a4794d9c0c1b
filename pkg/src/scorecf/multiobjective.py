"""Blended and lexicographic solves over a model's named objective terms.

The weighted path just rescales term weights.  The hierarchical path solves
one term at a time in priority order, then pins each optimized term near its
optimum before moving on, so earlier priorities can only degrade by the
allowance the caller grants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ArgumentError, InternalError
from .milp import MilpResult, SolverLimits, solve_milp
from .milp.model import MilpModel

# below this magnitude a relative allowance would collapse to nothing,
# so the allowance value is applied absolutely instead
RELATIVE_PIVOT = 1e-9

DEGRADATION_MODES = ("relative", "absolute")


@dataclass(frozen=True)
class Degradation:
    """How much each optimized term may worsen in later stages."""

    mode: str = "relative"
    value: float = 0.1

    def __post_init__(self):
        if self.mode not in DEGRADATION_MODES:
            raise ArgumentError(f"degradation mode must be one of {DEGRADATION_MODES}")
        if not math.isfinite(self.value) or self.value < 0:
            raise ArgumentError("degradation value must be finite and nonnegative")

    def allowance(self, optimum: float) -> float:
        if self.mode == "absolute" or abs(optimum) <= RELATIVE_PIVOT:
            return self.value
        return self.value * abs(optimum)


@dataclass(frozen=True)
class StageOutcome:
    """One hierarchical stage: which term, which direction, what it reached."""

    term: str
    sense: str  # "min" or "max"
    optimum: float
    allowance: float
    nodes: int
    wall_time: float


@dataclass
class HierarchicalResult:
    result: MilpResult
    stages: list[StageOutcome]


def solve_weighted(
    model: MilpModel,
    weights: dict[str, float] | tuple[float, ...] | list[float] | None = None,
    limits: SolverLimits | None = None,
) -> MilpResult:
    """Solve the blend, optionally overriding term weights by name or order."""
    if weights is None:
        return solve_milp(model, limits)
    work = model.copy()
    if isinstance(weights, dict):
        unknown = set(weights) - {t.name for t in work.objective_terms}
        if unknown:
            raise ArgumentError(f"no objective term named {sorted(unknown)}")
        for t in work.objective_terms:
            if t.name in weights:
                t.weight = float(weights[t.name])
    else:
        if len(weights) != len(work.objective_terms):
            raise ArgumentError(
                f"expected {len(work.objective_terms)} weights, got {len(weights)}"
            )
        for t, w in zip(work.objective_terms, weights):
            t.weight = float(w)
    return solve_milp(work, limits)


def solve_hierarchical(
    model: MilpModel,
    priority: list[str],
    degradation: Degradation | None = None,
    limits: SolverLimits | None = None,
) -> HierarchicalResult:
    """Optimize terms one by one, bounding each before the next stage.

    Terms whose stored weight is negative are reward terms and are maximized.
    Stage one reporting any infeasibility is the model's own; any later stage
    doing so would contradict the previous stage's solution and is a bug.
    """
    degradation = degradation or Degradation()
    if not priority:
        raise ArgumentError("hierarchical solving needs at least one term name")
    if len(set(priority)) != len(priority):
        raise ArgumentError("priority lists a term twice")
    by_name = {t.name: t for t in model.objective_terms}
    unknown = [name for name in priority if name not in by_name]
    if unknown:
        raise ArgumentError(f"no objective term named {unknown}")

    work = model.copy()
    stages: list[StageOutcome] = []
    last: MilpResult | None = None
    for idx, name in enumerate(priority):
        sense = "max" if by_name[name].weight < 0 else "min"
        stage_model = work.copy()
        for t in stage_model.objective_terms:
            if t.name == name:
                t.weight = -1.0 if sense == "max" else 1.0
            else:
                t.weight = 0.0
        res = solve_milp(stage_model, limits)
        if not res.has_solution:
            if idx == 0:
                return HierarchicalResult(result=res, stages=stages)
            raise InternalError(
                f"stage {idx + 1} ({name}) reported {res.status} although the "
                "previous stage produced a point satisfying every bound"
            )
        optimum = res.objective_terms[name]
        allowance = degradation.allowance(optimum) if idx < len(priority) - 1 else 0.0
        if idx < len(priority) - 1:
            coeffs = dict(by_name[name].coeffs)
            if sense == "min":
                work.add_constraint(f"lex_{idx}_{name}", coeffs, "<=", optimum + allowance)
            else:
                work.add_constraint(f"lex_{idx}_{name}", coeffs, ">=", optimum - allowance)
        stages.append(
            StageOutcome(
                term=name,
                sense=sense,
                optimum=optimum,
                allowance=allowance,
                nodes=res.nodes_explored,
                wall_time=res.wall_time,
            )
        )
        last = res

    # re-express the final point in terms of the original blended objective
    values = last.values
    final = MilpResult(
        status=last.status,
        values=values,
        objective_total=model.objective_value(values),
        objective_terms={t.name: model.term_value(t.name, values) for t in model.objective_terms},
        nodes_explored=sum(s.nodes for s in stages),
        wall_time=sum(s.wall_time for s in stages),
        best_bound=None,
        gap=None,
    )
    return HierarchicalResult(result=final, stages=stages)
