"""Best-bound branch and bound for models with binary variables.

Nodes are LP relaxations that differ from the root only in variable bounds,
so the tree shares one simplex state: activating a node applies the bound
delta and runs the dual loop.  Node selection is best bound with FIFO ties;
branching picks the most fractional binary, ties by lowest variable index.
Both rules are deterministic, so identical inputs replay identical searches.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .model import BINARY, MilpModel
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, BoundedSimplex, DeadlineReached

STATUS_OPTIMAL = "optimal"
STATUS_FEASIBLE = "feasible"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NO_SOLUTION = "time_limit_no_solution"


@dataclass(frozen=True)
class SolverLimits:
    """Resource and tolerance knobs; hitting a limit degrades the status."""

    time_limit: float = 30.0
    node_limit: int = 1_000_000
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    opt_gap: float = 1e-9


@dataclass
class LpSolution:
    status: str
    values: dict[str, float]
    objective: float | None


@dataclass
class MilpResult:
    status: str
    values: dict[str, float]
    objective_total: float | None
    objective_terms: dict[str, float]
    nodes_explored: int
    wall_time: float
    best_bound: float | None
    gap: float | None

    @property
    def has_solution(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_FEASIBLE)


def _compile(model: MilpModel, feas_tol: float):
    model.validate()
    n = len(model.variables)
    index = model.variable_index()
    c = np.zeros(n)
    for t in model.objective_terms:
        for name, coef in t.coeffs.items():
            c[index[name]] += t.weight * coef
    m = len(model.constraints)
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    for i, row in enumerate(model.constraints):
        for name, coef in row.coeffs.items():
            A[i, index[name]] += coef
        b[i] = row.rhs
        senses.append(row.sense)
    lower = np.array([v.lower for v in model.variables], dtype=float)
    upper = np.array([v.upper for v in model.variables], dtype=float)
    state = BoundedSimplex(A, b, senses, c, lower, upper, feas_tol=feas_tol)
    binary_cols = [i for i, v in enumerate(model.variables) if v.kind == BINARY]
    names = [v.name for v in model.variables]
    return state, names, binary_cols


def solve_lp(model: MilpModel, limits: SolverLimits | None = None) -> LpSolution:
    """Solve the continuous relaxation (integrality ignored)."""
    limits = limits or SolverLimits()
    state, names, _ = _compile(model, limits.feas_tol)
    state.set_deadline(time.perf_counter, time.perf_counter() + limits.time_limit)
    try:
        status = state.solve_from_scratch()
    except DeadlineReached:
        return LpSolution(status=STATUS_NO_SOLUTION, values={}, objective=None)
    if status == INFEASIBLE:
        return LpSolution(status=STATUS_INFEASIBLE, values={}, objective=None)
    if status == UNBOUNDED:
        return LpSolution(status=STATUS_UNBOUNDED, values={}, objective=None)
    vals = state.values()[: len(names)]
    values = {name: float(v) for name, v in zip(names, vals)}
    return LpSolution(status=STATUS_OPTIMAL, values=values, objective=state.objective())


def _result(model, status, values, nodes, t0, best_bound):
    objective = None
    terms: dict[str, float] = {}
    gap = None
    if values:
        objective = model.objective_value(values)
        terms = {t.name: model.term_value(t.name, values) for t in model.objective_terms}
        if best_bound is not None:
            gap = max(0.0, (objective - best_bound) / max(1.0, abs(objective)))
    return MilpResult(
        status=status,
        values=values,
        objective_total=objective,
        objective_terms=terms,
        nodes_explored=nodes,
        wall_time=time.perf_counter() - t0,
        best_bound=best_bound,
        gap=gap,
    )


def solve_milp(model: MilpModel, limits: SolverLimits | None = None) -> MilpResult:
    """Solve to proven optimality, or the best incumbent when a limit hits."""
    limits = limits or SolverLimits()
    t0 = time.perf_counter()
    state, names, binary_cols = _compile(model, limits.feas_tol)
    deadline = t0 + limits.time_limit
    state.set_deadline(time.perf_counter, deadline)
    n = len(names)
    bset = np.array(binary_cols, dtype=np.int64)

    def gap_slack(x: float) -> float:
        return limits.opt_gap * max(1.0, abs(x))

    hint_cols = []
    if model.branch_hint:
        index = model.variable_index()
        hint_cols = [index[name] for name in model.branch_hint]
    hset = np.array(hint_cols, dtype=np.int64) if hint_cols else bset

    incumbent: dict[str, float] = {}
    best_obj = math.inf
    nodes = 0
    limit_hit = False
    root_pending = True
    orig_lb = None
    orig_ub = None
    # Heap of unexplored subtrees keyed by (parent LP bound, push order).
    # A popped node is plunged: preferred children are solved in place, one
    # bound change apart so each dual restore is a handful of pivots, while
    # every rejected sibling goes back on the heap.  The expensive cross-tree
    # restore then happens once per plunge instead of once per node.
    heap: list = [(-math.inf, 0, {})]
    seq = -1
    current: dict[int, tuple[float, float]] = {}
    open_bound = None  # best bound among unexplored nodes at exit

    def offer_candidate(cand_vals) -> None:
        nonlocal incumbent, best_obj
        for col in binary_cols:
            cand_vals[col] = float(np.round(cand_vals[col]))
        candidate = {name: float(v) for name, v in zip(names, cand_vals)}
        if model.constraint_violations(candidate, tol=limits.feas_tol):
            return
        true_obj = model.objective_value(candidate)
        if true_obj < best_obj - 1e-12:
            incumbent = candidate
            best_obj = true_obj

    def pin_round(fixings, vals) -> None:
        """Pin every binary at its rounding and keep the point if it holds.

        Only worth trying when the relaxation is already near-integral.  A
        pure heuristic: whatever it finds, the caller still branches, because
        rounding one way must never prune integer points that round the
        other way.
        """
        nonlocal current
        trial = dict(fixings)
        current = trial
        for col in binary_cols:
            r = float(np.round(vals[col]))
            trial[col] = (r, r)
            state.set_bounds(col, r, r)
        try:
            if state.dual_restore() != OPTIMAL:
                return
        except NumericalError:
            return
        cand_vals = np.array(state.values()[:n])
        if bset.size and np.abs(cand_vals[bset] - np.round(cand_vals[bset])).max() > 1e-9:
            return
        offer_candidate(cand_vals)

    while heap:
        bound, _, fixings = heapq.heappop(heap)
        if incumbent and bound >= best_obj - gap_slack(best_obj):
            open_bound = bound
            break

        plunge_bound = bound
        aborted = False
        while True:
            if nodes >= limits.node_limit or time.perf_counter() > deadline:
                aborted = True
                break
            try:
                if root_pending:
                    status = state.solve_from_scratch()
                else:
                    for col in current:
                        if col not in fixings:
                            state.set_bounds(col, orig_lb[col], orig_ub[col])
                    for col, (lo, hi) in fixings.items():
                        if current.get(col) != (lo, hi):
                            state.set_bounds(col, lo, hi)
                    current = fixings
                    try:
                        status = state.dual_restore()
                    except NumericalError:
                        # One fresh factorization before giving up entirely.
                        status = state.solve_from_scratch()
            except DeadlineReached:
                aborted = True
                break
            if root_pending:
                root_pending = False
                orig_lb = state.lb.copy()
                orig_ub = state.ub.copy()
            nodes += 1

            if status == UNBOUNDED:
                return _result(model, STATUS_UNBOUNDED, {}, nodes, t0, None)
            if status == INFEASIBLE:
                break
            obj = state.objective()
            plunge_bound = obj
            if incumbent and obj >= best_obj - gap_slack(best_obj):
                break
            vals = state.values()[:n]

            frac = np.abs(vals[bset] - np.round(vals[bset])) if bset.size else np.zeros(0)
            if not bset.size or frac.max() <= 1e-12:
                # Truly integral: this node is solved exactly, subtree done.
                cand_vals = vals.copy()
                for col in binary_cols:
                    cand_vals[col] = float(np.round(cand_vals[col]))
                candidate = {name: float(v) for name, v in zip(names, cand_vals)}
                violations = model.constraint_violations(candidate, tol=limits.feas_tol)
                if violations:
                    raise NumericalError(
                        f"incumbent fails verification: {violations[0][0]} by {violations[0][1]:.3e}"
                    )
                true_obj = model.objective_value(candidate)
                if true_obj < best_obj - 1e-12:
                    incumbent = candidate
                    best_obj = true_obj
                break

            if frac.max() <= limits.int_tol:
                try:
                    pin_round(fixings, vals)
                except DeadlineReached:
                    aborted = True
                    break

            # Branch on a hinted binary while any is fractional; they
            # determine the implied ones, so resolving them first shrinks
            # the tree.  The plunge follows the LP's preferred rounding and
            # the sibling waits on the heap under this node's bound.
            hfrac = np.abs(vals[hset] - np.round(vals[hset]))
            pool = hset if hfrac.max() > 1e-12 else bset
            pick = int(pool[np.argmax(0.5 - np.abs(vals[pool] - 0.5))])
            child_zero = dict(fixings)
            child_zero[pick] = (0.0, 0.0)
            child_one = dict(fixings)
            child_one[pick] = (1.0, 1.0)
            preferred, other = (
                (child_one, child_zero) if vals[pick] >= 0.5 else (child_zero, child_one)
            )
            heapq.heappush(heap, (obj, seq, other))
            seq -= 1
            fixings = preferred

        if aborted:
            limit_hit = True
            frontier = [] if math.isinf(plunge_bound) else [plunge_bound]
            if heap and not math.isinf(heap[0][0]):
                frontier.append(heap[0][0])
            open_bound = min(frontier) if frontier else None
            break

    if incumbent:
        if limit_hit:
            bb = open_bound if open_bound is not None and not math.isinf(open_bound) else None
            return _result(model, STATUS_FEASIBLE, incumbent, nodes, t0, bb)
        bb = best_obj if open_bound is None else min(best_obj, open_bound)
        return _result(model, STATUS_OPTIMAL, incumbent, nodes, t0, bb)
    if limit_hit:
        return _result(model, STATUS_NO_SOLUTION, {}, nodes, t0, None)
    return _result(model, STATUS_INFEASIBLE, {}, nodes, t0, None)
