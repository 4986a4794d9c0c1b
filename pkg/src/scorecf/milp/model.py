"""Minimize-only mixed-integer linear model: variables, rows, named objective terms.

The model is a plain value object.  Solvers compile it to arrays; reports and
tests evaluate candidate assignments directly against the stored rows, so
feasibility checks never depend on solver internals.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

from ..errors import ArgumentError

CONTINUOUS = "continuous"
BINARY = "binary"

SENSES = ("<=", "=", ">=")


@dataclass
class Variable:
    name: str
    kind: str = CONTINUOUS
    lower: float = -math.inf
    upper: float = math.inf


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, float]
    sense: str
    rhs: float


@dataclass
class ObjectiveTerm:
    """A named linear expression entering the objective with a weight.

    The solver minimizes the weighted sum of all terms; reported term values
    are unweighted so they can be read as the raw quantities they measure.
    """

    name: str
    coeffs: dict[str, float]
    weight: float


@dataclass
class MilpModel:
    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective_terms: list[ObjectiveTerm] = field(default_factory=list)
    # Binaries worth branching on; the rest are implied by these (a solver
    # may ignore the hint, it never changes the feasible set).
    branch_hint: list[str] = field(default_factory=list)

    def add_variable(
        self,
        name: str,
        kind: str = CONTINUOUS,
        lower: float = -math.inf,
        upper: float = math.inf,
    ) -> str:
        if kind not in (CONTINUOUS, BINARY):
            raise ArgumentError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lower = max(0.0, lower)
            upper = min(1.0, upper)
        if lower > upper:
            raise ArgumentError(f"variable {name!r}: lower {lower} exceeds upper {upper}")
        self.variables.append(Variable(name=name, kind=kind, lower=lower, upper=upper))
        return name

    def add_constraint(self, name: str, coeffs: dict[str, float], sense: str, rhs: float) -> None:
        if sense not in SENSES:
            raise ArgumentError(f"unknown constraint sense {sense!r}")
        if not math.isfinite(rhs):
            raise ArgumentError(f"constraint {name!r}: right-hand side must be finite")
        self.constraints.append(Constraint(name=name, coeffs=dict(coeffs), sense=sense, rhs=rhs))

    def add_objective_term(self, name: str, coeffs: dict[str, float], weight: float) -> None:
        if any(t.name == name for t in self.objective_terms):
            raise ArgumentError(f"duplicate objective term {name!r}")
        self.objective_terms.append(ObjectiveTerm(name=name, coeffs=dict(coeffs), weight=weight))

    # -- introspection ---------------------------------------------------

    def variable_index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    def binary_names(self) -> list[str]:
        return [v.name for v in self.variables if v.kind == BINARY]

    def validate(self) -> None:
        """Reject structurally broken models before they reach a solver."""
        index = self.variable_index()
        if len(index) != len(self.variables):
            raise ArgumentError("duplicate variable name in model")
        for c in self.constraints:
            for name, coef in c.coeffs.items():
                if name not in index:
                    raise ArgumentError(f"constraint {c.name!r} references unknown variable {name!r}")
                if not math.isfinite(coef):
                    raise ArgumentError(f"constraint {c.name!r}: non-finite coefficient on {name!r}")
        for t in self.objective_terms:
            for name, coef in t.coeffs.items():
                if name not in index:
                    raise ArgumentError(f"objective term {t.name!r} references unknown variable {name!r}")
                if not math.isfinite(coef):
                    raise ArgumentError(f"objective term {t.name!r}: non-finite coefficient on {name!r}")
            if not math.isfinite(t.weight):
                raise ArgumentError(f"objective term {t.name!r}: non-finite weight")
        binaries = set(self.binary_names())
        for name in self.branch_hint:
            if name not in binaries:
                raise ArgumentError(f"branch hint names non-binary variable {name!r}")

    def copy(self) -> "MilpModel":
        return copy.deepcopy(self)

    # -- evaluation (independent of any solver) --------------------------

    def term_value(self, name: str, values: dict[str, float]) -> float:
        for t in self.objective_terms:
            if t.name == name:
                return sum(coef * values[v] for v, coef in t.coeffs.items())
        raise ArgumentError(f"unknown objective term {name!r}")

    def objective_value(self, values: dict[str, float]) -> float:
        return sum(
            t.weight * sum(coef * values[v] for v, coef in t.coeffs.items())
            for t in self.objective_terms
        )

    def constraint_violations(
        self, values: dict[str, float], tol: float = 1e-7
    ) -> list[tuple[str, float]]:
        """All constraint and bound violations beyond tol, worst first."""
        out = []
        for v in self.variables:
            x = values[v.name]
            err = max(v.lower - x, x - v.upper, 0.0)
            if err > tol:
                out.append((f"bound:{v.name}", err))
        for c in self.constraints:
            lhs = sum(coef * values[v] for v, coef in c.coeffs.items())
            if c.sense == "<=":
                err = lhs - c.rhs
            elif c.sense == ">=":
                err = c.rhs - lhs
            else:
                err = abs(lhs - c.rhs)
            if err > tol:
                out.append((c.name, err))
        out.sort(key=lambda kv: -kv[1])
        return out


def _lp_coeff(coef: float, name: str, first: bool) -> str:
    if coef < 0:
        sign = "- "
    elif first:
        sign = ""
    else:
        sign = "+ "
    return f"{sign}{abs(coef):.12g} {name}"


def write_lp(model: MilpModel) -> str:
    """Render the model in LP text format for external solvers and diffs."""
    lines = [f"\\ {model.name}", "Minimize"]
    blended: dict[str, float] = {}
    for t in model.objective_terms:
        for name, coef in t.coeffs.items():
            blended[name] = blended.get(name, 0.0) + t.weight * coef
    parts = []
    first = True
    for v in model.variables:
        coef = blended.get(v.name, 0.0)
        if coef != 0.0:
            parts.append(_lp_coeff(coef, v.name, first))
            first = False
    lines.append(" obj: " + (" ".join(parts) if parts else "0 " + model.variables[0].name))
    lines.append("Subject To")
    order = model.variable_index()
    for c in model.constraints:
        parts = []
        first = True
        for name in sorted(c.coeffs, key=order.__getitem__):
            coef = c.coeffs[name]
            if coef == 0.0:
                continue
            parts.append(_lp_coeff(coef, name, first))
            first = False
        if not parts:
            parts = ["0 " + model.variables[0].name]
        op = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        lines.append(f" {c.name}: {' '.join(parts)} {op} {c.rhs:.12g}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY and v.lower == 0.0 and v.upper == 1.0:
            continue
        lo = "-inf" if math.isinf(v.lower) else f"{v.lower:.12g}"
        hi = "+inf" if math.isinf(v.upper) else f"{v.upper:.12g}"
        if math.isinf(v.lower) and math.isinf(v.upper):
            lines.append(f" {v.name} free")
        else:
            lines.append(f" {lo} <= {v.name} <= {hi}")
    binaries = model.binary_names()
    if binaries:
        lines.append("Binaries")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"
