"""Binned linear scorecard model: document parsing, scoring, candidate sets.

A scorecard is an intercept plus one coefficient per feature, where each
feature's value is a transform-space number attached to the bin an applicant
falls into.  Binary scorecards map the score through a logistic to an event
probability; continuous scorecards read the score directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SchemaError, TargetTypeError, ValidationError

SCHEMA_VERSION = "1"

# Transform values this close to the current value are not change candidates.
CANDIDATE_EXCLUSION_TOL = 1e-12

TARGET_TYPES = ("binary", "continuous")


@dataclass(frozen=True)
class Bin:
    """One bin of a feature: an interval or a category set plus its transform value.

    Numeric bins are half-open intervals [lower, upper); missing endpoints are
    stored as -inf/+inf.  Categorical bins carry a tuple of category names and
    have lower/upper set to None.  ``points`` is an optional display field
    copied verbatim from the source document; it plays no role in scoring or
    optimization.
    """

    label: str
    transform_value: float
    lower: float | None = None
    upper: float | None = None
    categories: tuple[str, ...] | None = None
    points: float | None = None

    @property
    def is_categorical(self) -> bool:
        return self.categories is not None

    def contains_raw(self, value) -> bool:
        """Whether a raw (pre-transform) value falls into this bin."""
        if self.is_categorical:
            return value in self.categories
        return self.lower <= value < self.upper

    def interval_text(self) -> str:
        """Human display of the bin extent, e.g. "[97.50, inf)" or "Masters"."""
        if self.is_categorical:
            if len(self.categories) == 1:
                return self.categories[0]
            return "[" + ", ".join(self.categories) + "]"

        def fmt(v: float) -> str:
            if math.isinf(v):
                return "-inf" if v < 0 else "inf"
            return f"{v:.2f}"

        return f"[{fmt(self.lower)}, {fmt(self.upper)})"


@dataclass(frozen=True)
class Feature:
    """A named scorecard feature: coefficient, actionability flag and bins."""

    name: str
    coefficient: float
    actionable: bool
    bins: tuple[Bin, ...]

    def bin_points(self, index: int) -> float:
        """Display points for a bin: verbatim when supplied, else derived."""
        b = self.bins[index]
        if b.points is not None:
            return b.points
        return self.coefficient * b.transform_value

    def bin_for_raw(self, value) -> int:
        """Index of the bin containing a raw value."""
        for j, b in enumerate(self.bins):
            if b.contains_raw(value):
                return j
        raise ValidationError(f"feature {self.name!r}: no bin contains {value!r}")


@dataclass(frozen=True)
class Scorecard:
    """An immutable binned linear model."""

    target_type: str
    intercept: float
    features: tuple[Feature, ...]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature_index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise ValidationError(f"unknown feature {name!r}")


@dataclass(frozen=True)
class DataPoint:
    """Transform-space values for every scorecard feature, in feature order."""

    values: tuple[float, ...]

    @classmethod
    def from_mapping(cls, scorecard: Scorecard, mapping) -> "DataPoint":
        """Build a point from a {feature name: value} mapping.

        Every scorecard feature must be present and no extra names are
        allowed, so a query cannot silently address a missing feature.
        """
        names = set(scorecard.feature_names)
        extra = set(mapping) - names
        if extra:
            raise ValidationError(f"unknown feature(s) in input: {sorted(extra)}")
        missing = names - set(mapping)
        if missing:
            raise ValidationError(f"input is missing feature(s): {sorted(missing)}")
        vals = []
        for f in scorecard.features:
            v = mapping[f.name]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValidationError(f"feature {f.name!r}: input value must be a finite number")
            vals.append(float(v))
        return cls(tuple(vals))


def _require(cond: bool, message: str, exc=SchemaError) -> None:
    if not cond:
        raise exc(message)


def _as_finite_float(value, what: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(f"{what} must be a number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise SchemaError(f"{what} must be finite")
    return v


def _parse_bin(raw, feature_name: str, position: int) -> Bin:
    where = f"feature {feature_name!r} bin #{position}"
    _require(isinstance(raw, dict), f"{where}: bin must be an object")
    _require("label" in raw, f"{where}: missing 'label'")
    label = raw["label"]
    _require(isinstance(label, str) and label != "", f"{where}: label must be a non-empty string")
    where = f"feature {feature_name!r} bin {label!r}"
    _require("transform_value" in raw, f"{where}: missing 'transform_value'")
    tv = _as_finite_float(raw["transform_value"], f"{where}: transform_value")

    has_interval = raw.get("lower") is not None or raw.get("upper") is not None
    has_categories = raw.get("categories") is not None
    _require(
        not (has_interval and has_categories),
        f"{where}: a bin is either an interval or a category set, not both",
    )

    points = None
    if raw.get("points") is not None:
        points = _as_finite_float(raw["points"], f"{where}: points")

    unknown = set(raw) - {"label", "lower", "upper", "categories", "transform_value", "points"}
    _require(not unknown, f"{where}: unknown key(s) {sorted(unknown)}")

    if has_categories:
        cats = raw["categories"]
        _require(isinstance(cats, list), f"{where}: categories must be a list")
        _require(len(cats) > 0, f"{where}: empty category list", ValidationError)
        for c in cats:
            _require(isinstance(c, str), f"{where}: categories must be strings")
        if len(set(cats)) != len(cats):
            raise ValidationError(f"{where}: duplicate category within the bin")
        return Bin(label=label, transform_value=tv, categories=tuple(cats), points=points)

    lower = -math.inf if raw.get("lower") is None else _as_finite_float(raw["lower"], f"{where}: lower")
    upper = math.inf if raw.get("upper") is None else _as_finite_float(raw["upper"], f"{where}: upper")
    if not lower < upper:
        raise ValidationError(f"{where}: empty interval [{lower}, {upper})")
    return Bin(label=label, transform_value=tv, lower=lower, upper=upper, points=points)


def _validate_feature_bins(feature: Feature) -> None:
    if not feature.bins:
        raise ValidationError(f"feature {feature.name!r}: empty bin list")
    numeric = [(b.lower, b.upper, b.label) for b in feature.bins if not b.is_categorical]
    numeric.sort()
    for (lo1, up1, lab1), (lo2, up2, lab2) in zip(numeric, numeric[1:]):
        if lo2 < up1:
            raise ValidationError(
                f"feature {feature.name!r}: bins {lab1!r} and {lab2!r} overlap"
            )
    seen: dict[str, str] = {}
    for b in feature.bins:
        if not b.is_categorical:
            continue
        for c in b.categories:
            if c in seen:
                raise ValidationError(
                    f"feature {feature.name!r}: category {c!r} appears in bins "
                    f"{seen[c]!r} and {b.label!r}"
                )
            seen[c] = b.label


def parse_scorecard(doc) -> Scorecard:
    """Parse and validate a scorecard document (already-decoded JSON)."""
    _require(isinstance(doc, dict), "scorecard document must be an object")
    _require(doc.get("version") == SCHEMA_VERSION, f"unsupported scorecard version {doc.get('version')!r}")
    _require("target_type" in doc, "missing 'target_type'")
    target_type = doc["target_type"]
    _require(
        target_type in TARGET_TYPES,
        f"target_type must be one of {TARGET_TYPES}, got {target_type!r}",
    )
    _require("intercept" in doc, "missing 'intercept'")
    intercept = _as_finite_float(doc["intercept"], "intercept")
    _require("features" in doc, "missing 'features'")
    raw_features = doc["features"]
    _require(isinstance(raw_features, list), "'features' must be a list")
    _require(len(raw_features) > 0, "scorecard has no features", ValidationError)

    unknown = set(doc) - {"version", "target_type", "intercept", "features"}
    _require(not unknown, f"unknown top-level key(s) {sorted(unknown)}")

    features = []
    names_seen = set()
    for pos, rf in enumerate(raw_features):
        _require(isinstance(rf, dict), f"feature #{pos} must be an object")
        _require("name" in rf, f"feature #{pos}: missing 'name'")
        name = rf["name"]
        _require(isinstance(name, str) and name != "", f"feature #{pos}: name must be a non-empty string")
        if name in names_seen:
            raise ValidationError(f"duplicate feature name {name!r}")
        names_seen.add(name)
        _require("coefficient" in rf, f"feature {name!r}: missing 'coefficient'")
        coefficient = _as_finite_float(rf["coefficient"], f"feature {name!r}: coefficient")
        actionable = rf.get("actionable", True)
        _require(isinstance(actionable, bool), f"feature {name!r}: actionable must be a boolean")
        _require("bins" in rf, f"feature {name!r}: missing 'bins'")
        raw_bins = rf["bins"]
        _require(isinstance(raw_bins, list), f"feature {name!r}: bins must be a list")
        unknown = set(rf) - {"name", "coefficient", "actionable", "bins"}
        _require(not unknown, f"feature {name!r}: unknown key(s) {sorted(unknown)}")
        bins = tuple(_parse_bin(rb, name, j) for j, rb in enumerate(raw_bins))
        feature = Feature(name=name, coefficient=coefficient, actionable=actionable, bins=bins)
        _validate_feature_bins(feature)
        features.append(feature)

    return Scorecard(target_type=target_type, intercept=intercept, features=tuple(features))


def serialize_scorecard(scorecard: Scorecard) -> dict:
    """Canonical document for a scorecard; parse(serialize(sc)) == sc."""
    features = []
    for f in scorecard.features:
        bins = []
        for b in f.bins:
            rb: dict = {"label": b.label}
            if b.is_categorical:
                rb["categories"] = list(b.categories)
            else:
                if not math.isinf(b.lower):
                    rb["lower"] = b.lower
                if not math.isinf(b.upper):
                    rb["upper"] = b.upper
            rb["transform_value"] = b.transform_value
            if b.points is not None:
                rb["points"] = b.points
            bins.append(rb)
        features.append(
            {
                "name": f.name,
                "coefficient": f.coefficient,
                "actionable": f.actionable,
                "bins": bins,
            }
        )
    return {
        "version": SCHEMA_VERSION,
        "target_type": scorecard.target_type,
        "intercept": scorecard.intercept,
        "features": features,
    }


def decision_function(scorecard: Scorecard, point: DataPoint) -> float:
    """Score of a transform-space point: intercept plus the weighted sum."""
    if len(point.values) != len(scorecard.features):
        raise ValidationError("point length does not match scorecard")
    total = scorecard.intercept
    for f, v in zip(scorecard.features, point.values):
        total += f.coefficient * v
    return total


def logistic(score: float) -> float:
    """Overflow-safe standard logistic."""
    if score >= 0:
        return 1.0 / (1.0 + math.exp(-score))
    e = math.exp(score)
    return e / (1.0 + e)


def predict_probability(scorecard: Scorecard, point: DataPoint) -> float:
    """Event probability of a point under a binary scorecard."""
    if scorecard.target_type != "binary":
        raise TargetTypeError("probabilities are defined for binary scorecards only")
    return logistic(decision_function(scorecard, point))


def candidate_values(scorecard: Scorecard, point: DataPoint) -> list[list[tuple[int, float]]]:
    """Per-feature change candidates as (bin index, transform value) pairs.

    The current value never appears as a candidate, so "no change" is encoded
    exclusively by selecting nothing.
    """
    out = []
    for f, x in zip(scorecard.features, point.values):
        cands = [
            (j, b.transform_value)
            for j, b in enumerate(f.bins)
            if abs(b.transform_value - x) > CANDIDATE_EXCLUSION_TOL
        ]
        out.append(cands)
    return out


def score_bounds(scorecard: Scorecard, point: DataPoint) -> tuple[float, float]:
    """Tight reachable-score interval over all single-bin-per-feature choices.

    Minimizes/maximizes each coefficient-times-value contribution over the
    candidates plus the current value, which stays correct for negative
    coefficients.
    """
    cands = candidate_values(scorecard, point)
    lo = scorecard.intercept
    hi = scorecard.intercept
    for f, x, cand in zip(scorecard.features, point.values, cands):
        contributions = [f.coefficient * x] + [f.coefficient * v for _, v in cand]
        lo += min(contributions)
        hi += max(contributions)
    return lo, hi
