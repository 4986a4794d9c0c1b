"""Dataset-derived quantities: proximity weights and Gaussian plausibility stats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, EmptyDataError, SingularityError, ValidationError
from .scorecard import DataPoint, Scorecard, candidate_values

WEIGHT_METHODS = ("range", "mad")

# Base ridge is scaled by trace(cov)/p so it tracks the data's magnitude.
DEFAULT_RIDGE_SCALE = 1e-8
RIDGE_ESCALATIONS = 4


@dataclass(frozen=True)
class ProximityWeights:
    """Per-feature weights for the weighted-l1 proximity objective."""

    values: tuple[float, ...]
    method: str


@dataclass(frozen=True)
class GaussianStats:
    """Mean, covariance and the factor used by the l1 closeness objective.

    ``factor`` is lower triangular with factor^T factor equal to the inverse
    of (covariance + ridge * I), so closeness can be written as the l1 norm
    of factor @ (x - mean).
    """

    mean: np.ndarray
    covariance: np.ndarray
    factor: np.ndarray
    ridge: float

    def __post_init__(self):
        p = self.mean.shape[0]
        if self.covariance.shape != (p, p) or self.factor.shape != (p, p):
            raise ArgumentError("stats dimensions disagree")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-10, rtol=0.0):
            raise ArgumentError("covariance must be symmetric within 1e-10")

    def closeness(self, x: np.ndarray) -> float:
        """l1-Mahalanobis style distance of a point from the mean."""
        return float(np.abs(self.factor @ (np.asarray(x, dtype=float) - self.mean)).sum())


def load_rows(path: str) -> np.ndarray:
    """Read a comma-delimited sample file: header row, transform-space values."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise EmptyDataError(f"{path}: empty file")
        names = [h.strip() for h in header.split(",")]
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ValidationError(f"{path}:{lineno}: expected {len(names)} columns")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def align_rows(scorecard: Scorecard, path: str) -> np.ndarray:
    """Load a sample file and reorder its columns to the scorecard's features."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
    names = [h.strip() for h in header.split(",")]
    data = load_rows(path)
    want = list(scorecard.feature_names)
    missing = [n for n in want if n not in names]
    if missing:
        raise ValidationError(f"{path}: missing column(s) {missing}")
    cols = [names.index(n) for n in want]
    return data[:, cols]


def compute_weights(
    scorecard: Scorecard,
    point: DataPoint,
    method: str = "range",
    rows: np.ndarray | None = None,
) -> ProximityWeights:
    """Proximity weights for one query point.

    "range" uses the inverse spread of each feature's candidates plus the
    current value; "mad" uses the inverse median absolute deviation of sample
    rows.  A zero denominator falls back to weight 1.0 so a degenerate
    feature cannot poison the objective.
    """
    if method not in WEIGHT_METHODS:
        raise ArgumentError(f"unknown weight method {method!r}")
    p = len(scorecard.features)
    if method == "range":
        cands = candidate_values(scorecard, point)
        weights = []
        for x, cand in zip(point.values, cands):
            vals = [x] + [v for _, v in cand]
            span = max(vals) - min(vals)
            weights.append(1.0 / span if span > 0.0 else 1.0)
        return ProximityWeights(values=tuple(weights), method="range")

    if rows is None:
        raise EmptyDataError("mad weights need sample rows")
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EmptyDataError("mad weights need at least one sample row")
    if rows.shape[1] != p:
        raise ValidationError("sample rows do not match the scorecard's feature count")
    med = np.median(rows, axis=0)
    mad = np.median(np.abs(rows - med), axis=0)
    weights = tuple(1.0 / m if m > 0.0 else 1.0 for m in mad)
    return ProximityWeights(values=weights, method="mad")


def _factor_from_covariance(cov: np.ndarray, ridge: float | None) -> tuple[np.ndarray, float]:
    """Lower-triangular F with F^T F = inv(cov + ridge*I), escalating the ridge."""
    p = cov.shape[0]
    base = DEFAULT_RIDGE_SCALE * float(np.trace(cov)) / p
    if base <= 0.0:
        base = DEFAULT_RIDGE_SCALE
    r = base if ridge is None else float(ridge)
    if r < 0.0:
        raise ArgumentError("ridge must be nonnegative")
    for attempt in range(RIDGE_ESCALATIONS + 1):
        try:
            chol = np.linalg.cholesky(cov + r * np.eye(p))
        except np.linalg.LinAlgError:
            r = base if r == 0.0 else r * 10.0
            continue
        # inv(L L^T) = L^-T L^-1 and L^-1 is lower triangular.
        factor = np.linalg.inv(chol)
        return factor, r
    raise SingularityError(
        f"covariance is not positive definite after {RIDGE_ESCALATIONS} ridge escalations"
    )


def compute_gaussian_stats(rows: np.ndarray, ridge: float | None = None) -> GaussianStats:
    """Fit mean/covariance to sample rows and factor the regularized inverse."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EmptyDataError("gaussian stats need at least one sample row")
    n, p = rows.shape
    mean = rows.mean(axis=0)
    if n > 1:
        cov = np.cov(rows, rowvar=False).reshape(p, p)
    else:
        cov = np.zeros((p, p))
    cov = (cov + cov.T) / 2.0
    factor, used_ridge = _factor_from_covariance(cov, ridge)
    return GaussianStats(mean=mean, covariance=cov, factor=factor, ridge=used_ridge)


def gaussian_stats_from_moments(
    mean, covariance, ridge: float | None = 0.0
) -> GaussianStats:
    """Build stats from an explicit mean and covariance (test seam and API)."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (mean.shape[0], mean.shape[0]):
        raise ArgumentError("covariance shape does not match the mean")
    if not np.allclose(cov, cov.T, atol=1e-10, rtol=0.0):
        raise ArgumentError("covariance must be symmetric within 1e-10")
    factor, used_ridge = _factor_from_covariance(cov, ridge)
    return GaussianStats(mean=mean, covariance=cov, factor=factor, ridge=used_ridge)
