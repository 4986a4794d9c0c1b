"""Seeded synthetic instances and the benchmark grid.

The same generator feeds the bench subcommand and the test suite: bin cuts
are small integers and transform values sit on a coarse eighth grid, which
keeps instances numerically tame without making them trivial.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .report import run_query
from .scorecard import DataPoint, Scorecard, decision_function, parse_scorecard

BENCH_COLUMNS = (
    "K",
    "theta",
    "approach",
    "status",
    "proximity",
    "closeness",
    "d_f",
    "d_fv",
    "outcome",
    "time",
    "stages",
)


def random_scorecard(
    rng: np.random.Generator,
    p: int = 5,
    max_bins: int = 3,
    target_type: str = "binary",
    actionable_frac: float = 1.0,
) -> Scorecard:
    """Draw a scorecard with contiguous numeric bins and grid-valued weights."""
    features = []
    for i in range(p):
        n_bins = int(rng.integers(2, max_bins + 1))
        cuts = np.cumsum(rng.integers(1, 6, size=n_bins - 1)).tolist()
        bins = []
        for j in range(n_bins):
            b: dict = {
                "label": f"f{i}_b{j}",
                "transform_value": float(rng.integers(-8, 9)) / 8.0,
            }
            if j > 0:
                b["lower"] = float(cuts[j - 1])
            if j < n_bins - 1:
                b["upper"] = float(cuts[j])
            bins.append(b)
        coef = float(rng.integers(1, 9)) / 4.0 * (1.0 if rng.random() < 0.5 else -1.0)
        features.append(
            {
                "name": f"f{i}",
                "coefficient": coef,
                "actionable": bool(rng.random() < actionable_frac),
                "bins": bins,
            }
        )
    doc = {
        "version": "1",
        "target_type": target_type,
        "intercept": float(rng.integers(-4, 5)) / 4.0,
        "features": features,
    }
    return parse_scorecard(doc)


def random_point(rng: np.random.Generator, scorecard: Scorecard) -> dict[str, float]:
    """A query point sitting on one bin's transform value per feature."""
    return {
        f.name: float(f.bins[int(rng.integers(0, len(f.bins)))].transform_value)
        for f in scorecard.features
    }


def sample_rows(
    rng: np.random.Generator,
    scorecard: Scorecard,
    n: int = 200,
    jitter: float = 0.05,
) -> np.ndarray:
    """Synthetic transform-space sample: bin values plus noise, full rank."""
    cols = []
    for f in scorecard.features:
        values = np.array([b.transform_value for b in f.bins])
        picks = values[rng.integers(0, len(values), size=n)]
        cols.append(picks + rng.normal(0.0, jitter, size=n))
    return np.column_stack(cols)


def flip_outcome(scorecard: Scorecard, point: dict[str, float]) -> int:
    """The binary class the point does not currently have."""
    score = decision_function(scorecard, DataPoint.from_mapping(scorecard, point))
    return 1 if score < 0.0 else 0


def _cell_query(point, target, k, theta, approach):
    doc = {
        "input": dict(point),
        "outcome": {"type": "binary", "value": target},
        "theta": theta,
        "lambdas": [1.0, 0.5, 0.0],
        "diversity": {"k": k, "hard": ["features"], "soft": {"lambda3": 0.0, "lambda4": 0.0}},
    }
    if approach == "hierarchical":
        doc["strategy"] = {
            "kind": "hierarchical",
            "priority": ["proximity", "closeness"],
            "degradation": {"relative": 0.1},
        }
    return doc


def bench_rows(
    seed: int,
    ks: tuple[int, ...] = (3, 4),
    thetas: tuple[int, ...] = (2, 3),
    approaches: tuple[str, ...] = ("weighted",),
    p: int = 5,
    max_bins: int = 3,
    time_limit: float = 30.0,
) -> list[dict]:
    """One grid row per (K, theta, approach) cell on a single seeded instance."""
    rng = np.random.default_rng(seed)
    scorecard = random_scorecard(rng, p=p, max_bins=max_bins)
    point = random_point(rng, scorecard)
    rows_data = sample_rows(rng, scorecard)
    target = flip_outcome(scorecard, point)

    out = []
    for k in ks:
        for theta in thetas:
            for approach in approaches:
                doc = _cell_query(point, target, k, theta, approach)
                report = run_query(scorecard, doc, rows=rows_data, time_limit=time_limit)
                metrics = report["metrics"]
                outcome = metrics["outcome"]
                out.append(
                    {
                        "K": k,
                        "theta": theta,
                        "approach": approach,
                        "status": report["status"],
                        "proximity": metrics["proximity"],
                        "closeness": metrics["closeness"],
                        "d_f": metrics["d_f"],
                        "d_fv": metrics["d_fv"],
                        "outcome": None
                        if outcome is None
                        else f"[{outcome['min']:.6g}, {outcome['max']:.6g}]",
                        "time": report["timing"]["solve"],
                        "stages": ";".join(
                            f"{s['term']}={s['optimum']:.6g}"
                            for s in report.get("stages", [])
                        ),
                    }
                )
    return out


def _cell_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_bench(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in rows:
        writer.writerow([_cell_text(row[c]) for c in BENCH_COLUMNS])
    return buf.getvalue()
