"""Accuracy metrics, the seen/unseen harmonic mean, and multi-split reports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

_BOUNDED_HINTS = ("acc", "harmonic")


def mean_class_accuracy(predicted, truth, classes) -> float:
    """Mean over classes of the within-class fraction correct.

    Classes with no rows in truth are excluded from the mean, so the value
    is invariant to class imbalance.
    """
    p = np.asarray(predicted, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ValueError("predicted and truth must be equal-length non-empty vectors")
    class_list = [int(c) for c in classes]
    if not class_list:
        raise ValueError("class list must be non-empty")
    if not set(np.unique(t)).issubset(class_list):
        raise ValueError("truth contains labels outside the class list")
    accs = []
    for c in class_list:
        mask = t == c
        if mask.any():
            accs.append(float((p[mask] == c).mean()))
    return float(np.mean(accs))


def instance_accuracy(predicted, truth) -> float:
    """Plain fraction of rows predicted correctly."""
    p = np.asarray(predicted, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("predicted and truth must be equal-length non-empty vectors")
    return float((p == t).mean())


def harmonic_mean_gzsl(seen_acc: float, unseen_acc: float) -> float:
    """2su/(s+u), defined as 0 when both accuracies are 0."""
    for name, v in (("seen_acc", seen_acc), ("unseen_acc", unseen_acc)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    total = seen_acc + unseen_acc
    if total == 0.0:
        return 0.0
    return 2.0 * seen_acc * unseen_acc / total


@dataclass(frozen=True)
class SplitRecord:
    """Metrics for one split. Accuracy-like metrics must lie in [0, 1] and
    harmonic_mean may appear only alongside both seen_acc and unseen_acc."""

    split_id: int
    metrics: Mapping[str, float]
    em_iterations: int | None = None

    def __post_init__(self) -> None:
        metrics = {str(k): float(v) for k, v in dict(self.metrics).items()}
        if not metrics:
            raise ValueError("a split record needs at least one metric")
        for key, value in metrics.items():
            if not np.isfinite(value):
                raise ValueError(f"metric {key} is not finite")
            if any(h in key for h in _BOUNDED_HINTS) and not 0.0 <= value <= 1.0:
                raise ValueError(f"metric {key}={value} outside [0, 1]")
        has_h = "harmonic_mean" in metrics
        has_both = "seen_acc" in metrics and "unseen_acc" in metrics
        if has_h != has_both:
            raise ValueError("harmonic_mean must appear iff seen_acc and unseen_acc do")
        if self.em_iterations is not None and self.em_iterations < 0:
            raise ValueError("em_iterations must be nonnegative")
        object.__setattr__(self, "metrics", metrics)


@dataclass(frozen=True)
class ExperimentReport:
    """Per-split metrics plus mean/std aggregates and the resolved config."""

    per_split: tuple[SplitRecord, ...]
    aggregate: Mapping[str, Mapping[str, float]]
    config_echo: Mapping
    seed: int


def _aggregate(records: Sequence[SplitRecord]) -> dict[str, dict[str, float]]:
    keys = set(records[0].metrics)
    for rec in records[1:]:
        if set(rec.metrics) != keys:
            raise ValueError(
                f"inconsistent metric sets across splits: {sorted(keys)} vs "
                f"{sorted(rec.metrics)}")
    out = {}
    for key in sorted(keys):
        values = np.asarray([rec.metrics[key] for rec in records], dtype=np.float64)
        std = 0.0 if values.size == 1 else float(np.std(values, ddof=1))
        out[key] = {"mean": float(values.mean()), "std": std}
    return out


def make_report(records: Sequence[SplitRecord], config_echo: Mapping, seed: int) -> ExperimentReport:
    records = tuple(records)
    if not records:
        raise ValueError("need at least one split record")
    ids = [r.split_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate split ids: {ids}")
    return ExperimentReport(records, _aggregate(records), dict(config_echo), int(seed))


def aggregate_reports(reports: Sequence[ExperimentReport]) -> ExperimentReport:
    """Merge single- or multi-split reports into one, recomputing aggregates.

    All inputs must agree on their resolved configuration; the merged report
    keeps the first report's seed.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    first_echo = dict(reports[0].config_echo)
    for rep in reports[1:]:
        if dict(rep.config_echo) != first_echo:
            raise ValueError("reports were produced under different configurations")
    records = [rec for rep in reports for rec in rep.per_split]
    return make_report(records, first_echo, reports[0].seed)


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "per_split": [
            {
                "split_id": rec.split_id,
                "metrics": {k: rec.metrics[k] for k in sorted(rec.metrics)},
                "em_iterations": rec.em_iterations,
            }
            for rec in report.per_split
        ],
        "aggregate": {k: dict(v) for k, v in sorted(report.aggregate.items())},
        "config_echo": report.config_echo,
        "seed": report.seed,
    }


def report_to_json(report: ExperimentReport) -> str:
    """Serialize with sorted keys so identical runs emit identical bytes."""
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
