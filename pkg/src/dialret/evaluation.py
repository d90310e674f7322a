"""Ranking metrics and per-round reports.

R@k is the percentage of targets whose ground-truth rank is <= k. MedianR
is the lower median (always an attained rank); MeanR the arithmetic mean.
Values are kept at full precision internally; CSV export fixes 4 decimals,
display rounds to 1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from dialret.dialog import ExperimentResult, Policy, run_experiment
from dialret.errors import DialretError


@dataclass(frozen=True)
class MetricsRow:
    round: int
    r1: float
    r5: float
    r10: float
    median_rank: float
    mean_rank: float

    def as_obj(self) -> dict:
        return {
            "round": self.round,
            "R1": self.r1,
            "R5": self.r5,
            "R10": self.r10,
            "MedianR": self.median_rank,
            "MeanR": self.mean_rank,
        }


@dataclass
class MetricsReport:
    per_round: list[MetricsRow]
    config: dict

    def row(self, round_t: int) -> MetricsRow:
        return self.per_round[round_t]

    def r1_curve(self) -> list[float]:
        return [row.r1 for row in self.per_round]


def compute_metrics(ranks: list[int], round_t: int = 0) -> MetricsRow:
    if not ranks:
        raise DialretError("compute_metrics requires a non-empty rank list")
    if any(r < 1 for r in ranks):
        raise DialretError("ranks must be >= 1")
    n = len(ranks)
    ordered = sorted(ranks)
    return MetricsRow(
        round=round_t,
        r1=100.0 * sum(1 for r in ranks if r <= 1) / n,
        r5=100.0 * sum(1 for r in ranks if r <= 5) / n,
        r10=100.0 * sum(1 for r in ranks if r <= 10) / n,
        median_rank=float(ordered[(n - 1) // 2]),  # lower median
        mean_rank=sum(ranks) / n,
    )


def per_round_report(experiment: ExperimentResult, config: dict | None = None) -> MetricsReport:
    lengths = {len(ranks) for ranks in experiment.ranks_per_round}
    if len(lengths) > 1:
        raise DialretError(f"ragged rank lists across rounds: {sorted(lengths)}")
    rows = [
        compute_metrics(ranks, round_t=t)
        for t, ranks in enumerate(experiment.ranks_per_round)
    ]
    return MetricsReport(rows, config=dict(config or {}))


def compare_policies(corpus, policies, M, encoder, index) -> dict[str, MetricsReport]:
    """Aligned per-round reports for several policies over shared components."""
    table: dict[str, MetricsReport] = {}
    for policy in policies:
        experiment = run_experiment(corpus, policy, M, encoder, index)
        table[policy.label()] = per_round_report(
            experiment,
            config={"policy": policy.label(), "rounds": M,
                    "skipped": experiment.skipped_ids},
        )
    return table


def export_report(report: MetricsReport, path, format: str = "json") -> None:
    if format == "json":
        obj = {
            "config": report.config,
            "per_round": [row.as_obj() for row in report.per_round],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "R1", "R5", "R10", "MedianR", "MeanR"])
            for row in report.per_round:
                writer.writerow([
                    row.round,
                    f"{row.r1:.4f}",
                    f"{row.r5:.4f}",
                    f"{row.r10:.4f}",
                    f"{row.median_rank:.4f}",
                    f"{row.mean_rank:.4f}",
                ])
    else:
        raise DialretError(f"unknown report format {format!r}")


def load_report(path) -> MetricsReport:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    rows = [
        MetricsRow(
            round=int(r["round"]),
            r1=float(r["R1"]),
            r5=float(r["R5"]),
            r10=float(r["R10"]),
            median_rank=float(r["MedianR"]),
            mean_rank=float(r["MeanR"]),
        )
        for r in obj["per_round"]
    ]
    return MetricsReport(rows, config=obj.get("config", {}))


def curve_obj(report: MetricsReport) -> dict:
    """Chart-ready shape consumed by the web UI and external plotting."""
    return {
        "rounds": [row.round for row in report.per_round],
        "R1": [row.r1 for row in report.per_round],
        "R5": [row.r5 for row in report.per_round],
        "R10": [row.r10 for row in report.per_round],
        "MedianR": [row.median_rank for row in report.per_round],
        "MeanR": [row.mean_rank for row in report.per_round],
        "config": report.config,
    }
