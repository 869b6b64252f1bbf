"""Session aggregation, overall quality, and report serialization."""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field

from .model import QoeWeights, SessionMetrics, VideoMetrics

CSV_HEADER = (
    "policy",
    "thru_trace",
    "user_trace",
    "waste_s",
    "startup_s",
    "rebuffer_s",
    "oq",
    "waste_mbit",
)

REPORT_METRICS = ("waste_s", "startup_s", "rebuffer_s")


def overall_quality(per_video: tuple[VideoMetrics, ...], weights: QoeWeights) -> float:
    """Single session score: bitrate term minus the three penalty terms.

    The bitrate term is normalized by the highest bitrate in the playlist so
    every term is in seconds.
    """
    max_bitrate = max(v.bitrate_kbps for v in per_video)
    bitrate_term = sum(v.watched_s * v.bitrate_kbps for v in per_video) / max_bitrate
    return (
        weights.bitrate * bitrate_term
        - weights.rebuffer * sum(v.rebuffer_s for v in per_video)
        - weights.startup * sum(v.startup_delay_s for v in per_video)
        - weights.waste * sum(v.waste_s for v in per_video)
    )


def aggregate(per_video: tuple[VideoMetrics, ...], weights: QoeWeights) -> SessionMetrics:
    """Fold per-video records into session totals plus the overall quality."""
    return SessionMetrics(
        per_video=per_video,
        watched_s=sum(v.watched_s for v in per_video),
        waste_s=sum(v.waste_s for v in per_video),
        startup_delay_s=sum(v.startup_delay_s for v in per_video),
        rebuffer_s=sum(v.rebuffer_s for v in per_video),
        residual_s=sum(v.residual_s for v in per_video),
        downloaded_s=sum(v.downloaded_s for v in per_video),
        wasted_kbit=sum(v.wasted_kbit for v in per_video),
        overall_quality=overall_quality(per_video, weights),
    )


def relative_reduction(proposed: float, baseline: float) -> float | None:
    """Percent reduction of `proposed` relative to `baseline`.

    None when the baseline is zero (reduction undefined); reported as null in
    JSON and an empty cell in CSV.
    """
    if baseline == 0:
        return None
    return 100.0 * (baseline - proposed) / baseline


@dataclass(frozen=True)
class RunRecord:
    """Totals of a single session (one repeat of one cell)."""

    seed: int
    waste_s: float
    startup_s: float
    rebuffer_s: float
    oq: float
    waste_mbit: float
    watched_s: float


@dataclass(frozen=True)
class CellResult:
    """One (policy, throughput trace, user trace) cell, averaged over repeats."""

    policy: str
    thru_trace: str
    user_trace: str
    waste_s: float
    startup_s: float
    rebuffer_s: float
    oq: float
    waste_mbit: float
    runs: tuple[RunRecord, ...] = ()


@dataclass(frozen=True)
class ComparisonReport:
    """Full experiment outcome: per-cell means, reductions, and provenance."""

    cells: tuple[CellResult, ...]
    # {baseline: {thru: {user: {metric: percent | None}}}}
    reductions: dict
    meta: dict = field(default_factory=dict)

    def cell(self, policy: str, thru_trace: str, user_trace: str) -> CellResult:
        for c in self.cells:
            if (c.policy, c.thru_trace, c.user_trace) == (policy, thru_trace, user_trace):
                return c
        raise KeyError((policy, thru_trace, user_trace))


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return repr(value)


def report_to_csv(report: ComparisonReport) -> str:
    """Long-format table, one row per cell, exact round-trip float text."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for c in report.cells:
        writer.writerow(
            [
                c.policy,
                c.thru_trace,
                c.user_trace,
                _fmt(c.waste_s),
                _fmt(c.startup_s),
                _fmt(c.rebuffer_s),
                _fmt(c.oq),
                _fmt(c.waste_mbit),
            ]
        )
    return out.getvalue()


def pivot_csv(report: ComparisonReport, metric: str) -> str:
    """One metric as a policies x traces table (columns are thru/user pairs)."""
    if metric not in REPORT_METRICS + ("oq", "waste_mbit"):
        raise ValueError(f"unknown metric {metric!r}")
    columns: list[tuple[str, str]] = []
    policies: list[str] = []
    for c in report.cells:
        key = (c.thru_trace, c.user_trace)
        if key not in columns:
            columns.append(key)
        if c.policy not in policies:
            policies.append(c.policy)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["policy"] + [f"{t}/{u}" for t, u in columns])
    for policy in policies:
        row: list[str] = [policy]
        for thru, user in columns:
            row.append(_fmt(getattr(report.cell(policy, thru, user), metric)))
        writer.writerow(row)
    return out.getvalue()


def report_to_json(report: ComparisonReport) -> dict:
    """Nested {policy -> {thru trace -> {user trace -> metrics}}} plus meta."""
    cells: dict = {}
    for c in report.cells:
        cells.setdefault(c.policy, {}).setdefault(c.thru_trace, {})[c.user_trace] = {
            "waste_s": c.waste_s,
            "startup_s": c.startup_s,
            "rebuffer_s": c.rebuffer_s,
            "oq": c.oq,
            "waste_mbit": c.waste_mbit,
            "runs": [
                {
                    "seed": r.seed,
                    "waste_s": r.waste_s,
                    "startup_s": r.startup_s,
                    "rebuffer_s": r.rebuffer_s,
                    "oq": r.oq,
                    "waste_mbit": r.waste_mbit,
                    "watched_s": r.watched_s,
                }
                for r in c.runs
            ],
        }
    return {"cells": cells, "reductions": report.reductions, "meta": report.meta}


def report_from_json(data: dict) -> ComparisonReport:
    """Inverse of report_to_json. Lets HTTP clients rebuild a report object
    (and render the same CSV tables) from a service response."""
    cells = []
    for policy, per_thr in data["cells"].items():
        for thru, per_user in per_thr.items():
            for user, m in per_user.items():
                runs = tuple(
                    RunRecord(
                        seed=r["seed"],
                        waste_s=r["waste_s"],
                        startup_s=r["startup_s"],
                        rebuffer_s=r["rebuffer_s"],
                        oq=r["oq"],
                        waste_mbit=r["waste_mbit"],
                        watched_s=r["watched_s"],
                    )
                    for r in m["runs"]
                )
                cells.append(
                    CellResult(
                        policy=policy,
                        thru_trace=thru,
                        user_trace=user,
                        waste_s=m["waste_s"],
                        startup_s=m["startup_s"],
                        rebuffer_s=m["rebuffer_s"],
                        oq=m["oq"],
                        waste_mbit=m["waste_mbit"],
                        runs=runs,
                    )
                )
    return ComparisonReport(
        cells=tuple(cells), reductions=data["reductions"], meta=data["meta"]
    )


def emit_report(report: ComparisonReport, fmt: str) -> str:
    """Serialize the report; fmt is 'csv' or 'json'."""
    import json as _json

    if fmt == "csv":
        return report_to_csv(report)
    if fmt == "json":
        return _json.dumps(report_to_json(report), indent=2, sort_keys=False) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
