"""Measurement aggregation: percentiles, throughput, ECDF series, cross-run
comparison, and the file exports that back bar/ECDF plots.

All functions are pure over immutable measurement lists. Failed measurements
never enter latency statistics; they are reported through error counts.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .core import GeoBenchError
from .harness.runner import Measurement, ResourceSample


class ReportError(GeoBenchError):
    pass


def quantile(samples: Sequence[float], p: float) -> float:
    """Median is the mean of the two middle order statistics for even n;
    every other p uses the nearest-rank rule ceil(p*n)."""
    if len(samples) == 0:
        raise ReportError("quantile of empty sample set")
    if not 0.0 < p <= 1.0:
        raise ReportError(f"quantile level out of range: {p}")
    s = sorted(samples)
    n = len(s)
    if p == 0.5:
        mid = n // 2
        return (s[mid - 1] + s[mid]) / 2.0 if n % 2 == 0 else float(s[mid])
    return float(s[max(1, math.ceil(p * n)) - 1])


def ecdf_points(samples: Sequence[float]) -> list[tuple[float, float]]:
    """Sorted distinct sample values with cumulative fraction rank/n; the last
    fraction is exactly 1.0."""
    if len(samples) == 0:
        raise ReportError("ECDF of empty sample set")
    s = sorted(samples)
    n = len(s)
    out = []
    for i, v in enumerate(s):
        if i == n - 1 or s[i + 1] != v:
            out.append((float(v), (i + 1) / n))
    return out


@dataclass(frozen=True)
class QueryStats:
    query: str
    count: int
    error_count: int
    min_us: Optional[float]
    median_us: Optional[float]
    mean_us: Optional[float]
    p95_us: Optional[float]
    p99_us: Optional[float]
    max_us: Optional[float]
    throughput_qps: float


@dataclass(frozen=True)
class ResourceSummary:
    mean_cpu_percent: float
    max_cpu_percent: float
    mean_rss_bytes: float
    max_rss_bytes: int


@dataclass(frozen=True)
class SummaryReport:
    run_id: str
    queries: tuple[QueryStats, ...]
    total_duration_s: float
    aggregate_throughput_qps: float
    resources: Optional[ResourceSummary]

    def query(self, name: str) -> QueryStats:
        for q in self.queries:
            if q.query == name:
                return q
        raise ReportError(f"no stats for query {name!r}")


def summarize(measurements: Sequence[Measurement],
              resources: Sequence[ResourceSample] = ()) -> SummaryReport:
    """Pool all repetitions of one run into per-query statistics.

    Throughput is successful count over the measured wall span (first issue to
    last completion), both per query and in aggregate."""
    if not measurements:
        raise ReportError("no measurements to summarize")
    run_ids = {m.run_id for m in measurements}
    if len(run_ids) != 1:
        raise ReportError(f"measurements span multiple runs: {sorted(run_ids)}")
    run_id = run_ids.pop()

    from .core import to_us

    start_us = min(to_us(m.issue_t) for m in measurements)
    end_us = max(to_us(m.issue_t) + m.latency_us for m in measurements)
    span_s = max(end_us - start_us, 1) / 1e6

    by_query: dict[str, list[Measurement]] = {}
    for m in measurements:
        by_query.setdefault(m.query, []).append(m)

    stats = []
    total_ok = 0
    for name in sorted(by_query):
        ms = by_query[name]
        lat = [float(m.latency_us) for m in ms if m.success]
        errors = sum(1 for m in ms if not m.success)
        total_ok += len(lat)
        if lat:
            stats.append(QueryStats(
                query=name, count=len(lat), error_count=errors,
                min_us=min(lat), median_us=quantile(lat, 0.5),
                mean_us=sum(lat) / len(lat), p95_us=quantile(lat, 0.95),
                p99_us=quantile(lat, 0.99), max_us=max(lat),
                throughput_qps=len(lat) / span_s))
        else:
            stats.append(QueryStats(
                query=name, count=0, error_count=errors,
                min_us=None, median_us=None, mean_us=None,
                p95_us=None, p99_us=None, max_us=None, throughput_qps=0.0))

    rs = None
    if resources:
        cpu = [s.cpu_percent for s in resources]
        rss = [s.rss_bytes for s in resources]
        rs = ResourceSummary(
            mean_cpu_percent=sum(cpu) / len(cpu), max_cpu_percent=max(cpu),
            mean_rss_bytes=sum(rss) / len(rss), max_rss_bytes=max(rss))

    return SummaryReport(
        run_id=run_id, queries=tuple(stats), total_duration_s=span_s,
        aggregate_throughput_qps=total_ok / span_s, resources=rs)


@dataclass(frozen=True)
class ComparisonReport:
    baseline_run: str
    candidate_run: str
    per_query_pct: tuple[tuple[str, float], ...]
    aggregate_pct: float


def compare_runs(baseline: SummaryReport, candidate: SummaryReport) -> ComparisonReport:
    """Per-query relative median difference, positive when the candidate is
    faster: (baseline - candidate) / baseline, in percent. The aggregate is
    the arithmetic mean over queries. Queries whose median is missing on
    either side (all executions failed) are excluded.

    Note the denominator: swapping the two runs does not simply negate the
    percentages (a +50% candidate becomes a -100% baseline), so always read
    comparisons relative to their stated baseline."""
    base_queries = {q.query for q in baseline.queries}
    cand_queries = {q.query for q in candidate.queries}
    if base_queries != cand_queries:
        only_base = sorted(base_queries - cand_queries)
        only_cand = sorted(cand_queries - base_queries)
        raise ReportError(
            f"query sets differ: baseline-only {only_base}, candidate-only {only_cand}")
    per_query = []
    for name in sorted(base_queries):
        b = baseline.query(name).median_us
        c = candidate.query(name).median_us
        if b is None or c is None or b == 0:
            continue
        per_query.append((name, (b - c) / b * 100.0))
    aggregate = sum(d for _, d in per_query) / len(per_query) if per_query else 0.0
    return ComparisonReport(
        baseline_run=baseline.run_id, candidate_run=candidate.run_id,
        per_query_pct=tuple(per_query), aggregate_pct=aggregate)


# ---------------------------------------------------------------------------
# exports

ECDF_HEADER = ["query", "run", "latency_us", "fraction"]
BARS_HEADER = ["query", "run", "median_us", "p99_us", "throughput_qps"]


def summary_to_dict(r: SummaryReport) -> dict:
    return {
        "run_id": r.run_id,
        "total_duration_s": r.total_duration_s,
        "aggregate_throughput_qps": r.aggregate_throughput_qps,
        "resources": None if r.resources is None else {
            "mean_cpu_percent": r.resources.mean_cpu_percent,
            "max_cpu_percent": r.resources.max_cpu_percent,
            "mean_rss_bytes": r.resources.mean_rss_bytes,
            "max_rss_bytes": r.resources.max_rss_bytes,
        },
        "queries": [{
            "query": q.query, "count": q.count, "error_count": q.error_count,
            "min_us": q.min_us, "median_us": q.median_us, "mean_us": q.mean_us,
            "p95_us": q.p95_us, "p99_us": q.p99_us, "max_us": q.max_us,
            "throughput_qps": q.throughput_qps,
        } for q in r.queries],
    }


def summary_from_dict(d: dict) -> SummaryReport:
    rs = d.get("resources")
    return SummaryReport(
        run_id=d["run_id"],
        total_duration_s=d["total_duration_s"],
        aggregate_throughput_qps=d["aggregate_throughput_qps"],
        resources=None if rs is None else ResourceSummary(
            rs["mean_cpu_percent"], rs["max_cpu_percent"],
            rs["mean_rss_bytes"], rs["max_rss_bytes"]),
        queries=tuple(QueryStats(
            query=q["query"], count=q["count"], error_count=q["error_count"],
            min_us=q["min_us"], median_us=q["median_us"], mean_us=q["mean_us"],
            p95_us=q["p95_us"], p99_us=q["p99_us"], max_us=q["max_us"],
            throughput_qps=q["throughput_qps"]) for q in d["queries"]),
    )


def comparison_to_dict(r: ComparisonReport) -> dict:
    return {
        "baseline_run": r.baseline_run,
        "candidate_run": r.candidate_run,
        "aggregate_pct": r.aggregate_pct,
        "per_query_pct": [{"query": q, "median_diff_pct": d} for q, d in r.per_query_pct],
    }


def comparison_from_dict(d: dict) -> ComparisonReport:
    return ComparisonReport(
        baseline_run=d["baseline_run"], candidate_run=d["candidate_run"],
        aggregate_pct=d["aggregate_pct"],
        per_query_pct=tuple((e["query"], e["median_diff_pct"])
                            for e in d["per_query_pct"]))


Report = Union[SummaryReport, ComparisonReport]


def export(report: Report, fmt: str, path: str) -> None:
    """Write a report as json (full fidelity) or csv (plot-ready rows)."""
    if fmt == "json":
        doc = summary_to_dict(report) if isinstance(report, SummaryReport) \
            else comparison_to_dict(report)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if isinstance(report, SummaryReport):
                w.writerow(BARS_HEADER)
                for q in report.queries:
                    w.writerow([q.query, report.run_id, _cell(q.median_us),
                                _cell(q.p99_us), q.throughput_qps])
            else:
                w.writerow(["query", "baseline", "candidate", "median_diff_pct"])
                for name, d in report.per_query_pct:
                    w.writerow([name, report.baseline_run, report.candidate_run, d])
        return
    raise ReportError(f"unknown export format: {fmt!r}")


def _cell(v):
    return "" if v is None else v


def load_summary(path: str) -> SummaryReport:
    with open(path) as fh:
        return summary_from_dict(json.load(fh))


def load_comparison(path: str) -> ComparisonReport:
    with open(path) as fh:
        return comparison_from_dict(json.load(fh))


def export_bars_csv(reports: Iterable[SummaryReport], path: str) -> None:
    """One row per (query, run): the per-query bar-plot data."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BARS_HEADER)
        for r in reports:
            for q in r.queries:
                w.writerow([q.query, r.run_id, _cell(q.median_us),
                            _cell(q.p99_us), q.throughput_qps])


def export_ecdf_csv(measurements_by_run: dict[str, Sequence[Measurement]],
                    path: str) -> None:
    """One ECDF series per (query, run) from successful measurements."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ECDF_HEADER)
        for run_id in sorted(measurements_by_run):
            by_query: dict[str, list[float]] = {}
            for m in measurements_by_run[run_id]:
                if m.success:
                    by_query.setdefault(m.query, []).append(float(m.latency_us))
            for query in sorted(by_query):
                for v, frac in ecdf_points(by_query[query]):
                    w.writerow([query, run_id, v, frac])
