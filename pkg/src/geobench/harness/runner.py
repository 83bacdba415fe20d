"""Experiment execution: warm-up, repeated measured passes in sequential or
closed-loop parallel mode, latency capture, and resource sampling."""

from __future__ import annotations

import csv
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

import psutil

from ..core import UTC, GeoBenchError, iso_utc, parse_iso
from .adapters import Adapter, AdapterConnectionError
from .plan import HarnessError, WorkloadPlan


@dataclass(frozen=True)
class RunConfig:
    run_id: str
    mode: str = "sequential"
    clients: int = 1
    warmup: bool = True
    run_repetitions: int = 3
    resource_interval_s: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("sequential", "parallel"):
            raise HarnessError(f"unknown mode: {self.mode!r}")
        if not 1 <= self.clients <= 1024:
            raise HarnessError("clients must be within 1..1024")
        if self.run_repetitions < 1:
            raise HarnessError("run_repetitions must be >= 1")


@dataclass(frozen=True)
class Measurement:
    run_id: str
    repetition: int
    query: str
    param_set: int
    client: int
    issue_t: datetime
    latency_us: int
    row_count: int
    success: bool
    error: Optional[str] = None


@dataclass(frozen=True)
class ResourceSample:
    t: datetime
    cpu_percent: float
    rss_bytes: int


@dataclass
class RunResult:
    measurements: list[Measurement] = field(default_factory=list)
    resources: list[ResourceSample] = field(default_factory=list)
    aborted_repetitions: list[int] = field(default_factory=list)


class ResourceSampler:
    """Samples CPU and RSS of one process at a fixed cadence in a daemon
    thread. Targets the harness's own process for in-process SUTs."""

    def __init__(self, interval_s: float = 1.0, pid: Optional[int] = None):
        self.interval_s = interval_s
        self.process = psutil.Process(pid)
        self.samples: list[ResourceSample] = []
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self.process.cpu_percent(None)  # prime the counter
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def _loop(self) -> None:
        while not self._stop.wait(self.interval_s):
            self.samples.append(ResourceSample(
                t=datetime.now(UTC),
                cpu_percent=float(self.process.cpu_percent(None)),
                rss_bytes=int(self.process.memory_info().rss),
            ))

    def stop(self) -> list[ResourceSample]:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        return self.samples


def _measure_one(adapter: Adapter, qi, cfg: RunConfig, rep: int, client: int) -> Measurement:
    issue = datetime.now(UTC)
    t0 = time.perf_counter_ns()
    try:
        outcome = adapter.execute(qi)
    except AdapterConnectionError:
        raise
    except Exception as exc:  # failure is isolated to this measurement
        latency_us = (time.perf_counter_ns() - t0) // 1000
        return Measurement(cfg.run_id, rep, qi.name, qi.param_set_id, client,
                           issue, int(latency_us), 0, False, str(exc))
    return Measurement(cfg.run_id, rep, qi.name, qi.param_set_id, client,
                       issue, outcome.latency_us, outcome.row_count, True)


def _warmup_pass(adapter: Adapter, plan: WorkloadPlan) -> None:
    """One unmeasured execution per enabled template (first plan occurrence)."""
    seen = set()
    for qi in plan.instances:
        if qi.name in seen:
            continue
        seen.add(qi.name)
        try:
            adapter.execute(qi)
        except AdapterConnectionError:
            raise
        except Exception:
            pass


def run_experiment(cfg: RunConfig, plan: WorkloadPlan, adapter: Adapter) -> RunResult:
    """Per repetition: optional warm-up, then a measured pass. Sequential mode
    issues instances one at a time in plan order; parallel mode runs
    cfg.clients closed-loop workers over their round-robin sub-lists."""
    if cfg.mode == "parallel" and cfg.clients != plan.clients:
        raise HarnessError(
            f"plan was built for {plan.clients} clients, run asks for {cfg.clients}")
    result = RunResult()
    sampler = ResourceSampler(cfg.resource_interval_s)
    sampler.start()
    try:
        for rep in range(cfg.run_repetitions):
            try:
                if cfg.warmup:
                    _warmup_pass(adapter, plan)
            except AdapterConnectionError as exc:
                result.aborted_repetitions.append(rep)
                result.measurements.append(Measurement(
                    cfg.run_id, rep, "<warmup>", -1, 0,
                    datetime.now(UTC), 0, 0, False, str(exc)))
                continue
            if cfg.mode == "sequential":
                aborted = _sequential_pass(cfg, plan, adapter, rep, result.measurements)
            else:
                aborted = _parallel_pass(cfg, plan, adapter, rep, result.measurements)
            if aborted:
                result.aborted_repetitions.append(rep)
    finally:
        result.resources = sampler.stop()
    return result


def _sequential_pass(cfg, plan, adapter, rep, sink: list[Measurement]) -> bool:
    for qi in plan.instances:
        try:
            sink.append(_measure_one(adapter, qi, cfg, rep, 0))
        except AdapterConnectionError as exc:
            sink.append(Measurement(cfg.run_id, rep, qi.name, qi.param_set_id, 0,
                                    datetime.now(UTC), 0, 0, False, str(exc)))
            return True
    return False


def _parallel_pass(cfg, plan, adapter, rep, sink: list[Measurement]) -> bool:
    stop = threading.Event()
    per_client: dict[int, list[Measurement]] = {c: [] for c in range(cfg.clients)}

    def worker(client_id: int) -> None:
        session = adapter.for_client(client_id)
        try:
            for qi in plan.assignment(client_id):
                if stop.is_set():
                    break
                try:
                    per_client[client_id].append(
                        _measure_one(session, qi, cfg, rep, client_id))
                except AdapterConnectionError as exc:
                    per_client[client_id].append(Measurement(
                        cfg.run_id, rep, qi.name, qi.param_set_id, client_id,
                        datetime.now(UTC), 0, 0, False, str(exc)))
                    stop.set()
                    break
        finally:
            if session is not adapter:
                session.close()

    threads = [threading.Thread(target=worker, args=(c,)) for c in range(cfg.clients)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for c in range(cfg.clients):
        sink.extend(per_client[c])
    return stop.is_set()


# ---------------------------------------------------------------------------
# measurement files

MEASUREMENT_HEADER = ["run_id", "repetition", "query", "param_set", "client",
                      "issue_ts", "latency_us", "rows", "success", "error"]
RESOURCE_HEADER = ["ts", "cpu_percent", "rss_bytes"]


def write_measurements(path: str, measurements: list[Measurement]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MEASUREMENT_HEADER)
        for m in measurements:
            w.writerow([m.run_id, m.repetition, m.query, m.param_set, m.client,
                        iso_utc(m.issue_t), m.latency_us, m.row_count,
                        "true" if m.success else "false", m.error or ""])


def read_measurements(path: str) -> list[Measurement]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MEASUREMENT_HEADER:
            raise GeoBenchError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(MEASUREMENT_HEADER):
                raise GeoBenchError(f"{path}:{lineno}: expected "
                                    f"{len(MEASUREMENT_HEADER)} fields, got {len(row)}")
            try:
                out.append(Measurement(
                    run_id=row[0], repetition=int(row[1]), query=row[2],
                    param_set=int(row[3]), client=int(row[4]),
                    issue_t=parse_iso(row[5]), latency_us=int(row[6]),
                    row_count=int(row[7]), success=row[8] == "true",
                    error=row[9] or None))
            except ValueError as exc:
                raise GeoBenchError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_resources(path: str, samples: list[ResourceSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESOURCE_HEADER)
        for s in samples:
            w.writerow([iso_utc(s.t), f"{s.cpu_percent:.2f}", s.rss_bytes])
