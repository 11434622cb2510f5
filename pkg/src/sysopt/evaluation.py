"""Test gate, benchmark sample ingestion, metrics and before/after comparison."""

from __future__ import annotations

import csv
import os
import shlex
import shutil
import signal
import subprocess
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from .errors import CommandNotFound, EmptyBenchmarkFile, NoSuccessfulSamples, UnrecognizedHeader
from .jsonio import from_jsonable, read_json, write_json

CSV_COLUMNS = ("timeStamp", "elapsed", "label", "success")
METRIC_KEYS = ("throughput_rps", "avg_rt_ms", "p50_ms", "p90_ms", "p99_ms")


# -- test gate -----------------------------------------------------------------

@dataclass
class TestOutcome:
    __test__ = False  # not a pytest class

    command: str
    exit_code: int
    passed: bool
    duration_s: float
    captured_output_path: str = ""
    timed_out: bool = False


def _resolve_executable(argv0: str, workspace: Path) -> Optional[str]:
    if os.sep in argv0 or (os.altsep and os.altsep in argv0):
        candidate = (workspace / argv0) if not os.path.isabs(argv0) else Path(argv0)
        return str(candidate) if candidate.is_file() and os.access(candidate, os.X_OK) else None
    return shutil.which(argv0)


def run_test_gate(command: str, workspace: str | Path, timeout_s: float = 600.0,
                  output_path: str | Path | None = None) -> TestOutcome:
    """Run ``command`` in ``workspace``; exit code 0 passes.

    A timeout kills the whole process group and counts as a failure
    (``timed_out`` is set, ``exit_code`` is -1).  Combined stdout/stderr goes
    to ``output_path`` when given.
    """
    workspace = Path(workspace)
    argv = shlex.split(command)
    if not argv:
        raise CommandNotFound("empty test command")
    if _resolve_executable(argv[0], workspace) is None:
        raise CommandNotFound(f"test command not found: {argv[0]}")
    sink = open(output_path, "wb") if output_path else subprocess.DEVNULL
    start = time.monotonic()
    timed_out = False
    try:
        proc = subprocess.Popen(argv, cwd=workspace, stdout=sink, stderr=subprocess.STDOUT,
                                stdin=subprocess.DEVNULL, start_new_session=True)
        try:
            code = proc.wait(timeout=timeout_s)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            proc.wait()
            code = -1
    finally:
        if output_path:
            sink.close()
    return TestOutcome(command, code, code == 0 and not timed_out, round(time.monotonic() - start, 3),
                       str(output_path or ""), timed_out)


# -- samples -------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkSample:
    timestamp_ms: int
    elapsed_ms: int
    label: str
    success: bool


class SampleList(list):
    """Parsed samples; ``skipped_rows`` counts malformed rows that were dropped."""

    def __init__(self, items: Iterable[BenchmarkSample] = (), skipped_rows: int = 0):
        super().__init__(items)
        self.skipped_rows = skipped_rows


_BOOL = {"true": True, "false": False}


def parse_samples(path: str | Path) -> SampleList:
    """Read a benchmark CSV whose header holds ``timeStamp,elapsed,label,success``.

    Extra columns (as written by JMeter) are ignored.  Rows with a bad
    integer, a negative elapsed time, an unknown success literal or a wrong
    column count are skipped and counted.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyBenchmarkFile(f"{path}: file is empty")
        names = [h.strip() for h in header]
        missing = [c for c in CSV_COLUMNS if c not in names]
        if missing:
            raise UnrecognizedHeader(f"{path}: header lacks {', '.join(missing)}; expected {','.join(CSV_COLUMNS)}")
        idx = [names.index(c) for c in CSV_COLUMNS]
        samples: List[BenchmarkSample] = []
        skipped = 0
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                skipped += 1
                continue
            try:
                ts = int(row[idx[0]].strip())
                elapsed = int(row[idx[1]].strip())
                ok = _BOOL[row[idx[3]].strip().lower()]
            except (ValueError, KeyError):
                skipped += 1
                continue
            if elapsed < 0:
                skipped += 1
                continue
            samples.append(BenchmarkSample(ts, elapsed, row[idx[2]], ok))
    if not samples:
        raise EmptyBenchmarkFile(f"{path}: no valid sample rows ({skipped} malformed)")
    return SampleList(samples, skipped)


# -- metrics -------------------------------------------------------------------

@dataclass
class BenchmarkMetrics:
    total_requests: int
    success_count: int
    throughput_rps: float
    avg_rt_ms: float
    p50_ms: float
    p90_ms: float
    p99_ms: float


def nearest_rank(sorted_values: Sequence[float], p: int) -> float:
    """Value at 1-based rank ceil(p/100 * n) of an ascending sequence."""
    n = len(sorted_values)
    rank = max(1, -(-p * n // 100))
    return sorted_values[rank - 1]


def compute_metrics(samples: Sequence[BenchmarkSample]) -> BenchmarkMetrics:
    """Throughput over the wall-clock span, mean and nearest-rank percentiles over successes.

    The span runs from the earliest start to the end of the latest-starting
    request (its start plus its elapsed time), taken over all samples and
    floored at 1 ms.
    """
    ok = sorted(s.elapsed_ms for s in samples if s.success)
    if not ok:
        raise NoSuccessfulSamples("no successful samples to compute metrics from")
    first = min(s.timestamp_ms for s in samples)
    last = max(samples, key=lambda s: (s.timestamp_ms, s.elapsed_ms))
    span_ms = max(last.timestamp_ms + last.elapsed_ms - first, 1)
    return BenchmarkMetrics(
        total_requests=len(samples),
        success_count=len(ok),
        throughput_rps=len(ok) / (span_ms / 1000.0),
        avg_rt_ms=sum(ok) / len(ok),
        p50_ms=nearest_rank(ok, 50),
        p90_ms=nearest_rank(ok, 90),
        p99_ms=nearest_rank(ok, 99),
    )


# -- comparison ----------------------------------------------------------------

def percent_change(original: float, optimized: float) -> Optional[float]:
    """Signed (optimized - original) / original * 100; None when original is 0."""
    if original == 0:
        return None
    return (optimized - original) / original * 100.0


def round_half_up(value: float, places: int = 2) -> Decimal:
    quantum = Decimal(1).scaleb(-places)
    return Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP)


def format_percent(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    rounded = round_half_up(value)
    if rounded == 0:
        rounded = abs(rounded)
    return f"{'+' if rounded > 0 else ''}{rounded}%"


@dataclass
class ComparisonReport:
    original: BenchmarkMetrics
    optimized: BenchmarkMetrics
    improvement: Dict[str, Optional[float]] = field(default_factory=dict)
    display: Dict[str, str] = field(default_factory=dict)
    schema_version: int = 1

    def consistent(self, tol: float = 1e-9) -> bool:
        fresh = compare(self.original, self.optimized)
        for k in METRIC_KEYS:
            a, b = fresh.improvement[k], self.improvement.get(k)
            if (a is None) != (b is None) or (a is not None and abs(a - b) > tol):
                return False
        return True


def compare(original: BenchmarkMetrics, optimized: BenchmarkMetrics) -> ComparisonReport:
    improvement = {k: percent_change(getattr(original, k), getattr(optimized, k)) for k in METRIC_KEYS}
    display = {k: format_percent(v) for k, v in improvement.items()}
    return ComparisonReport(original, optimized, improvement, display)


def evaluate_files(before: str | Path, after: str | Path) -> ComparisonReport:
    return compare(compute_metrics(parse_samples(before)), compute_metrics(parse_samples(after)))


def save_comparison(report: ComparisonReport, path: str | Path) -> Path:
    return write_json(path, report)


def load_comparison(path: str | Path) -> ComparisonReport:
    return from_jsonable(ComparisonReport, read_json(path))


def render_comparison(report: ComparisonReport) -> str:
    rows = [("Throughput (req/s)", "throughput_rps"), ("Avg response time (ms)", "avg_rt_ms"),
            ("P50 (ms)", "p50_ms"), ("P90 (ms)", "p90_ms"), ("P99 (ms)", "p99_ms")]
    lines = [f"{'metric':<24}{'original':>12}{'optimized':>12}{'change':>10}"]
    for label, key in rows:
        lines.append(f"{label:<24}{getattr(report.original, key):>12.2f}{getattr(report.optimized, key):>12.2f}"
                     f"{report.display[key]:>10}")
    lines.append(f"requests: {report.original.total_requests} -> {report.optimized.total_requests}; "
                 f"successes: {report.original.success_count} -> {report.optimized.success_count}")
    return "\n".join(lines) + "\n"
