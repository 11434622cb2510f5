"""The summarize -> analyze -> optimize -> evaluate loop with persistent state.

State directory layout::

    <state_dir>/state.json             PipelineState (canonical JSON)
    <state_dir>/system_summary.json    latest SystemSummary
    <state_dir>/analysis_report.json   latest AnalysisReport
    <state_dir>/patches/iter-NNN/      patchset.json and one .diff per patch
    <state_dir>/comparison_report.json latest ComparisonReport (when benchmarks are configured)
    <state_dir>/trace.log              one JSON TraceEvent per line
    <state_dir>/lock                   present while a run holds the workspace
"""

from __future__ import annotations

import contextlib
import errno
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from .analysis import AnalysisReport, analyze, save_report
from .config import PatternCatalog, PipelineConfig
from .errors import CorruptState, PipelineLocked, SchemaVersionMismatch, SysoptError
from .evaluation import evaluate_files, run_test_gate, save_comparison
from .frontend import parse_repository
from .frontend.model import CodeModel
from .jsonio import from_jsonable, read_json, write_json
from .optimize.patches import PatchSet, apply_patchset, generate_patchset, revert_files, save_patchset
from .summary import SystemSummary, load_summary, save_summary, summarize_model

log = logging.getLogger(__name__)

STATE_SCHEMA_VERSION = 1
STATUSES = ("running", "terminated_no_findings", "terminated_max_iter", "terminated_all_rejected", "failed")
STAGES = ("summarize", "analyze", "optimize", "evaluate")


@dataclass
class PipelineState:
    schema_version: int = STATE_SCHEMA_VERSION
    iteration: int = 0
    repo_fingerprint: str = ""
    summary_path: str = ""
    report_path: str = ""
    applied_patch_ids: List[str] = field(default_factory=list)
    rejected_finding_ids: List[str] = field(default_factory=list)
    suppressed_finding_ids: List[str] = field(default_factory=list)
    metrics_history: List[str] = field(default_factory=list)
    status: str = "running"
    failed_stage: Optional[str] = None
    error: str = ""
    trace_sequence: int = 0

    def validate(self) -> "PipelineState":
        if not isinstance(self.iteration, int) or self.iteration < 0:
            raise CorruptState(f"iteration must be a non-negative integer, got {self.iteration!r}")
        if self.status not in STATUSES:
            raise CorruptState(f"unknown status {self.status!r}")
        if self.failed_stage is not None and self.failed_stage not in STAGES:
            raise CorruptState(f"unknown failed_stage {self.failed_stage!r}")
        overlap = set(self.applied_patch_ids) & set(self.suppressed_finding_ids)
        if overlap:
            raise CorruptState(f"ids both applied and suppressed: {sorted(overlap)}")
        if self.trace_sequence < 0:
            raise CorruptState("trace_sequence must be non-negative")
        return self


@dataclass
class TraceEvent:
    sequence: int
    stage: str
    iteration: int
    started_at: str
    ended_at: str
    outcome: str
    artifact_paths: List[str] = field(default_factory=list)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


# -- persistence ---------------------------------------------------------------

def persist_state(state: PipelineState, state_dir: str | Path) -> Path:
    return write_json(Path(state_dir) / "state.json", state.validate())


def load_state(path: str | Path) -> PipelineState:
    path = Path(path)
    if path.is_dir():
        path = path / "state.json"
    try:
        data = read_json(path)
    except json.JSONDecodeError as exc:
        raise CorruptState(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise CorruptState(f"{path}: expected a JSON object")
    version = data.get("schema_version")
    if version != STATE_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: state schema_version {version} != {STATE_SCHEMA_VERSION}; "
            f"delete the state directory or re-run `sysopt run` to start over")
    try:
        state = from_jsonable(PipelineState, data)
    except (TypeError, ValueError, KeyError) as exc:
        raise CorruptState(f"{path}: {exc}") from exc
    return state.validate()


@contextlib.contextmanager
def workspace_lock(state_dir: str | Path) -> Iterator[Path]:
    """Exclusive lock file; a lock left by a dead process is taken over."""
    state_dir = Path(state_dir)
    state_dir.mkdir(parents=True, exist_ok=True)
    lock = state_dir / "lock"
    for attempt in range(2):
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
            break
        except FileExistsError:
            holder = _lock_holder(lock)
            if attempt == 0 and holder is not None and not _alive(holder):
                lock.unlink(missing_ok=True)
                continue
            raise PipelineLocked(f"{lock} is held by pid {holder}") from None
    with os.fdopen(fd, "w") as fh:
        fh.write(str(os.getpid()))
    try:
        yield lock
    finally:
        lock.unlink(missing_ok=True)


def _lock_holder(lock: Path) -> Optional[int]:
    try:
        return int(lock.read_text().strip())
    except (OSError, ValueError):
        return None


def _alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except OSError as exc:
        return exc.errno == errno.EPERM
    return True


# -- stage helpers (also used by the CLI) --------------------------------------

def build_summary(config: PipelineConfig, catalog: PatternCatalog,
                  model: Optional[CodeModel] = None) -> Tuple[SystemSummary, CodeModel]:
    model = model or parse_repository(config.repo_root, config.repo)
    summary = summarize_model(model, catalog, config.repo_root, config.repo.service_marker,
                              config.hot_path_roots, config.hot_path_length)
    return summary, model


class _Run:
    def __init__(self, config: PipelineConfig, state: PipelineState):
        self.config = config
        self.state = state
        self.dir = Path(config.state_dir)
        self.catalog = config.catalog()

    def persist(self) -> None:
        persist_state(self.state, self.dir)

    @contextlib.contextmanager
    def stage(self, name: str) -> Iterator[Dict]:
        """Times one stage, appends its TraceEvent and persists state afterwards."""
        record = {"outcome": "ok", "artifacts": []}
        started = _now()
        try:
            yield record
        except Exception as exc:
            record["outcome"] = f"failed: {type(exc).__name__}: {exc}"
            self._trace(name, started, record)
            self.state.status = "failed"
            self.state.failed_stage = name
            self.state.error = f"{type(exc).__name__}: {exc}"
            self.persist()
            raise
        self._trace(name, started, record)
        self.persist()

    def _trace(self, stage: str, started: str, record: Dict) -> None:
        self.state.trace_sequence += 1
        event = TraceEvent(self.state.trace_sequence, stage, self.state.iteration, started, _now(),
                           record["outcome"], [str(p) for p in record["artifacts"]])
        with open(self.dir / "trace.log", "a", encoding="utf-8") as fh:
            fh.write(_trace_line(event) + "\n")

    def rel(self, path: Path) -> str:
        try:
            return path.relative_to(self.dir).as_posix()
        except ValueError:
            return str(path)


def _trace_line(event: TraceEvent) -> str:
    return json.dumps(event.__dict__, sort_keys=True, separators=(",", ":"))


def run_pipeline(config: PipelineConfig, state: Optional[PipelineState] = None) -> PipelineState:
    """Loop until no applicable finding remains, every remaining one is rejected, or the cap.

    A previous state in the state directory is resumed: suppressed and
    rejected finding ids carry over, and this run may add up to
    ``config.max_iterations`` iterations.
    """
    state_dir = Path(config.state_dir)
    state_dir.mkdir(parents=True, exist_ok=True)
    with workspace_lock(state_dir):
        if state is None:
            state_file = state_dir / "state.json"
            state = load_state(state_file) if state_file.exists() else PipelineState()
        state.status, state.failed_stage, state.error = "running", None, ""
        run = _Run(config, state)
        run.persist()
        budget_end = state.iteration + config.max_iterations
        try:
            while state.status == "running":
                if state.iteration >= budget_end:
                    state.status = "terminated_max_iter"
                    break
                state.iteration += 1
                _iteration(run)
        except SysoptError as exc:
            log.error("pipeline failed in %s: %s", state.failed_stage, exc)
            return state
        run.persist()
        return state


def _iteration(run: _Run) -> None:
    state, config = run.state, run.config
    summary_file = run.dir / "system_summary.json"

    with run.stage("summarize") as rec:
        model = parse_repository(config.repo_root, config.repo)
        if model.fingerprint == state.repo_fingerprint and summary_file.exists():
            summary = load_summary(summary_file)
            rec["outcome"] = "reused"
        else:
            summary, _ = build_summary(config, run.catalog, model)
            save_summary(summary, summary_file)
            state.repo_fingerprint = model.fingerprint
        state.summary_path = run.rel(summary_file)
        rec["artifacts"].append(state.summary_path)

    excluded = set(state.suppressed_finding_ids) | set(state.rejected_finding_ids)
    with run.stage("analyze") as rec:
        full = analyze(summary, run.catalog)
        report = analyze(summary, run.catalog, exclude=excluded)
        report_file = run.dir / "analysis_report.json"
        save_report(report, report_file)
        state.report_path = run.rel(report_file)
        rec["artifacts"].append(state.report_path)
        rec["outcome"] = f"{len(report.findings)} finding(s), {len(full.findings) - len(report.findings)} excluded"
    blocked = [f for f in full.findings if f.id in excluded]

    snapshot: List[Tuple[str, bytes]] = []
    with run.stage("optimize") as rec:
        patch_set = _propose(run, report, summary, model)
        patch_dir = run.dir / "patches" / f"iter-{state.iteration:03d}"
        proposed = [p for p in patch_set.patches if p.status == "proposed"]
        for rel in sorted({p.path for p in proposed}):
            snapshot.append((rel, (Path(config.repo_root) / rel).read_bytes()))
        result = apply_patchset(patch_set, config.repo_root, model, run.catalog) if proposed else None
        applied = result.applied if result else []
        for p in patch_set.patches:
            if p.status == "rejected_breaking" and p.finding_id not in state.rejected_finding_ids:
                state.rejected_finding_ids.append(p.finding_id)
        save_patchset(patch_set, patch_dir)
        rec["artifacts"].append(run.rel(patch_dir / "patchset.json"))
        rec["outcome"] = (f"{len(applied)} applied, {len(patch_set.patches) - len(applied)} rejected, "
                          f"{len(patch_set.skipped)} not applicable")

    if not applied:
        rejected_now = [p for p in patch_set.patches if p.status.startswith("rejected_")]
        if blocked or rejected_now:
            state.status = "terminated_all_rejected"
        else:
            state.status = "terminated_no_findings"
        # nothing changed: the evaluate stage still records the benchmark outcome
        with run.stage("evaluate") as rec:
            rec["outcome"] = "skipped: no patch applied"
            _compare(run, rec)
        return

    with run.stage("evaluate") as rec:
        try:
            outcome = None
            if config.test_command:
                outcome = run_test_gate(config.test_command, config.repo_root, config.test_timeout_s,
                                        run.dir / f"test-output-iter-{state.iteration:03d}.txt")
                rec["artifacts"].append(run.rel(Path(outcome.captured_output_path)))
        except Exception:
            revert_files(config.repo_root, snapshot)
            raise
        if outcome is not None and not outcome.passed:
            revert_files(config.repo_root, snapshot)
            for p in applied:
                p.status = "rejected_tests"
                if p.finding_id not in state.suppressed_finding_ids:
                    state.suppressed_finding_ids.append(p.finding_id)
            save_patchset(patch_set, patch_dir)
            why = "timed out" if outcome.timed_out else f"exit {outcome.exit_code}"
            rec["outcome"] = f"tests failed ({why}); {len(applied)} patch(es) reverted and suppressed"
        else:
            for p in applied:
                state.applied_patch_ids.append(p.id)
            rec["outcome"] = "tests passed" if outcome is not None else "no test command configured"
            _compare(run, rec)


def _propose(run: _Run, report: AnalysisReport, summary: SystemSummary, model: CodeModel) -> PatchSet:
    selector = run.config.backend
    if selector.mode == "remote":
        from .optimize.remote import request_remote_patches
        return request_remote_patches(report, summary, selector, model, run.config.repo_root,
                                      run.state.iteration, run.catalog,
                                      suppressed=run.state.suppressed_finding_ids)
    return generate_patchset(report.findings, model, run.state.iteration, run.config.repo_root)


def _compare(run: _Run, rec: Dict) -> None:
    config = run.config
    if not (config.bench_before and config.bench_after):
        return
    comparison = evaluate_files(config.bench_before, config.bench_after)
    path = run.dir / f"comparison_report-iter-{run.state.iteration:03d}.json"
    save_comparison(comparison, path)
    save_comparison(comparison, run.dir / "comparison_report.json")
    run.state.metrics_history.append(run.rel(path))
    rec["artifacts"].append(run.rel(path))
    rec["outcome"] += "; throughput " + comparison.display["throughput_rps"]


def read_trace(state_dir: str | Path) -> List[TraceEvent]:
    path = Path(state_dir) / "trace.log"
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [from_jsonable(TraceEvent, json.loads(line)) for line in fh if line.strip()]
