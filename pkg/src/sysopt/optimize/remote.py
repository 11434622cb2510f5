"""HTTP client for an external patch generator.

Wire contract (see ``docs/remote_backend.md``): one POST of
``{schema_version, system_summary, analysis_report, suppressed_finding_ids}``
answered by ``{patches: [{finding_id, diff, justification}]}``.  Whatever
comes back goes through the same dry-run gate as locally generated patches.
"""

from __future__ import annotations

import json
import socket
import urllib.error
import urllib.request
from pathlib import Path
from typing import Iterable, Optional

from ..analysis import AnalysisReport
from ..config import BackendSelector, PatternCatalog
from ..errors import RemoteProtocolError, RemoteTimeout
from ..frontend.model import CodeModel
from ..jsonio import to_jsonable
from ..summary import SystemSummary
from .patches import Patch, PatchSet, dry_run

WIRE_SCHEMA_VERSION = 1


def build_request(report: AnalysisReport, summary: SystemSummary,
                  suppressed: Iterable[str] = ()) -> dict:
    return {
        "schema_version": WIRE_SCHEMA_VERSION,
        "system_summary": to_jsonable(summary),
        "analysis_report": to_jsonable(report),
        "suppressed_finding_ids": sorted(set(suppressed)),
    }


def _post(url: str, body: bytes, timeout: float) -> bytes:
    req = urllib.request.Request(url, data=body, method="POST",
                                 headers={"Content-Type": "application/json", "Accept": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except urllib.error.HTTPError as exc:
        raise RemoteProtocolError(f"{url} answered HTTP {exc.code}") from exc
    except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
        raise RemoteTimeout(f"{url} unreachable or too slow: {getattr(exc, 'reason', exc)}") from exc


def request_remote_patches(report: AnalysisReport, summary: SystemSummary, selector: BackendSelector,
                           model: CodeModel, workspace: str | Path, iteration: int = 1,
                           catalog: Optional[PatternCatalog] = None,
                           suppressed: Iterable[str] = ()) -> PatchSet:
    """Ask the remote backend for patches and gate each one against ``model``.

    Accepted patches keep status ``proposed``; breaking or non-applying ones
    come back marked ``rejected_breaking`` / ``rejected_conflict``.  A
    malformed response yields an empty set with a diagnostic.
    """
    if selector.mode != "remote" or not selector.remote_url:
        raise RemoteProtocolError("selector is not configured for the remote backend")
    body = json.dumps(build_request(report, summary, suppressed), sort_keys=True).encode("utf-8")
    raw = _post(selector.remote_url, body, selector.timeout_s)
    patch_set = PatchSet([], model.fingerprint, iteration)
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        patch_set.diagnostics.append(f"malformed response: {exc}")
        return patch_set
    if not isinstance(payload, dict) or not isinstance(payload.get("patches"), list):
        patch_set.diagnostics.append("malformed response: expected an object with a 'patches' list")
        return patch_set
    version = payload.get("schema_version", WIRE_SCHEMA_VERSION)
    if version != WIRE_SCHEMA_VERSION:
        raise RemoteProtocolError(f"backend speaks schema_version {version}, expected {WIRE_SCHEMA_VERSION}")

    findings = {f.id: f for f in report.findings}
    seen = set()
    for i, item in enumerate(payload["patches"]):
        if not isinstance(item, dict) or not all(isinstance(item.get(k), str) for k in ("finding_id", "diff")):
            patch_set.diagnostics.append(f"patch #{i}: missing finding_id or diff")
            continue
        fid = item["finding_id"]
        finding = findings.get(fid)
        if finding is None:
            patch_set.diagnostics.append(f"patch #{i}: unknown finding {fid}")
            continue
        if fid in seen:
            patch_set.diagnostics.append(f"patch #{i}: second patch for finding {fid} ignored")
            continue
        seen.add(fid)
        patch = Patch(fid, finding.rule_id, item["diff"], str(item.get("justification", "")))
        status, reason, _, _ = dry_run(patch, model, workspace, catalog)
        patch.status, patch.reason = status, reason
        patch_set.patches.append(patch)
    return patch_set
