"""Command-line entry point: ``sysopt <command> [options]``.

Machine output goes to stdout (JSON by default, ``--format text`` for a
human summary); logs and diagnostics go to stderr.  Exit codes: 0 success,
1 pipeline or input failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .analysis import analyze, render_text, save_report
from .config import BackendSelector, load_config
from .errors import ConfigError, SysoptError
from .evaluation import evaluate_files, render_comparison, save_comparison
from .jsonio import canonical_dumps, read_json
from .optimize.patches import apply_patchset, generate_patchset, save_patchset
from .pipeline import build_summary, load_state, run_pipeline, workspace_lock
from .summary import save_summary

log = logging.getLogger("sysopt")


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--repo", default=argparse.SUPPRESS if suppress else ".",
                        help="repository root (default: current directory)")
    parser.add_argument("--state-dir", default=default, help="state directory (default: <repo>/.sysopt)")
    parser.add_argument("--config", default=default, help="config file (default: <repo>/sysopt.cfg)")
    parser.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS if suppress else "json",
                        help="output format on stdout")
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sysopt",
                                     description="Find and fix cross-service performance bottlenecks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_options(p, suppress=True)
        return p

    command("summarize", "build the system summary and write system_summary.json")
    p = command("analyze", "detect and rank bottlenecks; writes analysis_report.json and findings.png")
    p.add_argument("--no-figures", action="store_true", help="skip rendering figures")
    p = command("optimize", "generate patches for the current findings and apply them")
    p.add_argument("--backend", choices=("deterministic", "remote"), help="override the configured backend")
    p.add_argument("--remote-url", help="remote backend URL (with --backend remote)")
    p.add_argument("--dry-run", action="store_true", help="write diffs without touching the workspace")
    p = command("evaluate", "compare two benchmark CSV files")
    p.add_argument("--before", required=True, help="samples measured before optimization")
    p.add_argument("--after", required=True, help="samples measured after optimization")
    p.add_argument("--no-figures", action="store_true", help="skip rendering figures")
    p = command("run", "loop summarize/analyze/optimize/evaluate until nothing applicable remains")
    p.add_argument("--no-figures", action="store_true", help="skip rendering figures")
    p = command("state", "inspect pipeline state")
    p.add_argument("action", choices=("show",))
    return parser


def _emit(args, payload, text: str) -> None:
    if args.format == "text":
        sys.stdout.write(text)
    else:
        sys.stdout.write(payload if isinstance(payload, str) else canonical_dumps(payload))


def _config(args):
    return load_config(args.repo, args.config, args.state_dir)


def cmd_summarize(args) -> int:
    config = _config(args)
    summary, _ = build_summary(config, config.catalog())
    path = save_summary(summary, Path(config.state_dir) / "system_summary.json")
    g = summary.component.graph
    text = (f"{g.service_count} services, {g.package_count} packages, {g.class_count} classes, "
            f"{g.method_count} methods, {len(g.endpoints)} endpoints, {len(g.edges)} dependency edges\n"
            f"{len(summary.behavior.behavior.sites)} interaction sites, "
            f"{len(summary.behavior.behavior.sync)} sync constructs, "
            f"{len(summary.diagnostics)} diagnostics\nwritten to {path}\n")
    _emit(args, path.read_text(encoding="utf-8"), text)
    return 0


def _current_report(config, catalog):
    summary, model = build_summary(config, catalog)
    excluded: List[str] = []
    state_file = Path(config.state_dir) / "state.json"
    if state_file.exists():
        state = load_state(state_file)
        excluded = state.suppressed_finding_ids + state.rejected_finding_ids
    return summary, model, analyze(summary, catalog, exclude=excluded)


def cmd_analyze(args) -> int:
    config = _config(args)
    catalog = config.catalog()
    summary, _, report = _current_report(config, catalog)
    state_dir = Path(config.state_dir)
    save_summary(summary, state_dir / "system_summary.json")
    path = save_report(report, state_dir / "analysis_report.json")
    if not args.no_figures:
        from .plotting import plot_findings
        plot_findings(report, state_dir / "findings.png")
    _emit(args, Path(path).read_text(encoding="utf-8"), render_text(report))
    return 0


def cmd_optimize(args) -> int:
    config = _config(args)
    if args.backend:
        url = args.remote_url or config.backend.remote_url
        config.backend = BackendSelector(args.backend, url, config.backend.timeout_s)
    catalog = config.catalog()
    state_dir = Path(config.state_dir)
    with workspace_lock(state_dir):
        summary, model, report = _current_report(config, catalog)
        if config.backend.mode == "remote":
            from .optimize.remote import request_remote_patches
            patch_set = request_remote_patches(report, summary, config.backend, model, config.repo_root,
                                               catalog=catalog)
        else:
            patch_set = generate_patchset(report.findings, model, 1, config.repo_root)
        if not args.dry_run:
            apply_patchset(patch_set, config.repo_root, model, catalog)
        out_dir = state_dir / "patches" / "manual"
        path = save_patchset(patch_set, out_dir)
    for d in patch_set.diagnostics:
        log.warning("%s", d)
    lines = [f"{p.finding_id} {p.rule_id} {p.status} {p.path} {p.reason}".rstrip() for p in patch_set.patches]
    lines += [f"skipped {s}" for s in patch_set.skipped]
    _emit(args, path.read_text(encoding="utf-8"), "\n".join(lines + [f"written to {out_dir}"]) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    report = evaluate_files(args.before, args.after)
    state_dir = Path(config.state_dir)
    path = save_comparison(report, state_dir / "comparison_report.json")
    if not args.no_figures:
        from .plotting import plot_comparison
        plot_comparison(report, state_dir / "comparison.png")
    _emit(args, path.read_text(encoding="utf-8"), render_comparison(report))
    return 0


def cmd_run(args) -> int:
    config = _config(args)
    state = run_pipeline(config)
    comparison = Path(config.state_dir) / "comparison_report.json"
    if not args.no_figures and state.metrics_history and comparison.exists():
        from .evaluation import load_comparison
        from .plotting import plot_comparison
        plot_comparison(load_comparison(comparison), comparison.with_name("comparison.png"))
    text = (f"status: {state.status}\niterations: {state.iteration}\n"
            f"applied patches: {len(state.applied_patch_ids)}\n"
            f"suppressed findings: {len(state.suppressed_finding_ids)}\n")
    if state.error:
        text += f"error ({state.failed_stage}): {state.error}\n"
    _emit(args, state, text)
    return 1 if state.status == "failed" else 0


def cmd_state(args) -> int:
    config = _config(args)
    path = Path(config.state_dir) / "state.json"
    if not path.exists():
        raise SysoptError(f"no pipeline state at {path}")
    state = load_state(path)
    text = "".join(f"{k}: {v}\n" for k, v in read_json(path).items())
    _emit(args, state, text)
    return 0


COMMANDS = {
    "summarize": cmd_summarize,
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "run": cmd_run,
    "state": cmd_state,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"sysopt: configuration error: {exc}", file=sys.stderr)
        return 2
    except (SysoptError, OSError, json.JSONDecodeError) as exc:
        print(f"sysopt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
