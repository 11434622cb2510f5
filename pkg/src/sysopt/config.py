"""Repository configuration (``sysopt.cfg``) and the pattern catalog."""

from __future__ import annotations

import configparser
import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ConfigError, EmptyCatalog

CONFIG_FILENAME = "sysopt.cfg"
SITE_KINDS = ("service_call", "db_access", "external")

DEFAULT_SOURCE_GLOBS = ["**/*.java"]
DEFAULT_EXCLUDE_GLOBS = ["**/src/test/**", "**/target/**", ".sysopt/**", "**/.sysopt/**"]


@dataclass
class RepoConfig:
    source_globs: List[str] = field(default_factory=lambda: list(DEFAULT_SOURCE_GLOBS))
    exclude_globs: List[str] = field(default_factory=lambda: list(DEFAULT_EXCLUDE_GLOBS))
    service_marker: str = "pom.xml"


@dataclass
class BackendSelector:
    mode: str = "deterministic"  # "deterministic" | "remote"
    remote_url: Optional[str] = None
    timeout_s: float = 30.0

    def __post_init__(self):
        if self.mode not in ("deterministic", "remote"):
            raise ConfigError(f"unknown backend {self.mode!r}")
        if self.mode == "remote" and not self.remote_url:
            raise ConfigError("remote backend requires remote_url")
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be positive")


@dataclass
class PipelineConfig:
    repo_root: Path
    state_dir: Path
    repo: RepoConfig = field(default_factory=RepoConfig)
    catalog_path: Optional[Path] = None
    backend: BackendSelector = field(default_factory=BackendSelector)
    test_command: Optional[str] = None
    test_timeout_s: float = 600.0
    bench_before: Optional[Path] = None
    bench_after: Optional[Path] = None
    max_iterations: int = 5
    hot_path_roots: int = 10
    hot_path_length: int = 32

    def catalog(self) -> "PatternCatalog":
        return load_catalog(self.catalog_path)


def _split_list(value: str) -> List[str]:
    return [item.strip() for chunk in value.splitlines() for item in chunk.split(",") if item.strip()]


def load_config(repo_root: str | Path, config_path: str | Path | None = None,
                state_dir: str | Path | None = None) -> PipelineConfig:
    """Read ``sysopt.cfg`` (section ``[sysopt]``) from the repo root or an explicit path.

    A missing default file is not an error; an explicit path that does not exist is.
    Relative paths inside the file resolve against the repo root.
    """
    root = Path(repo_root).resolve()
    path = Path(config_path) if config_path else root / CONFIG_FILENAME
    parser = configparser.ConfigParser(interpolation=None)
    if path.exists():
        parser.read(path, encoding="utf-8")
    elif config_path:
        raise ConfigError(f"config file not found: {path}")
    sec = parser["sysopt"] if parser.has_section("sysopt") else {}

    def rel(value: Optional[str]) -> Optional[Path]:
        if not value:
            return None
        p = Path(value)
        return p if p.is_absolute() else root / p

    repo = RepoConfig()
    if sec.get("source_globs"):
        repo.source_globs = _split_list(sec["source_globs"])
    if sec.get("exclude_globs"):
        repo.exclude_globs = list(DEFAULT_EXCLUDE_GLOBS) + _split_list(sec["exclude_globs"])
    if sec.get("service_marker"):
        repo.service_marker = sec["service_marker"].strip()
    try:
        backend = BackendSelector(
            mode=sec.get("backend", "deterministic").strip(),
            remote_url=sec.get("remote_url") or None,
            timeout_s=float(sec.get("remote_timeout_s", 30.0)),
        )
        cfg = PipelineConfig(
            repo_root=root,
            state_dir=Path(state_dir).resolve() if state_dir else (rel(sec.get("state_dir")) or root / ".sysopt"),
            repo=repo,
            catalog_path=rel(sec.get("catalog")),
            backend=backend,
            test_command=sec.get("test_command") or None,
            test_timeout_s=float(sec.get("test_timeout_s", 600.0)),
            bench_before=rel(sec.get("bench_before")),
            bench_after=rel(sec.get("bench_after")),
            max_iterations=int(sec.get("max_iterations", 5)),
            hot_path_roots=int(sec.get("hot_path_roots", 10)),
            hot_path_length=int(sec.get("hot_path_length", 32)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if cfg.max_iterations < 1:
        raise ConfigError("max_iterations must be >= 1")
    return cfg


@dataclass
class RuleSpec:
    rule_id: str
    title: str
    base_severity: float
    interpretation: str
    suggestion: str
    enabled: bool = True


@dataclass
class PatternCatalog:
    endpoint_annotations: List[str]
    http_method_annotations: List[str]
    servlet_bases: List[str]
    servlet_handlers: List[str]
    internal_api_classes: List[str]
    sites: Dict[str, List[str]]
    stateless_serializers: List[str]
    rules: Dict[str, RuleSpec]

    def site_kind(self, type_name: str) -> Optional[str]:
        """First matching kind under the order service_call > db_access > external."""
        for kind in SITE_KINDS:
            if type_name in self.sites.get(kind, ()):
                return kind
        return None


def _default_catalog_data() -> dict:
    text = resources.files("sysopt").joinpath("data/default_catalog.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_catalog(path: str | Path | None = None) -> PatternCatalog:
    """Default catalog, optionally overlaid key-by-key with a user catalog file."""
    data = _default_catalog_data()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read catalog {path}: {exc}") from exc
        data = _overlay(data, user)
    return catalog_from_dict(data)


def _overlay(base: dict, user: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in user.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _overlay(merged[key], value)
        else:
            merged[key] = value
    return merged


def catalog_from_dict(data: dict) -> PatternCatalog:
    sites = {kind: list(data.get("sites", {}).get(kind, [])) for kind in SITE_KINDS}
    if not any(sites.values()):
        raise EmptyCatalog("pattern catalog lists no interaction-site types")
    rules = {}
    for rule_id, spec in data.get("rules", {}).items():
        severity = float(spec.get("base_severity", 0))
        if not 0 < severity <= 10:
            raise ConfigError(f"rule {rule_id}: base_severity must be in (0, 10]")
        rules[rule_id] = RuleSpec(
            rule_id=rule_id,
            title=spec.get("title", rule_id),
            base_severity=severity,
            interpretation=spec.get("interpretation", ""),
            suggestion=spec.get("suggestion", ""),
            enabled=bool(spec.get("enabled", True)),
        )
    return PatternCatalog(
        endpoint_annotations=list(data.get("endpoint_annotations", [])),
        http_method_annotations=list(data.get("http_method_annotations", [])),
        servlet_bases=list(data.get("servlet_bases", [])),
        servlet_handlers=list(data.get("servlet_handlers", [])),
        internal_api_classes=list(data.get("internal_api_classes", [])),
        sites=sites,
        stateless_serializers=list(data.get("stateless_serializers", [])),
        rules=rules,
    )
