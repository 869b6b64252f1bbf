"""Experiment configuration and the policy x trace comparison matrix."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

from .engine import SessionResult, simulate_session
from .metrics import (
    REPORT_METRICS,
    CellResult,
    ComparisonReport,
    RunRecord,
    relative_reduction,
)
from .model import Playlist, QoeWeights, SessionConfig, ValidationError, VideoSpec
from .policies import (
    DEFAULT_BUFFER_TARGET_TABLE,
    POLICY_NAMES,
    PrefetchPolicy,
    ThresholdTable,
    make_policy,
)
from .traces import (
    ThroughputTrace,
    TraceParseError,
    UserTrace,
    generate_user_trace,
)

PROPOSED_POLICY = "network-aware"

# Largest lookahead row: "auto" playlists add this many videos past the user
# trace so prefetching never runs out of feed.
AUTO_PLAYLIST_MARGIN = 12


@dataclass(frozen=True)
class PlaylistSettings:
    count: int | str = "auto"
    video_duration_s: float = 15.0
    bitrate_kbps: float = 2000.0
    segment_duration_s: float = 1.0

    def validate(self) -> "PlaylistSettings":
        if isinstance(self.count, str):
            if self.count != "auto":
                raise ValidationError('playlist.count must be an integer or "auto"')
        elif self.count < 1:
            raise ValidationError("playlist.count must be >= 1")
        if self.video_duration_s <= 0 or self.bitrate_kbps <= 0 or self.segment_duration_s <= 0:
            raise ValidationError("playlist durations and bitrate must be positive")
        return self

    def build(self, user_trace_len: int) -> Playlist:
        count = (
            user_trace_len + AUTO_PLAYLIST_MARGIN
            if self.count == "auto"
            else int(self.count)
        )
        return Playlist.uniform(
            count=count,
            duration_s=self.video_duration_s,
            bitrate_kbps=self.bitrate_kbps,
            segment_duration_s=self.segment_duration_s,
        )


@dataclass(frozen=True)
class ThroughputSource:
    """A throughput trace either read from a file or given inline."""

    label: str
    wrap: bool = True
    path: str | None = None
    values_kbps: tuple[float, ...] | None = None

    def validate(self) -> "ThroughputSource":
        if (self.path is None) == (self.values_kbps is None):
            raise ValidationError(
                f"throughput trace {self.label!r}: give exactly one of path/values"
            )
        return self


@dataclass(frozen=True)
class UserSource:
    """A user trace from a file, inline durations, or generator parameters."""

    label: str
    path: str | None = None
    durations_s: tuple[float, ...] | None = None
    mean_s: float | None = None
    std_s: float | None = None
    total_s: float | None = None
    seed: int | None = None

    @property
    def generated(self) -> bool:
        return self.mean_s is not None

    def validate(self) -> "UserSource":
        modes = sum(
            [self.path is not None, self.durations_s is not None, self.mean_s is not None]
        )
        if modes != 1:
            raise ValidationError(
                f"user trace {self.label!r}: give exactly one of path/durations/generator params"
            )
        if self.generated and (self.std_s is None or self.total_s is None):
            raise ValidationError(
                f"user trace {self.label!r}: generator needs mean_s, std_s, total_s"
            )
        return self


@dataclass(frozen=True)
class PolicySetting:
    """One policy entry in the matrix, with optional table overrides.

    Only the network-aware policy takes tables; a distinct label lets
    sensitivity studies run the same policy under several settings.
    """

    name: str
    label: str
    buffer_target_table: ThresholdTable | None = None
    lookahead_table: ThresholdTable | None = None

    def validate(self) -> "PolicySetting":
        if self.name not in POLICY_NAMES:
            raise ValidationError(
                f"unknown policy {self.name!r}; expected one of {', '.join(POLICY_NAMES)}"
            )
        tables = [self.buffer_target_table, self.lookahead_table]
        if any(t is not None for t in tables) and self.name != "network-aware":
            raise ValidationError(f"policy {self.name!r} takes no table overrides")
        for table in tables:
            if table is None:
                continue
            if not table.rows:
                raise ValidationError(f"policy {self.label!r}: table needs at least one row")
            ratios = [r for r, _ in table.rows]
            if ratios != sorted(set(ratios)):
                raise ValidationError(
                    f"policy {self.label!r}: table ratios must be strictly increasing"
                )
            if any(v < 1 for _, v in table.rows) or table.otherwise < 1:
                raise ValidationError(f"policy {self.label!r}: table values must be >= 1")
        return self

    def build(self) -> PrefetchPolicy:
        overrides = {}
        if self.buffer_target_table is not None:
            overrides["buffer_target_table"] = self.buffer_target_table
        if self.lookahead_table is not None:
            overrides["lookahead_table"] = self.lookahead_table
        return make_policy(self.name, **overrides)


DEFAULT_POLICIES = tuple(PolicySetting(name=n, label=n) for n in POLICY_NAMES)


@dataclass(frozen=True)
class ExperimentConfig:
    playlist: PlaylistSettings = field(default_factory=PlaylistSettings)
    session: SessionConfig = field(default_factory=SessionConfig)
    policies: tuple[PolicySetting, ...] = DEFAULT_POLICIES
    throughput_traces: tuple[ThroughputSource, ...] = ()
    user_traces: tuple[UserSource, ...] = ()
    repeats: int = 1

    def validate(self) -> "ExperimentConfig":
        self.playlist.validate()
        self.session.validate()
        if not self.policies:
            raise ValidationError("at least one policy is required")
        for p in self.policies:
            p.validate()
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ValidationError("policy labels must be unique")
        if not self.throughput_traces:
            raise ValidationError("at least one throughput trace is required")
        if not self.user_traces:
            raise ValidationError("at least one user trace is required")
        for t in self.throughput_traces:
            t.validate()
        for u in self.user_traces:
            u.validate()
        if self.repeats < 1:
            raise ValidationError("repeats must be >= 1")
        labels = [t.label for t in self.throughput_traces]
        if len(set(labels)) != len(labels):
            raise ValidationError("throughput trace labels must be unique")
        labels = [u.label for u in self.user_traces]
        if len(set(labels)) != len(labels):
            raise ValidationError("user trace labels must be unique")
        return self


def _table_from_dict(raw: dict, where: str) -> ThresholdTable:
    try:
        rows = tuple((float(r), int(v)) for r, v in raw["rows"])
        return ThresholdTable(rows=rows, otherwise=int(raw["otherwise"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(
            f"{where}: expected {{\"rows\": [[ratio, value], ...], \"otherwise\": value}} ({exc})"
        ) from None


def _policy_from_entry(item) -> PolicySetting:
    if isinstance(item, str):
        return PolicySetting(name=item, label=item)
    item = dict(item)
    name = item.pop("name", None)
    if name is None:
        raise ValidationError("policy entries given as objects need a \"name\" field")
    label = item.pop("label", name)
    tables = {}
    for key in ("buffer_target_table", "lookahead_table"):
        raw_table = item.pop(key, None)
        if raw_table is not None:
            tables[key] = _table_from_dict(raw_table, f"policy {label!r} {key}")
    if item:
        raise ValidationError(f"policy {label!r}: unknown fields {sorted(item)}")
    return PolicySetting(name=name, label=label, **tables)


def _throughput_from_entry(item, index: int) -> ThroughputSource:
    if isinstance(item, str):
        return ThroughputSource(label=_label_from_path(item), path=item)
    item = dict(item)
    values = item.pop("values_kbps", None)
    if values is not None:
        item["values_kbps"] = tuple(float(v) for v in values)
    if "label" not in item:
        item["label"] = _label_from_path(item.get("path", f"trace{index + 1}"))
    return ThroughputSource(**item)


def _user_from_entry(item, index: int) -> UserSource:
    if isinstance(item, str):
        return UserSource(label=_label_from_path(item), path=item)
    item = dict(item)
    durations = item.pop("durations_s", None)
    if durations is not None:
        item["durations_s"] = tuple(float(v) for v in durations)
    if "label" not in item:
        path = item.get("path")
        item["label"] = _label_from_path(path) if path else f"user{index + 1}"
    return UserSource(**item)


def _session_from_dict(raw: dict) -> SessionConfig:
    session_raw = dict(raw)
    weights = QoeWeights(**session_raw.pop("qoe_weights", {}))
    return SessionConfig(qoe_weights=weights, **session_raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from the documented JSON layout."""
    try:
        playlist = PlaylistSettings(**raw.get("playlist", {}))
        session = _session_from_dict(raw.get("session", {}))
        policies = tuple(
            _policy_from_entry(item) for item in raw.get("policies", list(POLICY_NAMES))
        )
        thr = tuple(
            _throughput_from_entry(item, i)
            for i, item in enumerate(raw.get("throughput_traces", []))
        )
        users = tuple(
            _user_from_entry(item, i)
            for i, item in enumerate(raw.get("user_traces", []))
        )
        return ExperimentConfig(
            playlist=playlist,
            session=session,
            policies=policies,
            throughput_traces=thr,
            user_traces=users,
            repeats=int(raw.get("repeats", 1)),
        ).validate()
    except TypeError as exc:
        raise ValidationError(f"bad config field: {exc}") from None


def load_experiment_config(path: str) -> tuple[ExperimentConfig, dict]:
    """Read a config file.

    Relative trace paths inside the file resolve against the file's own
    directory, so a config works no matter where the process runs from.
    The returned raw dict is untouched.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    return _rebase_paths(config_from_dict(raw), os.path.dirname(path)), raw


def _rebase_source(src, base: str):
    if src.path is None or os.path.isabs(src.path):
        return src
    return replace(src, path=os.path.normpath(os.path.join(base, src.path)))


def _rebase_paths(config: ExperimentConfig, base: str) -> ExperimentConfig:
    return replace(
        config,
        throughput_traces=tuple(_rebase_source(s, base) for s in config.throughput_traces),
        user_traces=tuple(_rebase_source(s, base) for s in config.user_traces),
    )


def _label_from_path(path: str) -> str:
    name = path.replace("\\", "/").rsplit("/", 1)[-1]
    return name.rsplit(".", 1)[0]


def trace_fingerprint(values) -> str:
    """Stable content hash shared by file-based and inline traces."""
    text = "\n".join(repr(float(v)) for v in values)
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def config_fingerprint(config: ExperimentConfig) -> str:
    def encode(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {k: encode(getattr(obj, k)) for k in obj.__dataclass_fields__}
        if isinstance(obj, (list, tuple)):
            return [encode(v) for v in obj]
        return obj

    blob = json.dumps(encode(config), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SessionKey:
    policy: str
    thru_trace: str
    user_trace: str
    repeat: int
    seed: int


@dataclass(frozen=True)
class ExperimentOutcome:
    report: ComparisonReport
    # populated only when collect_events is set
    event_logs: tuple[tuple[SessionKey, list[dict]], ...] = ()
    session_results: tuple[tuple[SessionKey, SessionResult], ...] = ()


def resolve_throughput(source: ThroughputSource) -> ThroughputTrace:
    from .traces import load_throughput_trace

    if source.path is not None:
        return load_throughput_trace(source.path, wrap=source.wrap, label=source.label)
    return ThroughputTrace(
        starts=tuple(float(i) for i in range(len(source.values_kbps))),
        rates_kbps=tuple(source.values_kbps),
        duration_s=float(len(source.values_kbps)),
        wrap=source.wrap,
        label=source.label,
    )


def resolve_user_trace(source: UserSource, repeat: int, base_seed: int) -> tuple[UserTrace, int]:
    """Materialize one repeat of a user trace; returns (trace, seed used).

    A generator without its own seed falls back to base_seed, so a run-level
    seed override re-rolls every unpinned trace.
    """
    from .traces import load_user_trace

    if source.generated:
        seed = (source.seed if source.seed is not None else base_seed) + repeat
        return (
            generate_user_trace(
                mean_s=source.mean_s,
                std_s=source.std_s,
                total_s=source.total_s,
                seed=seed,
                label=source.label,
            ),
            seed,
        )
    if source.path is not None:
        return load_user_trace(source.path, label=source.label), base_seed
    return UserTrace(durations_s=source.durations_s, label=source.label), base_seed


def run_experiment(config: ExperimentConfig, collect_events: bool = False) -> ExperimentOutcome:
    """Run the full policy x throughput x user matrix and build the report."""
    config.validate()
    thr_traces = [(src.label, resolve_throughput(src)) for src in config.throughput_traces]
    # user traces per repeat are shared across policies/throughput traces so
    # every cell in one repeat sees the same scroll sequence
    user_by_repeat: dict[tuple[str, int], tuple[UserTrace, int]] = {}
    for src in config.user_traces:
        for r in range(config.repeats):
            user_by_repeat[(src.label, r)] = resolve_user_trace(
                src, r, config.session.rng_seed
            )

    cells: list[CellResult] = []
    logs: list[tuple[SessionKey, list[dict]]] = []
    results: list[tuple[SessionKey, SessionResult]] = []
    for setting in config.policies:
        policy = setting.build()
        for thr_label, thr_trace in thr_traces:
            for user_src in config.user_traces:
                runs: list[RunRecord] = []
                for r in range(config.repeats):
                    user_trace, seed = user_by_repeat[(user_src.label, r)]
                    playlist = config.playlist.build(len(user_trace))
                    result = simulate_session(
                        playlist, thr_trace, user_trace, policy, config.session
                    )
                    m = result.metrics
                    runs.append(
                        RunRecord(
                            seed=seed,
                            waste_s=m.waste_s,
                            startup_s=m.startup_delay_s,
                            rebuffer_s=m.rebuffer_s,
                            oq=m.overall_quality,
                            waste_mbit=m.wasted_kbit / 1000.0,
                            watched_s=m.watched_s,
                        )
                    )
                    key = SessionKey(setting.label, thr_label, user_src.label, r, seed)
                    if collect_events:
                        logs.append((key, result.events))
                    results.append((key, result))
                n = len(runs)
                cells.append(
                    CellResult(
                        policy=setting.label,
                        thru_trace=thr_label,
                        user_trace=user_src.label,
                        waste_s=sum(x.waste_s for x in runs) / n,
                        startup_s=sum(x.startup_s for x in runs) / n,
                        rebuffer_s=sum(x.rebuffer_s for x in runs) / n,
                        oq=sum(x.oq for x in runs) / n,
                        waste_mbit=sum(x.waste_mbit for x in runs) / n,
                        runs=tuple(runs),
                    )
                )

    report = ComparisonReport(
        cells=tuple(cells),
        reductions=_reductions(cells, config),
        meta=_meta(config, thr_traces, user_by_repeat),
    )
    return ExperimentOutcome(
        report=report,
        event_logs=tuple(logs),
        session_results=tuple(results),
    )


def _reductions(cells: list[CellResult], config: ExperimentConfig) -> dict:
    """Reductions of the one network-aware entry against every other policy.

    Skipped (empty dict) when zero or several network-aware entries exist,
    as in sensitivity sweeps where no single cell is "the" proposed policy.
    """
    proposed_labels = [p.label for p in config.policies if p.name == PROPOSED_POLICY]
    if len(proposed_labels) != 1:
        return {}
    prop = proposed_labels[0]
    by_key = {(c.policy, c.thru_trace, c.user_trace): c for c in cells}
    out: dict = {}
    for setting in config.policies:
        if setting.label == prop:
            continue
        per_thr: dict = {}
        for thr in config.throughput_traces:
            per_user: dict = {}
            for user in config.user_traces:
                proposed = by_key[(prop, thr.label, user.label)]
                base = by_key[(setting.label, thr.label, user.label)]
                per_user[user.label] = {
                    metric: relative_reduction(
                        getattr(proposed, metric), getattr(base, metric)
                    )
                    for metric in REPORT_METRICS
                }
            per_thr[thr.label] = per_user
        out[setting.label] = per_thr
    return out


def _meta(config: ExperimentConfig, thr_traces, user_by_repeat) -> dict:
    thr_meta = {}
    for src, (label, trace) in zip(config.throughput_traces, thr_traces):
        thr_meta[label] = {
            "path": src.path,
            "wrap": src.wrap,
            "bins": len(trace.rates_kbps),
            "duration_s": trace.duration_s,
            "sha256": trace_fingerprint(trace.rates_kbps),
        }
    user_meta = {}
    for src in config.user_traces:
        repeats = []
        for r in range(config.repeats):
            trace, seed = user_by_repeat[(src.label, r)]
            repeats.append(
                {
                    "repeat": r,
                    "seed": seed if src.generated else None,
                    "videos": len(trace),
                    "total_s": trace.total_s,
                    "sha256": trace_fingerprint(trace.durations_s),
                }
            )
        generator = None
        if src.generated:
            generator = {
                "method": "gauss-redraw-positive",
                "mean_s": src.mean_s,
                "std_s": src.std_s,
                "total_s": src.total_s,
                "base_seed": src.seed if src.seed is not None else config.session.rng_seed,
            }
        user_meta[src.label] = {
            "path": src.path,
            "generator": generator,
            "repeats": repeats,
        }
    def table_meta(table: ThresholdTable | None):
        if table is None:
            return None
        return {"rows": [list(row) for row in table.rows], "otherwise": table.otherwise}

    return {
        "config_sha256": config_fingerprint(config),
        "rng_seed": config.session.rng_seed,
        "repeats": config.repeats,
        "policies": [
            {
                "label": p.label,
                "name": p.name,
                "buffer_target_table": table_meta(p.buffer_target_table),
                "lookahead_table": table_meta(p.lookahead_table),
            }
            for p in config.policies
        ],
        "throughput_traces": thr_meta,
        "user_traces": user_meta,
    }


def collect_violations(raw: dict) -> tuple[list[str], list[str], dict]:
    """Check every section of a raw config dict and report all problems.

    Unlike config_from_dict, which raises on the first error, this walks the
    whole config so a single validate pass lists everything wrong. Returns
    (violations, warnings, derived) where derived holds quantities a user
    would want to eyeball before a long run: segments per video, resolved
    trace sizes, and the session count of the full matrix.
    """
    violations: list[str] = []
    warnings: list[str] = []
    derived: dict = {}

    playlist = None
    try:
        playlist = PlaylistSettings(**raw.get("playlist", {})).validate()
        probe = VideoSpec(
            id=1,
            bitrate_kbps=playlist.bitrate_kbps,
            duration_s=playlist.video_duration_s,
            segment_duration_s=playlist.segment_duration_s,
        ).validate()
        derived["segments_per_video"] = probe.segment_count
        derived["segment_kbits"] = probe.segment_kbits
        derived["playlist_count"] = playlist.count
        if playlist.count == "auto":
            derived["auto_playlist_margin"] = AUTO_PLAYLIST_MARGIN
    except (TypeError, ValidationError) as exc:
        violations.append(f"playlist: {exc}")

    session = None
    try:
        session = _session_from_dict(raw.get("session", {})).validate()
    except (TypeError, ValidationError) as exc:
        violations.append(f"session: {exc}")

    policies: list[PolicySetting] = []
    for i, item in enumerate(raw.get("policies", list(POLICY_NAMES))):
        try:
            policies.append(_policy_from_entry(item).validate())
        except (TypeError, ValidationError) as exc:
            violations.append(f"policies[{i}]: {exc}")
    labels = [p.label for p in policies]
    if len(set(labels)) != len(labels):
        violations.append("policies: labels must be unique")
    if not raw.get("policies", list(POLICY_NAMES)):
        violations.append("policies: at least one policy is required")

    thr_entries = raw.get("throughput_traces", [])
    if not thr_entries:
        violations.append("throughput_traces: at least one trace is required")
    thr_derived: dict = {}
    thr_labels: list[str] = []
    for i, item in enumerate(thr_entries):
        try:
            src = _throughput_from_entry(item, i).validate()
            thr_labels.append(src.label)
            trace = resolve_throughput(src)
            thr_derived[src.label] = {
                "bins": len(trace.rates_kbps),
                "duration_s": trace.duration_s,
                "mean_kbps": sum(trace.rates_kbps) / len(trace.rates_kbps),
                "wrap": trace.wrap,
            }
        except (TypeError, ValidationError, TraceParseError, OSError) as exc:
            violations.append(f"throughput_traces[{i}]: {exc}")
    if len(set(thr_labels)) != len(thr_labels):
        violations.append("throughput_traces: labels must be unique")
    if thr_derived:
        derived["throughput_traces"] = thr_derived

    user_entries = raw.get("user_traces", [])
    if not user_entries:
        violations.append("user_traces: at least one trace is required")
    user_derived: dict = {}
    user_labels: list[str] = []
    base_seed = session.rng_seed if session is not None else 0
    for i, item in enumerate(user_entries):
        try:
            src = _user_from_entry(item, i).validate()
            user_labels.append(src.label)
            trace, _ = resolve_user_trace(src, 0, base_seed)
            info = {"videos": len(trace), "total_s": trace.total_s}
            if src.generated:
                info["generated"] = {
                    "mean_s": src.mean_s,
                    "std_s": src.std_s,
                    "total_s": src.total_s,
                    "base_seed": src.seed if src.seed is not None else base_seed,
                }
            user_derived[src.label] = info
        except (TypeError, ValidationError, TraceParseError, OSError) as exc:
            violations.append(f"user_traces[{i}]: {exc}")
    if len(set(user_labels)) != len(user_labels):
        violations.append("user_traces: labels must be unique")
    if user_derived:
        derived["user_traces"] = user_derived

    repeats = raw.get("repeats", 1)
    try:
        repeats = int(repeats)
        if repeats < 1:
            violations.append("repeats: must be >= 1")
    except (TypeError, ValueError):
        violations.append(f"repeats: not an integer: {repeats!r}")
        repeats = 1

    if playlist is not None and isinstance(playlist.count, int):
        for label, info in user_derived.items():
            if info["videos"] > playlist.count:
                violations.append(
                    f"playlist: count {playlist.count} is smaller than user trace "
                    f"{label!r} with {info['videos']} videos"
                )

    if session is not None:
        for p in policies:
            if p.name != "network-aware":
                continue
            table = p.buffer_target_table or DEFAULT_BUFFER_TARGET_TABLE
            smallest = min(min(v for _, v in table.rows), table.otherwise)
            if session.startup_threshold_segments > smallest:
                warnings.append(
                    f"session: startup threshold {session.startup_threshold_segments} "
                    f"segments exceeds the smallest buffer target {smallest} of policy "
                    f"{p.label!r}; under weak measured throughput such a session waits "
                    f"for startup forever and is aborted as stuck"
                )

    if not violations:
        derived["sessions"] = (
            len(policies) * len(thr_labels) * len(user_labels) * repeats
        )
    return violations, list(dict.fromkeys(warnings)), derived
