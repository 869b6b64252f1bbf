"""Request and response bodies for the HTTP service.

Everything is passed by value: throughput traces as kbps bins, user traces as
durations or generator parameters. File handling stays with the client so a
remote server never touches the caller's filesystem.
"""

from pydantic import BaseModel, Field


class TableBody(BaseModel):
    rows: list[tuple[float, int]]
    otherwise: int


class PolicyBody(BaseModel):
    name: str
    label: str | None = None
    buffer_target_table: TableBody | None = None
    lookahead_table: TableBody | None = None


class QoeWeightsBody(BaseModel):
    bitrate: float = 1.0
    rebuffer: float = 1.0
    startup: float = 1.0
    waste: float = 1.0


class SessionBody(BaseModel):
    startup_threshold_segments: int = 1
    throughput_window_s: float = 10.0
    rng_seed: int = 0
    count_residual_buffers_as_waste: bool = True
    qoe_weights: QoeWeightsBody = Field(default_factory=QoeWeightsBody)


class PlaylistBody(BaseModel):
    count: int | str = "auto"
    video_duration_s: float = 15.0
    bitrate_kbps: float = 2000.0
    segment_duration_s: float = 1.0


class ThroughputTraceBody(BaseModel):
    label: str
    values_kbps: list[float]
    wrap: bool = True


class UserTraceBody(BaseModel):
    """Either explicit durations or generator parameters, like config entries."""

    label: str
    durations_s: list[float] | None = None
    mean_s: float | None = None
    std_s: float | None = None
    total_s: float | None = None
    seed: int | None = None


class SimulateRequest(BaseModel):
    policy: PolicyBody | str
    throughput_trace: ThroughputTraceBody
    user_trace: UserTraceBody
    playlist: PlaylistBody = Field(default_factory=PlaylistBody)
    session: SessionBody = Field(default_factory=SessionBody)
    include_events: bool = True


class VideoMetricsBody(BaseModel):
    video_id: int
    bitrate_kbps: float
    watched_s: float
    waste_s: float
    startup_delay_s: float
    rebuffer_s: float
    residual_s: float
    downloaded_s: float
    wasted_kbit: float


class SessionMetricsBody(BaseModel):
    watched_s: float
    waste_s: float
    startup_delay_s: float
    rebuffer_s: float
    residual_s: float
    downloaded_s: float
    wasted_kbit: float
    overall_quality: float
    per_video: list[VideoMetricsBody]


class SessionStatsBody(BaseModel):
    wall_clock_end_s: float
    max_current_buffer_s: float
    max_noncurrent_buffer_s: float
    downloads_completed: int
    downloads_aborted: int


class SimulateResponse(BaseModel):
    metrics: SessionMetricsBody
    stats: SessionStatsBody
    events: list[dict] | None = None


class ExperimentRequest(BaseModel):
    throughput_traces: list[ThroughputTraceBody]
    user_traces: list[UserTraceBody]
    policies: list[PolicyBody | str] = ["network-aware", "next-one", "waterfall"]
    playlist: PlaylistBody = Field(default_factory=PlaylistBody)
    session: SessionBody = Field(default_factory=SessionBody)
    repeats: int = 1
    include_events: bool = False


class EventLogBody(BaseModel):
    policy: str
    thru_trace: str
    user_trace: str
    repeat: int
    seed: int
    events: list[dict]


class ExperimentResponse(BaseModel):
    # the report as emitted by the json format: cells, reductions, meta
    report: dict
    event_logs: list[EventLogBody] | None = None


class GenerateUserTraceRequest(BaseModel):
    mean_s: float
    std_s: float
    total_s: float
    seed: int
    label: str = "generated"


class GenerateUserTraceResponse(BaseModel):
    label: str
    durations_s: list[float]
    metadata: dict


class ValidateRequest(BaseModel):
    # raw config in the documented file layout; trace paths only resolve
    # when the server shares the client's filesystem, so send values inline
    config: dict


class ValidateResponse(BaseModel):
    valid: bool
    violations: list[str]
    warnings: list[str]
    derived: dict


class HealthResponse(BaseModel):
    status: str
    version: str
