"""HTTP front end over the simulation core.

Endpoints cover one-off sessions, the full comparison matrix, user trace
generation, and config validation. Handlers convert request bodies to core
dataclasses, run the pure core, and map its validation errors to 422s; the
simulator itself has no knowledge of the service.
"""

from dataclasses import asdict

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..engine import PolicyContractError, SimulationStuckError, simulate_session
from ..experiment import (
    ExperimentConfig,
    PlaylistSettings,
    PolicySetting,
    ThroughputSource,
    UserSource,
    collect_violations,
    resolve_throughput,
    resolve_user_trace,
    run_experiment,
)
from ..metrics import report_to_json
from ..model import QoeWeights, SessionConfig, ValidationError
from ..policies import ThresholdTable
from ..traces import TraceParseError, generate_user_trace
from .schemas import (
    EventLogBody,
    ExperimentRequest,
    ExperimentResponse,
    GenerateUserTraceRequest,
    GenerateUserTraceResponse,
    HealthResponse,
    PlaylistBody,
    PolicyBody,
    SessionBody,
    SimulateRequest,
    SimulateResponse,
    ThroughputTraceBody,
    UserTraceBody,
    ValidateRequest,
    ValidateResponse,
)

_CLIENT_ERRORS = (ValidationError, TraceParseError, PolicyContractError, SimulationStuckError)


def _table(body) -> ThresholdTable | None:
    if body is None:
        return None
    return ThresholdTable(
        rows=tuple((float(r), int(v)) for r, v in body.rows),
        otherwise=int(body.otherwise),
    )


def _policy_setting(body: PolicyBody | str) -> PolicySetting:
    if isinstance(body, str):
        return PolicySetting(name=body, label=body)
    return PolicySetting(
        name=body.name,
        label=body.label or body.name,
        buffer_target_table=_table(body.buffer_target_table),
        lookahead_table=_table(body.lookahead_table),
    )


def _playlist_settings(body: PlaylistBody) -> PlaylistSettings:
    return PlaylistSettings(
        count=body.count,
        video_duration_s=body.video_duration_s,
        bitrate_kbps=body.bitrate_kbps,
        segment_duration_s=body.segment_duration_s,
    )


def _session_config(body: SessionBody) -> SessionConfig:
    return SessionConfig(
        startup_threshold_segments=body.startup_threshold_segments,
        throughput_window_s=body.throughput_window_s,
        qoe_weights=QoeWeights(**body.qoe_weights.model_dump()),
        rng_seed=body.rng_seed,
        count_residual_buffers_as_waste=body.count_residual_buffers_as_waste,
    )


def _throughput_source(body: ThroughputTraceBody) -> ThroughputSource:
    return ThroughputSource(
        label=body.label, wrap=body.wrap, values_kbps=tuple(body.values_kbps)
    )


def _user_source(body: UserTraceBody) -> UserSource:
    return UserSource(
        label=body.label,
        durations_s=tuple(body.durations_s) if body.durations_s is not None else None,
        mean_s=body.mean_s,
        std_s=body.std_s,
        total_s=body.total_s,
        seed=body.seed,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="prefetchsim", version=__version__)

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=SimulateResponse, response_model_exclude_none=True)
    def simulate(req: SimulateRequest):
        try:
            setting = _policy_setting(req.policy).validate()
            playlist_settings = _playlist_settings(req.playlist).validate()
            session = _session_config(req.session).validate()
            trace = resolve_throughput(_throughput_source(req.throughput_trace).validate())
            user, _ = resolve_user_trace(
                _user_source(req.user_trace).validate(), 0, session.rng_seed
            )
            playlist = playlist_settings.build(len(user))
            result = simulate_session(playlist, trace, user, setting.build(), session)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return {
            "metrics": asdict(result.metrics),
            "stats": asdict(result.stats),
            "events": result.events if req.include_events else None,
        }

    @app.post(
        "/experiments/run",
        response_model=ExperimentResponse,
        response_model_exclude_none=True,
    )
    def experiments_run(req: ExperimentRequest):
        try:
            config = ExperimentConfig(
                playlist=_playlist_settings(req.playlist),
                session=_session_config(req.session),
                policies=tuple(_policy_setting(p) for p in req.policies),
                throughput_traces=tuple(_throughput_source(t) for t in req.throughput_traces),
                user_traces=tuple(_user_source(u) for u in req.user_traces),
                repeats=req.repeats,
            )
            outcome = run_experiment(config, collect_events=req.include_events)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        logs = None
        if req.include_events:
            logs = [
                EventLogBody(
                    policy=key.policy,
                    thru_trace=key.thru_trace,
                    user_trace=key.user_trace,
                    repeat=key.repeat,
                    seed=key.seed,
                    events=events,
                )
                for key, events in outcome.event_logs
            ]
        return {"report": report_to_json(outcome.report), "event_logs": logs}

    @app.post("/traces/user/generate", response_model=GenerateUserTraceResponse)
    def traces_user_generate(req: GenerateUserTraceRequest):
        try:
            trace = generate_user_trace(
                mean_s=req.mean_s,
                std_s=req.std_s,
                total_s=req.total_s,
                seed=req.seed,
                label=req.label,
            )
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return {
            "label": trace.label,
            "durations_s": list(trace.durations_s),
            "metadata": dict(trace.metadata),
        }

    @app.post("/config/validate", response_model=ValidateResponse)
    def config_validate(req: ValidateRequest):
        violations, warnings, derived = collect_violations(req.config)
        return {
            "valid": not violations,
            "violations": violations,
            "warnings": warnings,
            "derived": derived,
        }

    return app


app = create_app()
