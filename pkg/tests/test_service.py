"""HTTP service endpoints, exercised in-process through the client."""

import pytest

from prefetchsim import (
    Playlist,
    SessionConfig,
    UserTrace,
    make_policy,
    simulate_session,
)
from prefetchsim.client import ServiceClient, ServiceError
from prefetchsim.experiment import config_from_dict, run_experiment
from prefetchsim.metrics import report_to_json
from prefetchsim.traces import ThroughputTrace, generate_user_trace


@pytest.fixture(scope="module")
def client():
    return ServiceClient()


def test_healthz(client):
    body = client.get("/healthz")
    assert body["status"] == "ok"
    assert body["version"]


SIMULATE_REQ = {
    "policy": "next-one",
    "throughput_trace": {"label": "flat", "values_kbps": [4000.0]},
    "user_trace": {"label": "u", "durations_s": [5.0, 2.5]},
    "playlist": {"count": 4, "video_duration_s": 15.0, "bitrate_kbps": 2000.0},
    "session": {"rng_seed": 0},
}


def test_simulate_matches_direct_engine_call(client):
    body = client.post("/simulate", SIMULATE_REQ)
    playlist = Playlist.uniform(
        count=4, duration_s=15.0, bitrate_kbps=2000.0, segment_duration_s=1.0
    )
    trace = ThroughputTrace(
        starts=(0.0,), rates_kbps=(4000.0,), duration_s=1.0, wrap=True, label="flat"
    )
    user = UserTrace(durations_s=(5.0, 2.5), label="u")
    direct = simulate_session(
        playlist, trace, user, make_policy("next-one"), SessionConfig()
    )
    assert body["metrics"]["waste_s"] == pytest.approx(direct.metrics.waste_s)
    assert body["metrics"]["startup_delay_s"] == pytest.approx(
        direct.metrics.startup_delay_s
    )
    assert body["stats"]["downloads_completed"] == direct.stats.downloads_completed
    assert len(body["events"]) == len(direct.events)
    assert body["events"][0]["event"] == "session_start"


def test_simulate_can_omit_events(client):
    req = dict(SIMULATE_REQ, include_events=False)
    body = client.post("/simulate", req)
    assert "events" not in body or body["events"] is None


def test_simulate_supports_custom_policy_tables(client):
    req = dict(SIMULATE_REQ)
    req["policy"] = {
        "name": "network-aware",
        "buffer_target_table": {"rows": [[1.5, 2]], "otherwise": 1},
    }
    body = client.post("/simulate", req)
    assert body["metrics"]["waste_s"] >= 0.0


def test_simulate_rejects_unknown_policy(client):
    req = dict(SIMULATE_REQ, policy="greedy")
    with pytest.raises(ServiceError) as err:
        client.post("/simulate", req)
    assert "422" in str(err.value)


def test_simulate_rejects_user_trace_longer_than_playlist(client):
    req = dict(SIMULATE_REQ)
    req["playlist"] = dict(req["playlist"], count=1)
    with pytest.raises(ServiceError) as err:
        client.post("/simulate", req)
    assert "422" in str(err.value)


EXPERIMENT_RAW = {
    "playlist": {"video_duration_s": 15.0, "bitrate_kbps": 2000.0},
    "session": {"rng_seed": 5},
    "policies": ["network-aware", "next-one"],
    "throughput_traces": [{"label": "flat", "values_kbps": [2617.0]}],
    "user_traces": [
        {"label": "gen", "mean_s": 5.0, "std_s": 2.0, "total_s": 25.0, "seed": 9}
    ],
    "repeats": 2,
}


def test_experiments_run_matches_library(client):
    body = client.post("/experiments/run", EXPERIMENT_RAW)
    expected = report_to_json(run_experiment(config_from_dict(EXPERIMENT_RAW)).report)
    assert body["report"] == expected


def test_experiments_run_event_logs_opt_in(client):
    body = client.post("/experiments/run", EXPERIMENT_RAW)
    assert not body.get("event_logs")
    with_events = client.post(
        "/experiments/run", dict(EXPERIMENT_RAW, include_events=True)
    )
    logs = with_events["event_logs"]
    assert len(logs) == 2 * 1 * 1 * 2  # policies x thr x user x repeats
    assert logs[0]["policy"] == "network-aware"
    assert logs[0]["events"][0]["event"] == "session_start"


def test_experiments_run_rejects_bad_config(client):
    bad = dict(EXPERIMENT_RAW, policies=["greedy"])
    with pytest.raises(ServiceError) as err:
        client.post("/experiments/run", bad)
    assert "422" in str(err.value)


def test_generate_user_trace_endpoint(client):
    req = {"mean_s": 6.0, "std_s": 3.0, "total_s": 40.0, "seed": 21}
    body = client.post("/traces/user/generate", req)
    expected = generate_user_trace(6.0, 3.0, 40.0, seed=21)
    assert body["durations_s"] == pytest.approx(list(expected.durations_s))
    assert body["metadata"]["seed"] == 21
    again = client.post("/traces/user/generate", req)
    assert again["durations_s"] == body["durations_s"]


def test_validate_endpoint_reports_violations(client):
    raw = dict(EXPERIMENT_RAW, policies=["greedy"], repeats=0)
    body = client.post("/config/validate", {"config": raw})
    assert body["valid"] is False
    joined = "\n".join(body["violations"])
    assert "greedy" in joined
    assert "repeats" in joined


def test_validate_endpoint_clean_config(client):
    body = client.post("/config/validate", {"config": EXPERIMENT_RAW})
    assert body["valid"] is True
    assert body["violations"] == []
    assert body["derived"]["sessions"] == 4


def test_remote_mode_error_is_wrapped():
    bad = ServiceClient(server_url="http://127.0.0.1:1")
    with pytest.raises(ServiceError):
        bad.get("/healthz")
