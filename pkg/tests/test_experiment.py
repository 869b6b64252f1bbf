"""Experiment configs, the run matrix, and config diagnostics."""

import dataclasses

import pytest

from prefetchsim.experiment import (
    AUTO_PLAYLIST_MARGIN,
    ExperimentConfig,
    PolicySetting,
    ThroughputSource,
    UserSource,
    collect_violations,
    config_from_dict,
    resolve_user_trace,
    run_experiment,
)
from prefetchsim.metrics import report_to_csv
from prefetchsim.model import ValidationError
from prefetchsim.policies import ThresholdTable
from prefetchsim.traces import generate_user_trace


def base_raw(**overrides):
    raw = {
        "playlist": {"video_duration_s": 15.0, "bitrate_kbps": 2000.0},
        "session": {"rng_seed": 3},
        "policies": ["network-aware", "next-one", "waterfall"],
        "throughput_traces": [
            {"label": "flat", "values_kbps": [2617.0]},
            {"label": "steps", "values_kbps": [5501.0, 733.0]},
        ],
        "user_traces": [
            {"label": "gen", "mean_s": 5.0, "std_s": 2.0, "total_s": 30.0, "seed": 11},
            {"label": "fixed", "durations_s": [4.0, 9.5, 2.0]},
        ],
        "repeats": 2,
    }
    raw.update(overrides)
    return raw


def test_config_from_dict_round_trip():
    config = config_from_dict(base_raw())
    assert [p.label for p in config.policies] == [
        "network-aware",
        "next-one",
        "waterfall",
    ]
    assert config.session.rng_seed == 3
    assert config.repeats == 2
    assert config.throughput_traces[1].values_kbps == (5501.0, 733.0)
    assert config.user_traces[1].durations_s == (4.0, 9.5, 2.0)


def test_policy_entries_accept_custom_tables():
    raw = base_raw(
        policies=[
            {
                "name": "network-aware",
                "label": "na-tight",
                "buffer_target_table": {"rows": [[1.5, 2], [2.5, 2]], "otherwise": 1},
                "lookahead_table": {"rows": [[2.0, 3]], "otherwise": 5},
            },
            "next-one",
        ]
    )
    config = config_from_dict(raw)
    setting = config.policies[0]
    assert setting.label == "na-tight"
    assert setting.buffer_target_table == ThresholdTable(
        rows=((1.5, 2), (2.5, 2)), otherwise=1
    )
    policy = setting.build()
    assert policy.buffer_target_table.otherwise == 1


def test_policy_entry_rejects_unknown_name_and_fields():
    with pytest.raises(ValidationError):
        config_from_dict(base_raw(policies=["greedy"]))
    with pytest.raises(ValidationError):
        config_from_dict(
            base_raw(policies=[{"name": "network-aware", "extra": True}])
        )
    with pytest.raises(ValidationError):
        config_from_dict(
            base_raw(policies=[{"name": "next-one", "lookahead_table": {"rows": [[1, 1]]}}])
        )


def test_policy_table_rows_must_increase():
    bad = {
        "name": "network-aware",
        "buffer_target_table": {"rows": [[2.5, 4], [1.5, 3]], "otherwise": 2},
    }
    with pytest.raises(ValidationError):
        config_from_dict(base_raw(policies=[bad]))


def test_duplicate_policy_labels_rejected():
    with pytest.raises(ValidationError):
        config_from_dict(base_raw(policies=["next-one", "next-one"]))


def test_repeats_must_be_positive():
    with pytest.raises(ValidationError):
        config_from_dict(base_raw(repeats=0))


def test_user_source_seed_pins_and_falls_back():
    pinned = UserSource(label="p", mean_s=5.0, std_s=2.0, total_s=30.0, seed=11)
    trace, seed = resolve_user_trace(pinned, repeat=0, base_seed=999)
    assert seed == 11
    assert trace.durations_s == generate_user_trace(5.0, 2.0, 30.0, seed=11).durations_s
    _, seed1 = resolve_user_trace(pinned, repeat=1, base_seed=999)
    assert seed1 == 12

    unpinned = UserSource(label="u", mean_s=5.0, std_s=2.0, total_s=30.0)
    _, seed = resolve_user_trace(unpinned, repeat=0, base_seed=999)
    assert seed == 999
    _, seed2 = resolve_user_trace(unpinned, repeat=2, base_seed=999)
    assert seed2 == 1001


def test_run_experiment_matrix_shape_and_reductions():
    config = config_from_dict(base_raw())
    outcome = run_experiment(config)
    report = outcome.report
    assert len(report.cells) == 3 * 2 * 2
    assert set(report.reductions) == {"next-one", "waterfall"}
    red = report.reductions["next-one"]["flat"]["gen"]
    assert set(red) == {"waste_s", "startup_s", "rebuffer_s"}
    for cell in report.cells:
        assert len(cell.runs) == 2
        mean_waste = sum(r.waste_s for r in cell.runs) / 2
        assert cell.waste_s == pytest.approx(mean_waste, abs=1e-12)


def test_run_experiment_is_deterministic():
    config = config_from_dict(base_raw())
    a = report_to_csv(run_experiment(config).report)
    b = report_to_csv(run_experiment(config).report)
    assert a == b


def test_seed_override_changes_unpinned_traces_only():
    raw = base_raw()
    config = config_from_dict(raw)
    del raw["user_traces"][0]["seed"]
    reseeded = dataclasses.replace(
        config_from_dict(raw),
        session=dataclasses.replace(config.session, rng_seed=777),
    )
    base = run_experiment(config).report
    moved = run_experiment(reseeded).report
    gen_base = base.cell("next-one", "flat", "gen")
    gen_moved = moved.cell("next-one", "flat", "gen")
    assert gen_base.runs[0].seed == 11
    assert gen_moved.runs[0].seed == 777
    fixed_base = base.cell("next-one", "flat", "fixed")
    fixed_moved = moved.cell("next-one", "flat", "fixed")
    assert fixed_base.waste_s == pytest.approx(fixed_moved.waste_s, abs=1e-12)


def test_reductions_skipped_for_ambiguous_sensitivity_sweeps():
    raw = base_raw(
        policies=[
            "network-aware",
            {"name": "network-aware", "label": "na-2"},
            "next-one",
        ]
    )
    outcome = run_experiment(config_from_dict(raw))
    assert outcome.report.reductions == {}


def test_meta_records_policies_and_seeds():
    config = config_from_dict(base_raw())
    meta = run_experiment(config).report.meta
    assert meta["repeats"] == 2
    assert [p["label"] for p in meta["policies"]] == [
        "network-aware",
        "next-one",
        "waterfall",
    ]
    gen_meta = meta["user_traces"]["gen"]
    assert gen_meta["generator"]["base_seed"] == 11
    assert gen_meta["repeats"][1]["seed"] == 12
    assert meta["user_traces"]["fixed"]["generator"] is None
    assert "timestamp" not in meta


def test_event_collection_is_opt_in():
    config = config_from_dict(base_raw())
    assert run_experiment(config).event_logs == ()
    logs = run_experiment(config, collect_events=True).event_logs
    assert len(logs) == len(run_experiment(config).report.cells) * config.repeats
    key, events = logs[0]
    assert events[0]["event"] == "session_start"
    assert key.policy == "network-aware"


def test_collect_violations_clean_config():
    violations, warnings, derived = collect_violations(base_raw())
    assert violations == []
    assert warnings == []
    assert derived["segments_per_video"] == 15
    assert derived["sessions"] == 3 * 2 * 2 * 2
    assert derived["auto_playlist_margin"] == AUTO_PLAYLIST_MARGIN


def test_collect_violations_reports_each_section():
    raw = base_raw(
        playlist={"video_duration_s": 10.0, "segment_duration_s": 3.0},
        policies=["greedy", "next-one"],
        repeats=0,
    )
    raw["user_traces"].append({"label": "neg", "durations_s": [-1.0]})
    violations, _, _ = collect_violations(raw)
    text = "\n".join(violations)
    assert "segment" in text  # segment duration does not divide the video
    assert "greedy" in text
    assert "repeats" in text
    assert "neg" in text or "durations" in text
    # One bad section does not hide the others.
    assert len(violations) >= 4


def test_collect_violations_missing_file_names_path():
    raw = base_raw(throughput_traces=["/nonexistent/thr.txt"])
    violations, _, _ = collect_violations(raw)
    assert any("/nonexistent/thr.txt" in v for v in violations)


def test_collect_violations_warns_on_unreachable_startup():
    raw = base_raw(session={"rng_seed": 0, "startup_threshold_segments": 3})
    violations, warnings, _ = collect_violations(raw)
    assert violations == []
    assert len(warnings) == 1
    assert "startup" in warnings[0] or "stuck" in warnings[0]


def test_collect_violations_playlist_too_small():
    raw = base_raw(playlist={"count": 2})
    violations, _, _ = collect_violations(raw)
    assert any("playlist" in v for v in violations)


def test_experiment_config_defaults():
    config = ExperimentConfig(
        throughput_traces=(ThroughputSource(label="x", values_kbps=(1000.0,)),),
        user_traces=(UserSource(label="u", durations_s=(5.0,)),),
    )
    config.validate()
    assert [p.name for p in config.policies] == [
        "network-aware",
        "next-one",
        "waterfall",
    ]
    assert config.repeats == 1


def test_policy_setting_validation():
    with pytest.raises(ValidationError):
        PolicySetting(name="nope", label="x").validate()
    with pytest.raises(ValidationError):
        PolicySetting(
            name="next-one",
            label="x",
            buffer_target_table=ThresholdTable(rows=((1.0, 1),), otherwise=1),
        ).validate()
    ok = PolicySetting(name="waterfall", label="wf")
    assert ok.validate() is ok
