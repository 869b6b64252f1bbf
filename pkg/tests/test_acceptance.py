"""Acceptance gate: one test per release criterion.

Each test is a single pass/fail line under pytest -v. Runtime-limited
criteria assert their own budget so a regression in speed also fails here.
"""

import filecmp
import json
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

from prefetchsim import (
    Playlist,
    SessionConfig,
    UserTrace,
    make_policy,
    simulate_session,
)
from prefetchsim.cli import main
from prefetchsim.experiment import load_experiment_config, run_experiment
from prefetchsim.policies import compute_buffer_target, compute_lookahead
from prefetchsim.traces import ThroughputTrace, generate_user_trace, load_throughput_trace
from timeline_oracle import events_to_float, oracle_events

REPO = Path(__file__).resolve().parent.parent
R = 2000.0

BUNDLED_TRACES = [
    REPO / "traces" / "throughput" / "trace1.txt",
    REPO / "traces" / "throughput" / "trace2.txt",
    REPO / "traces" / "throughput" / "trace3.txt",
]


def test_criterion_a_threshold_tables_exact():
    # Sweep alpha over [0, 4R] in 0.01R steps; both tables must match their
    # stated breakpoints exactly, no tolerance.
    started = time.time()
    for i in range(401):
        alpha = (i / 100.0) * R
        ratio = alpha / R
        target = 4 if ratio <= 1.5 else (3 if ratio <= 2.5 else 2)
        if ratio <= 1.5:
            ahead = 7
        elif ratio <= 2.0:
            ahead = 4
        elif ratio <= 2.5:
            ahead = 7
        else:
            ahead = 12
        assert compute_buffer_target(alpha, R) == target, f"alpha={alpha}"
        assert compute_lookahead(alpha, R) == ahead, f"alpha={alpha}"
    assert compute_buffer_target(None, R) == 4
    assert compute_lookahead(None, R) == 7
    assert time.time() - started < 1.0


def _engine_events(policy, count, segs, tau, rates, user):
    playlist = Playlist.uniform(
        count=count, duration_s=segs * tau, bitrate_kbps=R, segment_duration_s=tau
    )
    trace = ThroughputTrace(
        starts=tuple(float(i) for i in range(len(rates))),
        rates_kbps=tuple(float(r) for r in rates),
        duration_s=float(len(rates)),
        wrap=True,
    )
    ut = UserTrace(durations_s=tuple(float(d) for d in user))
    result = simulate_session(playlist, trace, ut, make_policy(policy), SessionConfig())
    return result.events


def _assert_logs_match(engine_log, oracle_log, label):
    assert len(engine_log) == len(oracle_log), (
        f"{label}: {len(engine_log)} engine events vs {len(oracle_log)} oracle"
    )
    for i, (got, want) in enumerate(zip(engine_log, oracle_log)):
        assert got["event"] == want["event"], f"{label} @{i}: {got} vs {want}"
        assert set(got) == set(want), f"{label} @{i}: field sets differ"
        for key, want_value in want.items():
            got_value = got[key]
            if isinstance(want_value, float):
                tol = 1e-9 * max(1.0, abs(want_value))
                assert abs(got_value - want_value) <= tol, (
                    f"{label} @{i} {key}: {got_value} vs {want_value}"
                )
            else:
                assert got_value == want_value, (
                    f"{label} @{i} {key}: {got_value!r} vs {want_value!r}"
                )


# Prime rates against R=2000 keep download completions, drain touches, and
# scrolls off exact collisions, where float ties could legally reorder an
# immediately-aborted download against the exact-arithmetic reference.
GRID_RATES = (733, 1531, 2617, 5501)
GRID_PATTERNS = (
    [733],
    [5501],
    [733, 5501],
    [5501, 733],
    [1531, 2617, 733],
    [2617, 733, 5501, 1531],
)
GRID_USERS = {
    1: ([Fraction(23, 10)], [Fraction(7, 10)]),
    2: ([Fraction(17, 10), Fraction(42, 10)], [Fraction(3), Fraction(11, 10)]),
    3: (
        [Fraction(2), Fraction(9, 10), Fraction(65, 10)],
        [Fraction(13, 10), Fraction(26, 10), Fraction(37, 10)],
    ),
}


def test_criterion_b_oracle_equivalence():
    started = time.time()
    sessions = 0
    for videos in (1, 2, 3):
        for segs in (1, 2, 3, 4, 5):
            count = videos + 2  # spare playlist room exercises prefetch-ahead
            for rates in GRID_PATTERNS:
                assert set(rates) <= set(GRID_RATES)
                for user in GRID_USERS[videos]:
                    user = [min(d, segs) for d in user]
                    for policy in ("network-aware", "next-one", "waterfall"):
                        label = f"{policy} v{videos} s{segs} {rates}"
                        oracle = events_to_float(
                            oracle_events(policy, count, segs, 1, R, rates, user)
                        )
                        engine = _engine_events(policy, count, segs, 1.0, rates, user)
                        _assert_logs_match(engine, oracle, label)
                        sessions += 1
    elapsed = time.time() - started
    assert sessions == 3 * 5 * 6 * 2 * 3
    assert elapsed < 10.0, f"grid took {elapsed:.1f}s"


def _randomized_sessions(n):
    # Bundled synthetic traces, random Gaussian users, random knobs.
    rng = random.Random(20260818)
    traces = [load_throughput_trace(str(p)) for p in BUNDLED_TRACES]
    for _ in range(n):
        trace = rng.choice(traces)
        user = generate_user_trace(
            mean_s=rng.uniform(3.0, 14.0),
            std_s=rng.uniform(0.5, 7.0),
            total_s=rng.uniform(30.0, 90.0),
            seed=rng.randrange(1 << 30),
        )
        playlist = Playlist.uniform(
            count=len(user) + rng.randint(0, 12),
            duration_s=15.0,
            bitrate_kbps=R,
            segment_duration_s=1.0,
        )
        config = SessionConfig(
            count_residual_buffers_as_waste=rng.random() < 0.5,
        )
        yield playlist, trace, user, config


SESSION_SWEEP = 1000


def test_criterion_c_conservation_over_randomized_sessions():
    started = time.time()
    policies = ("network-aware", "next-one", "waterfall")
    for i, (playlist, trace, user, config) in enumerate(
        _randomized_sessions(SESSION_SWEEP)
    ):
        policy = make_policy(policies[i % 3])
        metrics = simulate_session(playlist, trace, user, policy, config).metrics
        books = metrics.watched_s + metrics.waste_s + metrics.residual_s
        assert metrics.downloaded_s == pytest.approx(books, abs=1e-9), (
            f"session {i}: downloaded {metrics.downloaded_s} != accounted {books}"
        )
        if config.count_residual_buffers_as_waste:
            assert metrics.residual_s == 0.0
    assert time.time() - started < 60.0


def test_criterion_d_buffer_caps_never_exceeded():
    started = time.time()
    tau = 1.0
    for i, (playlist, trace, user, config) in enumerate(
        _randomized_sessions(SESSION_SWEEP)
    ):
        stats = simulate_session(
            playlist, trace, user, make_policy("network-aware"), config
        ).stats
        assert stats.max_noncurrent_buffer_s <= 4 * tau + 1e-9, f"session {i}"
        assert stats.max_current_buffer_s <= 4 * tau + tau + 1e-9, f"session {i}"
    assert time.time() - started < 60.0


def _per_trace_totals(report, users, policy, thr, metric):
    return sum(getattr(report.cell(policy, thr, u), metric) for u in users)


def test_criterion_e_default_matrix_reductions():
    started = time.time()
    config, _ = load_experiment_config(str(REPO / "configs" / "default_matrix.json"))
    assert config.repeats >= 20
    report = run_experiment(config).report
    users = [u.label for u in config.user_traces]
    traces = [t.label for t in config.throughput_traces]
    baselines = ("next-one", "waterfall")

    for thr in traces:
        for baseline in baselines:
            na = _per_trace_totals(report, users, "network-aware", thr, "waste_s")
            base = _per_trace_totals(report, users, baseline, thr, "waste_s")
            reduction = (1.0 - na / base) * 100.0
            assert 25.0 <= reduction <= 65.0, (
                f"{thr} vs {baseline}: waste reduction {reduction:.1f}%"
            )

    for thr in traces[:2]:
        for metric in ("startup_s", "rebuffer_s"):
            for baseline in baselines:
                na = _per_trace_totals(report, users, "network-aware", thr, metric)
                base = _per_trace_totals(report, users, baseline, thr, metric)
                assert base > 0.0, f"{thr} {baseline} {metric} baseline is zero"
                reduction = (1.0 - na / base) * 100.0
                assert reduction >= 80.0, (
                    f"{thr} vs {baseline}: {metric} reduction {reduction:.1f}%"
                )

    trace3 = traces[2]
    for policy in ("network-aware",) + baselines:
        for user in users:
            cell = report.cell(policy, trace3, user)
            assert min(r.startup_s for r in cell.runs) > 0.0, (
                f"{trace3}: {policy}/{user} reached zero start-up delay"
            )
    for baseline in baselines:
        na = _per_trace_totals(report, users, "network-aware", trace3, "startup_s")
        base = _per_trace_totals(report, users, baseline, trace3, "startup_s")
        reduction = (1.0 - na / base) * 100.0
        assert reduction >= 20.0, (
            f"{trace3} vs {baseline}: startup reduction {reduction:.1f}%"
        )

    assert time.time() - started < 120.0


def test_criterion_f_matrix_rerun_is_byte_identical(tmp_path):
    config = REPO / "configs" / "default_matrix.json"
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert main(["run", str(config), "--out", str(out1), "--no-event-logs"]) == 0
    assert main(["run", str(config), "--out", str(out2), "--no-event-logs"]) == 0
    for name in ("report.csv", "waste.csv", "startup.csv", "rebuffer.csv", "meta.json"):
        assert filecmp.cmp(out1 / name, out2 / name, shallow=False), name
    header = (out1 / "report.csv").read_text().splitlines()[0]
    assert header == "policy,thru_trace,user_trace,waste_s,startup_s,rebuffer_s,oq,waste_mbit"
    meta = json.loads((out1 / "meta.json").read_text())
    assert meta["repeats"] >= 20
