"""Deterministic single-connection download/playback simulator.

One session replays a user scrolling through a video feed against a throughput
trace: at most one segment download is in flight at a time, the policy is
re-polled whenever the connection is free, playback consumes the current
video's buffer in real time, and the user scrolls to the next video the moment
the intended watch duration (clamped to the video length) has played out.
Scrolling discards the abandoned video's data and aborts its in-flight
download, if any. The session ends when the user trace is exhausted.

Records that share one timestamp appear in the event log in this order:

1. download_complete, then its immediate consequence (stall_end or
   playback_start of the video that just reached the startup threshold);
2. scroll, then download_abort when the scroll cancels the in-flight job,
   then playback_start of the next video when it can start instantly;
3. session_end;
4. download_start of the next decision; a stall that begins at that same
   instant (empty buffer at job start) logs stall_begin right after it.

While the policy is idle, pending wake-ups tie-break as: scroll, then
measurement-window expiry, then buffer drain. At the drain instant the buffer
sits exactly on the policy threshold and strictly drops below it immediately
after, so the engine issues the current-video download directly at that
instant (the earliest enabled time) instead of re-polling the pure policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .metrics import aggregate
from .model import (
    BufferState,
    Playlist,
    SessionConfig,
    SessionMetrics,
    ValidationError,
    VideoMetrics,
    validate_playlist,
)
from .policies import Download, PolicyView, PrefetchPolicy, VideoView
from .traces import ThroughputSampleLog, ThroughputTrace, UserTrace

_WAITING = "waiting"
_PLAYING = "playing"
_STALLED = "stalled"


class SimulationError(RuntimeError):
    pass


class PolicyContractError(SimulationError):
    """A policy returned a decision that violates its contract."""


class SimulationStuckError(SimulationError):
    """The policy idles while playback cannot make progress on its own."""


@dataclass(frozen=True)
class DownloadJob:
    """One segment transfer over the single connection."""

    video_id: int
    segment_index: int
    kbits: float
    started_s: float


def execute_download(job: DownloadJob, trace: ThroughputTrace) -> tuple[float, float]:
    """Completion time and measured throughput (kbits / download seconds)."""
    ends_s = trace.download_end(job.started_s, job.kbits)
    return ends_s, job.kbits / (ends_s - job.started_s)


def buffer_after_download(
    prev_buffer_s: float, download_duration_s: float, segment_duration_s: float
) -> float:
    """Current-video buffer after one segment arrives while playback drains."""
    return max(prev_buffer_s - download_duration_s, 0.0) + segment_duration_s


def stall_time(prev_buffer_s: float, download_duration_s: float) -> float:
    """Playback gap caused by a download outlasting the buffer."""
    return max(download_duration_s - prev_buffer_s, 0.0)


def startup_delay(arrival_s: float, scroll_s: float) -> float:
    """Wait between opening a video and having enough of it to start."""
    return max(arrival_s - scroll_s, 0.0)


@dataclass(frozen=True)
class SessionStats:
    """Engine-side diagnostics alongside the metrics."""

    wall_clock_end_s: float
    max_current_buffer_s: float
    max_noncurrent_buffer_s: float
    downloads_completed: int
    downloads_aborted: int


@dataclass(frozen=True)
class SessionResult:
    metrics: SessionMetrics
    events: list[dict]
    stats: SessionStats


def write_event_log(events: list[dict], path: str) -> None:
    """One JSON object per line, in timeline order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for event in events:
            fh.write(json.dumps(event) + "\n")


def simulate_session(
    playlist: Playlist,
    throughput_trace: ThroughputTrace,
    user_trace: UserTrace,
    policy: PrefetchPolicy,
    config: SessionConfig,
) -> SessionResult:
    """Run one session to completion and return metrics, event log, and stats."""
    validate_playlist(playlist)
    config.validate()
    if len(user_trace) > len(playlist):
        raise ValidationError(
            f"user trace has {len(user_trace)} entries but the playlist only "
            f"{len(playlist)} videos"
        )
    return _Simulation(playlist, throughput_trace, user_trace, policy, config).run()


class _Simulation:
    def __init__(
        self,
        playlist: Playlist,
        trace: ThroughputTrace,
        user: UserTrace,
        policy: PrefetchPolicy,
        config: SessionConfig,
    ) -> None:
        self.playlist = playlist
        self.trace = trace
        self.user = user
        self.policy = policy
        self.config = config
        self.tau = playlist.videos[0].segment_duration_s

        n = len(playlist)
        self.state = [BufferState() for _ in range(n)]
        self.watched_s = [0.0] * n
        self.waste_s = [0.0] * n
        self.startup_s = [0.0] * n
        self.rebuffer_s = [0.0] * n
        self.residual_s = [0.0] * n
        self.wasted_kbit = [0.0] * n
        self.scroll_time = [0.0] * n

        self.now = 0.0
        self.cur = 1
        self.mode = _WAITING
        self.watch_point = 0.0
        self.stall_since = 0.0
        self.job: DownloadJob | None = None
        self.job_ends = 0.0
        self.samples = ThroughputSampleLog()
        self.events: list[dict] = []
        self.session_over = False
        self.max_cur_buffer = 0.0
        self.max_noncur_buffer = 0.0
        self.completed = 0
        self.aborted = 0
        self._last_ts = 0.0

    # -- helpers ---------------------------------------------------------

    def _st(self, video_id: int) -> BufferState:
        return self.state[video_id - 1]

    def _spec(self, video_id: int):
        return self.playlist.video(video_id)

    def _required_start(self, video_id: int) -> int:
        return min(self.config.startup_threshold_segments, self._spec(video_id).segment_count)

    def _emit(self, kind: str, **fields) -> None:
        if self.now < self._last_ts - 1e-12:
            raise SimulationError(
                f"event log went backwards: {kind} at {self.now} after {self._last_ts}"
            )
        self._last_ts = self.now
        self.events.append({"t": self.now, "event": kind, **fields})

    def _view(self) -> PolicyView:
        tau = self.tau
        videos = tuple(
            VideoView(
                video_id=i,
                buffered_s=self._st(i).buffered_s(tau),
                downloaded_segments=self._st(i).downloaded_segments,
                total_segments=self._spec(i).segment_count,
            )
            for i in range(self.cur, len(self.playlist) + 1)
        )
        return PolicyView(
            current_video_id=self.cur,
            playlist_length=len(self.playlist),
            segment_duration_s=tau,
            current_bitrate_kbps=self._spec(self.cur).bitrate_kbps,
            avg_throughput_kbps=self.samples.average_kbps(
                self.now, self.config.throughput_window_s
            ),
            videos=videos,
        )

    # -- main loop -------------------------------------------------------

    def run(self) -> SessionResult:
        self._emit(
            "session_start",
            policy=self.policy.name,
            videos=len(self.playlist),
            user_videos=len(self.user),
        )
        self._open_video(1)
        while not self.session_over:
            view = self._view()
            decision = self.policy.decide(view)
            if decision is None:
                self._idle_advance(view)
            else:
                self._start_download(decision)
        return self._result()

    def _open_video(self, video_id: int) -> None:
        self.cur = video_id
        self.scroll_time[video_id - 1] = self.now
        self.watch_point = min(
            self.user.durations_s[video_id - 1], self._spec(video_id).duration_s
        )
        if self._st(video_id).downloaded_segments >= self._required_start(video_id):
            self.startup_s[video_id - 1] = 0.0
            self._emit("playback_start", video=video_id, startup_delay_s=0.0)
            self.mode = _PLAYING
        else:
            self.mode = _WAITING

    def _start_download(self, decision: Download) -> None:
        v = decision.video_id
        if not self.cur <= v <= len(self.playlist):
            raise PolicyContractError(
                f"{self.policy.name} targeted video {v}, outside [{self.cur}, {len(self.playlist)}]"
            )
        st = self._st(v)
        spec = self._spec(v)
        if st.discarded:
            raise PolicyContractError(f"{self.policy.name} targeted discarded video {v}")
        if st.downloaded_segments >= spec.segment_count:
            raise PolicyContractError(f"{self.policy.name} targeted complete video {v}")
        if decision.segment_index != st.downloaded_segments:
            raise PolicyContractError(
                f"{self.policy.name} requested segment {decision.segment_index} of video "
                f"{v}; next in order is {st.downloaded_segments}"
            )
        job = DownloadJob(
            video_id=v,
            segment_index=decision.segment_index,
            kbits=spec.segment_kbits,
            started_s=self.now,
        )
        ends, _ = execute_download(job, self.trace)
        self._emit("download_start", video=v, segment=decision.segment_index)
        self.job = job
        self.job_ends = ends
        self._advance_playback(ends, inclusive=False)
        if self.session_over or self.job is None:
            return
        self._complete_job()

    def _complete_job(self) -> None:
        job = self.job
        assert job is not None
        self.now = self.job_ends
        duration = self.now - job.started_s
        measured = job.kbits / duration
        st = self._st(job.video_id)
        st.downloaded_segments += 1
        st.audit(self._spec(job.video_id))
        self.samples.append(self.now, measured)
        self.completed += 1
        buffered = st.buffered_s(self.tau)
        if job.video_id == self.cur:
            self.max_cur_buffer = max(self.max_cur_buffer, buffered)
        else:
            self.max_noncur_buffer = max(self.max_noncur_buffer, buffered)
        self._emit(
            "download_complete",
            video=job.video_id,
            segment=job.segment_index,
            duration_s=duration,
            measured_kbps=measured,
            buffered_s=buffered,
        )
        if job.video_id == self.cur:
            if (
                self.mode == _WAITING
                and st.downloaded_segments >= self._required_start(self.cur)
            ):
                delay = startup_delay(self.now, self.scroll_time[self.cur - 1])
                self.startup_s[self.cur - 1] = delay
                self._emit("playback_start", video=self.cur, startup_delay_s=delay)
                self.mode = _PLAYING
            elif self.mode == _STALLED:
                stalled = self.now - self.stall_since
                self.rebuffer_s[self.cur - 1] += stalled
                self._emit("stall_end", video=self.cur, stall_s=stalled)
                self.mode = _PLAYING
        self.job = None

    def _advance_playback(self, t_target: float, inclusive: bool) -> None:
        """Run playback (and any scrolls/stalls it causes) up to t_target.

        With inclusive=False a scroll landing exactly on t_target is left for
        the caller's completion handling first (completions win ties). Returns
        early when the session ends or a scroll aborts the in-flight job.
        """
        while not self.session_over:
            if self.mode != _PLAYING:
                self.now = t_target
                return
            st = self._st(self.cur)
            buffered = st.buffered_s(self.tau)
            t_scroll = self.now + (self.watch_point - st.played_s)
            t_empty = self.now + buffered
            if t_empty < t_scroll and t_empty < t_target:
                st.played_s = st.downloaded_segments * self.tau
                self.now = t_empty
                self.mode = _STALLED
                self.stall_since = t_empty
                self._emit("stall_begin", video=self.cur)
                continue
            scroll_fires = t_scroll <= t_target if inclusive else t_scroll < t_target
            if scroll_fires:
                self.now = t_scroll
                had_job = self.job is not None
                self._scroll()
                if self.session_over or (had_job and self.job is None):
                    return
                continue
            st.played_s += t_target - self.now
            self.now = t_target
            return

    def _scroll(self) -> None:
        c = self.cur
        st = self._st(c)
        spec = self._spec(c)
        watched = self.watch_point
        waste = st.downloaded_segments * self.tau - watched
        self.watched_s[c - 1] = watched
        self.waste_s[c - 1] = waste
        self.wasted_kbit[c - 1] += waste * spec.bitrate_kbps
        st.played_s = watched
        st.discarded = True
        last = c == len(self.user)
        next_id = None if last else c + 1
        self._emit(
            "scroll", from_video=c, to_video=next_id, watched_s=watched, waste_s=waste
        )
        if self.job is not None and self.job.video_id == c:
            partial = self.trace.kbits_between(self.job.started_s, self.now)
            self.wasted_kbit[c - 1] += partial
            self.aborted += 1
            self._emit(
                "download_abort",
                video=c,
                segment=self.job.segment_index,
                partial_kbit=partial,
            )
            self.job = None
        if last:
            self._finish()
        else:
            self._open_video(next_id)

    def _finish(self) -> None:
        self.session_over = True
        if self.job is not None:
            partial = self.trace.kbits_between(self.job.started_s, self.now)
            self.wasted_kbit[self.job.video_id - 1] += partial
            self.aborted += 1
            self._emit(
                "download_abort",
                video=self.job.video_id,
                segment=self.job.segment_index,
                partial_kbit=partial,
            )
            self.job = None
        for video in self.playlist.videos:
            st = self._st(video.id)
            if st.discarded or st.downloaded_segments == 0:
                continue
            residual = st.downloaded_segments * self.tau - st.played_s
            if self.config.count_residual_buffers_as_waste:
                self.waste_s[video.id - 1] += residual
                self.wasted_kbit[video.id - 1] += residual * video.bitrate_kbps
            else:
                self.residual_s[video.id - 1] = residual
        self._emit(
            "session_end",
            downloaded_s=sum(
                s.downloaded_segments * self.tau for s in self.state
            ),
            watched_s=sum(self.watched_s),
            waste_s=sum(self.waste_s),
            residual_s=sum(self.residual_s),
        )

    def _idle_advance(self, view: PolicyView) -> None:
        if self.mode != _PLAYING:
            raise SimulationStuckError(
                f"policy {self.policy.name} idles while video {self.cur} is "
                f"{self.mode}; playback cannot progress without a download"
            )
        st = self._st(self.cur)
        t_scroll = self.now + (self.watch_point - st.played_s)
        # (time, priority): scroll wins ties, then window expiry, then drain.
        candidates = [(t_scroll, 0)]
        if self.policy.alpha_sensitive:
            expiry = self.samples.next_expiry_after(
                self.now, self.config.throughput_window_s
            )
            if expiry is not None:
                candidates.append((expiry, 1))
        threshold = self.policy.drain_threshold_s(view)
        if (
            threshold is not None
            and st.downloaded_segments < self._spec(self.cur).segment_count
        ):
            t_drain = self.now + max(st.buffered_s(self.tau) - threshold, 0.0)
            candidates.append((t_drain, 2))
        t_wake, kind = min(candidates)
        self._advance_playback(t_wake, inclusive=True)
        if kind == 2 and not self.session_over and self.mode == _PLAYING:
            st = self._st(self.cur)
            self._start_download(Download(self.cur, st.downloaded_segments))

    def _result(self) -> SessionResult:
        per_video = tuple(
            VideoMetrics(
                video_id=video.id,
                bitrate_kbps=video.bitrate_kbps,
                watched_s=self.watched_s[video.id - 1],
                waste_s=self.waste_s[video.id - 1],
                startup_delay_s=self.startup_s[video.id - 1],
                rebuffer_s=self.rebuffer_s[video.id - 1],
                residual_s=self.residual_s[video.id - 1],
                downloaded_s=self._st(video.id).downloaded_segments * self.tau,
                wasted_kbit=self.wasted_kbit[video.id - 1],
            )
            for video in self.playlist.videos
        )
        metrics = aggregate(per_video, self.config.qoe_weights)
        stats = SessionStats(
            wall_clock_end_s=self.now,
            max_current_buffer_s=self.max_cur_buffer,
            max_noncurrent_buffer_s=self.max_noncur_buffer,
            downloads_completed=self.completed,
            downloads_aborted=self.aborted,
        )
        return SessionResult(metrics=metrics, events=self.events, stats=stats)
