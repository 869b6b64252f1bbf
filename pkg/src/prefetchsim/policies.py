"""Prefetch policies: what to download next over the single connection.

Policies are pure: `decide` maps a snapshot of session state to either a
Download(video, segment) or None (idle) and touches nothing else. The
network-aware policy re-derives its buffer target and lookahead from the
measured throughput average before every decision; the two baselines ignore
network conditions entirely.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ThresholdTable:
    """Step function of the ratio measured_avg / bitrate.

    rows are (upper_ratio, value): the value applies while avg <= upper_ratio *
    bitrate; `otherwise` applies above the last row. A None average (no
    measurements yet) maps to the first row, the most conservative setting.
    """

    rows: tuple[tuple[float, int], ...]
    otherwise: int

    def lookup(self, avg_kbps: float | None, bitrate_kbps: float) -> int:
        if avg_kbps is None:
            return self.rows[0][1]
        for upper_ratio, value in self.rows:
            if avg_kbps <= upper_ratio * bitrate_kbps:
                return value
        return self.otherwise


DEFAULT_BUFFER_TARGET_TABLE = ThresholdTable(rows=((1.5, 4), (2.5, 3)), otherwise=2)
DEFAULT_LOOKAHEAD_TABLE = ThresholdTable(rows=((1.5, 7), (2.0, 4), (2.5, 7)), otherwise=12)


def compute_buffer_target(
    avg_kbps: float | None,
    bitrate_kbps: float,
    table: ThresholdTable = DEFAULT_BUFFER_TARGET_TABLE,
) -> int:
    """Target number of buffered segments per video."""
    return table.lookup(avg_kbps, bitrate_kbps)


def compute_lookahead(
    avg_kbps: float | None,
    bitrate_kbps: float,
    table: ThresholdTable = DEFAULT_LOOKAHEAD_TABLE,
) -> int:
    """How many upcoming videos to prefetch into."""
    return table.lookup(avg_kbps, bitrate_kbps)


@dataclass(frozen=True)
class VideoView:
    """Read-only per-video state handed to policies."""

    video_id: int
    buffered_s: float
    downloaded_segments: int
    total_segments: int

    @property
    def complete(self) -> bool:
        return self.downloaded_segments >= self.total_segments


@dataclass(frozen=True)
class PolicyView:
    """Snapshot of everything a policy may consult.

    videos covers the current video through the end of the playlist, in order.
    avg_throughput_kbps is None until the first download completes.
    """

    current_video_id: int
    playlist_length: int
    segment_duration_s: float
    current_bitrate_kbps: float
    avg_throughput_kbps: float | None
    videos: tuple[VideoView, ...]

    @property
    def current(self) -> VideoView:
        return self.videos[0]


@dataclass(frozen=True)
class Download:
    """Decision to fetch one segment; None in its place means stay idle."""

    video_id: int
    segment_index: int


class PrefetchPolicy:
    """Base policy interface."""

    name = "base"
    # True when decisions depend on the measured average, so the engine must
    # re-poll whenever a sample ages out of the averaging window.
    alpha_sensitive = False

    def decide(self, view: PolicyView) -> Download | None:
        raise NotImplementedError

    def drain_threshold_s(self, view: PolicyView) -> float | None:
        """Current-video buffer level below which this policy wants to download.

        None means playback drain never re-enables a download (the policy only
        reacts to scrolls and completions).
        """
        return None


class NextOnePolicy(PrefetchPolicy):
    """Finish the current video, then fully fetch the one after it."""

    name = "next-one"
    lookahead_videos = 1

    def decide(self, view: PolicyView) -> Download | None:
        for offset in range(self.lookahead_videos + 1):
            if offset >= len(view.videos):
                break
            video = view.videos[offset]
            if not video.complete:
                return Download(video.video_id, video.downloaded_segments)
        return None


class WaterfallPolicy(NextOnePolicy):
    """Finish the current video, then the next two, in order."""

    name = "waterfall"
    lookahead_videos = 2


class NetworkAwarePolicy(PrefetchPolicy):
    """Throughput-adaptive prefetching across a lookahead window.

    Keeps the current video topped up to a buffer target derived from the
    measured throughput average, then round-robins the first under-target
    video within the lookahead. Tables default to the reference settings.
    """

    name = "network-aware"
    alpha_sensitive = True

    def __init__(
        self,
        buffer_target_table: ThresholdTable = DEFAULT_BUFFER_TARGET_TABLE,
        lookahead_table: ThresholdTable = DEFAULT_LOOKAHEAD_TABLE,
    ) -> None:
        self.buffer_target_table = buffer_target_table
        self.lookahead_table = lookahead_table

    def decide(self, view: PolicyView) -> Download | None:
        target_segments = compute_buffer_target(
            view.avg_throughput_kbps, view.current_bitrate_kbps, self.buffer_target_table
        )
        lookahead = compute_lookahead(
            view.avg_throughput_kbps, view.current_bitrate_kbps, self.lookahead_table
        )
        threshold_s = target_segments * view.segment_duration_s
        current = view.current
        if not current.complete and current.buffered_s < threshold_s:
            return Download(current.video_id, current.downloaded_segments)
        for k in range(1, lookahead + 1):
            if k >= len(view.videos):
                break
            video = view.videos[k]
            if not video.complete and video.buffered_s < threshold_s:
                return Download(video.video_id, video.downloaded_segments)
        return None

    def drain_threshold_s(self, view: PolicyView) -> float | None:
        target_segments = compute_buffer_target(
            view.avg_throughput_kbps, view.current_bitrate_kbps, self.buffer_target_table
        )
        return target_segments * view.segment_duration_s


POLICY_NAMES = ("network-aware", "next-one", "waterfall")


def make_policy(name: str, **overrides) -> PrefetchPolicy:
    """Instantiate a policy by its registry name."""
    if name == "network-aware":
        return NetworkAwarePolicy(**overrides)
    if name == "next-one":
        if overrides:
            raise ValueError("next-one takes no parameters")
        return NextOnePolicy()
    if name == "waterfall":
        if overrides:
            raise ValueError("waterfall takes no parameters")
        return WaterfallPolicy()
    raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
