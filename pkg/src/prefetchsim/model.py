"""Core domain types: videos, playlists, session settings, buffers, metrics.

All buffer and metric accounting is in content seconds. Bit-denominated
figures are derived as seconds multiplied by the constant bitrate, plus any
partially downloaded (aborted) kilobits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

_EPS = 1e-9


class ValidationError(ValueError):
    """A domain object violates one of its invariants."""


@dataclass(frozen=True)
class VideoSpec:
    """One video in the feed: constant bitrate, fixed-length segments."""

    id: int
    bitrate_kbps: float
    duration_s: float
    segment_duration_s: float

    def validate(self) -> "VideoSpec":
        if self.id < 1:
            raise ValidationError(f"video id must be >= 1, got {self.id}")
        if self.bitrate_kbps <= 0:
            raise ValidationError(f"video {self.id}: bitrate must be positive")
        if self.duration_s <= 0:
            raise ValidationError(f"video {self.id}: duration must be positive")
        if self.segment_duration_s <= 0:
            raise ValidationError(f"video {self.id}: segment duration must be positive")
        n = round(self.duration_s / self.segment_duration_s)
        if n < 1 or abs(n * self.segment_duration_s - self.duration_s) > _EPS:
            raise ValidationError(
                f"video {self.id}: duration {self.duration_s} is not a whole number "
                f"of {self.segment_duration_s} s segments"
            )
        return self

    @property
    def segment_count(self) -> int:
        return round(self.duration_s / self.segment_duration_s)

    @property
    def segment_kbits(self) -> float:
        """Size of one segment in kilobits."""
        return self.segment_duration_s * self.bitrate_kbps


@dataclass(frozen=True)
class Playlist:
    """Ordered feed of videos; ids are 1-based and consecutive."""

    videos: tuple[VideoSpec, ...]

    @classmethod
    def uniform(
        cls,
        count: int,
        duration_s: float,
        bitrate_kbps: float,
        segment_duration_s: float,
    ) -> "Playlist":
        return cls(
            tuple(
                VideoSpec(
                    id=i + 1,
                    bitrate_kbps=bitrate_kbps,
                    duration_s=duration_s,
                    segment_duration_s=segment_duration_s,
                )
                for i in range(count)
            )
        )

    def __len__(self) -> int:
        return len(self.videos)

    def video(self, video_id: int) -> VideoSpec:
        return self.videos[video_id - 1]

    @property
    def max_bitrate_kbps(self) -> float:
        return max(v.bitrate_kbps for v in self.videos)


def validate_playlist(playlist: Playlist) -> Playlist:
    """Check playlist invariants; raises ValidationError naming the first offender."""
    if not playlist.videos:
        raise ValidationError("playlist is empty")
    for i, video in enumerate(playlist.videos):
        if video.id != i + 1:
            raise ValidationError(
                f"playlist ids must be consecutive from 1; position {i} has id {video.id}"
            )
        video.validate()
    return playlist


@dataclass(frozen=True)
class QoeWeights:
    """Weights of the four overall-quality terms (all terms in seconds)."""

    bitrate: float = 1.0
    rebuffer: float = 1.0
    startup: float = 1.0
    waste: float = 1.0

    def validate(self) -> "QoeWeights":
        for name in ("bitrate", "rebuffer", "startup", "waste"):
            if getattr(self, name) < 0:
                raise ValidationError(f"qoe weight {name} must be >= 0")
        return self


@dataclass(frozen=True)
class SessionConfig:
    """Session-level knobs shared by every policy."""

    startup_threshold_segments: int = 1
    throughput_window_s: float = 10.0
    qoe_weights: QoeWeights = field(default_factory=QoeWeights)
    rng_seed: int = 0
    count_residual_buffers_as_waste: bool = True

    def validate(self) -> "SessionConfig":
        if self.startup_threshold_segments < 1:
            raise ValidationError("startup_threshold_segments must be >= 1")
        if self.throughput_window_s <= 0:
            raise ValidationError("throughput_window_s must be positive")
        self.qoe_weights.validate()
        return self


@dataclass
class BufferState:
    """Mutable per-video download/playback accounting used by the simulator.

    downloaded_segments only ever grows, in order; played_s tracks content
    seconds consumed; discarded marks a video the user scrolled away from.
    """

    downloaded_segments: int = 0
    played_s: float = 0.0
    discarded: bool = False

    def buffered_s(self, segment_duration_s: float) -> float:
        return self.downloaded_segments * segment_duration_s - self.played_s

    def audit(self, video: VideoSpec) -> None:
        """Invariant check hook; raises ValidationError on a breach."""
        if not 0 <= self.downloaded_segments <= video.segment_count:
            raise ValidationError(
                f"video {video.id}: downloaded_segments {self.downloaded_segments} "
                f"outside [0, {video.segment_count}]"
            )
        buffered = self.buffered_s(video.segment_duration_s)
        if buffered < -_EPS or self.played_s < -_EPS:
            raise ValidationError(
                f"video {video.id}: negative buffer ({buffered}) or playhead "
                f"({self.played_s})"
            )


@dataclass(frozen=True)
class VideoMetrics:
    """Per-video outcome of one session."""

    video_id: int
    bitrate_kbps: float
    watched_s: float
    waste_s: float
    startup_delay_s: float
    rebuffer_s: float
    residual_s: float
    downloaded_s: float
    wasted_kbit: float


@dataclass(frozen=True)
class SessionMetrics:
    """Session totals plus the per-video breakdown."""

    per_video: tuple[VideoMetrics, ...]
    watched_s: float
    waste_s: float
    startup_delay_s: float
    rebuffer_s: float
    residual_s: float
    downloaded_s: float
    wasted_kbit: float
    overall_quality: float
