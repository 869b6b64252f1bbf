"""Throughput traces, user watch-time traces, and throughput measurements.

Throughput trace files carry one positive kbps value per line; line k is the
constant rate over the one-second bin [k-1, k). User trace files carry one
positive watch duration (seconds) per line. Lines starting with '#' and blank
lines are ignored in both formats.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field


class TraceParseError(ValueError):
    """Invalid trace data; file errors include the path and line number."""


@dataclass(frozen=True)
class ThroughputTrace:
    """Piecewise-constant network throughput in kbps.

    starts[i] is where rates_kbps[i] begins; the last bin ends at duration_s.
    Queries past the end wrap around (modulo) when wrap is true, otherwise the
    final value holds forever.
    """

    starts: tuple[float, ...]
    rates_kbps: tuple[float, ...]
    duration_s: float
    wrap: bool = True
    label: str = ""

    def __post_init__(self) -> None:
        if not self.rates_kbps or len(self.starts) != len(self.rates_kbps):
            raise TraceParseError("throughput trace needs matching starts/rates, non-empty")
        if self.starts[0] != 0.0:
            raise TraceParseError("throughput trace must start at t=0")
        for a, b in zip(self.starts, self.starts[1:]):
            if b <= a:
                raise TraceParseError("throughput trace starts must be strictly increasing")
        if self.duration_s <= self.starts[-1]:
            raise TraceParseError("throughput trace duration must exceed the last bin start")
        for r in self.rates_kbps:
            if r <= 0:
                raise TraceParseError("throughput values must be positive")

    def rate_at(self, t_s: float) -> float:
        """Throughput at time t; a bin boundary belongs to the bin on its right."""
        if t_s < 0:
            raise ValueError("time must be >= 0")
        if t_s >= self.duration_s:
            if not self.wrap:
                return self.rates_kbps[-1]
            t_s = math.fmod(t_s, self.duration_s)
        return self.rates_kbps[bisect_right(self.starts, t_s) - 1]

    def _bin_end(self, t_s: float) -> float:
        """End of the bin containing t (absolute time, accounting for wrap)."""
        if t_s >= self.duration_s:
            if not self.wrap:
                return math.inf
            local = math.fmod(t_s, self.duration_s)
            base = t_s - local
        else:
            local = t_s
            base = 0.0
        idx = bisect_right(self.starts, local) - 1
        end_local = self.starts[idx + 1] if idx + 1 < len(self.starts) else self.duration_s
        return base + end_local

    def download_end(self, start_s: float, kbits: float) -> float:
        """Wall-clock time at which `kbits` finish arriving if started at start_s."""
        if kbits <= 0:
            return start_s
        t = start_s
        remaining = kbits
        while True:
            rate = self.rate_at(t)
            end = self._bin_end(t)
            capacity = rate * (end - t)
            if remaining <= capacity:
                return t + remaining / rate
            remaining -= capacity
            t = end

    def kbits_between(self, t0_s: float, t1_s: float) -> float:
        """Kilobits delivered over [t0, t1]."""
        if t1_s <= t0_s:
            return 0.0
        total = 0.0
        t = t0_s
        while t < t1_s:
            rate = self.rate_at(t)
            end = min(self._bin_end(t), t1_s)
            total += rate * (end - t)
            t = end
        return total


def load_throughput_trace(path: str, wrap: bool = True, label: str = "") -> ThroughputTrace:
    """Read a throughput trace file of one-second bins."""
    values = _read_values(path, kind="throughput")
    return ThroughputTrace(
        starts=tuple(float(i) for i in range(len(values))),
        rates_kbps=tuple(values),
        duration_s=float(len(values)),
        wrap=wrap,
        label=label or path,
    )


def throughput_at(trace: ThroughputTrace, t_s: float) -> float:
    return trace.rate_at(t_s)


@dataclass(frozen=True)
class UserTrace:
    """Per-video watch durations in seconds, in feed order."""

    durations_s: tuple[float, ...]
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.durations_s:
            raise TraceParseError("user trace is empty")
        for d in self.durations_s:
            if d <= 0:
                raise TraceParseError("user trace durations must be positive")

    def __len__(self) -> int:
        return len(self.durations_s)

    @property
    def total_s(self) -> float:
        return sum(self.durations_s)


def generate_user_trace(
    mean_s: float,
    std_s: float,
    total_s: float,
    seed: int,
    label: str = "",
) -> UserTrace:
    """Draw Gaussian watch durations until their sum first reaches total_s.

    Non-positive draws are redrawn (never clamped), so the distribution is the
    positive restriction of the Gaussian. Identical arguments give bit-identical
    traces.
    """
    if mean_s <= 0:
        raise TraceParseError("mean_s must be positive")
    if std_s < 0:
        raise TraceParseError("std_s must be >= 0")
    if total_s <= 0:
        raise TraceParseError("total_s must be positive")
    rng = random.Random(seed)
    durations: list[float] = []
    acc = 0.0
    while acc < total_s:
        x = rng.gauss(mean_s, std_s)
        while x <= 0:
            x = rng.gauss(mean_s, std_s)
        durations.append(x)
        acc += x
    return UserTrace(
        durations_s=tuple(durations),
        label=label,
        metadata={
            "method": "gauss-redraw-positive",
            "mean_s": mean_s,
            "std_s": std_s,
            "total_s": total_s,
            "seed": seed,
        },
    )


def load_user_trace(path: str, label: str = "") -> UserTrace:
    values = _read_values(path, kind="watch duration")
    return UserTrace(durations_s=tuple(values), label=label or path)


def save_user_trace(trace: UserTrace, path: str) -> None:
    """Write durations one per line, metadata as leading comments."""
    lines = [f"# {key}: {value}" for key, value in trace.metadata.items()]
    lines += [repr(d) for d in trace.durations_s]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_values(path: str, kind: str) -> list[float]:
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                value = float(line)
            except ValueError:
                raise TraceParseError(
                    f"{path}:{lineno}: not a number: {line!r}"
                ) from None
            if not math.isfinite(value) or value <= 0:
                raise TraceParseError(
                    f"{path}:{lineno}: {kind} must be a positive finite number, got {line!r}"
                )
            values.append(value)
    if not values:
        raise TraceParseError(f"{path}: no values found")
    return values


class ThroughputSampleLog:
    """Completed-download throughput measurements, in completion-time order."""

    def __init__(self) -> None:
        self._times: list[float] = []
        self._values: list[float] = []

    def __len__(self) -> int:
        return len(self._times)

    def append(self, completion_time_s: float, measured_kbps: float) -> None:
        if measured_kbps <= 0:
            raise ValueError("measured throughput must be positive")
        if self._times and completion_time_s < self._times[-1]:
            raise ValueError("sample completion times must be non-decreasing")
        self._times.append(completion_time_s)
        self._values.append(measured_kbps)

    def average_kbps(self, now_s: float, window_s: float) -> float | None:
        """Mean of samples completed in (now - window, now].

        Falls back to the mean of all samples so far when none are in the
        window; returns None when nothing has completed yet.
        """
        hi = bisect_right(self._times, now_s)
        if hi == 0:
            return None
        lo = bisect_right(self._times, now_s - window_s, 0, hi)
        if lo == hi:
            lo = 0
        window = self._values[lo:hi]
        return sum(window) / len(window)

    def next_expiry_after(self, now_s: float, window_s: float) -> float | None:
        """Next instant at which a sample ages out of the averaging window.

        Always strictly after now_s: rounding can make times[idx] + window_s
        collapse onto now_s, and a wake that does not advance the clock would
        spin the caller forever. Such samples are skipped.
        """
        idx = bisect_right(self._times, now_s - window_s)
        while idx < len(self._times) and self._times[idx] + window_s <= now_s:
            idx += 1
        if idx >= len(self._times):
            return None
        return self._times[idx] + window_s


def average_throughput(
    log: ThroughputSampleLog, now_s: float, window_s: float
) -> float | None:
    return log.average_kbps(now_s, window_s)
