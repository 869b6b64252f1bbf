"""Regenerate the bundled synthetic throughput traces.

The three shapes target distinct network regimes against a 2000 kbps bitrate:

1. fast with short outages: high plateau (~4.65 Mbps) with brief deep dips,
   so baselines that fetch only when a video becomes current pay start-up
   and stall time whenever a scroll lands on a dip;
2. oscillating around the bitrate: smooth swings between surplus and
   deficit (~0.6..3.4 Mbps) with mild jitter;
3. slow start: an extended stretch below the bitrate before recovering, so
   some start-up delay is unavoidable for every policy.

Deterministic: fixed seeds, integer kbps values, one value per line. Run
from the repository root to refresh traces/throughput/*.txt in place.
"""

import math
import random
from pathlib import Path

LENGTH_S = 300


def fast_with_dips() -> list[int]:
    rng = random.Random(101)
    values = []
    for k in range(LENGTH_S):
        base = 4650 + 350 * math.sin(2 * math.pi * k / 31)
        values.append(base + rng.uniform(-120, 120))
    # Deep three-second outages, roughly every 40 s.
    for start in (22, 61, 104, 143, 187, 226, 262):
        depth = rng.uniform(1050, 1350)
        for k in range(start, min(start + 3, LENGTH_S)):
            values[k] = depth + rng.uniform(-80, 80)
    return [max(200, round(v)) for v in values]


def oscillating() -> list[int]:
    rng = random.Random(202)
    values = []
    for k in range(LENGTH_S):
        base = 2900 + 1650 * math.sin(2 * math.pi * k / 13)
        values.append(max(500, base + rng.uniform(-150, 150)))
    return [max(200, round(v)) for v in values]


def slow_start() -> list[int]:
    rng = random.Random(303)
    values = []
    for k in range(LENGTH_S):
        if k < 25:
            base = 1100 + 500 * math.sin(2 * math.pi * k / 9)
        else:
            base = 3300 + 1300 * math.sin(2 * math.pi * k / 19)
        values.append(max(400, base + rng.uniform(-100, 100)))
    return [max(200, round(v)) for v in values]


SHAPES = {
    "trace1": (fast_with_dips, "fast plateau with brief deep dips"),
    "trace2": (oscillating, "oscillating around the 2000 kbps bitrate"),
    "trace3": (slow_start, "slow start, then recovery"),
}


def main() -> None:
    out_dir = Path(__file__).resolve().parent.parent / "traces" / "throughput"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (build, blurb) in SHAPES.items():
        values = build()
        path = out_dir / f"{name}.txt"
        mean = sum(values) / len(values)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# synthetic throughput trace: {blurb}\n")
            fh.write(f"# {len(values)} one-second bins, mean {mean:.0f} kbps\n")
            fh.write("# regenerate with scripts/make_throughput_traces.py\n")
            for v in values:
                fh.write(f"{v}\n")
        print(f"{path}: {len(values)} bins, mean {mean:.0f} kbps")


if __name__ == "__main__":
    main()
