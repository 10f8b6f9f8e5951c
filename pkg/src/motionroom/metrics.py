"""Bounded-memory runtime instrumentation: counters, gauges, latency histograms.

Histograms are log-binned so a long run costs a fixed few hundred integers no
matter how many samples arrive. Percentiles are conservative: they report the
upper edge of the bin holding the requested rank.
"""

from __future__ import annotations

import math
import time


class LatencyHistogram:
    """Latencies in seconds, binned geometrically from 0.1 ms to 10 s."""

    LO = 1e-4
    HI = 10.0
    BINS_PER_DECADE = 12
    _DECADES = 5  # log10(HI / LO)
    BIN_COUNT = BINS_PER_DECADE * _DECADES

    def __init__(self):
        # index 0 = underflow, 1..BIN_COUNT = log bins, BIN_COUNT+1 = overflow
        self._counts = [0] * (self.BIN_COUNT + 2)
        self._count = 0
        self._sum = 0.0
        self._min = math.inf
        self._max = 0.0

    def record(self, seconds: float) -> None:
        if not (seconds >= 0.0) or math.isinf(seconds):
            raise ValueError(f"latency must be finite and >= 0, got {seconds}")
        self._count += 1
        self._sum += seconds
        self._min = min(self._min, seconds)
        self._max = max(self._max, seconds)
        if seconds < self.LO:
            idx = 0
        elif seconds >= self.HI:
            idx = self.BIN_COUNT + 1
        else:
            idx = 1 + int(math.log10(seconds / self.LO) * self.BINS_PER_DECADE)
            idx = min(max(idx, 1), self.BIN_COUNT)
        self._counts[idx] += 1

    @property
    def count(self) -> int:
        return self._count

    def mean(self) -> float:
        return self._sum / self._count if self._count else 0.0

    def max(self) -> float:
        return self._max if self._count else 0.0

    def _upper_edge(self, idx: int) -> float:
        if idx == 0:
            return self.LO
        return self.LO * 10 ** (idx / self.BINS_PER_DECADE)

    def percentile(self, p: float) -> float:
        """Upper bound on the p-th percentile (p in [0, 100])."""
        if not (0.0 <= p <= 100.0):
            raise ValueError(f"percentile must be in [0,100], got {p}")
        if self._count == 0:
            return 0.0
        if p == 0.0:
            return self._min
        rank = math.ceil(p / 100.0 * self._count)
        seen = 0
        for idx, c in enumerate(self._counts):
            seen += c
            if seen >= rank:
                if idx == self.BIN_COUNT + 1:
                    return self._max
                return min(self._upper_edge(idx), self._max)
        return self._max

    def snapshot_ms(self) -> dict[str, float]:
        return {
            "count": float(self._count),
            "mean_ms": self.mean() * 1e3,
            "p50_ms": self.percentile(50) * 1e3,
            "p95_ms": self.percentile(95) * 1e3,
            "p99_ms": self.percentile(99) * 1e3,
            "max_ms": self.max() * 1e3,
        }


class Counter:
    __slots__ = ("value",)

    def __init__(self):
        self.value = 0

    def inc(self, n: int = 1) -> None:
        self.value += n


class MetricsRegistry:
    """Named metrics with a stable plain-text dump, one ``name value`` per line."""

    def __init__(self):
        self._counters: dict[str, Counter] = {}
        self._gauges: dict[str, float] = {}
        self._histograms: dict[str, LatencyHistogram] = {}

    def counter(self, name: str) -> Counter:
        return self._counters.setdefault(name, Counter())

    def set_gauge(self, name: str, value: float) -> None:
        self._gauges[name] = float(value)

    def histogram(self, name: str) -> LatencyHistogram:
        return self._histograms.setdefault(name, LatencyHistogram())

    def render(self) -> str:
        lines = []
        for name, c in self._counters.items():
            lines.append(f"{name} {c.value}")
        for name, v in self._gauges.items():
            lines.append(f"{name} {v:.6f}")
        for name, h in self._histograms.items():
            for key, v in h.snapshot_ms().items():
                if key == "count":
                    lines.append(f"{name}.count {int(v)}")
                else:
                    lines.append(f"{name}.{key} {v:.3f}")
        return "\n".join(sorted(lines)) + "\n"


def parse_dump(text: str) -> dict[str, float]:
    """Inverse of MetricsRegistry.render, for tests and tooling."""
    out: dict[str, float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        name, _, value = line.rpartition(" ")
        if not name:
            raise ValueError(f"bad metrics line: {line!r}")
        out[name] = float(value)
    return out


class Stopwatch:
    """Monotonic interval timer for stage latency measurements."""

    __slots__ = ("_t0",)

    def __init__(self):
        self._t0 = time.monotonic()

    def lap(self) -> float:
        now = time.monotonic()
        dt = now - self._t0
        self._t0 = now
        return dt
