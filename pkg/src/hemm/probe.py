"""Instrumentation hooks for sub-operation counts and off-chip traffic."""

from __future__ import annotations

from collections import Counter


class Probe:
    """No-op base; subclasses override what they care about."""

    def on_read(self, region: str, nbytes: int) -> None:
        pass

    def on_write(self, region: str, nbytes: int) -> None:
        pass

    def on_subop(self, name: str) -> None:
        pass


NULL_PROBE = Probe()


class CountingProbe(Probe):
    def __init__(self):
        self.subops: Counter[str] = Counter()
        self.reads: Counter[str] = Counter()
        self.writes: Counter[str] = Counter()

    def on_read(self, region, nbytes):
        self.reads[region] += nbytes

    def on_write(self, region, nbytes):
        self.writes[region] += nbytes

    def on_subop(self, name):
        self.subops[name] += 1

    def traffic(self, region: str = "ct") -> int:
        return self.reads[region] + self.writes[region]


class FusedView(Probe):
    """Forwards sub-op events but hides Ct traffic that stays on chip."""

    def __init__(self, inner: Probe):
        self.inner = inner

    def on_read(self, region, nbytes):
        if region != "ct":
            self.inner.on_read(region, nbytes)

    def on_write(self, region, nbytes):
        if region != "ct":
            self.inner.on_write(region, nbytes)

    def on_subop(self, name):
        self.inner.on_subop(name)
