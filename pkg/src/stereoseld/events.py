"""Frame-level event labels shared by the label codec, metrics, and ensembling.

One label frame covers 100 ms; azimuth is in degrees with positive to the
left, distance in metres.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

FRAMES_PER_SECOND = 10


@dataclass(frozen=True)
class Event:
    class_id: int
    source_id: int
    azimuth: float
    distance: float
    onscreen: bool = False

    def with_azimuth(self, azimuth: float) -> "Event":
        return replace(self, azimuth=azimuth)


@dataclass
class FrameLabels:
    """Sparse per-frame event lists. n_frames is optional metadata; when both
    sides of a comparison know it, mismatches are treated as misalignment."""

    events: dict[int, list[Event]] = field(default_factory=dict)
    n_frames: int | None = None

    def add(self, frame: int, event: Event) -> None:
        self.events.setdefault(frame, []).append(event)

    def at(self, frame: int) -> list[Event]:
        return self.events.get(frame, [])

    def frames(self) -> list[int]:
        return sorted(self.events)

    def max_frame(self) -> int:
        return max(self.events) if self.events else -1

    def n_events(self) -> int:
        return sum(len(v) for v in self.events.values())

    def active_frame_count(self) -> int:
        return sum(1 for v in self.events.values() if v)

    def slice(self, start: int, length: int) -> "FrameLabels":
        out = FrameLabels(n_frames=length)
        for f, evs in self.events.items():
            if start <= f < start + length and evs:
                out.events[f - start] = list(evs)
        return out

    def map_events(self, fn) -> "FrameLabels":
        out = FrameLabels(n_frames=self.n_frames)
        for f, evs in self.events.items():
            mapped = [e for e in (fn(ev) for ev in evs) if e is not None]
            if mapped:
                out.events[f] = mapped
        return out

    def copy(self) -> "FrameLabels":
        return FrameLabels(events={f: list(v) for f, v in self.events.items()}, n_frames=self.n_frames)


def wrap_degrees(az: float) -> float:
    """Wrap to [-180, 180)."""
    return (az + 180.0) % 360.0 - 180.0
