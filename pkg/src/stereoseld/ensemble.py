"""Majority-vote fusion of per-system decoded predictions.

Per frame and class, detections are clustered greedily (complete linkage on
absolute azimuth difference, one detection per system per cluster). A cluster
is emitted when it spans the quorum of distinct systems with all pairwise
DOAs within the angle threshold; for the single-vote classes any detection is
emitted. The output azimuth and distance are the member means; the on-screen
flag is the OR of the members.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import SINGLE_VOTE_CLASSES
from .errors import DataError
from .events import Event, FrameLabels

MAX_EVENTS_PER_CLASS = 3


@dataclass
class EventPredictionSet:
    system_id: str
    labels: FrameLabels


@dataclass
class _Cluster:
    members: list[tuple[str, Event]]

    def key(self):
        return min((sys_id, ev.azimuth, ev.distance) for sys_id, ev in self.members)

    def systems(self) -> set[str]:
        return {sys_id for sys_id, _ in self.members}

    def span_with(self, other: "_Cluster") -> float:
        return max(
            abs(a.azimuth - b.azimuth)
            for _, a in self.members + other.members
            for _, b in self.members + other.members
        )


def _cluster_detections(dets: list[tuple[str, Event]], angle_thresh: float) -> list[_Cluster]:
    clusters = [_Cluster([d]) for d in sorted(dets, key=lambda d: (d[0], d[1].azimuth, d[1].distance))]
    while True:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                if clusters[i].systems() & clusters[j].systems():
                    continue
                span = clusters[i].span_with(clusters[j])
                if span > angle_thresh:
                    continue
                cand = (span, clusters[i].key(), clusters[j].key(), i, j)
                if best is None or cand[:3] < best[:3]:
                    best = cand
        if best is None:
            return clusters
        _, _, _, i, j = best
        clusters[i] = _Cluster(clusters[i].members + clusters[j].members)
        clusters.pop(j)
        clusters.sort(key=_Cluster.key)


def combine(
    systems: list[EventPredictionSet],
    quorum: int = 2,
    angle_thresh: float = 20.0,
    single_vote_classes: frozenset[int] = SINGLE_VOTE_CLASSES,
) -> EventPredictionSet:
    if not systems:
        raise ValueError("need at least one system")
    known = {s.labels.n_frames for s in systems if s.labels.n_frames is not None}
    if len(known) > 1:
        raise DataError(f"systems disagree on frame count: {sorted(known)}")
    n_frames = known.pop() if known else None
    all_frames = sorted({f for s in systems for f in s.labels.events})
    out = FrameLabels(n_frames=n_frames)
    for frame in all_frames:
        by_class: dict[int, list[tuple[str, Event]]] = {}
        for s in systems:
            for ev in s.labels.at(frame):
                by_class.setdefault(ev.class_id, []).append((s.system_id, ev))
        for class_id in sorted(by_class):
            clusters = _cluster_detections(by_class[class_id], angle_thresh)
            if class_id not in single_vote_classes:
                clusters = [c for c in clusters if len(c.systems()) >= quorum]
            fused = []
            for c in clusters:
                evs = [ev for _, ev in c.members]
                fused.append(
                    (
                        len(c.members),
                        Event(
                            class_id=class_id,
                            source_id=0,
                            azimuth=sum(e.azimuth for e in evs) / len(evs),
                            distance=sum(e.distance for e in evs) / len(evs),
                            onscreen=any(e.onscreen for e in evs),
                        ),
                    )
                )
            # cap at the track limit: larger clusters first, then the most frontal
            fused.sort(key=lambda it: (-it[0], abs(it[1].azimuth), it[1].azimuth))
            for track, (_, ev) in enumerate(fused[:MAX_EVENTS_PER_CLASS]):
                out.add(frame, Event(class_id, track, ev.azimuth, ev.distance, ev.onscreen))
    return EventPredictionSet(system_id="ensemble", labels=out)
