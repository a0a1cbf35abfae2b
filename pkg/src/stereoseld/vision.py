"""Video-geometry utilities and the keypoint on-screen post-processor.

The reframing map squares a W x H frame to 768 x 768 for the visual encoder:
horizontal is a uniform scale, vertical keeps that same scale inside the
central band (middle 50% of the height by default) and stretches the top and
bottom with a C1 quadratic so the corners stay anchored. It is coordinate
bookkeeping only; no pixels are resampled here.

Keypoint streams arrive as JSON lines, one record per 100 ms frame:
    {"frame": 3, "width": 1920, "persons": [{"nose": [x, y, conf], ...}]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .config import CLASS_KEYPOINT_MAP
from .errors import FormatError
from .events import Event, FrameLabels

TARGET_SIZE = 768
KEYPOINT_GROUPS = {
    "nose": ("nose",),
    "wrist": ("left_wrist", "right_wrist"),
    "ankle": ("left_ankle", "right_ankle"),
}


@dataclass(frozen=True)
class ReframeMap:
    src_width: int
    src_height: int
    target: int = TARGET_SIZE
    band: float = 0.5  # central fraction of the height kept at horizontal scale

    def __post_init__(self):
        if self.src_width <= 0 or self.src_height <= 0 or not 0.0 < self.band < 1.0:
            raise ValueError("invalid reframe geometry")
        if self._edge_slope() <= 0:
            raise ValueError(
                f"{self.src_width}x{self.src_height} with band {self.band} is not monotone; "
                "the frame is too tall for this band"
            )

    @property
    def _scale(self) -> float:
        return self.target / self.src_width

    @property
    def _half_band(self) -> float:
        return self.band * self.src_height / 2.0

    @property
    def _quad(self) -> float:
        overhang = self.src_height / 2.0 - self._half_band
        return (self.target / 2.0 - self._scale * self.src_height / 2.0) / overhang**2

    def _edge_slope(self) -> float:
        return self._scale + 2.0 * self._quad * (self.src_height / 2.0 - self._half_band)

    def apply_v(self, v: float) -> float:
        dv = v - self.src_height / 2.0
        if abs(dv) <= self._half_band:
            return self.target / 2.0 + self._scale * dv
        e = abs(dv) - self._half_band
        stretched = self._scale * abs(dv) + self._quad * e * e
        return self.target / 2.0 + math.copysign(stretched, dv)

    def apply(self, u: float, v: float) -> tuple[float, float]:
        if not (0.0 <= u <= self.src_width and 0.0 <= v <= self.src_height):
            raise ValueError(f"({u}, {v}) outside the {self.src_width}x{self.src_height} frame")
        return u * self._scale, self.apply_v(v)


def reframe(u: float, v: float, src_width: int, src_height: int) -> tuple[float, float]:
    return ReframeMap(src_width, src_height).apply(u, v)


def pixel_to_azimuth(u: float, width: float, hfov_deg: float) -> float:
    """Pinhole horizontal angle; image centre is 0, the left edge -hfov/2."""
    if not 0.0 < hfov_deg < 180.0:
        raise ValueError(f"hfov must be in (0, 180), got {hfov_deg}")
    half = math.radians(hfov_deg / 2.0)
    return math.degrees(math.atan((2.0 * u / width - 1.0) * math.tan(half)))


@dataclass
class KeypointFrame:
    frame: int
    persons: list[dict[str, tuple[float, float, float]]] = field(default_factory=list)
    width: float | None = None


def read_keypoints_jsonl(path, default_width: float | None = None) -> list[KeypointFrame]:
    frames = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                frame = KeypointFrame(
                    frame=int(rec["frame"]),
                    width=float(rec["width"]) if "width" in rec else default_width,
                    persons=[
                        {k: (float(p[0]), float(p[1]), float(p[2])) for k, p in person.items()}
                        for person in rec.get("persons", [])
                    ],
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad keypoint record: {exc}") from exc
            frames.append(frame)
    return frames


def write_keypoints_jsonl(path, frames: list[KeypointFrame]) -> None:
    with open(path, "w") as f:
        for kf in frames:
            rec = {"frame": kf.frame, "persons": [{k: list(v) for k, v in p.items()} for p in kf.persons]}
            if kf.width is not None:
                rec["width"] = kf.width
            f.write(json.dumps(rec) + "\n")


def mirror_keypoints(frames: list[KeypointFrame], width: float) -> list[KeypointFrame]:
    """Horizontal flip (x -> width - x), the video counterpart of a channel swap."""
    out = []
    for kf in frames:
        w = kf.width if kf.width is not None else width
        out.append(
            KeypointFrame(
                frame=kf.frame,
                width=kf.width,
                persons=[{k: (w - x, y, c) for k, (x, y, c) in p.items()} for p in kf.persons],
            )
        )
    return out


def _group_azimuths(
    persons,
    group: str,
    width: float,
    hfov_deg: float,
    conf_thresh: float,
) -> list[float]:
    names = KEYPOINT_GROUPS[group]
    out = []
    for person in persons:
        points = [person[n] for n in names if n in person and person[n][2] >= conf_thresh]
        if not points:
            continue
        x_centre = sum(p[0] for p in points) / len(points)
        out.append(pixel_to_azimuth(x_centre, width, hfov_deg))
    return out


def keypoint_postprocess(
    preds: FrameLabels,
    keypoints: list[KeypointFrame],
    hfov_deg: float = 100.0,
    thresh_deg: float = 20.0,
    frame_width: float | None = None,
    conf_thresh: float = 0.3,
    class_keypoints: dict[int, str] = CLASS_KEYPOINT_MAP,
) -> FrameLabels:
    """Force onscreen=True for events of mapped classes whose DOA lies within
    thresh_deg of a person's keypoint direction. Flags are only ever raised;
    every other field is untouched."""
    by_frame = {kf.frame: kf for kf in keypoints}
    out = preds.copy()
    for frame, evs in out.events.items():
        kf = by_frame.get(frame)
        if kf is None or not kf.persons:
            continue
        width = kf.width if kf.width is not None else frame_width
        if width is None:
            raise ValueError("keypoint stream carries no frame width and none was given")
        cache: dict[str, list[float]] = {}
        for i, ev in enumerate(evs):
            group = class_keypoints.get(ev.class_id)
            if group is None or ev.onscreen:
                continue
            if group not in cache:
                cache[group] = _group_azimuths(kf.persons, group, width, hfov_deg, conf_thresh)
            if any(abs(ev.azimuth - az) <= thresh_deg for az in cache[group]):
                evs[i] = Event(
                    class_id=ev.class_id,
                    source_id=ev.source_id,
                    azimuth=ev.azimuth,
                    distance=ev.distance,
                    onscreen=True,
                )
    return out
