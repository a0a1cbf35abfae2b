"""DCASE metadata CSV codec.

Rows are `frame,class,source,azimuth,distance,onscreen` at 100 ms frame
resolution, no header. Azimuth is written in integer degrees, distance in
metres with two decimals, onscreen as 0/1. A unit flag covers datasets whose
distance column is in centimetres.
"""

from __future__ import annotations

import csv

from .containers import atomic_write
from .errors import FormatError
from .events import Event, FrameLabels


def read_dcase_csv(path, distance_unit: str = "m", n_frames: int | None = None) -> FrameLabels:
    if distance_unit not in ("m", "cm"):
        raise ValueError(f"distance_unit must be 'm' or 'cm', got {distance_unit!r}")
    scale = 1.0 if distance_unit == "m" else 0.01
    out = FrameLabels(n_frames=n_frames)
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if len(row) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 columns, got {len(row)}")
            try:
                frame = int(row[0])
                event = Event(
                    class_id=int(row[1]),
                    source_id=int(row[2]),
                    azimuth=float(row[3]),
                    distance=float(row[4]) * scale,
                    onscreen=bool(int(row[5])),
                )
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if frame < 0:
                raise FormatError(f"{path}:{lineno}: negative frame index")
            out.add(frame, event)
    return out


def write_dcase_csv(path, labels: FrameLabels) -> None:
    with atomic_write(path) as f:
        lines = []
        for frame in labels.frames():
            for ev in sorted(labels.at(frame), key=lambda e: (e.class_id, e.source_id, e.azimuth)):
                lines.append(
                    f"{frame},{ev.class_id},{ev.source_id},"
                    f"{round(float(ev.azimuth))},{float(ev.distance):.2f},{int(ev.onscreen)}\n"
                )
        f.write("".join(lines).encode("utf-8"))
