"""Multi-track activity-coupled DOA+distance label codec and its losses.

Targets are T x C x N x 4 with N=3 tracks and lanes [a*cos(az), a*sin(az),
a*dist/D_SCALE, onscreen]. The track-assignment loss duplicates targets so
every arrangement of the active events onto the three tracks is a candidate
(1/1/6/6 candidates for 0..3 active events) and takes the cheapest one,
class-frame by class-frame.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .events import Event, FrameLabels

N_TRACKS = 3
N_LANES = 4
D_SCALE = 10.0
AZ_TOL = 1e-6


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def _event_vec(ev: Event) -> np.ndarray:
    if ev.distance <= 0:
        raise ValueError(f"event distance must be > 0, got {ev.distance}")
    if abs(ev.azimuth) > 90.0 + AZ_TOL:
        raise ValueError(f"azimuth {ev.azimuth} outside the front half-plane")
    az = math.radians(min(max(ev.azimuth, -90.0), 90.0))
    return np.array([math.cos(az), math.sin(az), ev.distance / D_SCALE], dtype=np.float64)


def _active_events(evs: list[Event], class_id: int) -> list[Event]:
    same = sorted((e for e in evs if e.class_id == class_id), key=lambda e: e.source_id)
    return same[:N_TRACKS]


def encode(labels: FrameLabels, n_classes: int, n_frames: int | None = None) -> np.ndarray:
    """T x C x 3 x 4 target tensor; active events fill tracks in source-id order."""
    if n_frames is None:
        n_frames = labels.n_frames if labels.n_frames is not None else labels.max_frame() + 1
    out = np.zeros((n_frames, n_classes, N_TRACKS, N_LANES), dtype=np.float64)
    for frame, evs in labels.events.items():
        if not 0 <= frame < n_frames:
            continue
        for c in {e.class_id for e in evs}:
            for track, ev in enumerate(_active_events(evs, c)):
                out[frame, c, track, :3] = _event_vec(ev)
                out[frame, c, track, 3] = 1.0 if ev.onscreen else 0.0
    return out


def decode(pred: np.ndarray, act_thresh: float = 0.5, on_thresh: float = 0.5) -> FrameLabels:
    """Invert the encoding: a track is an event iff its DOA-vector norm beats
    act_thresh; distance is norm-compensated; lane 3 is squashed through a
    sigmoid before thresholding."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim != 4 or pred.shape[2] != N_TRACKS or pred.shape[3] != N_LANES:
        raise ValueError(f"expected TxCx{N_TRACKS}x{N_LANES}, got {pred.shape}")
    n_frames, n_classes = pred.shape[:2]
    out = FrameLabels(n_frames=n_frames)
    for t in range(n_frames):
        for c in range(n_classes):
            for n in range(N_TRACKS):
                x, y, d, p_on = pred[t, c, n]
                norm = math.hypot(x, y)
                if norm <= act_thresh:
                    continue
                az = min(max(math.degrees(math.atan2(y, x)), -90.0), 90.0)
                out.add(
                    t,
                    Event(
                        class_id=c,
                        source_id=n,
                        azimuth=az,
                        distance=float(d / norm * D_SCALE),
                        onscreen=bool(_sigmoid(p_on) > on_thresh),
                    ),
                )
    return out


def _arrangements(vecs: list[np.ndarray]) -> list[np.ndarray]:
    """All duplicated-target track arrangements for the active events (each a 3x3 matrix)."""
    a = len(vecs)
    if a == 0:
        return [np.zeros((N_TRACKS, 3), dtype=np.float64)]
    if a == 1:
        return [np.stack([vecs[0]] * N_TRACKS)]
    if a == 2:
        return [
            np.stack([vecs[i] for i in assign])
            for assign in itertools.product((0, 1), repeat=N_TRACKS)
            if len(set(assign)) == 2
        ]
    if a == 3:
        return [np.stack([vecs[i] for i in perm]) for perm in itertools.permutations(range(3))]
    raise ValueError(f"{a} simultaneous same-class events exceed {N_TRACKS} tracks")


@dataclass
class AdpitLossReport:
    total: float
    assignment: np.ndarray  # T x C chosen-arrangement index


def _targets_per_cell(labels: FrameLabels, n_classes: int, n_frames: int):
    """Candidate arrangements and the matched target selection per (frame, class)."""
    cells = {}
    for t in range(n_frames):
        evs = labels.at(t)
        for c in range(n_classes):
            active = _active_events(evs, c)
            cells[(t, c)] = [_event_vec(e) for e in active]
    return cells


def adpit_loss(pred: np.ndarray, labels: FrameLabels, n_classes: int | None = None) -> AdpitLossReport:
    """Mean over class-frames of the min-arrangement MSE on lanes 0..2.

    The on-screen lane is excluded; it is scored separately by
    onscreen_bce.
    """
    pred = np.asarray(pred, dtype=np.float64)
    n_frames, C = pred.shape[:2]
    if n_classes is not None and n_classes != C:
        raise ValueError(f"n_classes {n_classes} does not match prediction {C}")
    cells = _targets_per_cell(labels, C, n_frames)
    assignment = np.zeros((n_frames, C), dtype=np.int64)
    total = 0.0
    for (t, c), vecs in cells.items():
        p = pred[t, c, :, :3]
        costs = [float(np.mean((p - cand) ** 2)) for cand in _arrangements(vecs)]
        best = int(np.argmin(costs))
        assignment[t, c] = best
        total += costs[best]
    return AdpitLossReport(total=total / (n_frames * C), assignment=assignment)


def adpit_grad(pred: np.ndarray, labels: FrameLabels, n_classes: int | None = None) -> np.ndarray:
    """Gradient of adpit_loss w.r.t. the prediction with the winning
    arrangement held fixed (valid almost everywhere)."""
    pred = np.asarray(pred, dtype=np.float64)
    n_frames, C = pred.shape[:2]
    if n_classes is not None and n_classes != C:
        raise ValueError(f"n_classes {n_classes} does not match prediction {C}")
    cells = _targets_per_cell(labels, C, n_frames)
    grad = np.zeros_like(pred)
    scale = 2.0 / (N_TRACKS * 3 * n_frames * C)
    for (t, c), vecs in cells.items():
        p = pred[t, c, :, :3]
        cands = _arrangements(vecs)
        costs = [float(np.mean((p - cand) ** 2)) for cand in cands]
        best = cands[int(np.argmin(costs))]
        grad[t, c, :, :3] = scale * (p - best)
    return grad


def onscreen_bce(
    p_on: np.ndarray,
    target_on: np.ndarray,
    active_mask: np.ndarray,
    weight_on: float = 4.0,
) -> float:
    """Weighted binary cross-entropy on the on-screen lane, averaged over the
    entries where the matched target is active. p_on holds probabilities."""
    p = np.clip(np.asarray(p_on, dtype=np.float64), 1e-7, 1.0 - 1e-7)
    t = np.asarray(target_on, dtype=np.float64)
    mask = np.asarray(active_mask, dtype=bool)
    if not mask.any():
        return 0.0
    bce = -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))
    w = np.where(t > 0.5, weight_on, 1.0)
    return float((w * bce)[mask].mean())
