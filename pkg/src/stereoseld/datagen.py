"""FOA-to-stereo training-data transforms.

Pipeline per source clip: split into 5 s segments, drop silent ones, apply
random yaw rotations, render stereo with a front-facing cardioid pair, and
optionally double the data with a left-right swap. FOA is ACN/SN3D with Y
positive to the left; a source at azimuth a encodes as W=1, X=cos a,
Y=sin a on the horizontal plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import FRAMES_PER_SECOND, Event, FrameLabels, wrap_degrees
from .dsp import StereoClip

SEGMENT_SECONDS = 5.0


@dataclass
class FoaClip:
    w: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    sample_rate: int

    def __post_init__(self):
        chans = [np.asarray(c, dtype=np.float64) for c in (self.w, self.x, self.y, self.z)]
        if len({c.shape for c in chans}) != 1:
            raise ValueError("FOA channels must have equal length")
        self.w, self.x, self.y, self.z = chans

    @property
    def n_samples(self) -> int:
        return len(self.w)


def foa_rotate_yaw(clip: FoaClip, phi_deg: float) -> FoaClip:
    """Rotate the sound field by phi about the vertical axis; a source at
    azimuth a is heard at a - phi afterwards. W and Z are invariant."""
    phi = math.radians(phi_deg)
    c, s = math.cos(phi), math.sin(phi)
    return FoaClip(
        w=clip.w,
        x=c * clip.x + s * clip.y,
        y=-s * clip.x + c * clip.y,
        z=clip.z,
        sample_rate=clip.sample_rate,
    )


def rotate_labels_yaw(labels: FrameLabels, phi_deg: float, keep_front_only: bool = True) -> FrameLabels:
    """Shift every azimuth by -phi; events leaving the front half-plane are dropped."""

    def rot(ev: Event) -> Event | None:
        az = wrap_degrees(ev.azimuth - phi_deg)
        if keep_front_only and abs(az) > 90.0:
            return None
        return ev.with_azimuth(az)

    return labels.map_events(rot)


def foa_to_stereo(clip: FoaClip) -> StereoClip:
    """Mid-side cardioid pair: L = (W + Y)/2, R = (W - Y)/2.

    A source at azimuth 0 lands identically in both channels; at +90 the
    right channel nulls out.
    """
    return StereoClip(
        left=0.5 * (clip.w + clip.y),
        right=0.5 * (clip.w - clip.y),
        sample_rate=clip.sample_rate,
    )


def segment_clip(audio, labels: FrameLabels, seg_s: float = SEGMENT_SECONDS, hop_s: float | None = None):
    """Non-overlapping segments with aligned label slices.

    Returns a list of (audio_segment, FrameLabels) pairs; a clip shorter than
    one segment yields none.
    """
    hop_s = seg_s if hop_s is None else hop_s
    sr = audio.sample_rate
    seg_samples = int(round(seg_s * sr))
    hop_samples = int(round(hop_s * sr))
    seg_frames = int(round(seg_s * FRAMES_PER_SECOND))
    frames_per_hop = int(round(hop_s * FRAMES_PER_SECOND))
    covered = -(-audio.n_samples * FRAMES_PER_SECOND // sr)
    declared = labels.n_frames if labels.n_frames is not None else labels.max_frame() + 1
    if declared > covered:
        raise ValueError(f"labels span {declared} frames but audio covers only {covered}")
    out = []
    start = 0
    idx = 0
    while start + seg_samples <= audio.n_samples:
        seg_audio = _slice_audio(audio, start, seg_samples)
        seg_labels = labels.slice(idx * frames_per_hop, seg_frames)
        out.append((seg_audio, seg_labels))
        start += hop_samples
        idx += 1
    return out


def _slice_audio(audio, start: int, length: int):
    sl = slice(start, start + length)
    if isinstance(audio, FoaClip):
        return FoaClip(audio.w[sl], audio.x[sl], audio.y[sl], audio.z[sl], audio.sample_rate)
    return StereoClip(audio.left[sl], audio.right[sl], audio.sample_rate)


def silence_filter(segments):
    """Keep only segments whose label slice has at least one active frame."""
    return [(a, l) for a, l in segments if l.active_frame_count() > 0]


def lr_swap(audio: StereoClip, labels: FrameLabels) -> tuple[StereoClip, FrameLabels]:
    """Exchange the channels and mirror every azimuth; on-screen flags are
    untouched (the matching video flip is applied to keypoint files in the
    vision module)."""
    swapped = StereoClip(left=audio.right, right=audio.left, sample_rate=audio.sample_rate)
    mirrored = labels.map_events(lambda ev: ev.with_azimuth(-ev.azimuth))
    return swapped, mirrored
