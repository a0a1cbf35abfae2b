"""Run-level configuration: the 13-label class set, thresholds, geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

DEFAULT_CLASSES = (
    "Female speech, woman speaking",
    "Male speech, man speaking",
    "Clapping",
    "Telephone",
    "Laughter",
    "Domestic sounds",
    "Walk, footsteps",
    "Door, open or close",
    "Music",
    "Musical instrument",
    "Water tap, faucet",
    "Bell",
    "Knock",
)

# Classes where a single ensemble vote suffices.
SINGLE_VOTE_CLASSES = frozenset({11, 12})  # Bell, Knock

# Class -> keypoint family used by the visual post-processor.
CLASS_KEYPOINT_MAP = {
    0: "nose",  # female speech
    1: "nose",  # male speech
    4: "nose",  # laughter
    2: "wrist",  # clapping
    6: "ankle",  # footsteps
}


@dataclass
class RunConfig:
    classes: tuple[str, ...] = DEFAULT_CLASSES
    d_scale: float = 10.0
    hfov_deg: float = 100.0
    act_thresh: float = 0.5
    on_thresh: float = 0.5
    angle_thresh_deg: float = 20.0
    keypoint_conf_thresh: float = 0.3
    ensemble_quorum: int = 2
    stats_path: str | None = None
    weights_path: str | None = None

    def __post_init__(self):
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError(f"hfov must be in (0, 180), got {self.hfov_deg}")
        for name in ("act_thresh", "on_thresh"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.angle_thresh_deg <= 0 or self.d_scale <= 0:
            raise ValueError("angle threshold and distance scale must be positive")

    @property
    def n_classes(self) -> int:
        return len(self.classes)
