"""Acoustic front-end: the 4-channel feature stack for 24 kHz stereo clips.

Channels are [log-mel left, log-mel right, ILD, stpACC]. The main front-end
is a 512-point Hann STFT with 150-sample hop; stpACC uses a 1014-point Hann
window (transform zero-padded to 1024) so the retained 512 lags cover a bit
over 21 ms of delay, pooled by 8 into 64 bins. Framing is centred with
reflection padding, so a 5 s clip yields exactly 800 frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SAMPLE_RATE = 24000
N_MELS = 64
MEL_FMIN = 0.0
MEL_FMAX = 12000.0
EPS = 1e-10
STD_FLOOR = 1e-5


@dataclass(frozen=True)
class StftSpec:
    window_size: int
    hop: int
    n_fft: int | None = None

    def __post_init__(self):
        if self.hop > self.window_size:
            raise ValueError(f"hop {self.hop} exceeds window {self.window_size}")
        if self.n_fft is None:
            object.__setattr__(self, "n_fft", self.window_size)
        if self.n_fft < self.window_size:
            raise ValueError(f"n_fft {self.n_fft} smaller than window {self.window_size}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


# The two configured front-ends: spectral features and the autocorrelation feature.
MAIN_FRONTEND = StftSpec(window_size=512, hop=150)
ACC_FRONTEND = StftSpec(window_size=1014, hop=150, n_fft=1024)

ACC_LAGS = 512
ACC_POOL = 8


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # n_mels x n_bins, rows sum to 1
    f_min: float
    f_max: float
    sr: int


@dataclass
class StereoClip:
    left: np.ndarray
    right: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        if self.left.shape != self.right.shape:
            raise ValueError("left/right length mismatch")

    @property
    def n_samples(self) -> int:
        return len(self.left)


CHANNEL_ROLES = ("logmel_left", "logmel_right", "ild", "stpacc")


@dataclass
class FeatureTensor:
    """C x T x F acoustic input stack; C == 4."""

    data: np.ndarray
    roles: tuple[str, ...] = CHANNEL_ROLES

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[0] != len(self.roles):
            raise ValueError(f"expected {len(self.roles)}xTxF, got {self.data.shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


@dataclass
class NormStats:
    """Per (channel, frequency-bin) mean and std; std floored away from zero."""

    mean: np.ndarray  # C x F
    std: np.ndarray  # C x F

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape:
            raise ValueError("mean/std shape mismatch")
        if np.any(self.std <= 0):
            raise ValueError("std must be positive (floored)")


def hann_window(n: int) -> np.ndarray:
    # periodic Hann, the STFT convention
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def n_frames(n_samples: int, hop: int) -> int:
    return -(-n_samples // hop)


def _frame(x: np.ndarray, spec: StftSpec) -> np.ndarray:
    """Centred frames (reflection padding), T x window_size."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected 1-D signal, got shape {x.shape}")
    if len(x) < spec.window_size:
        raise ValueError(f"clip of {len(x)} samples is shorter than one {spec.window_size}-sample window")
    pad = spec.window_size // 2
    xp = np.pad(x, pad, mode="reflect")
    t = n_frames(len(x), spec.hop)
    frames = np.lib.stride_tricks.sliding_window_view(xp, spec.window_size)[:: spec.hop][:t]
    return frames * hann_window(spec.window_size)


def stft(x: np.ndarray, spec: StftSpec) -> np.ndarray:
    """Complex spectrogram, n_bins x T."""
    frames = _frame(x, spec)
    return np.fft.rfft(frames, n=spec.n_fft, axis=1).T


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = MAIN_FRONTEND.n_fft,
    sr: int = SAMPLE_RATE,
    f_min: float = MEL_FMIN,
    f_max: float = MEL_FMAX,
) -> MelFilterbank:
    """Triangular HTK-mel filters over rfft bins, each row normalised to sum 1."""
    if not 0 <= f_min < f_max <= sr / 2:
        raise ValueError(f"invalid mel range [{f_min}, {f_max}] for sr {sr}")
    if n_mels > n_fft // 2:
        raise ValueError(f"n_mels {n_mels} exceeds {n_fft // 2} usable bins")
    points = _mel_to_hz(np.linspace(_hz_to_mel(f_min), _hz_to_mel(f_max), n_mels + 2))
    bins = np.arange(n_fft // 2 + 1) * sr / n_fft
    lo, mid, hi = points[:-2, None], points[1:-1, None], points[2:, None]
    rising = (bins - lo) / (mid - lo)
    falling = (hi - bins) / (hi - mid)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    sums = weights.sum(axis=1, keepdims=True)
    if np.any(sums == 0):
        raise ValueError("empty mel filter; increase n_fft or narrow the mel range")
    return MelFilterbank(weights=weights / sums, f_min=f_min, f_max=f_max, sr=sr)


@lru_cache(maxsize=4)
def _default_filterbank() -> MelFilterbank:
    return mel_filterbank()


def logmel(spec: np.ndarray, fb: MelFilterbank, eps: float = EPS) -> np.ndarray:
    """log(H_mel . |X|^2 + eps), returned time-major as T x n_mels."""
    power = np.abs(spec) ** 2
    return np.log(fb.weights @ power + eps).T


def ild(spec_l: np.ndarray, spec_r: np.ndarray, fb: MelFilterbank, eps: float = EPS) -> np.ndarray:
    """Inter-channel level difference, T x n_mels.

    The squared-magnitude ratio is formed per STFT bin and its log is
    projected through the (row-normalised) mel basis, making the feature an
    exact odd function of a channel swap.
    """
    if spec_l.shape != spec_r.shape:
        raise ValueError(f"shape mismatch {spec_l.shape} vs {spec_r.shape}")
    log_ratio = np.log((np.abs(spec_l) ** 2 + eps) / (np.abs(spec_r) ** 2 + eps))
    return (fb.weights @ log_ratio).T


def stpacc(x: np.ndarray, spec: StftSpec = ACC_FRONTEND, eps: float = EPS) -> np.ndarray:
    """Short-term power of the autocorrelation, T x 64.

    Per frame: autocorrelation via the inverse transform of |X|^2, lags
    1..512 kept (~21 ms at 24 kHz), squared, mean-pooled by 8 along the lag
    axis, log-compressed.
    """
    frames = _frame(x, spec)
    power = np.abs(np.fft.rfft(frames, n=spec.n_fft, axis=1)) ** 2
    acf = np.fft.irfft(power, n=spec.n_fft, axis=1)[:, 1 : ACC_LAGS + 1]
    pooled = (acf**2).reshape(len(frames), ACC_LAGS // ACC_POOL, ACC_POOL).mean(axis=2)
    return np.log(pooled + eps)


def stack_features(clip: StereoClip, stats: NormStats | None = None) -> FeatureTensor:
    """The C_in=4 stack [logmel L, logmel R, ILD, stpACC(mid)], normalised if stats given.

    stpACC is computed on the channel mean so a left-right swap leaves it
    untouched.
    """
    if clip.sample_rate != SAMPLE_RATE:
        raise ValueError(f"expected {SAMPLE_RATE} Hz input, got {clip.sample_rate}")
    fb = _default_filterbank()
    spec_l = stft(clip.left, MAIN_FRONTEND)
    spec_r = stft(clip.right, MAIN_FRONTEND)
    mid = (clip.left + clip.right) / 2.0
    data = np.stack(
        [
            logmel(spec_l, fb),
            logmel(spec_r, fb),
            ild(spec_l, spec_r, fb),
            stpacc(mid),
        ]
    )
    if stats is not None:
        if stats.mean.shape != (data.shape[0], data.shape[2]):
            raise ValueError(f"stats shape {stats.mean.shape} does not fit features {data.shape}")
        data = (data - stats.mean[:, None, :]) / stats.std[:, None, :]
    return FeatureTensor(data=data)


def compute_norm_stats(features) -> NormStats:
    """Population mean/std per (channel, frequency bin) over all frames of all tensors."""
    total = None
    total_sq = None
    count = 0
    for feat in features:
        data = feat.data if isinstance(feat, FeatureTensor) else np.asarray(feat)
        if total is None:
            total = data.sum(axis=1)
            total_sq = (data**2).sum(axis=1)
        else:
            total += data.sum(axis=1)
            total_sq += (data**2).sum(axis=1)
        count += data.shape[1]
    if count == 0:
        raise ValueError("no feature tensors given")
    mean = total / count
    var = np.maximum(total_sq / count - mean**2, 0.0)
    return NormStats(mean=mean, std=np.maximum(np.sqrt(var), STD_FLOOR))
