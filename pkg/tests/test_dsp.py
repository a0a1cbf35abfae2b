import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereoseld import dsp


def naive_dft_frames(x, spec):
    """O(N^2) reference: reflection-padded Hann frames, explicit DFT sums."""
    pad = spec.window_size // 2
    xp = np.pad(np.asarray(x, dtype=np.float64), pad, mode="reflect")
    t_total = dsp.n_frames(len(x), spec.hop)
    win = dsp.hann_window(spec.window_size)
    n_bins = spec.n_fft // 2 + 1
    out = np.zeros((n_bins, t_total), dtype=np.complex128)
    for t in range(t_total):
        frame = np.zeros(spec.n_fft)
        frame[: spec.window_size] = xp[t * spec.hop : t * spec.hop + spec.window_size] * win
        for k in range(n_bins):
            out[k, t] = np.sum(frame * np.exp(-2j * np.pi * k * np.arange(spec.n_fft) / spec.n_fft))
    return out


def test_frame_count_800_for_5s_clip():
    spec = dsp.stft(np.zeros(120000), dsp.MAIN_FRONTEND)
    assert spec.shape == (257, 800)
    acc = dsp.stpacc(np.zeros(120000))
    assert acc.shape == (800, 64)


def test_stft_short_clip_rejected():
    with pytest.raises(ValueError, match="shorter than one"):
        dsp.stft(np.zeros(100), dsp.MAIN_FRONTEND)


def test_stft_dc_energy_in_bin_zero():
    spec = dsp.stft(np.full(4000, 0.5), dsp.MAIN_FRONTEND)
    power = np.abs(spec) ** 2
    assert power[0].min() > 0
    assert power[1:].max() <= 1e-18 * power[0].max()


def test_stft_bin_exact_sine_peaks_at_bin():
    # bin 16 of a 512-point transform at 24 kHz = 750 Hz
    k = 16
    n = 6000
    x = np.sin(2 * np.pi * k * np.arange(n) / 512)
    spec = dsp.stft(x, dsp.MAIN_FRONTEND)
    mean_power = (np.abs(spec) ** 2).mean(axis=1)
    assert mean_power.argmax() == k


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_stft_matches_naive_dft(seed):
    r = np.random.default_rng(seed)
    # ~16 frames at the main hop
    x = r.uniform(-1, 1, 2400)
    got = dsp.stft(x, dsp.MAIN_FRONTEND)
    ref = naive_dft_frames(x, dsp.MAIN_FRONTEND)
    assert np.abs(got - ref).max() <= 1e-6 * max(np.abs(ref).max(), 1.0)


def test_stft_odd_window_zero_padded_transform(rng):
    x = rng.uniform(-1, 1, 3000)
    got = dsp.stft(x, dsp.ACC_FRONTEND)
    ref = naive_dft_frames(x, dsp.ACC_FRONTEND)
    assert got.shape[0] == 513
    assert np.abs(got - ref).max() <= 1e-6 * np.abs(ref).max()


# ---------------------------------------------------------------------------
# mel filterbank


def test_mel_rows_sum_to_one():
    fb = dsp.mel_filterbank()
    assert fb.weights.shape == (64, 257)
    assert np.allclose(fb.weights.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(fb.weights >= 0)


def test_mel_coverage_and_monotone_peaks():
    fb = dsp.mel_filterbank()
    bins = np.arange(257) * 24000 / 512
    mid = (bins > 200) & (bins < 11000)
    assert np.all(fb.weights.sum(axis=0)[mid] > 0)
    peaks = fb.weights.argmax(axis=1)
    assert np.all(np.diff(peaks) >= 1)


def test_mel_first_filter_center_closed_form():
    fb = dsp.mel_filterbank()
    mel_max = 2595.0 * np.log10(1.0 + 12000.0 / 700.0)
    step = mel_max / 65.0
    expected_hz = 700.0 * (10 ** (step / 2595.0) - 1.0)
    bins = np.arange(257) * 24000 / 512
    peak_hz = bins[fb.weights[0].argmax()]
    assert abs(peak_hz - expected_hz) <= 24000 / 512  # within one bin


def test_mel_invalid_ranges():
    with pytest.raises(ValueError, match="invalid mel range"):
        dsp.mel_filterbank(f_min=5000, f_max=1000)
    with pytest.raises(ValueError, match="usable bins"):
        dsp.mel_filterbank(n_mels=300, n_fft=512)


# ---------------------------------------------------------------------------
# logmel / ild


def test_logmel_silence_is_log_eps():
    spec = dsp.stft(np.zeros(120000), dsp.MAIN_FRONTEND)
    lm = dsp.logmel(spec, dsp.mel_filterbank())
    assert lm.shape == (800, 64)
    assert np.allclose(lm, np.log(dsp.EPS), atol=1e-12)


def test_logmel_scaling_adds_log4(rng):
    x = rng.uniform(-0.5, 0.5, 120000)
    fb = dsp.mel_filterbank()
    a = dsp.logmel(dsp.stft(x, dsp.MAIN_FRONTEND), fb)
    b = dsp.logmel(dsp.stft(2 * x, dsp.MAIN_FRONTEND), fb)
    assert np.abs(b - a - np.log(4.0)).max() <= 1e-6


def test_ild_identical_channels_zero(rng):
    x = rng.uniform(-0.5, 0.5, 24000)
    spec = dsp.stft(x, dsp.MAIN_FRONTEND)
    out = dsp.ild(spec, spec, dsp.mel_filterbank())
    assert np.allclose(out, 0.0, atol=1e-12)


def test_ild_double_amplitude_is_log4(rng):
    x = rng.uniform(-0.5, 0.5, 120000)
    fb = dsp.mel_filterbank()
    out = dsp.ild(dsp.stft(2 * x, dsp.MAIN_FRONTEND), dsp.stft(x, dsp.MAIN_FRONTEND), fb)
    assert np.abs(out - np.log(4.0)).max() <= 1e-3


def test_ild_antisymmetry(rng):
    lx = rng.uniform(-0.5, 0.5, 48000)
    rx = rng.uniform(-0.5, 0.5, 48000)
    fb = dsp.mel_filterbank()
    sl, sr = dsp.stft(lx, dsp.MAIN_FRONTEND), dsp.stft(rx, dsp.MAIN_FRONTEND)
    assert np.abs(dsp.ild(sl, sr, fb) + dsp.ild(sr, sl, fb)).max() <= 1e-6


# ---------------------------------------------------------------------------
# stpacc


def test_stpacc_pools_512_lags_to_64_bins():
    assert dsp.ACC_LAGS // dsp.ACC_POOL == 64
    out = dsp.stpacc(np.zeros(120000))
    assert out.shape == (800, 64)


def test_stpacc_echo_peak_bin(rng):
    s = rng.normal(0, 0.3, 120000)
    x = s.copy()
    x[240:] += s[:-240]  # 10 ms echo at 24 kHz
    profile = dsp.stpacc(x).mean(axis=0)
    assert abs(int(profile.argmax()) - 30) <= 1


def test_stpacc_white_noise_concentrates_near_zero_lag(rng):
    profile = dsp.stpacc(rng.normal(0, 0.3, 120000)).mean(axis=0)
    assert int(profile.argmax()) < 8
    assert profile[0] > profile[32:].max()


def test_stpacc_polarity_invariant(rng):
    x = rng.normal(0, 0.2, 30000)
    assert np.array_equal(dsp.stpacc(x), dsp.stpacc(-x))


# ---------------------------------------------------------------------------
# stack_features


def test_stack_features_shape(fixture_waveform):
    left, right = fixture_waveform
    feat = dsp.stack_features(dsp.StereoClip(left=left, right=right))
    assert feat.shape == (4, 800, 64)
    assert np.isfinite(feat.data).all()


def test_stack_features_rejects_wrong_rate():
    clip = dsp.StereoClip(left=np.zeros(44100), right=np.zeros(44100), sample_rate=44100)
    with pytest.raises(ValueError, match="24000"):
        dsp.stack_features(clip)


def test_stack_features_swap_transform(fixture_waveform):
    left, right = fixture_waveform
    orig = dsp.stack_features(dsp.StereoClip(left=left, right=right)).data
    swapped = dsp.stack_features(dsp.StereoClip(left=right, right=left)).data
    assert np.abs(swapped[0] - orig[1]).max() <= 1e-6
    assert np.abs(swapped[1] - orig[0]).max() <= 1e-6
    assert np.abs(swapped[2] + orig[2]).max() <= 1e-6
    assert np.abs(swapped[3] - orig[3]).max() <= 1e-6


def test_stack_features_self_normalisation(fixture_waveform):
    left, right = fixture_waveform
    clip = dsp.StereoClip(left=left, right=right)
    stats = dsp.compute_norm_stats([dsp.stack_features(clip)])
    normed = dsp.stack_features(clip, stats=stats).data
    assert np.abs(normed.mean(axis=1)).max() <= 1e-9
    stds = normed.std(axis=1)
    assert np.all(stds[stds > 1e-6] < 1.0 + 1e-6)
    assert np.abs(stds - 1.0).max() <= 1e-3  # floored bins aside, unit scale


def test_stack_features_all_zero_audio_finite():
    feat = dsp.stack_features(dsp.StereoClip(left=np.zeros(120000), right=np.zeros(120000)))
    assert np.isfinite(feat.data).all()


# ---------------------------------------------------------------------------
# norm stats


def test_norm_stats_constant_tensor_floored():
    data = np.full((4, 10, 64), 2.5)
    stats = dsp.compute_norm_stats([data])
    assert np.allclose(stats.mean, 2.5)
    assert np.allclose(stats.std, dsp.STD_FLOOR)


def test_norm_stats_two_tensor_hand_formula(rng):
    a = rng.normal(size=(4, 7, 8))
    b = rng.normal(size=(4, 5, 8))
    stats = dsp.compute_norm_stats([a, b])
    both = np.concatenate([a, b], axis=1)
    assert np.allclose(stats.mean, both.mean(axis=1), atol=1e-12)
    assert np.allclose(stats.std, both.std(axis=1), atol=1e-9)


def test_norm_stats_empty_rejected():
    with pytest.raises(ValueError, match="no feature tensors"):
        dsp.compute_norm_stats([])
