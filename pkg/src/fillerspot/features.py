"""Waveform to log-magnitude spectrogram, plus training-time augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .config import AugmentConfig, FrontendConfig


class FeatureError(ValueError):
    """Raised for invalid feature-extraction inputs."""


@dataclass(frozen=True)
class Spectrogram:
    """Log-magnitude STFT frames, time-major.

    ``frames`` is T x F where frame t covers samples [t*hop, t*hop + win).
    """

    frames: np.ndarray
    hop_s: float
    sample_rate: int

    def __post_init__(self) -> None:
        if self.frames.ndim != 2:
            raise FeatureError(f"frames must be 2-D, got shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise FeatureError("spectrogram contains non-finite values")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


def num_frames_for(num_samples: int, config: FrontendConfig) -> int:
    return (num_samples - config.win_length) // config.hop_length + 1


def stft_features(waveform: np.ndarray, config: FrontendConfig) -> Spectrogram:
    """Frame, window, and transform a mono waveform.

    Output values are log(|STFT| + log_floor), so an all-zero input maps to
    the constant log(log_floor).
    """
    waveform = np.asarray(waveform, dtype=np.float64)
    if waveform.ndim != 1:
        raise FeatureError(f"waveform must be 1-D, got shape {waveform.shape}")
    if not np.all(np.isfinite(waveform)):
        raise FeatureError("waveform contains non-finite values")
    win = config.win_length
    hop = config.hop_length
    if len(waveform) < win:
        raise FeatureError(
            f"waveform of {len(waveform)} samples is shorter than one window ({win} samples)"
        )
    t = num_frames_for(len(waveform), config)
    idx = np.arange(win)[None, :] + hop * np.arange(t)[:, None]
    window = get_window("hann", win, fftbins=True)
    spectrum = np.fft.rfft(waveform[idx] * window, n=config.n_fft, axis=1)
    frames = np.log(np.abs(spectrum) + config.log_floor).astype(np.float32)
    return Spectrogram(frames=frames, hop_s=config.hop_s, sample_rate=config.sample_rate)


def augment(
    spectrogram: Spectrogram, config: AugmentConfig, rng: np.random.Generator
) -> Spectrogram:
    """Apply time shift, additive noise, and mean-fill masking.

    Identity when disabled. Shapes are preserved; vacated or masked cells are
    filled with the per-bin mean so augmented frames stay in the feature
    value range. Noise is Gaussian, scaled to the feature standard deviation
    by the configured SNR.
    """
    if not config.enabled:
        return spectrogram
    frames = spectrogram.frames.astype(np.float32, copy=True)
    t, f = frames.shape
    if config.time_mask_width >= t or config.freq_mask_width >= f:
        raise FeatureError(
            f"mask widths ({config.time_mask_width} frames, {config.freq_mask_width} bins) "
            f"must be smaller than the spectrogram ({t} frames, {f} bins)"
        )
    bin_means = frames.mean(axis=0)

    if config.time_shift_frames > 0:
        shift = int(rng.integers(-config.time_shift_frames, config.time_shift_frames + 1))
        if shift > 0:
            frames[shift:] = frames[: t - shift]
            frames[:shift] = bin_means
        elif shift < 0:
            frames[: t + shift] = frames[-shift:]
            frames[t + shift :] = bin_means

    if config.noise_snr_db is not None:
        sigma = float(frames.std()) * 10.0 ** (-config.noise_snr_db / 20.0)
        if sigma > 0:
            frames += rng.normal(0.0, sigma, frames.shape).astype(np.float32)

    for _ in range(config.time_mask_count):
        if config.time_mask_width > 0:
            start = int(rng.integers(0, t - config.time_mask_width + 1))
            frames[start : start + config.time_mask_width] = bin_means
    for _ in range(config.freq_mask_count):
        if config.freq_mask_width > 0:
            start = int(rng.integers(0, f - config.freq_mask_width + 1))
            frames[:, start : start + config.freq_mask_width] = bin_means[
                start : start + config.freq_mask_width
            ]

    return Spectrogram(frames=frames, hop_s=spectrogram.hop_s, sample_rate=spectrogram.sample_rate)
