"""DSP substrate: FFT, single-frequency transforms, STFT/ISTFT, Butterworth filters.

FFT convention: ``fft`` is the unnormalized forward DFT
``X[k] = sum_n x[n] exp(-2j pi k n / N)`` and ``ifft`` carries the ``1/N``.
Continuous-time spectra use the ``dt``-scaled estimator of :func:`goertzel_at`.
"""
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from . import kernels
from .errors import ConfigurationError


def fft(x):
    x = np.asarray(x)
    if x.size < 1:
        raise ValueError("fft needs at least one sample")
    return np.fft.fft(x)


def ifft(spectrum):
    return np.fft.ifft(np.asarray(spectrum))


def goertzel_at(samples, f, sample_rate):
    """Continuous-time Fourier estimate ``dt * sum_n h[n] exp(-2j pi f n dt)``.

    ``samples`` may be 1-D (one response) or 2-D (one response per row);
    ``f`` may be a scalar or a 1-D array of frequencies in Hz. The sum is
    evaluated directly at ``f``, not read from an FFT grid.
    """
    h = np.asarray(samples, dtype=float)
    freqs = np.atleast_1d(np.asarray(f, dtype=float))
    if np.any(np.abs(freqs) > sample_rate / 2):
        raise ValueError(f"frequency outside [-{sample_rate / 2}, {sample_rate / 2}] Hz")
    out = kernels.dtft(np.atleast_2d(h), freqs, 1.0 / sample_rate)
    if h.ndim == 1:
        out = out[0]
    if np.ndim(f) == 0:
        out = out[..., 0]
    return out


# -- STFT -----------------------------------------------------------------

@dataclass(frozen=True)
class StftConfig:
    """Analysis settings. Defaults: Hann, 1024-sample window, 256 hop, 16 kHz."""

    window_length: int = 1024
    hop: int = 256
    sample_rate: float = 16000.0
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.window_length < 2:
            raise ConfigurationError("window_length must be >= 2")
        if not 0 < self.hop <= self.window_length:
            raise ConfigurationError("hop must satisfy 0 < hop <= window_length")
        if not self.sample_rate > 0:
            raise ConfigurationError("sample_rate must be positive")

    @property
    def n_bins(self):
        return self.window_length // 2 + 1

    @property
    def bin_spacing(self):
        return self.sample_rate / self.window_length

    def window_array(self):
        return sps.get_window(self.window, self.window_length, fftbins=True)

    def is_invertible(self, rtol=1e-10):
        """Whether overlapped squared windows sum to a constant (weighted OLA)."""
        w2 = self.window_array() ** 2
        period = np.zeros(self.hop)
        for start in range(0, self.window_length, self.hop):
            chunk = w2[start:start + self.hop]
            period[:chunk.size] += chunk
        return bool(np.ptp(period) <= rtol * np.max(period))


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Complex STFT matrix of shape ``(frames, bins)`` and its settings."""

    data: np.ndarray
    config: StftConfig
    length: int

    @property
    def shape(self):
        return self.data.shape

    @property
    def frequencies(self):
        return np.arange(self.config.n_bins) * self.config.bin_spacing

    def with_data(self, data):
        data = np.asarray(data)
        if data.shape != self.data.shape:
            raise ValueError("replacement data must keep the spectrogram shape")
        return Spectrogram(data, self.config, self.length)


def _frame_count(n_padded, cfg):
    if n_padded <= cfg.window_length:
        return 1
    return 1 + int(np.ceil((n_padded - cfg.window_length) / cfg.hop))


def stft(x, config=StftConfig()):
    """Short-time Fourier transform; rows are frames, columns are bins."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("stft expects a 1-D signal")
    n_win, hop = config.window_length, config.hop
    pad = n_win // 2 if config.center else 0
    n_frames = _frame_count(x.size + 2 * pad, config)
    total = (n_frames - 1) * hop + n_win
    padded = np.zeros(total)
    padded[pad:pad + x.size] = x
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_win)[::hop][:n_frames]
    data = np.fft.rfft(frames * config.window_array(), axis=1)
    return Spectrogram(data, config, x.size)


def istft(spec, config=None, length=None):
    """Weighted overlap-add inverse of :func:`stft`.

    Raises :class:`ConfigurationError` when the window/hop pair does not
    satisfy the constant squared-window overlap condition.
    """
    if isinstance(spec, Spectrogram):
        data, config = spec.data, config or spec.config
        length = spec.length if length is None else length
    else:
        data = np.asarray(spec)
        if config is None:
            raise ConfigurationError("istft of a bare array needs a config")
    if not config.is_invertible():
        raise ConfigurationError(
            f"window {config.window!r} with hop {config.hop} is not overlap-add invertible")
    n_win, hop = config.window_length, config.hop
    w = config.window_array()
    frames = np.fft.irfft(data, n=n_win, axis=1) * w
    n_frames = frames.shape[0]
    total = (n_frames - 1) * hop + n_win
    out = np.zeros(total)
    norm = np.zeros(total)
    w2 = w ** 2
    for m in range(n_frames):
        out[m * hop:m * hop + n_win] += frames[m]
        norm[m * hop:m * hop + n_win] += w2
    nz = norm > 1e-12 * norm.max()
    out[nz] /= norm[nz]
    pad = n_win // 2 if config.center else 0
    out = out[pad:]
    if length is not None:
        out = out[:length] if out.size >= length else np.pad(out, (0, length - out.size))
    return out


# -- Butterworth ------------------------------------------------------------

def _warp(f, fs):
    return np.tan(np.pi * np.asarray(f, dtype=float) / fs)


def butter_lowpass_power(f, cutoff, order, fs):
    """``|H(f)|^2`` of the bilinear (prewarped) digital Butterworth low-pass."""
    ratio = _warp(np.abs(f), fs) / _warp(cutoff, fs)
    return 1.0 / (1.0 + ratio ** (2 * order))


def butter_highpass_power(f, cutoff, order, fs):
    return 1.0 - butter_lowpass_power(f, cutoff, order, fs)


def butter_bandpass_power(f, band, order, fs):
    """Analytic ``|H(f)|^2`` of the bilinear Butterworth band-pass of prototype ``order``.

    Low-pass to band-pass transform of the prototype on the prewarped axis:
    ``1 / (1 + ((W^2 - W0^2) / (W * BW))^(2 order))``.
    """
    lo, hi = band
    wl, wh = 2 * fs * _warp(lo, fs), 2 * fs * _warp(hi, fs)
    w = 2 * fs * _warp(np.abs(f), fs)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (w ** 2 - wl * wh) / (w * (wh - wl))
    x = np.where(w == 0, np.inf, x)
    return 1.0 / (1.0 + x ** (2 * order))


def bandpass_sos(band, order, fs):
    lo, hi = band
    if not 0 < lo < hi < fs / 2:
        raise ValueError(f"band {band} must satisfy 0 < lo < hi < {fs / 2}")
    if order < 1:
        raise ValueError("order must be >= 1")
    sos = sps.butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")
    poles = np.concatenate([np.roots(s[3:]) for s in sos])
    if np.any(np.abs(poles) >= 1.0):
        raise ValueError("Butterworth design is numerically unstable for these parameters")
    return sos


def iir_bandpass(x, band, order, fs):
    """Causal Butterworth band-pass filtering of ``x`` (second-order sections)."""
    return sps.sosfilt(bandpass_sos(band, order, fs), np.asarray(x, dtype=float))
