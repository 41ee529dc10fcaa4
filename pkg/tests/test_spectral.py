import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal as sps

from reverbphase.errors import ConfigurationError
from reverbphase.spectral import (StftConfig, bandpass_sos, butter_bandpass_power, fft,
                                  goertzel_at, ifft, iir_bandpass, istft, stft)


def direct_dft(x):
    n = np.arange(len(x))
    return np.array([np.sum(x * np.exp(-2j * np.pi * k * n / len(x))) for k in n])


def test_fft_delta_is_flat():
    x = np.zeros(16)
    x[0] = 1.0
    np.testing.assert_allclose(fft(x), np.ones(16), atol=1e-15)


def test_fft_tone_single_bin():
    n = 64
    x = np.exp(2j * np.pi * 5 * np.arange(n) / n)
    X = fft(x)
    assert abs(X[5] - n) < 1e-9
    assert np.max(np.abs(np.delete(X, 5))) < 1e-9


def test_fft_matches_direct_dft(rng):
    x = rng.standard_normal(257)
    np.testing.assert_allclose(fft(x), direct_dft(x), rtol=0, atol=1e-9)


def test_fft_rejects_empty():
    with pytest.raises(ValueError):
        fft([])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200))
def test_fft_roundtrip_and_parseval(xs):
    x = np.array(xs)
    X = fft(x)
    np.testing.assert_allclose(ifft(X).real, x, atol=1e-10 * max(1.0, np.max(np.abs(x))))
    e = np.sum(x ** 2)
    assert abs(e - np.sum(np.abs(X) ** 2) / x.size) <= 1e-9 * max(e, 1e-300)


def test_goertzel_delta():
    h = np.zeros(50)
    h[0] = 1.0
    for f in (0.0, 123.4, 3999.0):
        assert abs(goertzel_at(h, f, 8000.0) - 1 / 8000) < 1e-18


def test_goertzel_on_fft_bin(rng):
    h = rng.standard_normal(400)
    fs = 8000.0
    k = 37
    want = fft(h)[k] / fs
    assert abs(goertzel_at(h, k * fs / 400, fs) - want) < 1e-9 * np.abs(want).max()


def test_goertzel_matches_padded_fft_interpolation(rng):
    h = rng.standard_normal(300)
    fs = 1000.0
    n_pad = 300 * 64
    X = np.fft.fft(h, n_pad) / fs
    k = 4321
    got = goertzel_at(h, k * fs / n_pad, fs)
    assert abs(got - X[k]) < 1e-6


def test_goertzel_linear_and_vectorized(rng):
    a, b = rng.standard_normal((2, 128))
    f = np.array([10.0, 77.0])
    lhs = goertzel_at(2.5 * a + b, f, 1000.0)
    rhs = 2.5 * goertzel_at(a, f, 1000.0) + goertzel_at(b, f, 1000.0)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    both = goertzel_at(np.vstack([a, b]), f, 1000.0)
    assert both.shape == (2, 2)


def test_goertzel_out_of_band():
    with pytest.raises(ValueError):
        goertzel_at(np.ones(4), 600.0, 1000.0)


def test_stft_shape_and_zero_signal():
    cfg = StftConfig()
    S = stft(np.zeros(5000), cfg)
    assert S.shape[1] == 513
    assert not np.any(S.data)


def test_stft_tone_energy_in_mainlobe():
    cfg = StftConfig(1024, 256, 16000.0)
    k = 40
    t = np.arange(16000) / 16000.0
    S = stft(np.sin(2 * np.pi * k * cfg.bin_spacing * t), cfg)
    mid = np.abs(S.data[S.shape[0] // 2]) ** 2
    assert mid[k - 2:k + 3].sum() > (1 - 1e-6) * mid.sum()


def test_stft_roundtrip_white_noise(rng):
    cfg = StftConfig(1024, 256, 16000.0)
    x = rng.standard_normal(20000)
    y = istft(stft(x, cfg))
    assert y.shape == x.shape
    assert np.max(np.abs(y[512:-512] - x[512:-512])) < 1e-8


def test_stft_shift_by_hop(rng):
    cfg = StftConfig(256, 64, 8000.0)
    x = rng.standard_normal(3000)
    shifted = np.concatenate([np.zeros(64), x])
    a, b = stft(x, cfg).data, stft(shifted, cfg).data
    # frames fully inside the signal
    np.testing.assert_allclose(b[3:40], a[2:39], atol=1e-8)


def test_stft_linearity(rng):
    x, y = rng.standard_normal((2, 4000))
    cfg = StftConfig(512, 128, 8000.0)
    np.testing.assert_allclose(stft(3 * x - y, cfg).data,
                               3 * stft(x, cfg).data - stft(y, cfg).data, atol=1e-9)


def test_istft_rejects_non_invertible():
    cfg = StftConfig(1024, 1024, 16000.0, window="hann")
    S = stft(np.ones(4096), cfg)
    with pytest.raises(ConfigurationError):
        istft(S)


def test_stft_config_validation():
    with pytest.raises(ConfigurationError):
        StftConfig(1024, 0)
    with pytest.raises(ConfigurationError):
        StftConfig(1024, 2048)


def test_bandpass_matches_analytic_response():
    fs = 16000.0
    band = (500.0, 1000.0)
    sos = bandpass_sos(band, 4, fs)
    f, h = sps.sosfreqz(sos, worN=1024, fs=fs)
    want = butter_bandpass_power(f, band, 4, fs)
    sel = want > 1e-6
    db = 10 * np.log10(np.abs(h[sel]) ** 2 / want[sel])
    assert np.max(np.abs(db)) < 0.1


def test_bandpass_tones():
    fs = 16000.0
    t = np.arange(int(fs)) / fs
    band = (500.0, 1000.0)
    center = np.sqrt(500.0 * 1000.0)
    x = np.sin(2 * np.pi * center * t)
    y = iir_bandpass(x, band, 4, fs)
    ratio = np.sqrt(np.mean(y[4000:] ** 2) / np.mean(x[4000:] ** 2))
    assert 0.98 <= ratio <= 1.0 + 1e-6
    far = iir_bandpass(np.sin(2 * np.pi * 2000.0 * t), band, 4, fs)
    assert 20 * np.log10(np.sqrt(np.mean(far[4000:] ** 2) / 0.5)) < -20
    assert not np.any(iir_bandpass(np.zeros(100), band, 4, fs))


def test_bandpass_rejects_bad_band():
    with pytest.raises(ValueError):
        bandpass_sos((1000.0, 500.0), 4, 16000.0)
    with pytest.raises(ValueError):
        bandpass_sos((100.0, 9000.0), 4, 16000.0)
