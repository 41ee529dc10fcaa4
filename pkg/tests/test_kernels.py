import numpy as np
import pytest
from hypothesis import given, strategies as st

from reverbphase import kernels

BACKENDS = kernels.backends()


def direct_dtft(h, freqs, dt, decays=None):
    n = np.arange(h.shape[-1])
    out = np.zeros(h.shape[:-1] + (len(freqs),), dtype=complex)
    for k, f in enumerate(freqs):
        d = 0.0 if decays is None else decays[k]
        out[..., k] = dt * np.sum(h * np.exp(-2j * np.pi * f * n * dt - d * n), axis=-1)
    return out


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_dtft_matches_direct_sum(name, rng):
    h = rng.standard_normal((5, 777))
    freqs = np.array([0.0, 13.3, 1000.0, 3999.0, -250.5])
    dt = 1 / 8000
    got = BACKENDS[name].dtft(h, freqs, dt)
    np.testing.assert_allclose(got, direct_dtft(h, freqs, dt), rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_damped_dtft_matches_direct_sum(name, rng):
    h = rng.standard_normal((3, 2000))
    freqs = np.array([5.0, 700.0, 3000.0])
    decays = np.array([1e-3, 5e-3, 0.0])
    got = BACKENDS[name].dtft(h, freqs, 1e-4, decays)
    np.testing.assert_allclose(got, direct_dtft(h, freqs, 1e-4, decays), rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_modulated_sum_matches_loop(name, rng):
    bands = rng.standard_normal((2, 4, 300))
    gains = rng.uniform(0.1, 2.0, 4)
    decays = rng.uniform(0.0, 0.01, 4)
    want = np.zeros((2, 300))
    for b in range(4):
        want += gains[b] * np.exp(-decays[b] * np.arange(300)) * bands[:, b, :]
    np.testing.assert_allclose(BACKENDS[name].modulated_sum(bands, gains, decays), want,
                               rtol=1e-12, atol=1e-12)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
@given(st.integers(1, 3000), st.floats(-0.5, 0.5), st.integers(0, 2 ** 32 - 1))
def test_backends_agree(n, f_dt, seed):
    h = np.random.default_rng(seed).standard_normal((2, n))
    freqs = np.array([f_dt, 0.25, -0.1])
    a = BACKENDS["python"].dtft(h, freqs, 1.0)
    b = BACKENDS["cython"].dtft(h, freqs, 1.0)
    scale = np.sum(np.abs(h), axis=1, keepdims=True)
    assert np.all(np.abs(a - b) <= 1e-12 * scale)


def test_active_backend_is_reported():
    assert kernels.BACKEND in BACKENDS
