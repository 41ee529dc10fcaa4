"""Random room impulse responses from the simple and generalized Polack models.

The generalized sampler follows the filter-bank construction

    h[n] = sum_i sqrt(B(f_i)) (eps * phi_i)[n] exp(-alpha(f_i) n dt / 2)

with one shared white noise ``eps``. The bank ``{phi_i}`` is a zero-phase
Butterworth tree: band ``i`` has the real frequency response

    W_i = |HP_1|^2 ... |HP_i|^2 |LP_{i+1}|^2

(the forward-backward application of the Butterworth cascade), and since
``|LP_j|^2 + |HP_j|^2 = 1`` for the bilinear design the responses telescope
to ``sum_i W_i = 1`` at every frequency. A constant profile therefore
reproduces the simple model sample for sample.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from . import kernels
from .errors import ConfigurationError
from .seeding import derive_seed, generator
from .spectral import butter_lowpass_power

MAX_DURATION = 10.0
TAIL_LEVEL = 1e-4  # amplitude envelope at truncation (-80 dB)


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("signals are 1-D")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class ImpulseResponse(Signal):
    profile_ref: dict = field(default_factory=dict)


# -- simple model -------------------------------------------------------------

def n_samples_for(duration, sample_rate):
    if not duration > 0:
        raise ValueError("duration must be positive")
    return int(math.ceil(duration * sample_rate - 1e-9))


def default_duration(alpha_min):
    """Time at which ``exp(-alpha_min t / 2)`` reaches -80 dB, capped at 10 s."""
    if not alpha_min > 0:
        raise ValueError("alpha must be positive")
    return min(2.0 * math.log(1.0 / TAIL_LEVEL) / alpha_min, MAX_DURATION)


def _check_simple(b, alpha):
    if b < 0:
        raise ValueError("b must be non-negative")
    if not alpha > 0:
        raise ValueError("alpha must be positive")


def simple_polack_batch(b, alpha, n_samples, sample_rate, seeds):
    """Rows of :func:`simple_polack`, one per seed, as a 2-D array."""
    _check_simple(b, alpha)
    envelope = math.sqrt(b) * np.exp(-0.5 * alpha * np.arange(n_samples) / sample_rate)
    out = np.empty((len(seeds), n_samples))
    for r, seed in enumerate(seeds):
        out[r] = generator(seed).standard_normal(n_samples) * envelope
    return out


def simple_polack(b, alpha, duration=None, sample_rate=16000.0, seed=0):
    """``h[n] = sqrt(b) eps[n] exp(-alpha n dt / 2)`` with seeded white ``eps``."""
    _check_simple(b, alpha)
    if duration is None:
        duration = default_duration(alpha)
    n = n_samples_for(duration, sample_rate)
    h = simple_polack_batch(b, alpha, n, sample_rate, [seed])[0]
    ref = {"model": "simple", "b": b, "alpha": alpha, "seed": seed}
    return ImpulseResponse(h, float(sample_rate), ref)


# -- filter bank -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilterBank:
    """Zero-phase complementary Butterworth bank on ``0 < f_1 < ... < f_{N-1} < fs/2``."""

    edges: np.ndarray
    order: int
    sample_rate: float
    gains: np.ndarray

    @property
    def n_bands(self):
        return self.edges.size + 1

    def centers(self):
        """Geometric band centers; arithmetic for the band starting at 0 Hz."""
        lo = np.concatenate([[0.0], self.edges])
        hi = np.concatenate([self.edges, [self.sample_rate / 2]])
        c = np.sqrt(lo * hi)
        c[0] = 0.5 * hi[0]
        return c

    def response(self, f):
        """Real zero-phase responses ``W_i(f)``, shape ``(n_bands, len(f))``."""
        f = np.atleast_1d(np.asarray(f, dtype=float))
        out = np.empty((self.n_bands, f.size))
        passed = np.ones(f.size)
        for i, edge in enumerate(self.edges):
            low = butter_lowpass_power(f, edge, self.order, self.sample_rate)
            out[i] = passed * low
            passed = passed * (1.0 - low)
        out[-1] = passed
        return out * self.gains[:, None]

    def composite(self, f):
        """Coherent sum ``sum_i g_i W_i(f)``: the spectral shape seen by a shared noise."""
        return self.response(f).sum(axis=0)

    def fft_length(self, n):
        """FFT size for circular band splitting of an ``n``-sample noise."""
        floor = 0 if self.edges.size == 0 else int(math.ceil(8.0 * self.sample_rate / self.edges[0]))
        return sfft.next_fast_len(max(n, floor), real=True)

    def split(self, noise):
        """Band components of noise rows, shape ``(rows, n_bands, n)``.

        Filtering is circular over the row length, so every band component
        is exactly stationary.
        """
        noise = np.atleast_2d(noise)
        n_fft = noise.shape[1]
        grid = np.fft.rfftfreq(n_fft, 1.0 / self.sample_rate)
        w = self.response(grid)
        spec = np.fft.rfft(noise, axis=1)
        return np.fft.irfft(spec[:, None, :] * w[None, :, :], n=n_fft, axis=2)

    def split_paired(self, noise):
        """Band ``i`` of noise row ``i`` with ``sqrt(W_i)``; rows must equal ``n_bands``."""
        noise = np.asarray(noise)
        if noise.shape[0] != self.n_bands:
            raise ValueError("split_paired needs one noise row per band")
        grid = np.fft.rfftfreq(noise.shape[1], 1.0 / self.sample_rate)
        w = np.sqrt(self.response(grid))
        return np.fft.irfft(np.fft.rfft(noise, axis=1) * w, n=noise.shape[1], axis=1)


def design_filter_bank(edges, order=4, sample_rate=16000.0):
    edges = np.asarray(edges, dtype=float).ravel()
    if order < 1:
        raise ValueError("order must be >= 1")
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    if edges.size and (edges[0] <= 0 or edges[-1] >= sample_rate / 2
                       or np.any(np.diff(edges) <= 0)):
        raise ValueError("edges must be strictly ascending inside (0, fs/2)")
    return FilterBank(edges, int(order), float(sample_rate), np.ones(edges.size + 1))


def default_edges(sample_rate, n_bands=16, f_low=50.0, top_fraction=0.45):
    """Log-spaced edges from ``f_low`` to ``top_fraction * fs`` for ``n_bands`` bands."""
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    if n_bands == 1:
        return np.zeros(0)
    return np.geomspace(f_low, top_fraction * sample_rate, n_bands - 1)


def default_bank(sample_rate=16000.0, n_bands=16, order=4):
    return design_filter_bank(default_edges(sample_rate, n_bands), order, sample_rate)


# -- generalized model ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GeneralizedSampler:
    """Precomputed per-band constants for repeated generalized Polack draws."""

    profile: object
    bank: FilterBank
    n_samples: int
    independent_noise: bool = False

    def __post_init__(self):
        if abs(self.profile.nyquist - self.bank.sample_rate / 2) > 1e-9 * self.profile.nyquist:
            raise ConfigurationError(
                f"profile nyquist {self.profile.nyquist} Hz does not match bank rate "
                f"{self.bank.sample_rate} Hz")
        centers = self.bank.centers()
        alpha, b = self.profile.evaluate(centers)
        object.__setattr__(self, "band_alpha", np.asarray(alpha))
        object.__setattr__(self, "band_b", np.asarray(b))

    @property
    def sample_rate(self):
        return self.bank.sample_rate

    def effective_profile(self, n_grid=2049):
        """Tabulated profile of what the bank actually synthesizes.

        With a shared noise, ``E|H(f)|^2 ~ sum_ij sqrt(B_i B_j) W_i W_j 2 / (alpha_i + alpha_j)``
        (continuous convention, ``B`` per sample times ``dt``). Returned as
        ``alpha_eff = sum_i W_i alpha_i`` and ``B_eff = alpha_eff * E|H|^2 / dt``
        so that ``B_eff / alpha_eff`` is the bank's asymptotic variance per ``dt``.
        """
        from .profiles import tabulated_profile
        ny = self.sample_rate / 2
        grid = np.linspace(0.0, ny, n_grid)
        w = self.bank.response(grid)
        a, g = self.band_alpha, np.sqrt(self.band_b)
        if self.independent_noise:
            var = np.einsum("i,ik->k", g * g / a, w)
        else:
            pair = np.outer(g, g) * 2.0 / (a[:, None] + a[None, :])
            var = np.einsum("ik,ij,jk->k", w, pair, w)
        alpha_eff = a @ w
        return tabulated_profile(grid, alpha_eff, alpha_eff * var, ny)

    def noise(self, seed):
        n_fft = self.bank.fft_length(self.n_samples)
        if not self.independent_noise:
            return generator(seed).standard_normal(n_fft)[None, :]
        return np.stack([generator(derive_seed(seed, i)).standard_normal(n_fft)
                         for i in range(self.bank.n_bands)])

    def draw(self, seeds):
        """Responses for ``seeds`` as a ``(len(seeds), n_samples)`` array."""
        gains = np.sqrt(self.band_b)
        decays = 0.5 * self.band_alpha / self.sample_rate
        out = np.empty((len(seeds), self.n_samples))
        chunk = max(1, int(4e6 // (self.bank.n_bands * self.bank.fft_length(self.n_samples))))
        for start in range(0, len(seeds), chunk):
            block = seeds[start:start + chunk]
            if self.independent_noise:
                bands = np.stack([self.bank.split_paired(self.noise(s)) for s in block])
            else:
                noise = np.concatenate([self.noise(s) for s in block])
                bands = self.bank.split(noise)
            out[start:start + len(block)] = kernels.modulated_sum(
                np.ascontiguousarray(bands[:, :, :self.n_samples]), gains, decays)
        return out


def generalized_polack(profile, bank, duration=None, sample_rate=None, seed=0,
                       independent_noise=False):
    """One draw of the filter-bank generalized Polack model."""
    if sample_rate is not None and sample_rate != bank.sample_rate:
        raise ConfigurationError(
            f"sample rate {sample_rate} Hz does not match filter bank {bank.sample_rate} Hz")
    fs = bank.sample_rate
    sampler_probe = GeneralizedSampler(profile, bank, 1, independent_noise)
    if duration is None:
        duration = default_duration(float(np.min(sampler_probe.band_alpha)))
    sampler = GeneralizedSampler(profile, bank, n_samples_for(duration, fs), independent_noise)
    h = sampler.draw([seed])[0]
    ref = {"model": "generalized", "profile": profile.digest(), "bands": bank.n_bands,
           "seed": seed}
    return ImpulseResponse(h, fs, ref)


# -- signals -----------------------------------------------------------------

def convolve(s, h):
    """Full linear convolution ``s * h`` via zero-padded FFT."""
    if s.sample_rate != h.sample_rate:
        raise ConfigurationError(
            f"sample rates differ: {s.sample_rate} Hz vs {h.sample_rate} Hz")
    a, b = s.samples, h.samples
    n = a.size + b.size - 1
    n_fft = sfft.next_fast_len(n, real=True)
    y = np.fft.irfft(np.fft.rfft(a, n_fft) * np.fft.rfft(b, n_fft), n_fft)[:n]
    return Signal(y, s.sample_rate)


TEST_SIGNAL_KINDS = ("harmonic_chirp", "am_tones", "white")


def synth_test_signal(kind, duration, sample_rate=16000.0, seed=0):
    """Deterministic unit-RMS dry signal standing in for speech."""
    n = n_samples_for(duration, sample_rate)
    rng = generator(seed)
    t = np.arange(n) / sample_rate
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "harmonic_chirp":
        f0, f1 = 120.0, 280.0
        # log sweep of the fundamental, eight 1/k-weighted harmonics
        inst = f0 * (f1 / f0) ** (t / t[-1] if n > 1 else 0.0)
        phase = 2 * np.pi * np.cumsum(inst) / sample_rate
        offsets = rng.uniform(0, 2 * np.pi, 8)
        x = sum(np.sin(k * phase + offsets[k - 1]) / k for k in range(1, 9)
                if k * f1 < sample_rate / 2)
    elif kind == "am_tones":
        freqs = np.array([220.0, 530.0, 1170.0, 2450.0])
        freqs = freqs[freqs < sample_rate / 2]
        rates = rng.uniform(2.0, 6.0, freqs.size)
        ph = rng.uniform(0, 2 * np.pi, (2, freqs.size))
        x = sum((1.0 + 0.8 * np.sin(2 * np.pi * r * t + p)) * np.sin(2 * np.pi * f * t + q)
                for f, r, p, q in zip(freqs, rates, ph[0], ph[1]))
    else:
        raise ValueError(f"unknown test signal kind {kind!r}; expected one of {TEST_SIGNAL_KINDS}")
    x = np.asarray(x, dtype=float)
    return Signal(x / math.sqrt(np.mean(x ** 2)), float(sample_rate))
