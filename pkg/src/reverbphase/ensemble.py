"""Monte Carlo checks of the moment theory over ensembles of sampled responses.

Every ensemble member ``i`` is drawn from ``derive_seed(master_seed, i)``, so
results do not depend on chunking or on which subset is evaluated first.
Spectra use the ``dt``-scaled single-frequency transform; theory values are
therefore multiplied by ``dt`` (``B`` of a sampled profile is per sample).
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import kernels, theory
from .errors import ConfigurationError
from .profiles import CONSTANT
from .seeding import derive_seed, generator
from .spectral import StftConfig, stft
from .synth import (GeneralizedSampler, default_bank, default_duration, n_samples_for,
                    simple_polack_batch)

TWO_PI = 2 * np.pi
BOOTSTRAP_BELOW = 1000
BOOTSTRAP_RESAMPLES = 200
# low-frequency exclusion: bins with 4 pi f / alpha(0) below this are not judged
EXCLUSION_RATIO = 10.0


# -- ensemble definition -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    """What to draw: ``n_samples`` responses of one synthesis configuration.

    ``bank=None`` selects the simple model for constant profiles and the
    default 16-band bank otherwise.
    """

    n_samples: int
    master_seed: int
    profile: object
    sample_rate: float = 16000.0
    frequencies: tuple = ()
    bank: object = None
    duration: float = None
    independent_noise: bool = False
    chunk: int = 500
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        ny = self.sample_rate / 2
        if abs(self.profile.nyquist - ny) > 1e-9 * ny:
            raise ConfigurationError(
                f"profile nyquist {self.profile.nyquist} Hz does not match fs/2 = {ny} Hz")
        for f in self.frequencies:
            if not 0 < f < ny:
                raise ValueError(f"frequency {f} Hz outside (0, {ny})")

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    @property
    def is_simple(self):
        return self.bank is None and self.profile.kind == CONSTANT

    def sampler(self):
        if "sampler" not in self._cache:
            if self.is_simple:
                self._cache["sampler"] = None
            else:
                bank = self.bank or default_bank(self.sample_rate)
                probe = GeneralizedSampler(self.profile, bank, 1, self.independent_noise)
                n = self.n_response_samples(float(np.min(probe.band_alpha)))
                self._cache["sampler"] = GeneralizedSampler(
                    self.profile, bank, n, self.independent_noise)
        return self._cache["sampler"]

    def n_response_samples(self, alpha_min=None):
        if self.duration is not None:
            return n_samples_for(self.duration, self.sample_rate)
        if alpha_min is None:
            s = self.sampler()
            return s.n_samples if s is not None else self.n_response_samples(
                self.profile.alpha(0.0))
        return n_samples_for(default_duration(alpha_min), self.sample_rate)

    def seeds(self, start=0, stop=None):
        stop = self.n_samples if stop is None else stop
        return [derive_seed(self.master_seed, i) for i in range(start, stop)]

    def responses(self, start=0, stop=None):
        """Sampled responses ``[start, stop)`` as rows."""
        seeds = self.seeds(start, stop)
        s = self.sampler()
        if s is None:
            p = self.profile.params
            return simple_polack_batch(p["b"], p["alpha"], self.n_response_samples(),
                                       self.sample_rate, seeds)
        return s.draw(seeds)

    def iter_chunks(self):
        for start in range(0, self.n_samples, self.chunk):
            yield self.responses(start, min(start + self.chunk, self.n_samples))

    def transforms(self, freqs=None):
        """``H_est(f)`` for every member, shape ``(n_samples, len(freqs))``."""
        freqs = np.asarray(self.frequencies if freqs is None else freqs, dtype=float)
        key = ("H", freqs.tobytes())
        if key not in self._cache:
            blocks = [kernels.dtft(h, freqs, self.dt) for h in self.iter_chunks()]
            self._cache[key] = np.concatenate(blocks)
        return self._cache[key]

    def theory_profile(self):
        """Profile whose closed forms describe what is sampled (per-sample ``B``)."""
        s = self.sampler()
        return self.profile if s is None else s.effective_profile()

    def describe(self):
        d = {"n_samples": self.n_samples, "master_seed": self.master_seed,
             "sample_rate": self.sample_rate, "profile": self.profile.to_dict(),
             "duration": self.duration, "independent_noise": self.independent_noise}
        s = self.sampler()
        if s is not None:
            d["bank"] = {"edges": s.bank.edges.tolist(), "order": s.bank.order}
            d["response_samples"] = s.n_samples
        return d

    def digest(self):
        text = json.dumps(self.describe(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- moments ---------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalMoment:
    """Sample covariance of ``(Re H_est(f), Im H_est(f))`` with standard errors."""

    f: float
    var_re: float
    var_im: float
    cov_re_im: float
    n: int
    se_var_re: float
    se_var_im: float
    se_cov: float
    se_method: str = "gaussian"

    @property
    def corr(self):
        denom = np.sqrt(self.var_re * self.var_im)
        return self.cov_re_im / denom if denom > 0 else 0.0


def _moments(re, im):
    c = np.cov(np.vstack([re, im]), ddof=1)
    return c[0, 0], c[1, 1], c[0, 1]


def moments_from_samples(f, samples, bootstrap_seed=0):
    """:class:`EmpiricalMoment` of a complex sample.

    Gaussian-theory standard errors, or bootstrap ones (200 resamples) when
    fewer than 1000 samples are given.
    """
    z = np.asarray(samples, dtype=complex)
    n = z.size
    if n < 2:
        raise ValueError("need at least two samples")
    vr, vi, cv = _moments(z.real, z.imag)
    if n >= BOOTSTRAP_BELOW:
        k = np.sqrt(2.0 / (n - 1))
        se_c = np.sqrt((vr * vi + cv * cv) / (n - 1))
        return EmpiricalMoment(float(f), vr, vi, cv, n, vr * k, vi * k, se_c)
    rng = generator(bootstrap_seed)
    boot = np.array([_moments(z.real[idx], z.imag[idx])
                     for idx in rng.integers(0, n, (BOOTSTRAP_RESAMPLES, n))])
    se = boot.std(axis=0, ddof=1)
    return EmpiricalMoment(float(f), vr, vi, cv, n, se[0], se[1], se[2], "bootstrap")


def estimate_spectral_moments(spec):
    """Empirical moments at every frequency of ``spec``."""
    H = spec.transforms()
    return [moments_from_samples(f, H[:, k], derive_seed(spec.master_seed, 2 ** 32 + k))
            for k, f in enumerate(spec.frequencies)]


# -- hypothesis tests ----------------------------------------------------------

@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test."""

    __test__ = False  # not a pytest class

    test: str
    statistic: float
    p_value: float
    significance: float
    n: int
    f_hz: float = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")

    @property
    def rejected(self):
        return self.p_value < self.significance

    @property
    def decision(self):
        return "reject" if self.rejected else "accept"

    def to_dict(self, config_digest=None):
        d = {"test": self.test, "f_hz": self.f_hz, "statistic": self.statistic,
             "p_value": self.p_value, "n": self.n, "decision": self.decision,
             "significance": self.significance, "config_digest": config_digest}
        d.update(self.details)
        return d


def _check_n(n, minimum=30):
    if n < minimum:
        raise ValueError(f"need at least {minimum} samples, got {n}")


def circularity_test(samples, significance=0.01, f_hz=None):
    """Isotropy of a complex sample: equal Re/Im variances and zero correlation.

    Two-sided F test on the variance ratio and Fisher-z test on the
    correlation, combined by Bonferroni (``p = min(1, 2 min(p_F, p_r))``).
    A component with zero variance is maximally anisotropic: ``p = 0``.
    """
    z = np.asarray(samples, dtype=complex).ravel()
    n = z.size
    _check_n(n)
    vr, vi, cv = _moments(z.real, z.imag)
    if vr <= 0 or vi <= 0:
        return TestReport("circularity", float("inf"), 0.0, significance, n, f_hz,
                          {"var_ratio": float("nan"), "corr": float("nan"),
                           "degenerate": True})
    ratio = vr / vi
    p_f = 2 * min(stats.f.cdf(ratio, n - 1, n - 1), stats.f.sf(ratio, n - 1, n - 1))
    r = float(np.clip(cv / np.sqrt(vr * vi), -1.0, 1.0))
    zr = np.arctanh(min(abs(r), 1 - 1e-16)) * np.sqrt(n - 3)
    p_r = 2 * stats.norm.sf(zr)
    p = float(min(1.0, 2 * min(p_f, p_r)))
    stat = float(max(abs(np.log(ratio)) * np.sqrt((n - 1) / 4), zr))
    return TestReport("circularity", stat, p, significance, n, f_hz,
                      {"var_ratio": float(ratio), "corr": r,
                       "p_var": float(min(1.0, p_f)), "p_corr": float(p_r)})


@dataclass(frozen=True, eq=False)
class PhaseSample:
    """Angles in ``[0, 2 pi)`` at one frequency."""

    f: float
    phases: np.ndarray

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=float)
        if np.any(ph < 0) or np.any(ph >= TWO_PI) or np.any(~np.isfinite(ph)):
            raise ValueError("phases must lie in [0, 2 pi)")
        object.__setattr__(self, "phases", ph)

    @classmethod
    def from_complex(cls, f, values):
        return cls(f, wrap_phase(np.angle(values)))


def wrap_phase(angles):
    """Map angles to ``[0, 2 pi)`` (``np.mod`` alone can round up to ``2 pi``)."""
    out = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def rayleigh_test(phases):
    """Rayleigh test for a unimodal departure from uniformity. Returns ``(Z, p)``."""
    ph = np.asarray(phases, dtype=float)
    n = ph.size
    rn = abs(np.exp(1j * ph).sum())
    z = rn * rn / n
    # Zar's approximation, accurate to a few percent down to n ~ 10
    p = np.exp(np.sqrt(1 + 4 * n + 4 * (n * n - rn * rn)) - (1 + 2 * n))
    return float(z), float(min(1.0, max(0.0, p)))


def phase_uniformity_test(phases, significance=0.01):
    """KS test of ``phases / 2 pi`` against U(0, 1); Rayleigh reported alongside.

    The decision uses KS only: Rayleigh is blind to multimodal departures.
    """
    if not isinstance(phases, PhaseSample):
        phases = PhaseSample(None, phases)
    ph = phases.phases
    _check_n(ph.size)
    ks = stats.kstest(ph / TWO_PI, "uniform")
    rz, rp = rayleigh_test(ph)
    return TestReport("phase_uniformity", float(ks.statistic), float(ks.pvalue), significance,
                      ph.size, phases.f, {"rayleigh_z": rz, "rayleigh_p": rp})


# -- frequency correlation -----------------------------------------------------

@dataclass(frozen=True)
class CrossBinResult:
    f: float
    xi: float
    empirical: complex
    theoretical: complex
    rel_error: float
    std_error: float
    n: int


def cross_bin_correlation(spec, f, xi):
    """Empirical ``mean(H(f + xi/2) conj(H(f - xi/2)))`` against the closed form.

    Theory is ``dt`` times the Fourier autocorrelation of the sampled profile.
    """
    lo, hi = f - xi / 2, f + xi / 2
    if not (0 < lo and hi < spec.sample_rate / 2):
        raise ValueError(f"f +- xi/2 = [{lo}, {hi}] Hz leaves (0, {spec.sample_rate / 2})")
    H = spec.transforms(np.array([hi, lo]))
    prod = H[:, 0] * np.conj(H[:, 1])
    emp = complex(prod.mean())
    n = prod.size
    se = float(np.sqrt((prod.real.var(ddof=1) + prod.imag.var(ddof=1)) / n))
    theo = spec.dt * theory.fourier_autocorrelation(spec.theory_profile(), f, xi)
    return CrossBinResult(float(f), float(xi), emp, theo, abs(emp - theo) / abs(theo), se, n)


# -- STFT whiteness ------------------------------------------------------------

def circular_correlation(a, b):
    """Fisher-Lee circular correlation of paired angles (last axis is the sample).

    Exact O(n) form of the pairwise U-statistic:
    ``(|sum e^{i(a-b)}|^2 - |sum e^{i(a+b)}|^2) / sqrt((n^2 - |sum e^{2ia}|^2)(n^2 - |sum e^{2ib}|^2))``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[-1]
    d = np.abs(np.exp(1j * (a - b)).sum(-1)) ** 2
    s = np.abs(np.exp(1j * (a + b)).sum(-1)) ** 2
    da = n * n - np.abs(np.exp(2j * a).sum(-1)) ** 2
    db = n * n - np.abs(np.exp(2j * b).sum(-1)) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        return (d - s) / np.sqrt(da * db)


@dataclass(frozen=True)
class WhitenessReport:
    """Per-lag phase correlation of STFT bins and pooled uniformity."""

    max_abs_corr: float
    worst_lag: tuple
    lag_corr: dict
    uniformity: TestReport
    f_cutoff: float
    bins_judged: int
    frames_judged: int
    n: int
    corr_threshold: float

    @property
    def passed(self):
        return self.max_abs_corr < self.corr_threshold and not self.uniformity.rejected

    def to_dict(self):
        return {"test": "stft_phase_whiteness", "max_abs_corr": self.max_abs_corr,
                "worst_lag": list(self.worst_lag), "f_cutoff_hz": self.f_cutoff,
                "bins_judged": self.bins_judged, "frames_judged": self.frames_judged,
                "n": self.n, "corr_threshold": self.corr_threshold,
                "uniformity": self.uniformity.to_dict(),
                "lag_corr": [[dk, dm, c] for (dk, dm), c in sorted(self.lag_corr.items())],
                "decision": "accept" if self.passed else "reject"}


def exclusion_cutoff(profile, ratio=EXCLUSION_RATIO):
    """Frequency below which asymptotic claims are not judged: ``4 pi f / alpha(0) < ratio``."""
    return ratio * profile.alpha(0.0) / (4 * np.pi)


def _unit_phasors(block, config, frames, k_lo):
    S = np.stack([stft(h, config).data[:frames, k_lo:] for h in block])
    mag = np.abs(S)
    return np.where(mag > 0, S / np.where(mag > 0, mag, 1.0), 1.0)


def stft_phase_whiteness(spec, config=StftConfig(), min_bin_sep=2, min_hop_sep=1,
                         max_bin_lag=None, max_hop_lag=None, f_cutoff=None,
                         dynamic_range=1e-2, frame_energy_floor=1e-6, significance=0.01,
                         corr_threshold=0.05, probe_size=200):
    """Whiteness of STFT phases across time-frequency bins.

    For each lag ``(dk, dm)`` with ``min_bin_sep <= dk <= max_bin_lag`` and
    ``min_hop_sep <= dm <= max_hop_lag`` the Fisher-Lee circular correlation
    between the phases of bins ``(m, k)`` and ``(m + dm, k + dk)`` is pooled
    over judged position pairs and the whole ensemble (sums accumulate chunk
    by chunk).

    A bin ``(m, k)`` is judged when it lies above ``f_cutoff`` (default: the
    low-frequency exclusion of the sampled profile), its frame holds at
    least ``frame_energy_floor`` of the peak frame energy, and its mean
    energy is within ``dynamic_range`` of the strongest judged bin of the
    frame. The last rule drops bins whose content is window leakage from a
    much stronger band rather than their own reverberation. Energies come
    from the first ``probe_size`` members.

    Uniformity is a KS test on one phase per judged bin, bin ``j`` taken
    from member ``j mod n`` so that the pooled phases are independent.
    """
    if min_bin_sep < 0 or min_hop_sep < 0 or (min_bin_sep == 0 and min_hop_sep == 0):
        raise ValueError("lag separations must be non-negative and not both zero")
    if not 0 <= dynamic_range <= 1:
        raise ValueError("dynamic_range must lie in [0, 1]")
    if abs(config.sample_rate - spec.sample_rate) > 1e-9 * spec.sample_rate:
        raise ConfigurationError("STFT sample rate differs from the ensemble")
    profile = spec.theory_profile()
    f_cutoff = exclusion_cutoff(profile) if f_cutoff is None else float(f_cutoff)
    max_bin_lag = max(min_bin_sep, 4) if max_bin_lag is None else max_bin_lag
    max_hop_lag = max(min_hop_sep, 4) if max_hop_lag is None else max_hop_lag
    k_lo = int(np.floor(f_cutoff / config.bin_spacing)) + 1
    n_k = config.n_bins - k_lo
    if n_k < 1:
        raise ValueError("no bins above the cutoff")

    probe = spec.responses(0, min(spec.n_samples, probe_size))
    energy = np.mean([np.abs(stft(r, config).data) ** 2 for r in probe], axis=0)
    frame_e = energy.sum(axis=1)
    n_m = int(np.nonzero(frame_e >= frame_energy_floor * frame_e.max())[0].max()) + 1
    energy = energy[:n_m, k_lo:]
    mask = energy >= dynamic_range * energy.max(axis=1, keepdims=True)

    lags = [(dk, dm) for dk in range(min_bin_sep, max_bin_lag + 1)
            for dm in range(min_hop_sep, max_hop_lag + 1) if dk < n_k and dm < n_m]
    n = spec.n_samples
    acc = {lag: np.zeros((2, n_m - lag[1], n_k - lag[0]), dtype=complex) for lag in lags}
    sq = np.zeros((n_m, n_k), dtype=complex)
    owner = (np.arange(n_m * n_k) % n).reshape(n_m, n_k)
    picked = np.empty((n_m, n_k))
    row = 0
    for block in spec.iter_chunks():
        u = _unit_phasors(block, config, n_m, k_lo)
        sq += (u * u).sum(0)
        for dk, dm in lags:
            a = u[:, :n_m - dm, :n_k - dk]
            b = u[:, dm:, dk:]
            acc[(dk, dm)][0] += (a * b.conj()).sum(0)
            acc[(dk, dm)][1] += (a * b).sum(0)
        local = owner - row
        mm, kk = np.nonzero((local >= 0) & (local < len(block)))
        picked[mm, kk] = np.angle(u[local[mm, kk], mm, kk])
        row += len(block)

    lag_corr = {}
    spread = n * n - np.abs(sq) ** 2
    for dk, dm in lags:
        both = mask[:n_m - dm, :n_k - dk] & mask[dm:, dk:]
        if not both.any():
            continue
        d, s = acc[(dk, dm)]
        num = np.sum((np.abs(d) ** 2 - np.abs(s) ** 2)[both])
        den = np.sqrt(np.sum(spread[:n_m - dm, :n_k - dk][both])
                      * np.sum(spread[dm:, dk:][both]))
        lag_corr[(dk, dm)] = float(num / den)
    if lag_corr:
        worst = max(lag_corr, key=lambda key: abs(lag_corr[key]))
        max_corr = abs(lag_corr[worst])
    else:
        worst, max_corr = (), 0.0
    uniform = phase_uniformity_test(wrap_phase(picked[mask]), significance)
    return WhitenessReport(float(max_corr), worst, lag_corr, uniform, f_cutoff,
                           int(mask.sum()), n_m, n, corr_threshold)


# -- regression ----------------------------------------------------------------

def convergence_slope(xs, ys):
    """Least-squares fit of ``log y = slope log x + intercept``; returns ``(slope, intercept, r2)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need at least three paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log regression needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)
