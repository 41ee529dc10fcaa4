"""Spectrogram reconstruction losses, SI-SDR and the phase-substitution experiment."""
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .seeding import derive_seed, generator
from .spectral import Spectrogram, StftConfig, istft, stft
from .synth import Signal, convolve

SISDR_CAP_DB = 100.0


class LossMode(Enum):
    """The four post-processings applied before the squared error."""

    KEEP_PHASE = "f1"
    KEEP_PHASE_LOG = "f2"
    MAGNITUDE = "f3"
    MAGNITUDE_LOG = "f4"

    @property
    def phase_invariant(self):
        return self in (LossMode.MAGNITUDE, LossMode.MAGNITUDE_LOG)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            return cls[str(value).upper()]


def post_process(z, mode):
    """``f1: z``, ``f2: log(1+|z|) z/|z|`` (0 at 0), ``f3: |z|``, ``f4: log(1+|z|)``."""
    mode = LossMode.parse(mode)
    z = np.asarray(z)
    if mode is LossMode.KEEP_PHASE:
        return z
    mag = np.abs(z)
    if mode is LossMode.MAGNITUDE:
        return mag
    comp = np.log1p(mag)
    if mode is LossMode.MAGNITUDE_LOG:
        return comp
    unit = np.divide(z, mag, out=np.zeros(np.shape(z), dtype=complex), where=mag > 0)
    return comp * unit


def _data(x):
    return x.data if isinstance(x, Spectrogram) else np.asarray(x)


def loss(Y, Yhat, mode):
    """Mean over time-frequency bins of ``|f(Y) - f(Yhat)|^2``."""
    a, b = _data(Y), _data(Yhat)
    if a.shape != b.shape:
        raise ValueError(f"spectrogram shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty spectrogram")
    diff = post_process(a, mode) - post_process(b, mode)
    return float(np.mean(np.abs(diff) ** 2))


def _samples(x):
    return x.samples if isinstance(x, Signal) else np.asarray(x, dtype=float)


def sisdr(estimate, reference):
    """Scale-invariant SDR in dB, clipped to ``[-100, 100]``.

    The estimate is projected on the reference; the ratio of projection to
    residual energy is reported. Zero residual gives the +100 dB cap.
    """
    est, ref = _samples(estimate), _samples(reference)
    if est.shape != ref.shape:
        raise ValueError(f"lengths differ: {est.shape} vs {ref.shape}")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference signal is all zeros")
    proj = (np.dot(est, ref) / ref_energy) * ref
    resid = est - proj
    p, e = float(np.dot(proj, proj)), float(np.dot(resid, resid))
    # residual at rounding level of the estimate counts as a perfect match
    if e <= 1e-20 * max(p, float(np.dot(est, est))):
        return SISDR_CAP_DB
    if p == 0.0:
        return -SISDR_CAP_DB
    return float(np.clip(10 * np.log10(p / e), -SISDR_CAP_DB, SISDR_CAP_DB))


# -- phase substitution ----------------------------------------------------------

@dataclass(frozen=True)
class LossReport:
    """Losses of dry-phase and wet-phase reconstructions against the dry signal.

    ``losses[variant][mode]`` compares the constructed spectrogram
    (``|S| exp(i angle)``) with ``S``. ``reanalysis[variant][mode]`` compares
    the STFT of the resynthesized waveform with ``S``: an arbitrary phase field
    is not a consistent STFT, so its magnitudes change on the round trip.
    """

    losses: dict
    reanalysis: dict
    sisdr_dry: float
    sisdr_wet: float
    sisdr_reverberant: float
    config_digest: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        for table in (self.losses, self.reanalysis):
            for row in table.values():
                for v in row.values():
                    if not (np.isfinite(v) and v >= 0):
                        raise ValueError("losses must be finite and non-negative")

    def to_dict(self):
        return {"losses": self.losses, "reanalysis": self.reanalysis,
                "sisdr_dry_db": self.sisdr_dry, "sisdr_wet_db": self.sisdr_wet,
                "sisdr_reverberant_db": self.sisdr_reverberant,
                "config_digest": self.config_digest, **self.details}


def _config_digest(config, extra):
    d = {"window_length": config.window_length, "hop": config.hop,
         "sample_rate": config.sample_rate, "window": config.window,
         "center": config.center, **extra}
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def phase_substitution_demo(s, h, config=None):
    """Rebuild the dry signal from its magnitude with the dry or the reverberant phase.

    ``y = s * h`` is trimmed to ``len(s)`` (Polack responses carry no direct
    path, so no delay compensation). ``s_dry = istft(|S| e^{i angle S})`` and
    ``s_wet = istft(|S| e^{i angle Y})``.

    Returns
    -------
    LossReport
        The waveforms ride along as the ``signals`` attribute (not serialized).
    """
    config = config or StftConfig(sample_rate=s.sample_rate)
    if config.sample_rate != s.sample_rate:
        raise ValueError("STFT config and signal sample rates differ")
    y = Signal(convolve(s, h).samples[:len(s)], s.sample_rate)
    S, Y = stft(s.samples, config), stft(y.samples, config)
    mag = np.abs(S.data)
    built = {"dry": S.with_data(mag * np.exp(1j * np.angle(S.data))),
             "wet": S.with_data(mag * np.exp(1j * np.angle(Y.data)))}
    waves = {k: istft(v) for k, v in built.items()}
    losses, reanalysis = {}, {}
    for k in built:
        again = stft(waves[k], config)
        losses[k] = {m.value: loss(built[k], S, m) for m in LossMode}
        reanalysis[k] = {m.value: loss(again, S, m) for m in LossMode}
    digest = _config_digest(config, {"signal": hashlib.sha256(s.samples.tobytes()).hexdigest(),
                                     "rir": hashlib.sha256(h.samples.tobytes()).hexdigest()})
    report = LossReport(losses, reanalysis, sisdr(waves["dry"], s.samples),
                        sisdr(waves["wet"], s.samples), sisdr(y, s), digest)
    object.__setattr__(report, "signals", {"dry": s.samples, "reverberant": y.samples,
                                           "dry_phase": waves["dry"],
                                           "wet_phase": waves["wet"]})
    return report


@dataclass(frozen=True)
class PhaseSensitivity:
    mode: str
    mean: float
    variance: float
    n_trials: int

    @property
    def std_error(self):
        return float(np.sqrt(self.variance / self.n_trials))


def loss_phase_sensitivity(Y, mode, n_trials, seed):
    """Loss between ``Y`` and ``Y e^{i Theta_k}`` for i.i.d. uniform phase fields.

    Trial ``k`` draws its field from ``derive_seed(seed, k)``. Returns the
    sample mean and the unbiased sample variance of the losses.
    """
    if n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    mode = LossMode.parse(mode)
    a = _data(Y)
    vals = np.empty(n_trials)
    for k in range(n_trials):
        theta = generator(derive_seed(seed, k)).uniform(0, 2 * np.pi, a.shape)
        vals[k] = loss(a, a * np.exp(1j * theta), mode)
    if mode.phase_invariant:
        # |a e^{i theta}| may differ from |a| in the last bits; anything at that
        # rounding level is the exact zero of the phase-invariant loss
        rounding = (8 * np.finfo(float).eps) ** 2 * float(np.mean(np.abs(a) ** 2))
        vals[vals <= rounding] = 0.0
    return PhaseSensitivity(mode.value, float(vals.mean()), float(vals.var(ddof=1)), n_trials)
