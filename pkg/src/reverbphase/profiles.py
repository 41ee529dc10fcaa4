"""Frequency-dependent reverberation parameters.

A :class:`FrequencyProfile` holds the decay rate ``alpha(f)`` [1/s] and the
magnitude density ``b(f)`` of the generalized Polack model. Both are even in
``f``: every kind evaluates on ``|f|`` so ``eval(-f) == eval(f)`` bit for bit.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .seeding import derive_seed, generator

SIX_LN10 = 6.0 * math.log(10.0)

CONSTANT = "constant"
TABULATED = "tabulated"
AUTOREGRESSIVE = "ar"

# Fig. 1 caption: RT60 of about 82 ms and mean magnitude of about 0.0029.
FIG1_RT60 = 0.082
FIG1_MEAN_B = 0.0029


def rt60_to_alpha(rt60):
    """Decay rate [1/s] for a reverberation time [s]: ``6 ln(10) / rt60``."""
    if not rt60 > 0:
        raise ValueError(f"rt60 must be positive, got {rt60!r}")
    return SIX_LN10 / rt60


def alpha_to_rt60(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return SIX_LN10 / alpha


@dataclass(frozen=True)
class ArProfileSpec:
    """Parameters of a random autoregressive profile pair.

    ``order`` poles are drawn uniformly on the disk of radius
    ``pole_radius_max``; complex poles come with their conjugates so the
    resulting power spectrum is real and even.
    """

    order: int = 8
    pole_radius_max: float = 0.95
    target_mean_alpha: float = rt60_to_alpha(FIG1_RT60)
    target_mean_b: float = FIG1_MEAN_B
    seed: int = 0

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if not 0.0 < self.pole_radius_max < 1.0:
            raise ValueError("pole_radius_max must lie in (0, 1)")
        if not self.target_mean_alpha > 0:
            raise ValueError("target_mean_alpha must be positive")
        if self.target_mean_b < 0:
            raise ValueError("target_mean_b must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class FrequencyProfile:
    """Even functions ``alpha(f)`` and ``b(f)`` on ``[-nyquist, nyquist]``.

    Use the constructors :func:`constant_profile`, :func:`tabulated_profile`
    and :func:`sample_ar_profile` rather than building this directly.
    """

    kind: str
    nyquist: float
    params: dict = field(repr=False)

    def __post_init__(self):
        if not self.nyquist > 0:
            raise ValueError("nyquist must be positive")
        if self.kind not in (CONSTANT, TABULATED, AUTOREGRESSIVE):
            raise ValueError(f"unknown profile kind {self.kind!r}")

    def _abs_freq(self, f):
        f = np.abs(np.asarray(f, dtype=float))
        if np.any(f > self.nyquist) or np.any(np.isnan(f)):
            raise ValueError(f"frequency outside [-{self.nyquist}, {self.nyquist}] Hz")
        return f

    def _component(self, name, f):
        af = self._abs_freq(f)
        p = self.params[name]
        if self.kind == CONSTANT:
            return np.full(af.shape, p, dtype=float)
        if self.kind == TABULATED:
            return np.interp(af, self.params["freqs"], p)
        return p["scale"] * ar_power(p["poles"], af / self.nyquist)

    def alpha(self, f):
        """Decay rate [1/s] at ``f``; scalar in, scalar out."""
        out = self._component("alpha", f)
        return float(out) if out.ndim == 0 else out

    def b(self, f):
        out = self._component("b", f)
        return float(out) if out.ndim == 0 else out

    def evaluate(self, f):
        """Return ``(alpha(f), b(f))``."""
        return self.alpha(f), self.b(f)

    def mean_alpha(self):
        return quadrature.mean_over(self._component_fn("alpha"), 0.0, self.nyquist)

    def mean_b(self):
        return quadrature.mean_over(self._component_fn("b"), 0.0, self.nyquist)

    def _component_fn(self, name):
        return lambda f: self._component(name, f)

    def with_nyquist(self, nyquist):
        """Same profile re-declared on a new band; AR profiles keep normalized frequency."""
        return FrequencyProfile(self.kind, float(nyquist), self.params)

    # -- serialization -------------------------------------------------
    def to_dict(self):
        if self.kind == CONSTANT:
            alpha, b = self.params["alpha"], self.params["b"]
        elif self.kind == TABULATED:
            alpha = {"freqs_hz": list(map(float, self.params["freqs"])),
                     "values": list(map(float, self.params["alpha"]))}
            b = {"freqs_hz": alpha["freqs_hz"], "values": list(map(float, self.params["b"]))}
        else:
            alpha, b = (
                {"poles": [[float(z.real), float(z.imag)] for z in self.params[k]["poles"]],
                 "scale": float(self.params[k]["scale"])}
                for k in ("alpha", "b")
            )
        out = {"kind": self.kind, "alpha": alpha, "b": b, "nyquist_hz": float(self.nyquist)}
        if "spec" in self.params:
            out["spec"] = dict(self.params["spec"])
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        kind, ny = d["kind"], float(d["nyquist_hz"])
        if kind == CONSTANT:
            return constant_profile(d["alpha"], d["b"], ny)
        if kind == TABULATED:
            return tabulated_profile(d["alpha"]["freqs_hz"], d["alpha"]["values"],
                                     d["b"]["values"], ny)
        if kind == AUTOREGRESSIVE:
            params = {
                k: {"poles": np.array([complex(re, im) for re, im in d[k]["poles"]]),
                    "scale": float(d[k]["scale"])}
                for k in ("alpha", "b")
            }
            if "spec" in d:
                params["spec"] = dict(d["spec"])
            return cls(AUTOREGRESSIVE, ny, params)
        raise ValueError(f"unknown profile kind {kind!r}")

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def digest(self):
        import hashlib
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def constant_profile(alpha, b, nyquist):
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if b < 0:
        raise ValueError("b must be non-negative")
    return FrequencyProfile(CONSTANT, float(nyquist), {"alpha": float(alpha), "b": float(b)})


def tabulated_profile(freqs, alphas, bs, nyquist):
    """Piecewise-linear profile through knots at non-negative frequencies.

    Values outside the knot range are clamped to the nearest knot.
    """
    freqs = np.asarray(freqs, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    bs = np.asarray(bs, dtype=float)
    if freqs.ndim != 1 or freqs.shape != alphas.shape or freqs.shape != bs.shape:
        raise ValueError("knot arrays must be 1-D and of equal length")
    if freqs.size == 0 or np.any(np.diff(freqs) <= 0) or freqs[0] < 0:
        raise ValueError("knot frequencies must be non-negative and strictly ascending")
    if np.any(alphas <= 0) or np.any(bs < 0):
        raise ValueError("alpha knots must be positive and b knots non-negative")
    return FrequencyProfile(TABULATED, float(nyquist), {"freqs": freqs, "alpha": alphas, "b": bs})


def ar_power(poles, x):
    """Unnormalized AR power spectrum ``1/|A(e^{i pi x})|^2`` at normalized ``x``."""
    x = np.asarray(x, dtype=float)
    z = np.exp(-1j * np.pi * x)
    denom = np.ones(x.shape)
    for p in np.asarray(poles):
        denom = denom * np.abs(1.0 - p * z) ** 2
    return 1.0 / denom


def draw_poles(order, radius, seed):
    """``order`` stable poles, closed under conjugation.

    ``order // 2`` complex poles uniform on the disk of ``radius`` plus their
    conjugates, and one real pole uniform on ``(-radius, radius)`` when the
    order is odd.
    """
    rng = generator(seed)
    npair = order // 2
    r = radius * np.sqrt(rng.random(npair))
    theta = rng.uniform(0.0, np.pi, npair)
    upper = r * np.exp(1j * theta)
    poles = [upper, upper.conj()]
    if order % 2:
        poles.append(np.array([complex(rng.uniform(-radius, radius), 0.0)]))
    return np.concatenate(poles) if poles else np.zeros(0, dtype=complex)


def sample_ar_profile(spec, nyquist):
    """Random AR profile pair with the requested means over ``[0, nyquist]``.

    ``alpha`` and ``b`` use independent pole sets drawn from two children of
    ``spec.seed``.
    """
    params = {"spec": {"order": spec.order, "pole_radius_max": spec.pole_radius_max,
                       "target_mean_alpha": spec.target_mean_alpha,
                       "target_mean_b": spec.target_mean_b, "seed": spec.seed}}
    for k, (name, target) in enumerate((("alpha", spec.target_mean_alpha),
                                         ("b", spec.target_mean_b))):
        poles = draw_poles(spec.order, spec.pole_radius_max, derive_seed(spec.seed, k))
        raw_mean = quadrature.mean_over(lambda f: ar_power(poles, f / nyquist), 0.0, nyquist)
        params[name] = {"poles": poles, "scale": target / raw_mean}
    return FrequencyProfile(AUTOREGRESSIVE, float(nyquist), params)
