"""Second-order moments of the generalized Polack model.

Three routes to the covariance of ``(<h, c_f>, <h, s_f>)``:

* :func:`closed_form_sigma`, the infinite-band closed forms;
* :func:`bandlimited_sigma`, the exact value for a constant profile whose
  spectrum is restricted to ``[-nyquist, nyquist]`` (partial fractions);
* :func:`quadrature_sigma`, a direct numerical evaluation of the double
  integral of ``phi(t + tau/2) psi(t - tau/2) gamma(t, tau)``.

For the quadrature the double integral is rotated to ``u = t + tau/2``,
``v = t - tau/2``. With both test functions supported on ``[0, T]`` the
autocovariance factorizes and

    Cov(phi, psi) = 2 Re int_0^nyq B(nu) Phi(nu) conj(Psi(nu)) dnu,
    Phi(nu) = int_0^T phi(u) exp((-alpha(nu)/2 + 2j pi nu) u) du.

The inner transform is a damped DTFT over equal Gauss-Legendre panels, so it
runs on the compiled kernel.

Units follow the continuous-time model: ``B`` in amplitude^2 per second,
variances in amplitude^2 s^2. For sampled responses use ``B_cont = B_disc dt``.
"""
from dataclasses import dataclass, asdict

import numpy as np

from . import kernels
from .profiles import CONSTANT, TABULATED
from .quadrature import GL_ORDER, _gl, graded_breaks, panel_nodes

ENVELOPE_FLOOR = 1e-12
MOMENT_COLUMNS = ("f_hz", "sigma_plus_sq", "sigma_minus_sq", "cross_cov", "asymptotic_var")


@dataclass(frozen=True)
class SpectralMoment:
    """Covariance entries of ``(Re H(f), Im H(f))`` up to sign conventions.

    ``sigma_plus_sq`` and ``sigma_minus_sq`` are the variances of the cosine
    and sine scalar products, ``cross_cov`` their covariance.
    """

    f: float
    sigma_plus_sq: float
    sigma_minus_sq: float
    cross_cov: float

    @property
    def asymptotic_var(self):
        return self.sigma_plus_sq + self.sigma_minus_sq

    @property
    def anisotropy(self):
        return self.sigma_plus_sq - self.sigma_minus_sq

    def satisfies_cauchy_schwarz(self, rtol=1e-12):
        if self.sigma_plus_sq < 0 or self.sigma_minus_sq < 0:
            return False
        bound = np.sqrt(self.sigma_plus_sq * self.sigma_minus_sq)
        return abs(self.cross_cov) <= bound * (1 + rtol) + rtol * self.asymptotic_var

    def as_row(self):
        d = asdict(self)
        return {"f_hz": d["f"], "sigma_plus_sq": d["sigma_plus_sq"],
                "sigma_minus_sq": d["sigma_minus_sq"], "cross_cov": d["cross_cov"],
                "asymptotic_var": self.asymptotic_var}


# -- closed forms -----------------------------------------------------------

def closed_form_sigma(profile, f):
    """Infinite-band closed forms for the moment triple at ``f``.

    ``sigma_pm^2 = B(f)/(2 alpha(f)) +- B(0)/(2 alpha(0) (1 + x^2))`` and
    ``C = 2 pi f B(0) / (alpha(0)^2 (1 + x^2))`` with ``x = 4 pi f / alpha(0)``.
    Exact for constant profiles; for varying profiles the low-frequency
    terms are an approximation and ``sigma_minus_sq`` can dip below zero.
    """
    f = float(f)
    a0, b0 = profile.alpha(0.0), profile.b(0.0)
    if not a0 > 0:
        raise ValueError("alpha(0) must be positive")
    af, bf = profile.alpha(f), profile.b(f)
    x = 4 * np.pi * f / a0
    lead = bf / (2 * af)
    low = b0 / (2 * a0 * (1 + x * x))
    cross = 2 * np.pi * f * b0 / (a0 * a0 * (1 + x * x))
    if af == a0 and bf == b0:
        # lead - low without the cancellation at small f
        minus = b0 * x * x / (2 * a0 * (1 + x * x))
    else:
        minus = lead - low
    return SpectralMoment(f, lead + low, minus, cross)


def asymptotic_variance(profile, f):
    """``B(f) / alpha(f)``: variance of the circular limit of ``H(f)``."""
    af = profile.alpha(f)
    if not np.all(np.asarray(af) > 0):
        raise ValueError("alpha(f) must be positive")
    return profile.b(f) / af


def fourier_autocorrelation(profile, f, xi):
    """``E[H(f + xi/2) conj(H(f - xi/2))]`` for the generalized model.

    ``(B/alpha) (1 - 2j pi xi/alpha) / (1 + (2 pi xi/alpha)^2)`` with
    ``alpha, B`` taken at ``f``.
    """
    a, b = profile.alpha(f), profile.b(f)
    if not np.all(np.asarray(a) > 0):
        raise ValueError("alpha(f) must be positive")
    r = 2 * np.pi * np.asarray(xi, dtype=float) / a
    out = (b / a) * (1 - 1j * r) / (1 + r * r)
    return complex(out) if np.ndim(out) == 0 else out


def _lorentz_pair_integral(a, p, q, cutoff):
    """``int_{-c}^{c} L(nu + p) conj(L(nu + q)) dnu`` with ``L(x) = 1/(a - 2j pi x)``."""
    big_a = a - 2j * np.pi * p
    big_b = a + 2j * np.pi * q
    c = 2j * np.pi * cutoff
    logs = (np.log(big_a - c) - np.log(big_a + c)
            - np.log(big_b + c) + np.log(big_b - c))
    return 1j * logs / (2 * np.pi * (big_a + big_b))


def bandlimited_sigma(alpha, b, nyquist, f):
    """Exact moment triple for a constant profile band-limited to ``+-nyquist``.

    Uses the partial-fraction antiderivative of products of the one-sided
    Lorentzian transforms of ``c_f`` and ``s_f``. As ``nyquist`` grows this
    tends to :func:`closed_form_sigma`.
    """
    a = alpha / 2
    f = float(f)
    j_pp = _lorentz_pair_integral(a, f, f, nyquist)
    j_mm = _lorentz_pair_integral(a, -f, -f, nyquist)
    j_pm = _lorentz_pair_integral(a, f, -f, nyquist)
    j_mp = _lorentz_pair_integral(a, -f, f, nyquist)
    sp = b / 4 * (j_pp + j_mm + j_pm + j_mp).real
    sm = b / 4 * (j_pp + j_mm - j_pm - j_mp).real
    cc = b * (0.25j * (j_pp - j_pm + j_mp - j_mm)).real
    return SpectralMoment(f, float(sp), float(sm), float(cc))


def band_tail_bound(b_max, nyquist, f):
    """Upper bound on the spectral mass of ``|Phi|^2`` outside ``+-nyquist``.

    Valid for ``phi`` in ``{c_f, s_f}`` and ``|f| < nyquist``:
    ``|L(nu +- f)| <= 1 / (2 pi (|nu| - |f|))`` gives ``B / (2 pi^2 (nyq - |f|))``.
    """
    gap = nyquist - abs(f)
    if gap <= 0:
        raise ValueError("f must lie inside the band")
    return b_max / (2 * np.pi ** 2 * gap)


# -- quadrature -------------------------------------------------------------

def autocovariance(profile, t, tau, rtol=1e-10, max_level=8):
    """``gamma_h(t, tau) = 1[t >= 0] int B(nu) exp(-alpha(nu) t + 2j pi nu tau) dnu``.

    Evaluated as ``2 int_0^nyq B cos(2 pi nu tau) exp(-alpha t) dnu`` with
    composite Gauss-Legendre, doubling panels until two levels agree.
    """
    t, tau = float(t), float(tau)
    if t < 0:
        return 0.0
    ny = profile.nyquist
    panels = max(32, int(np.ceil(2 * ny * abs(tau))))

    def integral(n_panels):
        nodes, weights = panel_nodes(np.linspace(0.0, ny, n_panels + 1))
        alpha, b = profile.evaluate(nodes)
        vals = b * np.exp(-alpha * t) * np.cos(2 * np.pi * nodes * tau)
        return 2.0 * float(np.dot(weights, vals))

    prev = integral(panels)
    # absolute floor for tau where gamma crosses zero
    scale = 2.0 * ny * float(np.max(np.abs(profile.b(np.linspace(0.0, ny, 257)))))
    for _ in range(max_level):
        panels *= 2
        cur = integral(panels)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300) or abs(cur - prev) <= 1e-15 * scale:
            return cur
        prev = cur
    return cur


def support_length(profile, floor=ENVELOPE_FLOOR):
    """Window ``T`` beyond which the one-sided envelope ``exp(-alpha_min u / 2)`` < ``floor``."""
    if _is_white(profile):
        a_min = float(profile.params["alpha"])
    else:
        nodes, _ = panel_nodes(np.linspace(0.0, profile.nyquist, 257))
        a_min = float(np.min(profile.alpha(nodes)))
    if not a_min > 0:
        raise ValueError("alpha must be positive across the band")
    return 2 * np.log(1 / floor) / a_min


def cos_test(f):
    """The cosine test function ``c_f(t) = cos(2 pi f t)``."""
    return lambda u: np.cos(2 * np.pi * f * u)


def sin_test(f):
    """The sine test function ``s_f(t) = sin(2 pi f t)``."""
    return lambda u: np.sin(2 * np.pi * f * u)


_NU_CHUNK = 256
_TABLE_BUDGET = 2 ** 24  # doubles held by one kernel phasor table


def _damped_transforms(profile, funcs, t_max, bandwidth, peaks, level):
    """Nodes, weights, ``B`` and ``Phi_k(nu)`` for every function in ``funcs``."""
    ny = profile.nyquist
    # frequency rule: graded around the Lorentzian peaks, capped elsewhere
    probe, _ = panel_nodes(np.linspace(0.0, ny, 257))
    a_min = float(np.min(profile.alpha(probe)))
    half_width = a_min / (4 * np.pi)
    centers = sorted({0.0, *(min(abs(p), ny) for p in peaks)})
    breaks = graded_breaks(0.0, ny, centers, half_width / 4, max_panel=ny / 16)
    if profile.kind == TABULATED:
        # piecewise-linear knots are kinks: put panel edges on them
        breaks = np.union1d(breaks, np.clip(profile.params["freqs"], 0.0, ny))
    for _ in range(level):
        breaks = np.sort(np.concatenate([breaks, 0.5 * (breaks[1:] + breaks[:-1])]))
    nu, w_nu = panel_nodes(breaks)
    alpha, b = profile.evaluate(nu)

    # time rule: equal panels with at most 1.5 cycles of the fastest oscillation
    cycles = 1.5 / 2 ** level
    n_panels = int(np.ceil(t_max * (ny + bandwidth) / cycles))
    width = t_max / n_panels
    x, w = _gl(GL_ORDER)
    offsets = 0.5 * width * (x + 1.0)
    weights = 0.5 * width * w
    starts = np.arange(n_panels) * width
    u = starts[:, None] + offsets[None, :]  # (panels, GL)

    chunk = max(1, min(_NU_CHUNK, _TABLE_BUDGET // (2 * n_panels)))
    out = []
    for func in funcs:
        coeffs = (np.asarray(func(u), dtype=float) * weights[None, :]).T.copy()  # (GL, panels)
        phi = np.empty(nu.size, dtype=complex)
        for lo in range(0, nu.size, chunk):
            sl = slice(lo, lo + chunk)
            z = -0.5 * alpha[sl] + 2j * np.pi * nu[sl]
            sums = kernels.dtft(coeffs, -nu[sl], width, 0.5 * alpha[sl] * width) / width
            phi[sl] = np.sum(np.exp(np.outer(offsets, z)) * sums, axis=0)
        out.append(phi)
    return w_nu, b, out


def _covariance_matrix(profile, funcs, t_max, bandwidth, peaks, level):
    w_nu, b, phis = _damped_transforms(profile, funcs, t_max, bandwidth, peaks, level)
    k = len(funcs)
    cov = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            val = 2.0 * float(np.sum(w_nu * b * (phis[i] * np.conj(phis[j])).real))
            cov[i, j] = cov[j, i] = val
    return cov


def _is_white(profile):
    if np.isfinite(profile.nyquist):
        return False
    if profile.kind != CONSTANT:
        raise ValueError("an unlimited band needs a constant profile")
    return True


def _white_matrix(profile, funcs, t_max, bandwidth, peaks, level):
    """Unlimited band, constant profile: ``gamma(t, tau) = B exp(-alpha t) delta(tau)``.

    The double integral collapses to ``B int phi psi exp(-alpha t) dt``.
    """
    a, b = float(profile.params["alpha"]), float(profile.params["b"])
    cycles = 1.5 / 2 ** level
    n_panels = max(8, int(np.ceil(t_max * (2 * bandwidth + a / (2 * np.pi)) / cycles)))
    width = t_max / n_panels
    x, w = _gl(GL_ORDER)
    u = (np.arange(n_panels)[:, None] + 0.5 * (x[None, :] + 1.0)) * width
    wt = (0.5 * width * w)[None, :] * b * np.exp(-a * u)
    vals = [np.asarray(func(u), dtype=float) for func in funcs]
    k = len(funcs)
    cov = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            cov[i, j] = cov[j, i] = float(np.sum(wt * vals[i] * vals[j]))
    return cov


def _converged(profile, funcs, t_max, bandwidth, peaks, rtol, max_level):
    matrix = _white_matrix if _is_white(profile) else _covariance_matrix
    prev = matrix(profile, funcs, t_max, bandwidth, peaks, 0)
    for level in range(1, max_level + 1):
        cur = matrix(profile, funcs, t_max, bandwidth, peaks, level)
        scale = max(float(np.max(np.abs(np.diag(cur)))), 1e-300)
        if np.max(np.abs(cur - prev)) <= rtol * scale:
            return cur
        prev = cur
    raise RuntimeError(f"quadrature did not reach rtol={rtol} in {max_level} doublings")


def scalar_product_covariance(profile, phi, psi, t_max=None, bandwidth=0.0, peaks=(),
                              rtol=1e-8, max_level=4):
    """Covariance of ``<h, phi>`` and ``<h, psi>`` for test functions on ``[0, t_max]``.

    Parameters
    ----------
    profile : FrequencyProfile
        A constant profile with ``nyquist = inf`` selects the unlimited band,
        where the covariance reduces to ``B int phi psi exp(-alpha t) dt``.
    phi, psi : callable
        Vectorized real functions of time [s]; treated as zero outside ``[0, t_max]``.
    t_max : float, optional
        Support length; defaults to :func:`support_length`.
    bandwidth : float
        Highest frequency [Hz] present in ``phi``/``psi``; sets the time panels.
    peaks : sequence of float
        Frequencies where ``|Phi|`` peaks, refined in the frequency rule.
    rtol : float
        Doubling stops when successive estimates differ by less than ``rtol``
        relative to the larger variance.
    """
    t_max = support_length(profile) if t_max is None else float(t_max)
    cov = _converged(profile, (phi, psi), t_max, bandwidth, peaks, rtol, max_level)
    return float(cov[0, 1])


def scalar_product_variance(profile, phi, t_max=None, bandwidth=0.0, peaks=(),
                            rtol=1e-8, max_level=4):
    """Variance of ``<h, phi>``; see :func:`scalar_product_covariance`."""
    t_max = support_length(profile) if t_max is None else float(t_max)
    cov = _converged(profile, (phi,), t_max, bandwidth, peaks, rtol, max_level)
    return float(cov[0, 0])


def quadrature_sigma(profile, f, rtol=1e-8, max_level=4):
    """Moment triple at ``f`` by quadrature with ``phi = c_f`` and ``psi = s_f``."""
    f = float(f)
    t_max = support_length(profile)
    funcs = (cos_test(f), sin_test(f))
    cov = _converged(profile, funcs, t_max, abs(f), (f,), rtol, max_level)
    return SpectralMoment(f, float(cov[0, 0]), float(cov[1, 1]), float(cov[0, 1]))


def moment_table(profile, freqs, method="closed"):
    """List of :class:`SpectralMoment` over ``freqs`` (``method``: closed or quadrature)."""
    fn = {"closed": closed_form_sigma, "quadrature": quadrature_sigma}.get(method)
    if fn is None:
        raise ValueError(f"unknown method {method!r}")
    return [fn(profile, f) for f in freqs]
