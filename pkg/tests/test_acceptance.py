"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Seeds are fixed up front; no test is rerun with a different seed.
"""
import time

import numpy as np
import pytest

from reverbphase import cli, ensemble, theory
from reverbphase.ensemble import EnsembleSpec
from reverbphase.losses import LossMode, loss, loss_phase_sensitivity, phase_substitution_demo
from reverbphase.profiles import ArProfileSpec, constant_profile, rt60_to_alpha, sample_ar_profile
from reverbphase.seeding import derive_seed, generator
from reverbphase.spectral import StftConfig
from reverbphase.synth import default_bank, simple_polack, synth_test_signal

ALPHA, B = 20.0, 1.0
FIG1_PROFILE_SEED = 6
SIGNIFICANCE = 0.01


def triple(m):
    return m.sigma_plus_sq, m.sigma_minus_sq, m.cross_cov


def fig1_profile(sample_rate):
    return sample_ar_profile(ArProfileSpec(order=8, seed=FIG1_PROFILE_SEED), sample_rate / 2)


@pytest.mark.slow
def test_moment_agreement(verdict):
    fs, n = 8000.0, 20000
    t0 = time.perf_counter()
    spec = EnsembleSpec(n, 101, constant_profile(ALPHA, B, fs / 2), fs, (200.0, 500.0, 1000.0))
    moments = ensemble.estimate_spectral_moments(spec)
    elapsed = time.perf_counter() - t0
    target = B / fs / (2 * ALPHA)
    ok, parts = elapsed <= 120.0, []
    for m in moments:
        z_re = (m.var_re - target) / m.se_var_re
        z_im = (m.var_im - target) / m.se_var_im
        good = abs(z_re) < 3 and abs(z_im) < 3 and abs(m.corr) < 3 / np.sqrt(n)
        ok &= good
        parts.append(f"{m.f:g}Hz z_re={z_re:+.2f} z_im={z_im:+.2f} corr={m.corr:+.4f}")
    detail = f"{'; '.join(parts)}; corr bound {3 / np.sqrt(n):.4f}; {elapsed:.1f}s"
    assert verdict(1, ok, detail)


def test_quadrature_matches_closed_form(verdict):
    grid = [0.0, 10.0, 50.0, 100.0, 500.0, 1000.0]
    t0 = time.perf_counter()
    # unlimited band: the closed forms drop nothing, so the strict tolerance holds everywhere
    white = constant_profile(ALPHA, B, np.inf)
    strict = []
    for f in grid:
        q, c = theory.quadrature_sigma(white, f), theory.closed_form_sigma(white, f)
        lead = B / (2 * ALPHA)
        strict.append(max(abs(a - b) for a, b in zip(triple(q), triple(c))) / lead)
    # sampled band (Fs = 8 kHz): exact band-limited oracle, closed forms within the tail
    ny = 4000.0
    limited = constant_profile(ALPHA, B, ny)
    exact_err, tail_ok = [], True
    for f in grid:
        q = theory.quadrature_sigma(limited, f)
        e = theory.bandlimited_sigma(ALPHA, B, ny, f)
        c = theory.closed_form_sigma(limited, f)
        lead = B / (2 * ALPHA)
        exact_err.append(max(abs(a - b) for a, b in zip(triple(q), triple(e))) / lead)
        tail = B / (2 * np.pi ** 2 * (ny - f))
        tail_ok &= max(abs(a - b) for a, b in zip(triple(q), triple(c))) <= 1e-6 * lead + tail
    elapsed = time.perf_counter() - t0
    ok = max(strict) <= 1e-6 and max(exact_err) <= 1e-8 and tail_ok
    detail = (f"unlimited band max rel {max(strict):.1e} (<=1e-6); Fs 8k vs band-limited exact "
              f"{max(exact_err):.1e} (<=1e-8); closed form within spectral tail: {tail_ok}; "
              f"{elapsed:.1f}s")
    assert verdict(2, ok, detail)


@pytest.mark.slow
def test_convergence_rates(verdict):
    white = constant_profile(ALPHA, B, np.inf)
    x = np.geomspace(10.0, 1000.0, 41)
    f = x * ALPHA / (4 * np.pi)
    closed = [theory.closed_form_sigma(white, v) for v in f]
    s_aniso, _, _ = ensemble.convergence_slope(
        f, [m.sigma_plus_sq - m.sigma_minus_sq for m in closed])
    s_cross, _, _ = ensemble.convergence_slope(f, [m.cross_cov for m in closed])

    # one independent ensemble per frequency; neighbouring bins of a shared
    # ensemble are correlated over alpha / 2 pi and would not count as points.
    # The sum starts at n = 0, which biases the anisotropy by about
    # alpha dt (1 + x^2) / 2 of itself: a high rate keeps that small.
    fs, n = 16000.0, 50000
    xe = np.geomspace(2.5, 10.0, 24)
    fe = xe * ALPHA / (4 * np.pi)
    profile = constant_profile(ALPHA, B, fs / 2)
    aniso = []
    for k, fk in enumerate(fe):
        spec = EnsembleSpec(n, derive_seed(303, k), profile, fs, (float(fk),))
        m = ensemble.estimate_spectral_moments(spec)[0]
        aniso.append(m.var_re - m.var_im)
    aniso = np.array(aniso)
    q = np.exp((-ALPHA + 4j * np.pi * fe) / fs)
    s_discrete, _, _ = ensemble.convergence_slope(fe, np.real(1 / (1 - q)))
    if np.all(aniso > 0):
        s_emp, _, r2 = ensemble.convergence_slope(fe, aniso)
    else:
        s_emp, r2 = float("nan"), float("nan")
    ok = abs(s_aniso + 2) <= 0.05 and abs(s_cross + 1) <= 0.05 and abs(s_emp + 2) <= 0.3
    detail = (f"closed anisotropy {s_aniso:.4f}, C {s_cross:.4f} over x in [10, 1000]; "
              f"empirical anisotropy {s_emp:.3f} (r2 {r2:.2f}, 24 ensembles x {n}, "
              f"x in [2.5, 10], Fs {fs:g}; discrete-time expectation {s_discrete:.3f})")
    assert verdict(3, ok, detail)


@pytest.mark.slow
def test_fig1_qualitative(verdict):
    fs, n = 16000.0, 10000
    t0 = time.perf_counter()
    spec = EnsembleSpec(n, 1, fig1_profile(fs), fs, (10.0, 1000.0), bank=default_bank(fs))
    H = spec.transforms()
    low_c = ensemble.circularity_test(H[:, 0], SIGNIFICANCE, 10.0)
    high_c = ensemble.circularity_test(H[:, 1], SIGNIFICANCE, 1000.0)
    low_u = ensemble.phase_uniformity_test(ensemble.PhaseSample.from_complex(10.0, H[:, 0]))
    high_u = ensemble.phase_uniformity_test(ensemble.PhaseSample.from_complex(1000.0, H[:, 1]))
    elapsed = time.perf_counter() - t0
    ok = (low_c.p_value < SIGNIFICANCE < high_c.p_value
          and low_u.p_value < SIGNIFICANCE < high_u.p_value and elapsed <= 300.0)
    detail = (f"circularity p(10Hz)={low_c.p_value:.2e} p(1kHz)={high_c.p_value:.3f}; "
              f"KS p(10Hz)={low_u.p_value:.2e} p(1kHz)={high_u.p_value:.3f}; "
              f"alpha(0)={spec.theory_profile().alpha(0.0):.1f}/s; {elapsed:.1f}s")
    assert verdict(4, ok, detail)


@pytest.mark.slow
def test_frequency_correlation_sweep(verdict):
    fs, n, f = 8000.0, 50000, 1000.0
    spec = EnsembleSpec(n, 505, constant_profile(ALPHA, B, fs / 2), fs)
    step = ALPHA / (2 * np.pi)
    errs = [ensemble.cross_bin_correlation(spec, f, k * step).rel_error for k in (0, 1, 2, 5)]
    far = ensemble.cross_bin_correlation(spec, f, 50 * step)
    bound = 0.05 * B / fs / ALPHA
    ok = max(errs) < 0.05 and abs(far.empirical) < bound
    detail = (f"rel err at xi/(alpha/2pi)=0,1,2,5: {', '.join(f'{e:.3f}' for e in errs)}; "
              f"|emp| at 50: {abs(far.empirical):.2e} < {bound:.2e}")
    assert verdict(5, ok, detail)


@pytest.mark.slow
def test_stft_phase_whiteness(verdict):
    fs = 16000.0
    spec = EnsembleSpec(2000, 1, fig1_profile(fs), fs, bank=default_bank(fs))
    config = StftConfig(window_length=1024, hop=256, window="hann", sample_rate=fs)
    rep = ensemble.stft_phase_whiteness(spec, config, significance=SIGNIFICANCE)
    detail = (f"max |corr| {rep.max_abs_corr:.4f} at lag {rep.worst_lag}; uniformity KS "
              f"p={rep.uniformity.p_value:.3f}; {rep.bins_judged} bins above "
              f"{rep.f_cutoff:.0f} Hz")
    assert verdict(6, rep.passed, detail)


def test_loss_properties(verdict):
    rng = generator(707)
    shape = (129, 24)
    worst = 0.0
    for trial in range(1000):
        Y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        Yh = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        u = np.exp(1j * rng.uniform(0, 2 * np.pi, shape))
        for mode in (LossMode.MAGNITUDE, LossMode.MAGNITUDE_LOG):
            ref = loss(Y, Yh, mode)
            moved = loss(Y * u, Yh, mode) if trial % 2 else loss(Y, Yh * u, mode)
            worst = max(worst, abs(moved - ref) / ref)
    Y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    u = np.exp(1j * rng.uniform(0, 2 * np.pi, shape))
    witness = {m.value: loss(Y, Y * u, m) for m in (LossMode.KEEP_PHASE, LossMode.KEEP_PHASE_LOG)}
    sens = loss_phase_sensitivity(np.ones((257, 63), dtype=complex), LossMode.KEEP_PHASE, 1000, 77)
    ok = (worst <= 1e-12 and all(v > 0.1 for v in witness.values())
          and abs(sens.mean - 2.0) < 3 * sens.std_error)
    detail = (f"f3/f4 worst rel change {worst:.1e} over 1000 trials; f1/f2 loss under phase "
              f"change {witness['f1']:.3f}/{witness['f2']:.3f}; f1 mean {sens.mean:.6f} "
              f"vs 2 (3 SE {3 * sens.std_error:.1e})")
    assert verdict(7, ok, detail)


@pytest.mark.slow
def test_phase_substitution_demo(verdict):
    fs = 16000.0
    alpha = rt60_to_alpha(0.5)
    config = StftConfig(sample_rate=fs)
    dry, wet, built, again = [], [], 0.0, 0.0
    for k in range(20):
        s = synth_test_signal("harmonic_chirp", 2.0, fs, seed=derive_seed(808, 2 * k))
        h = simple_polack(1.0, alpha, None, fs, seed=derive_seed(808, 2 * k + 1))
        rep = phase_substitution_demo(s, h, config)
        dry.append(rep.sisdr_dry)
        wet.append(rep.sisdr_wet)
        built = max(built, rep.losses["wet"]["f3"], rep.losses["wet"]["f4"])
        again = max(again, rep.reanalysis["wet"]["f3"], rep.reanalysis["wet"]["f4"])
    ok = np.mean(dry) > 40 and np.mean(wet) < 1 and built < 1e-6
    detail = (f"mean SISDR dry {np.mean(dry):.1f} dB, wet {np.mean(wet):.2f} dB; max f3/f4 of "
              f"the wet-phase spectrogram {built:.1e}; after resynthesis and reanalysis "
              f"{again:.3g} (informational)")
    assert verdict(8, ok, detail)


@pytest.mark.slow
def test_null_calibration(verdict):
    reps, n = 500, 1000
    rejected = {"circularity": 0, "uniformity_ks": 0, "rayleigh": 0}
    for r in range(reps):
        rng = generator(derive_seed(909, r))
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        rejected["circularity"] += ensemble.circularity_test(z, SIGNIFICANCE).rejected
        phases = rng.uniform(0, 2 * np.pi, n)
        rep = ensemble.phase_uniformity_test(phases, SIGNIFICANCE)
        rejected["uniformity_ks"] += rep.rejected
        rejected["rayleigh"] += ensemble.rayleigh_test(phases)[1] < SIGNIFICANCE
    rates = {k: v / reps for k, v in rejected.items()}
    ok = all(0.002 <= v <= 0.03 for v in rates.values())
    detail = ", ".join(f"{k} {v:.3f}" for k, v in rates.items()) + " (window [0.002, 0.03])"
    assert verdict(9, ok, detail)


COMMANDS = [
    ["synth", "--n", "2", "--fs", "8000"],
    ["fig1", "--n", "40", "--fs", "8000"],
    ["moments", "--n", "200", "--fs", "8000", "--freqs", "0,100,500"],
    ["xcorr", "--n", "200", "--fs", "8000"],
    ["phase-test", "--n", "40", "--fs", "8000"],
    ["loss-demo", "--n", "2", "--fs", "8000", "--duration", "0.5", "--trials", "5"],
]


@pytest.mark.slow
def test_cli_determinism(verdict, tmp_path, capsys):
    mismatched, files = [], 0
    for argv in COMMANDS:
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / argv[0] / run
            code = cli.main(argv + ["--seed", "11", "--out", str(out)])
            capsys.readouterr()
            assert code == 0, argv
            outputs.append({p.relative_to(out): p.read_bytes()
                            for p in sorted(out.rglob("*")) if p.is_file()})
        a, b = outputs
        files += len(a)
        if a.keys() != b.keys() or any(a[k] != b[k] for k in a):
            mismatched.append(argv[0])
    ok = not mismatched and files > 0
    detail = (f"{len(COMMANDS)} subcommands, {files} files compared byte for byte; "
              f"mismatched: {mismatched or 'none'}")
    assert verdict(10, ok, detail)
