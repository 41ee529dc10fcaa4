"""Command-line front end.

    reverbphase <command> [options]

Commands: synth, fig1, moments, xcorr, phase-test, loss-demo. Options may be
given on the command line or in a ``--config`` file (JSON object, or
``key = value`` lines); command-line values win over the file, which wins over
built-in defaults. The effective configuration is echoed into every JSON
output. Failures print a JSON object to stderr and exit non-zero.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import ensemble, io, theory
from .errors import ConfigurationError
from .losses import LossMode, loss_phase_sensitivity, phase_substitution_demo
from .profiles import (ArProfileSpec, FrequencyProfile, constant_profile, rt60_to_alpha,
                       sample_ar_profile)
from .seeding import derive_seed
from .spectral import StftConfig, stft
from .synth import (ImpulseResponse, default_bank, generalized_polack, simple_polack,
                    synth_test_signal)

COMMANDS = ("synth", "fig1", "moments", "xcorr", "phase-test", "loss-demo")
FORMATS = ("csv", "json", "wav")

DEFAULTS = {
    "fs": 16000.0, "bands": 16, "out": ".", "format": "csv,json,wav",
    "significance": 0.01, "window": 1024, "hop": 256,
}
COMMAND_DEFAULTS = {
    "synth": {"n": 1, "profile": "const:B=1", "rt60": 0.5},
    "fig1": {"n": 10000, "profile": "ar:order=8,seed=6", "freqs": "10,100,1000"},
    "moments": {"n": 20000, "profile": "const:alpha=20,B=1",
                "freqs": "0,10,50,100,200,500,1000", "quadrature": True},
    "xcorr": {"n": 50000, "profile": "const:alpha=20,B=1", "f": 1000.0,
              "xi_multiples": "0,1,2,5,10,20,50"},
    "phase-test": {"n": 2000, "profile": "ar:order=8,seed=6",
                   "freqs": "10,30,100,300,1000,3000"},
    "loss-demo": {"n": 20, "profile": "const:B=1", "rt60": 0.5,
                  "signal": "harmonic_chirp", "duration": 2.0, "trials": 100},
}


class CliError(Exception):
    def __init__(self, message, kind="usage", code=2):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# -- argument handling -------------------------------------------------------------

def _add_options(p):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON or key = value file")
    p.add_argument("--seed", type=int, default=S, help="master seed (64-bit unsigned)")
    p.add_argument("--fs", type=float, default=S, help="sample rate [Hz], default 16000")
    p.add_argument("--n", type=int, default=S, help="ensemble size / number of draws")
    p.add_argument("--profile", default=S,
                   help="const:alpha=..,B=.. | ar:order=8,seed=.. | path.json")
    p.add_argument("--rt60", type=float, default=S, help="decay time [s]; sets alpha")
    p.add_argument("--bands", type=int, default=S, help="filter-bank bands, default 16")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--format", default=S, help="comma list of csv,json,wav")
    p.add_argument("--freqs", default=S, help="comma list of frequencies [Hz]")
    p.add_argument("--duration", type=float, default=S, help="response or signal length [s]")
    p.add_argument("--significance", type=float, default=S)
    p.add_argument("--window", type=int, default=S, help="STFT window length")
    p.add_argument("--hop", type=int, default=S, help="STFT hop")
    p.add_argument("--f", type=float, default=S, help="center frequency for xcorr [Hz]")
    p.add_argument("--xi-multiples", dest="xi_multiples", default=S,
                   help="xcorr offsets in units of alpha / (2 pi)")
    p.add_argument("--signal", default=S, help="dry test signal for loss-demo")
    p.add_argument("--trials", type=int, default=S, help="phase-randomization trials")
    p.add_argument("--quadrature", action=argparse.BooleanOptionalAction, default=S,
                   help="moments: add quadrature rows to the theory table (default on)")
    p.add_argument("--independent-noise", dest="independent_noise", action="store_true",
                   default=S, help="one noise per band instead of a shared one")


COMMAND_HELP = {
    "synth": "draw impulse responses",
    "fig1": "scatter of H(f) at a few frequencies plus circularity and KS tests",
    "moments": "empirical covariance of (Re H, Im H) against theory",
    "xcorr": "correlation of H across frequency offsets against theory",
    "phase-test": "circularity and uniformity per frequency and STFT whiteness",
    "loss-demo": "dry-phase versus wet-phase reconstruction and loss sensitivity",
}


def build_parser():
    parser = _Parser(prog="reverbphase", description=__doc__.split("\n\n")[0])
    _add_options(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        _add_options(sub.add_parser(name, help=COMMAND_HELP[name]))
    return parser


def read_config_file(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}", "io") from None
    text_stripped = text.strip()
    if text_stripped.startswith("{"):
        try:
            data = json.loads(text_stripped)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: invalid JSON ({exc.msg})", "config") from None
        return {k.replace("-", "_"): v for k, v in data.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value", "config")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key.replace("-", "_")] = json.loads(value)
        except json.JSONDecodeError:
            out[key.replace("-", "_")] = value.strip("\"'")
    return out


def effective_config(argv):
    """Merge defaults, config file and flags; returns ``(command, dict)``."""
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command", None)
    if command is None:
        raise CliError(f"missing command; choose from {', '.join(COMMANDS)}")
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[command])
    explicit = {}
    if "config" in args:
        explicit.update(read_config_file(args.pop("config")))
    explicit.update(args)
    if "rt60" in explicit:
        # an explicit decay time overrides the command's default profile only
        cfg["rt60_from_user"] = True
    cfg.update(explicit)
    unknown = set(explicit) - set(_known_keys())
    if unknown:
        raise CliError(f"unknown option(s): {', '.join(sorted(unknown))}", "config")
    return command, cfg


def _known_keys():
    keys = set(DEFAULTS)
    for d in COMMAND_DEFAULTS.values():
        keys |= set(d)
    keys |= {"seed", "quadrature", "independent_noise", "rt60", "duration", "f",
             "xi_multiples", "signal", "trials", "freqs", "profile", "n"}
    return keys


def _float_list(text, name):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise CliError(f"--{name}: expected a comma-separated list of numbers") from None


def _formats(cfg):
    fmts = [f.strip().lower() for f in str(cfg["format"]).split(",") if f.strip()]
    bad = [f for f in fmts if f not in FORMATS]
    if bad or not fmts:
        raise CliError(f"--format: unsupported {bad or fmts}; choose from {', '.join(FORMATS)}")
    return fmts


def _seed(cfg):
    if cfg.get("seed") is None:
        raise CliError("--seed is required for this command")
    seed = int(cfg["seed"])
    if not 0 <= seed < 2 ** 64:
        raise CliError("--seed must be a 64-bit unsigned integer")
    return seed


def _parse_kv(body, what):
    out = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        if "=" not in item:
            raise CliError(f"{what}: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip().lower()] = float(v)
        except ValueError:
            raise CliError(f"{what}: {k.strip()} needs a number") from None
    return out


def build_profile(cfg):
    """Profile from ``cfg["profile"]`` and ``cfg["rt60"]`` at ``fs / 2``."""
    text = str(cfg["profile"])
    ny = float(cfg["fs"]) / 2
    rt60 = cfg.get("rt60")
    user_rt60 = cfg.get("rt60_from_user", False)
    if text.startswith("const:") or text == "const":
        kv = _parse_kv(text[6:], "const profile")
        extra = set(kv) - {"alpha", "b", "rt60"}
        if extra:
            raise CliError(f"const profile: unknown key(s) {sorted(extra)}", "config")
        decay_keys = [k for k in ("alpha", "rt60") if k in kv]
        if len(decay_keys) > 1 or (decay_keys and user_rt60):
            raise CliError("conflicting decay specification: give either alpha, "
                           "a profile rt60 or --rt60, not several", "config")
        if "alpha" in kv:
            alpha = kv["alpha"]
        elif "rt60" in kv:
            alpha = rt60_to_alpha(kv["rt60"])
        elif rt60 is not None:
            alpha = rt60_to_alpha(float(rt60))
        else:
            raise CliError("const profile needs alpha, rt60 or --rt60", "config")
        return constant_profile(alpha, kv.get("b", 1.0), ny)
    if text.startswith("ar:") or text == "ar":
        kv = _parse_kv(text[3:], "ar profile")
        extra = set(kv) - {"order", "seed", "radius", "rt60", "alpha", "b"}
        if extra:
            raise CliError(f"ar profile: unknown key(s) {sorted(extra)}", "config")
        decay_keys = [k for k in ("alpha", "rt60") if k in kv]
        if len(decay_keys) > 1 or (decay_keys and user_rt60):
            raise CliError("conflicting decay specification for the AR mean", "config")
        spec = ArProfileSpec()
        mean_alpha = spec.target_mean_alpha
        if "alpha" in kv:
            mean_alpha = kv["alpha"]
        elif "rt60" in kv:
            mean_alpha = rt60_to_alpha(kv["rt60"])
        elif user_rt60:
            mean_alpha = rt60_to_alpha(float(rt60))
        spec = ArProfileSpec(order=int(kv.get("order", spec.order)),
                             pole_radius_max=kv.get("radius", spec.pole_radius_max),
                             target_mean_alpha=mean_alpha,
                             target_mean_b=kv.get("b", spec.target_mean_b),
                             seed=int(kv.get("seed", spec.seed)))
        return sample_ar_profile(spec, ny)
    path = Path(text)
    if path.suffix.lower() != ".json":
        raise CliError(f"--profile: expected const:..., ar:... or a .json path, got {text!r}")
    if user_rt60:
        raise CliError("--rt60 cannot modify a profile loaded from a file", "config")
    try:
        prof = FrequencyProfile.from_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read profile {path}: {exc.strerror}", "io") from None
    if abs(prof.nyquist - ny) > 1e-9 * ny:
        raise CliError(f"profile {path} is defined up to {prof.nyquist} Hz but --fs gives "
                       f"nyquist {ny} Hz", "config")
    return prof


def _bank(cfg, profile):
    if profile.kind == "constant":
        return None
    return default_bank(float(cfg["fs"]), int(cfg["bands"]))


def _ensemble(cfg, profile, n, freqs=()):
    bank = _bank(cfg, profile)
    return ensemble.EnsembleSpec(int(n), _seed(cfg), profile, float(cfg["fs"]), tuple(freqs),
                                 bank=bank, duration=cfg.get("duration"),
                                 independent_noise=bool(cfg.get("independent_noise", False)))


def _stft_config(cfg):
    return StftConfig(int(cfg["window"]), int(cfg["hop"]), float(cfg["fs"]))


def _outdir(cfg):
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc.strerror}", "io", 1) from None
    return out


def _provenance(command, cfg, profile):
    shown = {k: v for k, v in sorted(cfg.items()) if k not in ("out", "rt60_from_user")}
    return {"command": command, "config": shown, "profile": profile.to_dict(),
            "profile_digest": profile.digest()}


# -- commands --------------------------------------------------------------------

def cmd_synth(cfg):
    profile = build_profile(cfg)
    fmts, out, seed = _formats(cfg), _outdir(cfg), _seed(cfg)
    fs = float(cfg["fs"])
    n = int(cfg["n"])
    if n < 1:
        raise CliError("--n must be >= 1")
    bank = _bank(cfg, profile)
    written, draws = [], []
    for i in range(n):
        s = derive_seed(seed, i)
        if bank is None:
            p = profile.params
            h = simple_polack(p["b"], p["alpha"], cfg.get("duration"), fs, s)
        else:
            h = generalized_polack(profile, bank, cfg.get("duration"), fs, s,
                                   bool(cfg.get("independent_noise", False)))
        draws.append({"index": i, "seed": s, "samples": len(h)})
        stem = out / f"rir_{i:04d}"
        if "wav" in fmts:
            written.append(io.write_wav(f"{stem}.wav", h.samples, fs))
        if "csv" in fmts:
            t = np.arange(len(h)) / fs
            written.append(io.write_csv(f"{stem}.csv", ["t_s", "h"], zip(t, h.samples)))
    meta = _provenance("synth", cfg, profile)
    meta["draws"] = draws
    meta["alpha_at_0"] = profile.alpha(0.0)
    if "json" in fmts:
        written.append(io.write_json(out / "synth.json", meta))
    return written


def cmd_fig1(cfg):
    profile = build_profile(cfg)
    fmts, out = _formats(cfg), _outdir(cfg)
    freqs = _float_list(cfg["freqs"], "freqs")
    spec = _ensemble(cfg, profile, cfg["n"], freqs)
    H = spec.transforms()
    sig = float(cfg["significance"])
    written, reports = [], []
    for k, f in enumerate(freqs):
        if "csv" in fmts:
            written.append(io.write_csv(out / f"fig1_{_tag(f)}hz.csv", ["re", "im"],
                                        zip(H[:, k].real, H[:, k].imag)))
        circ = ensemble.circularity_test(H[:, k], sig, f)
        unif = ensemble.phase_uniformity_test(
            ensemble.PhaseSample.from_complex(f, H[:, k]), sig)
        reports.append({"f_hz": f, "circularity": circ.to_dict(spec.digest()),
                        "uniformity": unif.to_dict(spec.digest()),
                        "isotropic": not circ.rejected})
    if "json" in fmts:
        meta = _provenance("fig1", cfg, profile)
        meta.update({"ensemble_digest": spec.digest(), "reports": reports,
                     "response_samples": spec.n_response_samples()})
        written.append(io.write_json(out / "fig1_summary.json", meta))
    return written


MOMENT_CSV_COLUMNS = ("f_hz", "sp2_theory", "sm2_theory", "c_theory", "sp2_emp", "sm2_emp",
                      "c_emp", "z_sp2", "z_sm2", "z_c")


def _z(emp, theo, se):
    if se > 0:
        return (emp - theo) / se
    return 0.0 if emp == theo else float("inf")


def cmd_moments(cfg):
    profile = build_profile(cfg)
    fmts, out = _formats(cfg), _outdir(cfg)
    freqs = _float_list(cfg["freqs"], "freqs")
    ny = float(cfg["fs"]) / 2
    if any(not 0 <= f < ny for f in freqs):
        raise CliError(f"--freqs must lie in [0, {ny})")
    spec = _ensemble(cfg, profile, cfg["n"])
    dt = spec.dt
    H = spec.transforms(freqs)
    tprof = spec.theory_profile()
    rows, theory_rows = [], []
    for k, f in enumerate(freqs):
        th = theory.closed_form_sigma(tprof, f)
        em = ensemble.moments_from_samples(f, H[:, k], derive_seed(spec.master_seed, 2 ** 32 + k))
        # Re H = <h, c_f>, Im H = -<h, s_f>: the covariance flips sign
        t = (th.sigma_plus_sq * dt, th.sigma_minus_sq * dt, -th.cross_cov * dt)
        rows.append([f, *t, em.var_re, em.var_im, em.cov_re_im,
                     _z(em.var_re, t[0], em.se_var_re), _z(em.var_im, t[1], em.se_var_im),
                     _z(em.cov_re_im, t[2], em.se_cov)])
        row = {"method": "closed", **th.as_row()}
        theory_rows.append(row)
        if cfg.get("quadrature"):
            q = theory.quadrature_sigma(tprof, f)
            theory_rows.append({"method": "quadrature", **q.as_row()})
    written = []
    if "csv" in fmts:
        written.append(io.write_csv(out / "moments.csv", MOMENT_CSV_COLUMNS, rows))
        written.append(io.write_csv(out / "moments_theory.csv",
                                    ("method",) + theory.MOMENT_COLUMNS, theory_rows))
    if "json" in fmts:
        meta = _provenance("moments", cfg, profile)
        meta.update({"ensemble_digest": spec.digest(), "dt": dt,
                     "rows": [dict(zip(MOMENT_CSV_COLUMNS, r)) for r in rows],
                     "theory": theory_rows,
                     "units": "sp2/sm2/c columns of moments.csv are dt-scaled; "
                              "theory table is per unit B (continuous convention)"})
        written.append(io.write_json(out / "moments.json", meta))
    return written


XCORR_COLUMNS = ("xi_hz", "xi_multiple", "emp_re", "emp_im", "theo_re", "theo_im",
                 "emp_abs", "theo_abs", "rel_error", "std_error")


def cmd_xcorr(cfg):
    profile = build_profile(cfg)
    fmts, out = _formats(cfg), _outdir(cfg)
    f = float(cfg["f"])
    spec = _ensemble(cfg, profile, cfg["n"])
    tprof = spec.theory_profile()
    bw = tprof.alpha(f) / (2 * np.pi)
    rows = []
    for m in _float_list(cfg["xi_multiples"], "xi-multiples"):
        try:
            r = ensemble.cross_bin_correlation(spec, f, m * bw)
        except ValueError as exc:
            raise CliError(str(exc), "config") from None
        rows.append([r.xi, m, r.empirical.real, r.empirical.imag, r.theoretical.real,
                     r.theoretical.imag, abs(r.empirical), abs(r.theoretical), r.rel_error,
                     r.std_error])
    written = []
    if "csv" in fmts:
        written.append(io.write_csv(out / "xcorr.csv", XCORR_COLUMNS, rows))
    if "json" in fmts:
        meta = _provenance("xcorr", cfg, profile)
        meta.update({"ensemble_digest": spec.digest(), "f_hz": f, "bandwidth_hz": bw,
                     "rows": [dict(zip(XCORR_COLUMNS, r)) for r in rows]})
        written.append(io.write_json(out / "xcorr.json", meta))
    return written


PHASE_COLUMNS = ("f_hz", "status", "circularity_p", "uniformity_ks_p", "rayleigh_p", "decision")


def cmd_phase_test(cfg):
    profile = build_profile(cfg)
    fmts, out = _formats(cfg), _outdir(cfg)
    freqs = _float_list(cfg["freqs"], "freqs")
    spec = _ensemble(cfg, profile, cfg["n"], freqs)
    sig = float(cfg["significance"])
    cutoff = ensemble.exclusion_cutoff(spec.theory_profile())
    H = spec.transforms()
    rows, reports = [], []
    for k, f in enumerate(freqs):
        circ = ensemble.circularity_test(H[:, k], sig, f)
        unif = ensemble.phase_uniformity_test(
            ensemble.PhaseSample.from_complex(f, H[:, k]), sig)
        status = "excluded" if f < cutoff else "judged"
        if status == "excluded":
            decision = "excluded"
        else:
            decision = "fail" if (circ.rejected or unif.rejected) else "pass"
        rows.append([f, status, circ.p_value, unif.p_value, unif.details["rayleigh_p"], decision])
        reports.append({"f_hz": f, "status": status, "decision": decision,
                        "circularity": circ.to_dict(spec.digest()),
                        "uniformity": unif.to_dict(spec.digest())})
    white = ensemble.stft_phase_whiteness(spec, _stft_config(cfg), significance=sig)
    written = []
    if "csv" in fmts:
        written.append(io.write_csv(out / "phase_test.csv", PHASE_COLUMNS, rows))
    if "json" in fmts:
        meta = _provenance("phase-test", cfg, profile)
        meta.update({"ensemble_digest": spec.digest(), "exclusion_cutoff_hz": cutoff,
                     "frequencies": reports, "whiteness": white.to_dict()})
        written.append(io.write_json(out / "phase_test.json", meta))
    return written


def cmd_loss_demo(cfg):
    profile = build_profile(cfg)
    if profile.kind != "constant":
        bank = _bank(cfg, profile)
    fmts, out, seed = _formats(cfg), _outdir(cfg), _seed(cfg)
    fs = float(cfg["fs"])
    n = int(cfg["n"])
    if n < 1:
        raise CliError("--n must be >= 1")
    config = _stft_config(cfg)
    runs, first = [], None
    for i in range(n):
        s_seed, h_seed = derive_seed(seed, 2 * i), derive_seed(seed, 2 * i + 1)
        s = synth_test_signal(str(cfg["signal"]), float(cfg["duration"]), fs, s_seed)
        if profile.kind == "constant":
            p = profile.params
            h = simple_polack(p["b"], p["alpha"], None, fs, h_seed)
        else:
            h = generalized_polack(profile, bank, None, fs, h_seed)
        rep = phase_substitution_demo(s, ImpulseResponse(h.samples, fs, h.profile_ref), config)
        runs.append({"index": i, "signal_seed": s_seed, "rir_seed": h_seed, **rep.to_dict()})
        if first is None:
            first = (s, rep)
    s0, rep0 = first
    S0 = stft(s0.samples, config)
    sens = {}
    for m in LossMode:
        ps = loss_phase_sensitivity(S0, m, int(cfg["trials"]), derive_seed(seed, 2 ** 40))
        sens[m.value] = {"mean": ps.mean, "variance": ps.variance, "n_trials": ps.n_trials}
    summary = {"mean_sisdr_dry_db": float(np.mean([r["sisdr_dry_db"] for r in runs])),
               "mean_sisdr_wet_db": float(np.mean([r["sisdr_wet_db"] for r in runs])),
               "mean_sisdr_reverberant_db": float(np.mean([r["sisdr_reverberant_db"]
                                                           for r in runs]))}
    written = []
    if "csv" in fmts:
        cols = ["index", "sisdr_dry_db", "sisdr_wet_db", "sisdr_reverberant_db"]
        cols += [f"wet_{m.value}" for m in LossMode]
        rows = [[r["index"], r["sisdr_dry_db"], r["sisdr_wet_db"], r["sisdr_reverberant_db"],
                 *[r["losses"]["wet"][m.value] for m in LossMode]] for r in runs]
        written.append(io.write_csv(out / "loss_demo.csv", cols, rows))
    if "json" in fmts:
        meta = _provenance("loss-demo", cfg, profile)
        meta.update({"summary": summary, "runs": runs, "phase_sensitivity": sens})
        written.append(io.write_json(out / "loss_demo.json", meta))
    if "wav" in fmts:
        for name in ("dry", "reverberant", "wet_phase"):
            written.append(io.write_wav(out / f"loss_demo_{name}.wav", rep0.signals[name], fs))
    return written


def _tag(f):
    return ("%g" % f).replace(".", "p")


HANDLERS = {"synth": cmd_synth, "fig1": cmd_fig1, "moments": cmd_moments, "xcorr": cmd_xcorr,
            "phase-test": cmd_phase_test, "loss-demo": cmd_loss_demo}


def _fail(kind, message, code, command=None):
    err = {"error": kind, "message": message, "command": command, "exit_code": code}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    command = None
    try:
        command, cfg = effective_config(argv)
        written = HANDLERS[command](cfg)
    except CliError as exc:
        return _fail(exc.kind, str(exc), exc.code, command)
    except ConfigurationError as exc:
        return _fail("config", str(exc), 2, command)
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        return _fail("io", f"{exc.strerror or exc}{where}", 1, command)
    except ValueError as exc:
        return _fail("value", str(exc), 2, command)
    for path in written:
        sys.stdout.write(f"{path}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
