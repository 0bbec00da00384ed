"""Command-line interface.

Every command loads and validates its inputs, computes everything in memory,
and only then writes its files (atomically) plus a ``report.json``. A run that
fails therefore leaves no partial output behind.

Exit status: 0 success, 2 validation, 3 parse or file I/O, 4 non-convergence,
5 internal error. Failures print one JSON object on stderr.
"""

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from wja import circuit as cm
from wja import paramp as pa
from wja import waveguide as wgm
from wja.errors import NonConvergenceError, ParseError, ValidationError, WJAError
from wja.fitting.reflection import (
    ReflectionTrace,
    extract_q_vs_frequency,
    fit_reflection_phase,
    reflection_model,
)
from wja.fitting.tuning import fit_flux_tuning, tuning_model
from wja.io.config import load_config
from wja.io.csvio import dumps_csv, read_csv_curve
from wja.io.files import atomic_write_text
from wja.io.report import Report, config_inputs, jsonable, manifest_entry
from wja.io.touchstone import read_touchstone

TWO_PI = 2 * math.pi
SATURATION_NOTE = (
    "saturation model: P_-1dB falls by exactly 1 dB per dB of gain through "
    "(-132 dBm, 20 dB); the measured device fell by 1.2 dB per dB"
)


class _Outputs:
    """Tables collected during a command, serialized on success only."""

    def __init__(self, fmt):
        self.fmt = fmt
        self.files = {}

    def table(self, stem, columns):
        if self.fmt == "json":
            text = json.dumps(jsonable(columns), indent=2, allow_nan=False) + "\n"
            name = f"{stem}.json"
        else:
            name = f"{stem}.csv"
            text = dumps_csv(columns)
        self.files[name] = text
        return name


# -- commands ---------------------------------------------------------------


def cmd_design(cfg, args, rep, out):
    circuit = cfg.circuit_params()
    wg = cfg.waveguide_spec()
    placement = cfg.placement_spec()
    ant = cfg.antenna_spec()
    f_design = cfg.design.frequency
    th = cfg.thresholds

    f_max = cm.max_frequency(circuit)
    f_min = cm.resonance_frequency(circuit, cfg.design.flux_max)
    c_c = wgm.antenna_coupling_capacitance(ant)
    Q = wgm.coupling_q(circuit, 0.0, wg, ant, placement, f_design)
    p0 = cm.participation_ratio(circuit, 0.0)
    verdict = cm.amplification_feasible(Q * p0, th.qp_threshold, th.qp_optimal)
    rep.value("f0_zero_flux", f_max, "Hz")
    rep.value("tuning_range_low", f_min, "Hz")
    rep.value("tuning_range_high", f_max, "Hz")
    rep.value("flux_at_tuning_range_low", cfg.design.flux_max, "Phi0")
    rep.value("L_J0", circuit.L_J0, "H")
    rep.value("Z_c_zero_flux", cm.characteristic_impedance(circuit, 0.0), "Ohm")
    rep.value("coupling_capacitance", c_c, "F")
    rep.value("coupling_slope", ant.coupling_slope, "F/m")
    rep.value("Q_design_frequency", Q, "1")
    rep.value("design_frequency", f_design, "Hz")
    rep.value("p_zero_flux", p0, "1")
    rep.value("Qp_zero_flux", verdict.qp, "1")
    rep.value("Qp_feasible", verdict.feasible, "bool")
    rep.value("Qp_optimal_band", verdict.optimal, "bool")
    rep.value("TE10_cutoff", wgm.cutoff_frequency(wg), "Hz")
    rep.value("guide_wavelength_design", wgm.guide_wavelength(wg, f_design), "m")
    rep.value("placement_distance", placement.d, "m")
    rep.value("placement_distance_mm", placement.d * 1e3, "mm")
    rep.check("Qp_feasible", verdict.feasible, f"Qp = {verdict.qp:.4g}, threshold {th.qp_threshold:g}")
    if cfg.antenna.target_q is not None:
        rep.check("calibrated_Q", abs(Q - cfg.antenna.target_q) <= 1.0,
                  f"Q = {Q:.6g}, target {cfg.antenna.target_q:g}")

    fc = wgm.cutoff_frequency(wg)
    rows = {k: [] for k in ("flux", "f0_Hz", "L_J_H", "p", "Z_c_Ohm", "Q", "Qp")}
    skipped = 0
    for phi in np.linspace(0.0, cfg.design.flux_max, cfg.design.n_flux):
        op = cm.operating_point(circuit, phi)
        if op.f0 <= fc:
            skipped += 1
            continue
        q = wgm.coupling_q(circuit, phi, wg, ant, placement, op.f0, warn=False)
        for k, v in zip(rows, (phi, op.f0, op.L_J, op.p, op.Z_c, q, q * op.p)):
            rows[k].append(float(v))
    if skipped:
        rep.note(f"{skipped} flux points with f0 below the TE10 cutoff omitted from the operating table")
    out.table("operating_table", rows)


def cmd_coupling_sweep(cfg, args, rep, out):
    circuit = cfg.circuit_params()
    wg = cfg.waveguide_spec()
    ant = cfg.antenna_spec()
    f = cfg.design.frequency
    sw = cfg.sweep
    if args.axis in ("length", "both"):
        lengths = np.linspace(sw.length_min, sw.length_max, sw.n_length)
        t = wgm.q_vs_length_sweep(lengths, circuit, 0.0, wg, ant, cfg.placement_spec(), f)
        out.table("q_vs_length", t.columns())
        if "loglog_slope" in t.annotations:
            s = t.annotations["loglog_slope"]
            rep.value("loglog_slope_within_cap", s, "1")
            rep.check("inverse_square_length_law", abs(s + 2) <= 0.05, f"slope {s:.6g}")
        n_beyond = sum(1 for tg in t.tags if tg)
        if n_beyond:
            rep.note(f"{n_beyond} lengths beyond the analytic cap are extrapolated (tag beyond_cap)")
    if args.axis in ("distance", "both"):
        d = np.linspace(sw.distance_min, sw.distance_max, sw.n_distance)
        t = wgm.q_vs_distance_sweep(d, circuit, 0.0, wg, ant, f)
        out.table("q_vs_distance", t.columns())
        rep.value("guide_wavelength", t.annotations["guide_wavelength_m"], "m")
        rep.value("q_minima_at", t.annotations["minima_m"], "m")
        rep.value("q_divergences_at", t.annotations["divergences_m"], "m")
    rep.value("sweep_frequency", f, "Hz")


def _operating_pump(cfg, args, rep):
    circuit = cfg.circuit_params()
    pc = cfg.pump
    kp = pa.default_operating_point(circuit, pc.signal_frequency, pc.Q)
    rep.value("kerr_K", kp.K / TWO_PI, "Hz")
    rep.value("kappa", kp.kappa / TWO_PI, "Hz")
    rep.value("critical_photon_number", kp.n_crit, "1")
    if getattr(args, "lam_ratio", None) is not None:
        lam = args.lam_ratio * kp.kappa / 2
        source = "lambda ratio"
    elif getattr(args, "target_db", None) is not None:
        lam = pa.lambda_for_gain(10 ** (args.target_db / 10), kp.kappa)
        source = "target gain"
    else:
        pump = pa.PumpConfig(pc.signal_frequency, pc.detuning, pc.P1_dBm, pc.P2_dBm)
        att = pc.attenuation_dB
        if att is None:
            att = pa.calibrate_pump_attenuation(pump, kp.K, kp.kappa, pc.target_gain_dB)
            rep.note(f"pump attenuation calibrated to {pc.target_gain_dB:g} dB peak gain")
        rep.value("pump_attenuation", att, "dB")
        return pa.effective_pump_strength(pump, kp.K, kp.kappa, att), kp
    rep.note(f"effective drive set from the {source}")
    return pa.EffectivePump(lam, kp.kappa, pc.signal_frequency), kp


def cmd_gain(cfg, args, rep, out):
    pc = cfg.pump
    ep, kp = _operating_pump(cfg, args, rep)
    f = np.linspace(pc.signal_frequency - pc.span / 2, pc.signal_frequency + pc.span / 2, pc.n_points)
    prof = pa.gain_profile(ep, f)
    out.table("gain_profile", prof.columns())
    G = 10 ** (prof.peak_dB / 10)
    rep.value("lambda", ep.lam / TWO_PI, "Hz")
    rep.value("lambda_over_half_kappa", 2 * ep.lam / ep.kappa, "1")
    rep.value("peak_gain", prof.peak_dB, "dB")
    if prof.peak_dB > 10 * math.log10(2):
        B, gbw = pa.gain_bandwidth(prof)
        B_exact = pa.exact_bandwidth(ep)
        rep.value("bandwidth", B, "Hz")
        rep.value("bandwidth_exact", B_exact, "Hz")
        rep.value("gain_bandwidth_product", gbw, "Hz")
        ratio = math.sqrt(G) * B_exact / (ep.kappa / TWO_PI)
        rep.value("sqrtG_B_over_kappa", ratio, "1")
        if prof.peak_dB >= 20:
            rep.check("gain_bandwidth_near_kappa", 0.95 <= ratio <= 1.05, f"sqrt(G) B / kappa = {ratio:.4g}")
        P_sat = pa.saturation_power(prof.peak_dB)
        rep.value("P_1dB", P_sat, "dBm")
        rep.value("photons_per_bandwidth_at_P_1dB", pa.photon_number(P_sat, ep.f_s, B_exact), "1")
        rep.note(SATURATION_NOTE)
    else:
        rep.note("peak gain below 3 dB: bandwidth not defined")
    g_amp, g_de = pa.quadrature_gains(G)
    rep.value("quadrature_gain_amplified", g_amp, "1")
    rep.value("quadrature_gain_deamplified", g_de, "1")


def cmd_noise(cfg, args, rep, out):
    nc = cfg.noise
    gains = args.gains if args.gains else nc.gains_dB
    ncfg = pa.NoiseConfig(nc.T_sys, nc.T_N, nc.rbw)
    G = 10 ** (np.asarray(gains, dtype=float) / 10)
    nvr = np.atleast_1d(pa.noise_visibility(G, ncfg, nc.frequency))
    out.table("nvr_vs_gain", {"gain_dB": [float(g) for g in gains], "nvr_dB": list(nvr)})
    T_Q = pa.quantum_temperature(nc.frequency)
    rep.value("T_Q", T_Q, "K")
    rep.value("T_N", nc.T_N, "K")
    rep.value("T_N_over_T_Q", nc.T_N / T_Q, "1")
    for g, v in zip(gains, nvr):
        rep.value(f"nvr_at_{g:g}_dB", float(v), "dB")

    # spectrum at the configured target gain, centred on the noise frequency
    pc = cfg.pump
    kappa = TWO_PI * nc.frequency / pc.Q
    ep = pa.EffectivePump(pa.lambda_for_gain(10 ** (pc.target_gain_dB / 10), kappa), kappa, nc.frequency)
    f = np.linspace(nc.frequency - pc.span / 2, nc.frequency + pc.span / 2, pc.n_points)
    tr = pa.nvr_spectrum(ep, ncfg, f, nc.dip_band)
    out.table("nvr_spectrum", tr.columns())
    rep.value("spectrum_gain", pc.target_gain_dB, "dB")
    rep.value("dip_depth", tr.dip_depth_dB, "dB")
    rep.value("dip_width", tr.dip_width, "Hz")
    bound = pa.noise_temperature_bound(float(pa.noise_visibility(10 ** (pc.target_gain_dB / 10), ncfg, nc.frequency)),
                                       10 ** (pc.target_gain_dB / 10), nc.T_sys, nc.frequency)
    rep.value("T_N_bound_from_nvr", bound.T_N, "K")
    rep.note("the measured dip is the intrinsic single-quadrature band smeared by the analyzer resolution bandwidth")


def _parse_fixed(items):
    fixed = {}
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"--fix expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            fixed[k.strip()] = float(v)
        except ValueError:
            raise ValidationError(f"--fix value for {k!r} is not a number") from None
    return fixed


def cmd_flux_fit(cfg, args, rep, out):
    data = read_csv_curve(args.data, "tuning")
    res = fit_flux_tuning(data, fixed=_parse_fixed(args.fix), seed=args.seed)
    if not res.converged:
        raise NonConvergenceError(f"flux-tuning fit did not converge: {res.message}")
    units = {"I0": "A", "C": "F", "L_stray": "H", "alpha": "Phi0/A", "I_off": "A"}
    for k, v in res.estimates.items():
        rep.value(k, v, units[k])
        rep.value(f"{k}_std", res.std_errors[k], units[k])
    ex = res.extras
    rep.value("f_max", ex["f_max_Hz"], "Hz")
    rep.value("f_max_std", ex["f_max_std_Hz"], "Hz")
    rep.value("p_zero_flux", ex["p_zero_flux"], "1")
    rep.value("p_zero_flux_std", ex["p_zero_flux_std"], "1")
    rep.value("C_L_stray", ex["C_L_stray"], "s^2")
    rep.value("C_L_J0", ex["C_L_J0"], "s^2")
    rep.value("residual_norm", res.residual_norm, "1")
    rep.value("condition_number", res.condition_number, "1")
    rep.value("degenerate", ex["degenerate"], "bool")
    rep.check("converged", res.converged, res.message)
    theta = np.array([res.estimates[k] for k in res.estimates])
    key = "flux" if data.flux_mode else "current_A"
    out.table("flux_fit", {key: list(data.x), "f0_Hz": list(data.f0),
                           "f0_model_Hz": list(tuning_model(theta, data.x, data.flux_mode))})


def _read_trace(path):
    p = Path(path)
    if p.suffix.lower() == ".csv":
        return read_csv_curve(p, "reflection")
    return read_touchstone(p)


def cmd_phase_fit(cfg, args, rep, out):
    traces = [_read_trace(p) for p in args.data]
    if len(traces) == 1 and not args.flux:
        tr = traces[0]
        res = fit_reflection_phase(tr)
        if not res.converged:
            raise NonConvergenceError(f"reflection fit did not converge: {res.message}")
        units = {"f0": "Hz", "kappa_c": "rad/s", "kappa_i": "rad/s", "tau": "s", "theta0": "rad"}
        for k, v in res.estimates.items():
            rep.value(k, v, units[k])
            rep.value(f"{k}_std", res.std_errors[k], units[k])
        for k in ("Q_c", "Q_i", "Q", "Q_c_std"):
            if k in res.extras:
                rep.value(k, res.extras[k], "1")
        rep.value("winding", res.extras["winding_deg"], "deg")
        rep.value("trace_winding", res.extras["trace_winding_deg"], "deg")
        rep.value("undercoupled", res.extras["undercoupled"], "bool")
        e = res.estimates
        model = reflection_model(tr.frequencies, e["f0"], e["kappa_c"], e["kappa_i"], e["tau"], e["theta0"])
        out.table("phase_fit", {"f_Hz": list(tr.frequencies), "re": list(tr.gamma.real),
                                "im": list(tr.gamma.imag), "re_model": list(model.real),
                                "im_model": list(model.imag)})
        return
    if len(args.flux or []) != len(traces):
        raise ValidationError(f"{len(traces)} traces but {len(args.flux or [])} --flux values")
    circuit = None if args.fit_circuit else cfg.circuit_params()
    table = extract_q_vs_frequency(list(zip(args.flux, traces)), circuit)
    for fail in table.failures:
        rep.note(f"trace {fail['index']} (flux {fail['flux']:g}) skipped: {fail['error']}")
    if not table.rows:
        raise NonConvergenceError("no trace could be fitted")
    out.table("q_vs_frequency", table.columns())
    qp = [r["Qp"] for r in table.rows]
    rep.value("traces_fitted", len(table.rows), "count")
    rep.value("Qp_min", min(qp), "1")
    rep.value("Qp_max", max(qp), "1")


def cmd_report(cfg, args, rep, out):
    args.axis = "both"
    args.lam_ratio = None
    args.target_db = None
    args.gains = None
    for fn in (cmd_design, cmd_coupling_sweep, cmd_gain, cmd_noise):
        sub = Report(fn.__name__)
        fn(cfg, args, sub, out)
        prefix = fn.__name__[4:]
        for k, v in sub.values.items():
            rep.values[f"{prefix}.{k}"] = v
        rep.checks += [{**c, "name": f"{prefix}.{c['name']}"} for c in sub.checks]
        for n in sub.notes:
            rep.note(n)
    slope = (pa.saturation_power(21.0) - pa.saturation_power(20.0))
    rep.check("saturation_slope_model", slope == -1.0, f"{slope:+.3f} dB/dB")
    rep.value("saturation_slope_measured", -pa.MEASURED_SATURATION_SLOPE, "dB/dB")
    rep.note(SATURATION_NOTE)


COMMANDS = {
    "design": cmd_design,
    "coupling-sweep": cmd_coupling_sweep,
    "flux-fit": cmd_flux_fit,
    "phase-fit": cmd_phase_fit,
    "gain": cmd_gain,
    "noise": cmd_noise,
    "report": cmd_report,
}


# -- plumbing ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"usage: {message}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML design configuration")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=0, help="seed for multi-start fits")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")

    p = _Parser(prog="wja", description="Waveguide-coupled Josephson parametric amplifier tools")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("design", parents=[common], help="operating table for a design")
    s = sub.add_parser("coupling-sweep", parents=[common], help="Q versus antenna length and wall distance")
    s.add_argument("--axis", choices=("length", "distance", "both"), default="both")
    s = sub.add_parser("flux-fit", parents=[common], help="fit a flux-tuning curve (CSV)")
    s.add_argument("--data", required=True)
    s.add_argument("--fix", action="append", metavar="NAME=VALUE", help="hold a parameter fixed")
    s = sub.add_parser("phase-fit", parents=[common], help="fit reflection traces (.s1p or CSV)")
    s.add_argument("--data", required=True, nargs="+")
    s.add_argument("--flux", type=float, nargs="+", help="reduced flux of each trace (batch mode)")
    s.add_argument("--fit-circuit", action="store_true",
                   help="take participation from a tuning fit of the batch instead of the config circuit")
    s = sub.add_parser("gain", parents=[common], help="small-signal gain profile")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--target-db", type=float, help="set the drive for this peak gain")
    g.add_argument("--lam-ratio", type=float, help="drive as a fraction of threshold, lam/(kappa/2)")
    s = sub.add_parser("noise", parents=[common], help="noise visibility ratio")
    s.add_argument("--gains", type=float, nargs="+", help="gains [dB]; default from the config")
    sub.add_parser("report", parents=[common], help="design, sweeps, gain and noise in one report")
    return p


def run(argv=None, timestamp=None):
    """Run the CLI and return the exit status."""
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        rep = Report(args.command)
        rep.inputs = {
            "config_file": args.config,
            "config": config_inputs(cfg.to_dict()),
            "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "out")},
        }
        out = _Outputs(args.format)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            COMMANDS[args.command](cfg, args, rep, out)
        for w in caught:
            rep.note(f"{w.category.__name__}: {w.message}")
        outdir = Path(args.out)
        for name, text in sorted(out.files.items()):
            atomic_write_text(outdir / name, text)
            rep.manifest.append(manifest_entry(name, text))
        atomic_write_text(outdir / "report.json", rep.dumps(timestamp))
        return 0
    except WJAError as exc:
        return _fail(exc, exc.exit_code, _category(exc))
    except OSError as exc:
        return _fail(exc, ParseError.exit_code, "io")
    except Exception as exc:  # noqa: BLE001
        return _fail(exc, 5, "internal")


def _category(exc):
    if isinstance(exc, ValidationError):
        return "validation"
    if isinstance(exc, ParseError):
        return "parse"
    if isinstance(exc, NonConvergenceError):
        return "nonconvergence"
    return "internal"


def _fail(exc, code, category):
    err = {"error": {"category": category, "exit_code": code, "type": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
