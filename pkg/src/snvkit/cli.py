"""Command-line front end.

Every physical quantity on the command line carries an explicit unit suffix
(``--bin 0.5ns``, ``--linewidth 120GHz``); bare numbers are rejected at
parse time. Range flags take ``lo:hi`` with an optional unit on either side
(``--zpl-window 610:625``, nanometres by default). Each run writes a
manifest (command, config digest, input digests, seed, version, timestamp)
beside its outputs; identical inputs and seed give bit-identical data files.

Exit codes: 0 success, 1 input/parse failure (with line and column for
delimited inputs), 2 usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (PolarizationScan, fit_g2, fit_lifetime,
                       fit_polarization, fit_saturation, g2_histogram)
from .depth import (EmpiricalProfile, depth_from_countrate, normalize_profile,
                    wing_depth)
from .io import (ParseError, read_histogram_csv, read_json, read_series_csv,
                 read_spectrum_csv, read_stream, read_stream_csv, read_xy_csv,
                 write_correlation_csv, write_histogram_csv, write_json,
                 write_spectrum_csv, write_stream, write_stream_csv,
                 write_xy_csv)
from .fitting import FitResult
from .levels import (DEFAULT_LEVEL_STRUCTURE, DWParams, load_level_structure)
from .simulate import (DiffusionConfig, EmitterConfig, IonizationConfig,
                       PLEScanConfig, simulate_ple_scan, simulate_stream,
                       simulate_tcspc)
from .spectra import (DEFAULT_PSB_TABLE, PeakModel, PSBTable, debye_waller,
                      find_psb_peaks, fit_a2u_resonance, fit_peaks,
                      mirror_spectrum)
from .templaws import (LINEWIDTH_MODELS, TempSeries, fit_dw_series,
                       fit_linewidth_series, fit_shift_series,
                       invert_thermometer)
from .units import EnergyQuantity

# ---------------------------------------------------------------- unit args

# Factors convert the suffixed value into the dimension's canonical unit.
_UNIT_TABLES: dict[str, tuple[str, dict[str, float]]] = {
    "time_ns": ("ns", {"ps": 1e-3, "ns": 1.0, "us": 1e3, "µs": 1e3,
                       "ms": 1e6, "s": 1e9}),
    "time_s": ("s", {"ps": 1e-12, "ns": 1e-9, "us": 1e-6, "µs": 1e-6,
                     "ms": 1e-3, "s": 1.0, "min": 60.0}),
    "freq_ghz": ("GHz", {"Hz": 1e-9, "kHz": 1e-6, "MHz": 1e-3, "GHz": 1.0,
                         "THz": 1e3}),
    "freq_mhz": ("MHz", {"Hz": 1e-6, "kHz": 1e-3, "MHz": 1.0, "GHz": 1e3}),
    "freq_hz": ("Hz", {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}),
    "energy_mev": ("meV", {"ueV": 1e-3, "µeV": 1e-3, "meV": 1.0, "eV": 1e3}),
    "rate_cps": ("cps", {"cps": 1.0, "kcps": 1e3, "Mcps": 1e6, "cts/s": 1.0,
                         "kcts/s": 1e3, "Mcts/s": 1e6}),
    "power_uw": ("uW", {"pW": 1e-6, "nW": 1e-3, "uW": 1.0, "µW": 1.0,
                        "mW": 1e3, "W": 1e6}),
    "length_nm": ("nm", {"pm": 1e-3, "nm": 1.0, "um": 1e3, "µm": 1e3}),
    "energy_ev": ("eV", {"meV": 1e-3, "eV": 1.0}),
    "temp_k": ("K", {"mK": 1e-3, "K": 1.0}),
    "angle_deg": ("deg", {"deg": 1.0, "rad": 180.0 / np.pi}),
    "speed_ghz_s": ("GHz/s", {"kHz/s": 1e-6, "MHz/s": 1e-3, "GHz/s": 1.0}),
    "recovery_hz_uw": ("Hz/uW", {"Hz/uW": 1.0, "Hz/µW": 1.0,
                                 "kHz/uW": 1e3, "kHz/µW": 1e3}),
}

_QTY_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*)$")


def parse_quantity(text: str, dimension: str) -> float:
    canonical, table = _UNIT_TABLES[dimension]
    m = _QTY_RE.match(text.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse quantity {text!r}")
    value, suffix = float(m.group(1)), m.group(2).strip()
    if not suffix:
        raise argparse.ArgumentTypeError(
            f"{text!r} has no unit; write e.g. {value:g}{canonical} "
            f"(accepted: {', '.join(table)})")
    if suffix not in table:
        raise argparse.ArgumentTypeError(
            f"unknown unit {suffix!r} for this flag "
            f"(accepted: {', '.join(table)})")
    return value * table[suffix]


def qty(dimension: str):
    def parse(text: str) -> float:
        return parse_quantity(text, dimension)
    parse.__name__ = dimension
    return parse


def spectral_qty(text: str) -> EnergyQuantity:
    """A spectral position: nm, eV, meV or GHz, kept unit-tagged."""
    m = _QTY_RE.match(text.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse quantity {text!r}")
    value, suffix = float(m.group(1)), m.group(2).strip()
    if suffix not in ("nm", "eV", "meV", "GHz"):
        raise argparse.ArgumentTypeError(
            f"{text!r} needs a unit of nm, eV, meV or GHz")
    try:
        return EnergyQuantity(value, suffix)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def window_qty(dimension: str):
    """lo:hi range; units optional inside a range, canonical unit assumed."""
    canonical, table = _UNIT_TABLES[dimension]

    def parse_side(side: str) -> float:
        m = _QTY_RE.match(side.strip())
        if not m:
            raise argparse.ArgumentTypeError(f"cannot parse {side!r}")
        value, suffix = float(m.group(1)), m.group(2).strip()
        if not suffix:
            return value
        if suffix not in table:
            raise argparse.ArgumentTypeError(
                f"unknown unit {suffix!r} (accepted: {', '.join(table)})")
        return value * table[suffix]

    def parse(text: str) -> tuple[float, float]:
        parts = text.split(":")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(
                f"expected lo:hi (in {canonical}), got {text!r}")
        lo, hi = parse_side(parts[0]), parse_side(parts[1])
        if hi <= lo:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return lo, hi

    parse.__name__ = f"window_{dimension}"
    return parse


# ---------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str
    config: dict
    config_digest: str
    input_digests: dict[str, str]
    seed: int | None
    version: str
    timestamp: str

    @classmethod
    def build(cls, command: str, config: dict, inputs: list[str],
              seed: int | None) -> "RunManifest":
        canon = json.dumps(_jsonable(config), sort_keys=True)
        digests = {}
        for p in inputs:
            digests[str(p)] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
        return cls(
            command=command,
            config=_jsonable(config),
            config_digest=hashlib.sha256(canon.encode()).hexdigest(),
            input_digests=digests,
            seed=seed,
            version=__version__,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )

    def write(self, path: str | Path) -> None:
        write_json(path, self.__dict__)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, EnergyQuantity):
        return {"value": obj.value, "unit": obj.unit}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _manifest_config(args, exclude=("func", "json", "plot", "out")) -> dict:
    return {k: v for k, v in vars(args).items()
            if k not in exclude and not k.startswith("_")}


def _write_manifest(args, inputs: list[str]) -> None:
    manifest = RunManifest.build(
        command=args._command,
        config=_manifest_config(args),
        inputs=inputs,
        seed=getattr(args, "seed", None),
    )
    manifest.write(f"{args.out}.manifest.json")


# ------------------------------------------------------------------ output

def _flatten(doc: dict, prefix: str = "") -> list[tuple[str, str]]:
    rows = []
    for key, val in doc.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            rows += _flatten(val, prefix=f"{name}.")
        else:
            # json.dumps gives the same digits the --json mode prints.
            rows.append((name, json.dumps(_jsonable(val))))
    return rows


def _emit(doc: dict, args) -> None:
    doc = _jsonable(doc)
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    rows = _flatten(doc)
    width = max((len(k) for k, _ in rows), default=0)
    for key, val in rows:
        print(f"{key:<{width}}  {val}")


def _fit_doc(res: FitResult) -> dict:
    return res.to_dict()


# -------------------------------------------------------------- sim-stream

def _add_emitter_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--power", type=qty("power_uw"), default=None,
                    metavar="P", help="excitation power, e.g. 300uW [200uW]")
    sp.add_argument("--psat", type=qty("power_uw"), default=None,
                    metavar="P", help="saturation power, e.g. 200uW [200uW]")
    sp.add_argument("--max-rate", type=qty("rate_cps"), default=None,
                    metavar="R", help="saturated detected rate, e.g. 120kcps")
    sp.add_argument("--dark", type=qty("rate_cps"), default=None,
                    metavar="R", help="dark rate per channel, e.g. 250cps [0cps]")
    sp.add_argument("--lifetime", type=qty("time_ns"), default=None,
                    metavar="T", help="excited-state lifetime, e.g. 7.61ns")
    sp.add_argument("--temperature", type=qty("temp_k"), default=None,
                    metavar="T", help="sample temperature [4K]")
    sp.add_argument("--duration", type=qty("time_s"), default=None,
                    metavar="T", help="acquisition length, e.g. 300s [1s]")
    sp.add_argument("--band", choices=["all", "zpl", "psb"], default="all",
                    help="detection band (zpl/psb need --huang-rhys/--t-cutoff)")
    sp.add_argument("--huang-rhys", type=float, default=None, metavar="S",
                    help="Huang-Rhys factor (dimensionless)")
    sp.add_argument("--t-cutoff", type=qty("temp_k"), default=None,
                    metavar="T", help="phonon cutoff temperature, e.g. 680K")
    sp.add_argument("--level", default=None, metavar="SRC",
                    help="level-structure JSON path or name under "
                         "SNVKIT_CONFIG_DIR")
    sp.add_argument("--config", default=None, metavar="JSON",
                    help="emitter config JSON (exclusive with other flags)")
    sp.add_argument("--seed", type=int, default=0)


_EMITTER_DEFAULTS = dict(power=200.0, psat=200.0, max_rate=1.2e5, dark=0.0,
                         temperature=4.0, duration=1.0)


def _build_emitter(args) -> EmitterConfig:
    flag_names = ("power", "psat", "max_rate", "dark", "lifetime",
                  "temperature", "duration", "huang_rhys", "t_cutoff", "level")
    if args.config is not None:
        given = [n for n in flag_names if getattr(args, n) is not None]
        if given or args.band != "all":
            raise ValueError("--config is exclusive with emitter flags "
                             f"(got {given})")
        cfg = EmitterConfig.from_json(args.config)
        return replace(cfg, rng_seed=args.seed)
    level = load_level_structure(args.level) if args.level \
        else DEFAULT_LEVEL_STRUCTURE
    if args.lifetime is not None:
        level = replace(level, excited_lifetime_ns=args.lifetime)
    dw = None
    if args.huang_rhys is not None or args.t_cutoff is not None:
        if args.huang_rhys is None or args.t_cutoff is None:
            raise ValueError("--huang-rhys and --t-cutoff go together")
        dw = DWParams(huang_rhys_s=args.huang_rhys, t_cutoff_k=args.t_cutoff)

    def val(name):
        v = getattr(args, name)
        return _EMITTER_DEFAULTS[name] if v is None else v

    return EmitterConfig(
        level=level,
        excitation_power_uw=val("power"),
        saturation_power_uw=val("psat"),
        max_rate_cps=val("max_rate"),
        dark_rate_cps=val("dark"),
        dw=dw,
        temperature_k=val("temperature"),
        duration_s=val("duration"),
        rng_seed=args.seed,
        detection_band=args.band,
    )


def cmd_sim_stream(args) -> int:
    cfg = _build_emitter(args)
    stream = simulate_stream(cfg)
    out_bin = f"{args.out}.bin"
    write_stream(stream, out_bin)
    outputs = {"stream": out_bin}
    if args.csv:
        write_stream_csv(stream, f"{args.out}.csv")
        outputs["stream_csv"] = f"{args.out}.csv"
    _write_manifest(args, inputs=[args.config] if args.config else [])
    n0, n1 = stream.channel_counts()
    _emit({
        "records": len(stream),
        "channel_counts": {"0": n0, "1": n1},
        "duration_s": cfg.duration_s,
        "expected_signal_rate_cps": cfg.expected_signal_rate_cps,
        "antibunching_time_ns": cfg.antibunching_time_ns,
        "outputs": outputs,
    }, args)
    return 0


def cmd_sim_tcspc(args) -> int:
    cfg = _build_emitter(args)
    hist = simulate_tcspc(cfg, pulse_period_ns=args.period,
                          n_pulses=args.pulses, n_bins=args.bins)
    out_csv = f"{args.out}.hist.csv"
    write_histogram_csv(hist, out_csv)
    _write_manifest(args, inputs=[args.config] if args.config else [])
    if args.plot:
        from . import plotting
        plotting.plot_decay(hist, None, f"{args.out}.png")
    _emit({
        "pulses": hist.n_pulses,
        "total_counts": int(np.sum(hist.counts)),
        "pulse_period_ns": hist.pulse_period_ns,
        "outputs": {"histogram": out_csv},
    }, args)
    return 0


def cmd_sim_ple(args) -> int:
    ion = IonizationConfig(
        two_photon_coefficient=args.two_photon,
        recovery_coefficient_hz_per_uw=args.recovery_coeff,
        green_power_uw=args.green,
    )
    diff = DiffusionConfig(jump_rate_hz=args.jump_rate,
                           jump_sigma_mhz=args.jump_sigma,
                           mode=args.diffusion_mode)
    cfg = PLEScanConfig(
        start_detuning_ghz=args.start, stop_detuning_ghz=args.stop,
        scan_speed_ghz_per_s=args.speed,
        homogeneous_fwhm_mhz=args.fwhm,
        on_resonance_rate_cps=args.rate, dark_rate_cps=args.dark,
        step_time_s=args.step, shot_noise=args.shot_noise,
        ionization=ion, diffusion=diff, rng_seed=args.seed,
    )
    trace = simulate_ple_scan(cfg)
    out_csv = f"{args.out}.trace.csv"
    write_xy_csv(out_csv, {
        "time_s": trace.time_s,
        "detuning_ghz": trace.detuning_ghz,
        "rate_cps": trace.rate_cps,
        "counts": trace.counts,
        "charge": trace.charge.astype(np.int64),
    })
    _write_manifest(args, inputs=[])
    if args.plot:
        from . import plotting
        plotting.plot_ple_trace(trace, f"{args.out}.png")
    _emit({
        "steps": len(trace),
        "terminated_dark": trace.terminated,
        "bright_fraction": trace.bright_fraction,
        "outputs": {"trace": out_csv},
    }, args)
    return 0


# --------------------------------------------------------------- analyzers

def _read_stream_any(path: str):
    if path.endswith(".csv"):
        return read_stream_csv(path)
    return read_stream(path)


def cmd_g2(args) -> int:
    stream = _read_stream_any(args.stream)
    curve = g2_histogram(stream, bin_width_ns=args.bin, window_ns=args.window)
    out_csv = f"{args.out}.corr.csv"
    write_correlation_csv(curve.tau_bins_ns, curve.g2_values, curve.g2_errors,
                          out_csv)
    doc = {
        "bins": len(curve),
        "bin_width_ns": curve.bin_width_ns,
        "channel_rates_cps": list(curve.normalization_rate_cps),
        "outputs": {"correlation": out_csv},
    }
    fit = None
    if not args.no_fit:
        fit = fit_g2(curve)
        out_fit = f"{args.out}.fit.json"
        fit.to_json(out_fit)
        doc["fit"] = _fit_doc(fit)
        doc["outputs"]["fit"] = out_fit
    _write_manifest(args, inputs=[args.stream])
    if args.plot:
        from . import plotting
        plotting.plot_correlation(curve, fit, f"{args.out}.png")
    _emit(doc, args)
    return 0


def cmd_lifetime(args) -> int:
    hist = read_histogram_csv(args.histogram)
    fit = fit_lifetime(hist, fit_background=not args.no_background)
    out_fit = f"{args.out}.fit.json"
    fit.to_json(out_fit)
    _write_manifest(args, inputs=[args.histogram])
    if args.plot:
        from . import plotting
        plotting.plot_decay(hist, fit, f"{args.out}.png")
    _emit({"fit": _fit_doc(fit), "outputs": {"fit": out_fit}}, args)
    return 0


def cmd_saturation(args) -> int:
    power, rate = read_xy_csv(args.points, n_columns=2)
    fit = fit_saturation(power, rate, fit_linear_bg=args.linear_bg)
    out_fit = f"{args.out}.fit.json"
    fit.to_json(out_fit)
    _write_manifest(args, inputs=[args.points])
    if args.plot:
        from . import plotting
        plotting.plot_saturation(power, rate, fit, f"{args.out}.png")
    _emit({"fit": _fit_doc(fit), "outputs": {"fit": out_fit}}, args)
    return 0


def cmd_polarization(args) -> int:
    angles, rates = read_xy_csv(args.scan, n_columns=2)
    scan = PolarizationScan(angles_deg=angles, counts_cps=rates,
                            dark_rate_cps=args.dark)
    fit = fit_polarization(scan)
    out_fit = f"{args.out}.fit.json"
    fit.to_json(out_fit)
    _write_manifest(args, inputs=[args.scan])
    if args.plot:
        from . import plotting
        plotting.plot_polarization(scan, fit, f"{args.out}.png")
    _emit({"fit": _fit_doc(fit), "outputs": {"fit": out_fit}}, args)
    return 0


def _parse_peak_spec(text: str) -> tuple[str, EnergyQuantity, float]:
    """KIND:CENTER[:FWHM], e.g. voigt:619.7nm:15GHz."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(
            f"peak spec {text!r}; expected KIND:CENTER[:FWHM]")
    kind = parts[0].lower()
    if kind not in ("lorentzian", "gaussian", "voigt"):
        raise argparse.ArgumentTypeError(f"unknown peak kind {parts[0]!r}")
    center = spectral_qty(parts[1])
    fwhm_ghz = parse_quantity(parts[2], "freq_ghz") if len(parts) == 3 else 0.0
    return kind, center, fwhm_ghz


def _auto_peak_seed(spec) -> PeakModel:
    i = int(np.argmax(spec.counts))
    return PeakModel(kind="voigt",
                     center=EnergyQuantity(float(spec.wavelength_nm[i]), "nm"),
                     fwhm_lorentz_ghz=max(spec.instrument_fwhm_ghz, 1.0),
                     fwhm_gauss_ghz=spec.instrument_fwhm_ghz,
                     area_counts_ghz=float(np.max(spec.counts)))


def cmd_spectrum_fit(args) -> int:
    spec = read_spectrum_csv(args.spectrum,
                             instrument_fwhm_ghz=args.instrument_fwhm)
    if args.peak:
        seeds = []
        for kind, center, fwhm in args.peak:
            lorentz = fwhm if fwhm > 0 else max(args.instrument_fwhm, 1.0)
            gauss = fwhm if fwhm > 0 else args.instrument_fwhm
            seeds.append(PeakModel(
                kind=kind, center=center,
                fwhm_lorentz_ghz=lorentz if kind != "gaussian" else 0.0,
                fwhm_gauss_ghz=(gauss if kind == "gaussian"
                                else args.instrument_fwhm),
                area_counts_ghz=float(np.max(spec.counts))))
    else:
        seeds = [_auto_peak_seed(spec)]
    fit, refined = fit_peaks(spec, seeds, fit_gauss_width=args.fit_gauss_width)
    out_fit = f"{args.out}.fit.json"
    fit.to_json(out_fit)
    peak_doc = [{
        "kind": pk.kind,
        "center_nm": pk.center.to("nm").value,
        "center_ev": pk.center.to("eV").value,
        "fwhm_lorentz_ghz": pk.fwhm_lorentz_ghz,
        "fwhm_gauss_ghz": pk.fwhm_gauss_ghz,
        "area_counts_ghz": pk.area_counts_ghz,
    } for pk in refined]
    write_json(f"{args.out}.peaks.json", {"peaks": peak_doc})
    _write_manifest(args, inputs=[args.spectrum])
    if args.plot:
        from . import plotting
        plotting.plot_spectrum(spec, refined, f"{args.out}.png")
    _emit({"peaks": {str(i): p for i, p in enumerate(peak_doc)},
           "reduced_chi2": fit.reduced_chi2,
           "converged": fit.converged,
           "flags": fit.flags,
           "outputs": {"fit": out_fit, "peaks": f"{args.out}.peaks.json"}},
          args)
    return 0


def cmd_dw(args) -> int:
    spec = read_spectrum_csv(args.spectrum,
                             instrument_fwhm_ghz=args.instrument_fwhm)
    result = debye_waller(spec, zpl_window_nm=args.zpl_window,
                          psb_window_nm=args.psb_window)
    out_json = f"{args.out}.dw.json"
    write_json(out_json, result.to_dict())
    _write_manifest(args, inputs=[args.spectrum])
    if args.plot:
        from . import plotting
        plotting.plot_spectrum(spec, result.peaks, f"{args.out}.png")
    _emit({**result.to_dict(), "outputs": {"dw": out_json}}, args)
    return 0


def cmd_dw_series(args) -> int:
    series = TempSeries.from_csv(args.series)
    fit = fit_dw_series(series)
    out_fit = f"{args.out}.fit.json"
    fit.to_json(out_fit)
    _write_manifest(args, inputs=[args.series])
    if args.plot:
        from . import plotting
        plotting.plot_dw_series(series, fit, f"{args.out}.png")
    _emit({"fit": _fit_doc(fit), "outputs": {"fit": out_fit}}, args)
    return 0


def cmd_temp_fit(args) -> int:
    series = TempSeries.from_csv(args.series)
    if args.observable == "linewidth":
        fit = fit_linewidth_series(series, model=args.model,
                                   fit_t_offset=args.fit_offset)
    else:
        fit = fit_shift_series(series, fit_t_offset=args.fit_offset)
    out_fit = f"{args.out}.law.json"
    fit.to_json(out_fit)
    _write_manifest(args, inputs=[args.series])
    if args.plot:
        from . import plotting
        if args.observable == "linewidth":
            plotting.plot_temp_series(series, linewidth_fit=fit,
                                      path=f"{args.out}.png")
        else:
            plotting.plot_temp_series(series, shift_fit=fit,
                                      path=f"{args.out}.png")
    _emit({"fit": _fit_doc(fit), "outputs": {"law": out_fit}}, args)
    return 0


def cmd_thermo(args) -> int:
    law = FitResult.from_dict(read_json(args.law))
    if (args.linewidth is None) == (args.shift is None):
        raise ValueError("pass exactly one of --linewidth or --shift")
    value = args.linewidth if args.linewidth is not None else args.shift
    wanted = "linewidth" if args.linewidth is not None else "shift"
    if law.meta.get("observable") != wanted:
        raise ValueError(f"law file fits {law.meta.get('observable')!r}, "
                         f"but a --{wanted} value was given")
    result = invert_thermometer(law, value, monotone_range_k=args.range)
    out_json = f"{args.out}.temperature.json"
    write_json(out_json, result.to_dict())
    _write_manifest(args, inputs=[args.law])
    _emit({**result.to_dict(), "outputs": {"temperature": out_json}}, args)
    return 0


def cmd_psb(args) -> int:
    spec = read_spectrum_csv(args.spectrum)
    table = DEFAULT_PSB_TABLE if args.reference == "a1g_plus_eg" \
        else PSBTable(reference=args.reference)
    kwargs = {"prominence_frac": args.prominence}
    if args.match_tol is not None:
        kwargs["match_tol_mev"] = args.match_tol
    report = find_psb_peaks(spec, zpl_center=args.zpl, table=table, **kwargs)
    out_json = f"{args.out}.psb.json"
    write_json(out_json, report.to_dict())
    _write_manifest(args, inputs=[args.spectrum])
    if args.plot:
        from . import plotting
        plotting.plot_spectrum(spec, None, f"{args.out}.png")
    _emit({**report.to_dict(), "n_matched": report.n_matched,
           "outputs": {"report": out_json}}, args)
    return 0


def cmd_mirror(args) -> int:
    spec = read_spectrum_csv(args.spectrum)
    mirrored = mirror_spectrum(spec, zpl_energy=args.zpl)
    out_csv = f"{args.out}.mirror.csv"
    write_spectrum_csv(mirrored, out_csv)
    _write_manifest(args, inputs=[args.spectrum])
    if args.plot:
        from . import plotting
        plotting.plot_mirror(spec, mirrored, f"{args.out}.png")
    _emit({"samples": len(mirrored),
           "zpl_ev": args.zpl.to("eV").value,
           "outputs": {"mirror": out_csv}}, args)
    return 0


def cmd_a2u(args) -> int:
    energy, response = read_xy_csv(args.scan, n_columns=2)
    fit = fit_a2u_resonance(energy, response)
    out_fit = f"{args.out}.fit.json"
    fit.to_json(out_fit)
    _write_manifest(args, inputs=[args.scan])
    if args.plot:
        from . import plotting
        plotting.plot_a2u(energy, response, fit, f"{args.out}.png")
    _emit({"fit": _fit_doc(fit), "outputs": {"fit": out_fit}}, args)
    return 0


def cmd_depth(args) -> int:
    if args.profile:
        profile = EmpiricalProfile.from_csv(args.profile,
                                            reference_rate_cps=args.reference)
    else:
        profile = normalize_profile(args.reference, mean_depth_nm=args.mean,
                                    straggle_sigma_nm=args.sigma)
    doc = {
        "reference_rate_cps": args.reference,
        "wing_fraction": args.wing_fraction,
    }
    if args.profile is None:
        doc["mean_depth_nm"] = args.mean
        doc["straggle_sigma_nm"] = args.sigma
        doc["wing_nm"] = wing_depth(profile, args.wing_fraction)
        doc["straggle_note"] = ("default straggle is a placeholder; supply "
                                "the transport-calculated value when known")
    depth_nm = None
    if args.rate is not None:
        depth_nm = depth_from_countrate(profile, args.rate,
                                        wing_fraction=args.wing_fraction)
        doc["measured_rate_cps"] = args.rate
        doc["remaining_depth_nm"] = depth_nm
    out_json = f"{args.out}.depth.json"
    write_json(out_json, doc)
    _write_manifest(args, inputs=[args.profile] if args.profile else [])
    if args.plot:
        from . import plotting
        plotting.plot_depth_profile(profile, depth_nm, args.rate,
                                    f"{args.out}.png")
    _emit({**doc, "outputs": {"depth": out_json}}, args)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snvkit",
        description="Photophysics simulation and spectroscopy analysis for "
                    "single SnV centres in diamond.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, func, default_out):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func, _command=name)
        sp.add_argument("--json", action="store_true",
                        help="machine-readable stdout")
        sp.add_argument("--plot", action="store_true",
                        help="render a figure beside the data outputs")
        sp.add_argument("--out", default=default_out,
                        help=f"output path prefix [{default_out}]")
        return sp

    sp = add("sim-stream", "simulate a two-channel HBT photon stream",
             cmd_sim_stream, "stream")
    _add_emitter_args(sp)
    sp.add_argument("--csv", action="store_true",
                    help="also write the stream as CSV")

    sp = add("sim-tcspc", "simulate a pulsed-excitation delay histogram",
             cmd_sim_tcspc, "tcspc")
    _add_emitter_args(sp)
    sp.add_argument("--period", type=qty("time_ns"), required=True,
                    metavar="T", help="pulse period, e.g. 100ns")
    sp.add_argument("--pulses", type=int, required=True,
                    help="number of excitation pulses")
    sp.add_argument("--bins", type=int, default=512)

    sp = add("sim-ple", "simulate a resonant-excitation scan",
             cmd_sim_ple, "ple")
    sp.add_argument("--start", type=qty("freq_ghz"), default=-2.0,
                    metavar="F", help="start detuning [-2GHz]")
    sp.add_argument("--stop", type=qty("freq_ghz"), default=2.0,
                    metavar="F", help="stop detuning [2GHz]")
    sp.add_argument("--speed", type=qty("speed_ghz_s"), default=0.1,
                    metavar="V", help="scan speed [0.1GHz/s]")
    sp.add_argument("--fwhm", type=qty("freq_mhz"), default=18.0,
                    metavar="F", help="homogeneous linewidth [18MHz]")
    sp.add_argument("--rate", type=qty("rate_cps"), default=1e5,
                    metavar="R", help="on-resonance rate [100kcps]")
    sp.add_argument("--dark", type=qty("rate_cps"), default=0.0, metavar="R")
    sp.add_argument("--step", type=qty("time_s"), default=1e-3,
                    metavar="T", help="dwell per step [1ms]")
    sp.add_argument("--two-photon", type=float, default=0.0,
                    metavar="K", help="ionization probability per emitted "
                    "photon (dimensionless)")
    sp.add_argument("--recovery-coeff", type=qty("recovery_hz_uw"),
                    default=0.0, metavar="K",
                    help="recovery rate per green power, e.g. 50Hz/uW")
    sp.add_argument("--green", type=qty("power_uw"), default=0.0,
                    metavar="P", help="green repump power [0uW]")
    sp.add_argument("--jump-rate", type=qty("freq_hz"), default=0.0,
                    metavar="R", help="spectral-jump rate, e.g. 100Hz")
    sp.add_argument("--jump-sigma", type=qty("freq_mhz"), default=0.0,
                    metavar="S", help="jump size std-dev, e.g. 240MHz")
    sp.add_argument("--diffusion-mode", choices=["redraw", "walk"],
                    default="redraw")
    sp.add_argument("--shot-noise", action="store_true")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("g2", "correlate a two-channel stream and fit the dip",
             cmd_g2, "g2")
    sp.add_argument("stream", help="binary .bin or .csv stream file")
    sp.add_argument("--bin", type=qty("time_ns"), required=True,
                    metavar="W", help="histogram bin width, e.g. 0.5ns")
    sp.add_argument("--window", type=qty("time_ns"), required=True,
                    metavar="W", help="correlation window, e.g. 100ns")
    sp.add_argument("--no-fit", action="store_true")

    sp = add("lifetime", "fit a TCSPC delay histogram", cmd_lifetime,
             "lifetime")
    sp.add_argument("histogram", help="delay-histogram CSV")
    sp.add_argument("--no-background", action="store_true",
                    help="force the flat background to zero")

    sp = add("saturation", "fit a power-vs-rate saturation curve",
             cmd_saturation, "saturation")
    sp.add_argument("points", help="CSV with power_uw, rate_cps columns")
    sp.add_argument("--linear-bg", action="store_true",
                    help="also fit a linear background term")

    sp = add("polarization", "fit a half-wave-plate dipole scan",
             cmd_polarization, "polarization")
    sp.add_argument("scan", help="CSV with angle_deg, rate_cps columns")
    sp.add_argument("--dark", type=qty("rate_cps"), default=0.0,
                    metavar="R", help="dark rate subtracted before the fit")

    sp = add("spectrum-fit", "fit peaks in a wavelength spectrum",
             cmd_spectrum_fit, "spectrum")
    sp.add_argument("spectrum", help="CSV with wavelength_nm, counts columns")
    sp.add_argument("--instrument-fwhm", type=qty("freq_ghz"), default=1.0,
                    metavar="F", help="Gaussian response FWHM [1GHz]")
    sp.add_argument("--peak", type=_parse_peak_spec, action="append",
                    metavar="SPEC",
                    help="seed peak KIND:CENTER[:FWHM], e.g. "
                         "voigt:619.7nm:15GHz (repeatable)")
    sp.add_argument("--fit-gauss-width", action="store_true",
                    help="free the Gaussian component instead of fixing it")

    sp = add("dw", "Debye-Waller factor from a PL spectrum", cmd_dw, "dw")
    sp.add_argument("spectrum")
    sp.add_argument("--zpl-window", type=window_qty("length_nm"),
                    default=(610.0, 625.0), metavar="LO:HI",
                    help="ZPL window in nm [610:625]")
    sp.add_argument("--psb-window", type=window_qty("length_nm"),
                    default=(625.0, 740.0), metavar="LO:HI",
                    help="sideband window in nm [625:740]")
    sp.add_argument("--instrument-fwhm", type=qty("freq_ghz"), default=1.0,
                    metavar="F")

    sp = add("dw-series", "fit DW(T) across a temperature series",
             cmd_dw_series, "dwseries")
    sp.add_argument("series", help="temperature-series CSV")

    sp = add("temp-fit", "fit a linewidth or shift temperature law",
             cmd_temp_fit, "law")
    sp.add_argument("series", help="temperature-series CSV")
    sp.add_argument("--observable", choices=["linewidth", "shift"],
                    default="linewidth")
    sp.add_argument("--model", choices=list(LINEWIDTH_MODELS), default="T3",
                    help="linewidth model (ignored for shift)")
    sp.add_argument("--fit-offset", action="store_true",
                    help="fit a shared instrumental temperature offset")

    sp = add("thermo", "invert a fitted law: observable to temperature",
             cmd_thermo, "thermo")
    sp.add_argument("--law", required=True, metavar="JSON",
                    help="law fit JSON from temp-fit")
    sp.add_argument("--linewidth", type=qty("freq_ghz"), default=None,
                    metavar="G", help="measured linewidth, e.g. 120GHz")
    sp.add_argument("--shift", type=qty("freq_ghz"), default=None,
                    metavar="G", help="measured line shift")
    sp.add_argument("--range", type=window_qty("temp_k"), default=None,
                    metavar="LO:HI", help="monotone temperature range in K "
                    "(required for shift)")

    sp = add("psb", "detect sideband peaks and match the reference table",
             cmd_psb, "psb")
    sp.add_argument("spectrum")
    sp.add_argument("--zpl", type=spectral_qty, required=True,
                    metavar="POS", help="ZPL position, e.g. 619.7nm")
    sp.add_argument("--reference", choices=["a1g", "a1g_plus_eg"],
                    default="a1g_plus_eg")
    sp.add_argument("--prominence", type=float, default=0.02,
                    help="peak prominence as a fraction of max [0.02]")
    sp.add_argument("--match-tol", type=qty("energy_mev"), default=None,
                    metavar="E", help="match tolerance, e.g. 5meV")

    sp = add("mirror", "reflect a PL spectrum about the ZPL energy",
             cmd_mirror, "mirror")
    sp.add_argument("spectrum")
    sp.add_argument("--zpl", type=spectral_qty, required=True, metavar="POS")

    sp = add("a2u", "fit the broad excitation resonance", cmd_a2u, "a2u")
    sp.add_argument("scan", help="CSV with energy_ev, response columns")

    sp = add("depth", "implantation-profile depth arithmetic", cmd_depth,
             "depth")
    sp.add_argument("--reference", type=qty("rate_cps"), required=True,
                    metavar="R", help="full-profile reference rate, e.g. 20Mcps")
    sp.add_argument("--mean", type=qty("length_nm"), default=168.0,
                    metavar="D", help="profile mean depth [168nm]")
    sp.add_argument("--sigma", type=qty("length_nm"), default=30.0,
                    metavar="S", help="straggle (placeholder default 30nm)")
    sp.add_argument("--rate", type=qty("rate_cps"), default=None,
                    metavar="R", help="measured rate to invert")
    sp.add_argument("--wing-fraction", type=float, default=0.01)
    sp.add_argument("--profile", default=None, metavar="CSV",
                    help="SRIM-style depth histogram replacing the Gaussian")

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
