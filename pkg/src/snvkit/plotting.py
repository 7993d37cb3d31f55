"""Figure rendering for simulator and analyzer outputs.

Headless by construction (Agg backend): every function draws one figure and
writes it to a file, returning the path. The delimited outputs remain the
primary data product; these renderings sit beside them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .analysis import CorrelationCurve, PolarizationScan, antibunching_model, \
    polarization_model, saturation_model
from .fitting import FitResult
from .io import DelayHistogram
from .simulate import PLETrace
from .spectra import evaluate_peaks, spectrum_to_frequency
from .templaws import TempSeries, dw_model_fn, linewidth_model_fn, shift_model_fn
from .units import Spectrum

DPI = 150


def _finish(fig, path: str | Path) -> str:
    path = str(path)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_correlation(curve: CorrelationCurve, fit: FitResult | None,
                     path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(curve.tau_bins_ns, curve.g2_values, where="mid", lw=0.8,
            color="0.4", label="data")
    if fit is not None and np.isfinite(fit.params.get("tau_anti_ns", np.nan)):
        tt = np.linspace(curve.tau_bins_ns[0], curve.tau_bins_ns[-1], 600)
        ax.plot(tt, antibunching_model(tt, fit.params["g2_0"],
                                       fit.params["tau_anti_ns"]),
                color="C3", label="fit")
        ax.legend(frameon=False)
    ax.axhline(1.0, color="0.8", lw=0.6, zorder=0)
    ax.axhline(0.5, color="0.8", lw=0.6, ls="--", zorder=0)
    ax.set_xlabel(r"$\tau$ (ns)")
    ax.set_ylabel(r"$g^{(2)}(\tau)$")
    ax.set_ylim(bottom=0)
    return _finish(fig, path)


def plot_decay(hist: DelayHistogram, fit: FitResult | None,
               path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(hist.bin_centers_ns, np.maximum(hist.counts, 0.5), ".",
                ms=3, color="0.4", label="data")
    if fit is not None:
        peak = fit.meta.get("peak_bin", int(np.argmax(hist.counts)))
        t0 = hist.bin_centers_ns[peak]
        tt = np.linspace(t0, hist.bin_centers_ns[-1], 400)
        model = fit.params["amplitude"] * np.exp(-(tt - t0) / fit.params["tau_ns"])
        model += fit.params.get("background", 0.0)
        ax.semilogy(tt, np.maximum(model, 0.5), color="C3",
                    label=rf"$\tau$ = {fit.params['tau_ns']:.2f} ns")
        ax.legend(frameon=False)
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("counts")
    return _finish(fig, path)


def plot_saturation(power_uw: np.ndarray, rate_cps: np.ndarray,
                    fit: FitResult | None, path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(power_uw, np.asarray(rate_cps) / 1e3, "o", ms=4, color="0.3",
            label="data")
    if fit is not None and np.isfinite(fit.params.get("p_sat_uw", np.nan)):
        pp = np.linspace(0, float(np.max(power_uw)) * 1.05, 400)
        model = saturation_model(pp, fit.params["i_inf_cps"],
                                 fit.params["p_sat_uw"],
                                 fit.params.get("linear_bg_cps_per_uw", 0.0))
        ax.plot(pp, model / 1e3, color="C3",
                label=(rf"$I_\infty$ = {fit.params['i_inf_cps'] / 1e3:.0f} kcps, "
                       rf"$P_{{sat}}$ = {fit.params['p_sat_uw']:.0f} $\mu$W"))
        ax.legend(frameon=False)
    ax.set_xlabel(r"excitation power ($\mu$W)")
    ax.set_ylabel("count rate (kcps)")
    return _finish(fig, path)


def plot_polarization(scan: PolarizationScan, fit: FitResult | None,
                      path: str | Path) -> str:
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="polar")
    # Polarization angle = 2x plate angle; show the full dipole pattern.
    ax.plot(np.deg2rad(2 * np.asarray(scan.angles_deg)), scan.counts_cps, "o",
            ms=4, color="0.3")
    if fit is not None and np.isfinite(fit.params.get("theta0_deg", np.nan)):
        aa = np.linspace(0, 360, 720)
        model = polarization_model(aa, fit.params["amplitude_cps"],
                                   fit.params["theta0_deg"],
                                   fit.params["offset_cps"]) + scan.dark_rate_cps
        ax.plot(np.deg2rad(2 * aa), model, color="C3", lw=1)
        ax.set_title(rf"$\theta_0$ = {fit.params['theta0_deg']:.1f}$^\circ$, "
                     rf"V = {fit.params['visibility']:.2f}", fontsize=10)
    return _finish(fig, path)


def plot_spectrum(spec: Spectrum, peaks=None, path: str | Path = "spectrum.png",
                  log_y: bool = False) -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(spec.wavelength_nm, spec.counts, lw=0.8, color="0.3", label="data")
    if peaks:
        nu, _, _ = spectrum_to_frequency(spec)
        from .spectra import GHZ_PER_EV, SPEED_OF_LIGHT_NM_GHZ
        from .units import HC_EV_NM
        model_nu = evaluate_peaks(peaks, nu)
        wl = HC_EV_NM * GHZ_PER_EV / nu
        counts = model_nu * SPEED_OF_LIGHT_NM_GHZ / wl ** 2
        order = np.argsort(wl)
        ax.plot(wl[order], counts[order], color="C3", lw=1, label="fit")
        for pk in peaks:
            ax.axvline(pk.center.to("nm").value, color="C0", lw=0.5, alpha=0.5)
        ax.legend(frameon=False)
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("counts")
    return _finish(fig, path)


def plot_ple_trace(trace: PLETrace, path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    bright = trace.charge == -1
    ax.plot(trace.detuning_ghz[bright], trace.rate_cps[bright] / 1e3, ".",
            ms=2, color="C0", label="bright (SnV$^-$)")
    if np.any(~bright):
        ax.plot(trace.detuning_ghz[~bright], trace.rate_cps[~bright] / 1e3, ".",
                ms=2, color="0.6", label="ionized (dark)")
    ax.set_xlabel("detuning (GHz)")
    ax.set_ylabel("rate (kcps)")
    ax.legend(frameon=False, markerscale=4)
    return _finish(fig, path)


def plot_temp_series(series: TempSeries, linewidth_fit: FitResult | None = None,
                     shift_fit: FitResult | None = None,
                     path: str | Path = "series.png") -> str:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    t = series.temperature_k
    tt = np.linspace(float(t.min()), float(t.max()), 400)
    has_lw = np.isfinite(series.linewidth_ghz)
    axes[0].errorbar(t[has_lw], series.linewidth_ghz[has_lw],
                     yerr=_err(series.linewidth_err_ghz[has_lw]), fmt="o", ms=4,
                     color="0.3")
    if linewidth_fit is not None:
        names = [n for n in linewidth_fit.param_names]
        pv = np.array([linewidth_fit.params[n] for n in names])
        axes[0].plot(tt, linewidth_model_fn(
            linewidth_fit.meta["model_kind"], tt, pv,
            linewidth_fit.meta.get("fit_t_offset", False)), color="C3")
    axes[0].set_xlabel("T (K)")
    axes[0].set_ylabel("linewidth (GHz)")
    has_sh = np.isfinite(series.shift_ghz)
    axes[1].errorbar(t[has_sh], series.shift_ghz[has_sh],
                     yerr=_err(series.shift_err_ghz[has_sh]), fmt="o", ms=4,
                     color="0.3")
    if shift_fit is not None:
        pv = np.array([shift_fit.params[n] for n in shift_fit.param_names])
        axes[1].plot(tt, shift_model_fn(
            tt, pv, shift_fit.meta.get("fit_t_offset", False)), color="C3")
    axes[1].set_xlabel("T (K)")
    axes[1].set_ylabel("line shift (GHz)")
    fig.tight_layout()
    return _finish(fig, path)


def _err(e: np.ndarray):
    return np.where(np.isfinite(e), e, 0.0)


def plot_dw_series(series: TempSeries, fit: FitResult | None,
                   path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    has = np.isfinite(series.dw)
    t = series.temperature_k[has]
    ax.errorbar(t, series.dw[has], yerr=_err(series.dw_err[has]), fmt="o",
                ms=4, color="0.3")
    if fit is not None and np.isfinite(fit.params.get("t_cutoff_k", np.nan)):
        tt = np.linspace(float(t.min()), float(t.max()), 400)
        ax.plot(tt, dw_model_fn(tt, fit.params["huang_rhys_s"],
                                fit.params["t_cutoff_k"]), color="C3",
                label=(f"S = {fit.params['huang_rhys_s']:.2f}, "
                       f"$T_c$ = {fit.params['t_cutoff_k']:.0f} K"))
        ax.legend(frameon=False)
    ax.set_xlabel("T (K)")
    ax.set_ylabel("Debye-Waller factor")
    return _finish(fig, path)


def plot_mirror(pl: Spectrum, mirrored: Spectrum, path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(pl.energy_ev, pl.counts, lw=0.8, color="0.3", label="PL")
    ax.fill_between(mirrored.energy_ev, mirrored.counts, color="C3", alpha=0.3,
                    label="mirror")
    ax.set_xlabel("energy (eV)")
    ax.set_ylabel("counts")
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_a2u(energy_ev: np.ndarray, response: np.ndarray,
             fit: FitResult | None, path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(energy_ev, response, "o", ms=4, color="0.3", label="data")
    if fit is not None and np.isfinite(fit.params.get("center_ev", np.nan)):
        ee = np.linspace(float(np.min(energy_ev)), float(np.max(energy_ev)), 400)
        half = fit.params["fwhm_mev"] / 2e3
        model = (fit.params["amplitude"] * half ** 2
                 / ((ee - fit.params["center_ev"]) ** 2 + half ** 2)
                 + fit.params["offset"])
        ax.plot(ee, model, color="C3",
                label=(f"{fit.params['center_ev']:.3f} eV, "
                       f"{fit.params['fwhm_mev']:.0f} meV"))
        ax.legend(frameon=False)
    ax.set_xlabel("excitation energy (eV)")
    ax.set_ylabel("ZPL response")
    return _finish(fig, path)


def plot_depth_profile(profile, depth_nm: float | None,
                       measured_rate_cps: float | None,
                       path: str | Path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    shallow, deep = profile.support_edges()
    xx = np.linspace(max(shallow - 20, 0.0), deep + 20, 600)
    ax.plot(xx, profile.density(xx), color="0.3")
    ax.set_xlabel("depth below original surface (nm)")
    ax.set_ylabel("count-rate density (cps/nm)")
    if depth_nm is not None:
        removal = deep - depth_nm
        ax.axvline(removal, color="C3", lw=1)
        ax.fill_between(xx, profile.density(xx), where=xx >= removal,
                        color="C3", alpha=0.25)
        title = f"remaining depth {depth_nm:.1f} nm"
        if measured_rate_cps is not None:
            title += f" at {measured_rate_cps:.3g} cps"
        ax.set_title(title, fontsize=10)
    return _finish(fig, path)
