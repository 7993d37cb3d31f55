"""Estimators for photon-stream observables.

g2(tau) cross-correlation of the two HBT channels, TCSPC lifetime fits,
saturation curves, and polarization dipole patterns. All fitters go through
:mod:`snvkit.fitting` and return :class:`~snvkit.fitting.FitResult`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fitting import FitResult, lm_fit, poisson_mle_fit
from .io import DelayHistogram
from .units import PhotonStream

# Pair-accumulation chunk for the correlator; bounds peak memory.
_CHUNK = 1_000_000


@dataclass(frozen=True)
class CorrelationCurve:
    """Normalized cross-correlation histogram, bins symmetric about zero."""

    tau_bins_ns: np.ndarray
    g2_values: np.ndarray
    bin_width_ns: float
    normalization_rate_cps: tuple[float, float]
    pair_counts: np.ndarray = field(default=None)
    duration_s: float = 0.0

    def __post_init__(self):
        if len(self.tau_bins_ns) != len(self.g2_values):
            raise ValueError("bin/value length mismatch")
        if np.any(self.g2_values < 0):
            raise ValueError("g2 values must be >= 0")
        widths = np.diff(self.tau_bins_ns)
        if len(widths) and not np.allclose(widths, self.bin_width_ns, rtol=1e-9):
            raise ValueError("bins must be uniform")

    def __len__(self) -> int:
        return len(self.tau_bins_ns)

    @property
    def g2_errors(self) -> np.ndarray:
        """Poisson error per bin propagated through the normalization."""
        if self.pair_counts is None:
            return np.full(len(self), np.nan)
        scale = np.divide(self.g2_values, self.pair_counts,
                          out=np.zeros(len(self)), where=self.pair_counts > 0)
        return np.sqrt(np.maximum(self.pair_counts, 1.0)) * scale


def g2_histogram(stream: PhotonStream, bin_width_ns: float,
                 window_ns: float) -> CorrelationCurve:
    """Cross-correlate channel 0 against channel 1, all pairs within window.

    Normalized by r0*r1*T*bin so an uncorrelated pair of channels gives 1.
    """
    if bin_width_ns <= 0 or window_ns <= 0:
        raise ValueError("bin_width_ns and window_ns must be > 0")
    if window_ns < bin_width_ns:
        raise ValueError("window_ns must be >= bin_width_ns")
    if len(stream) == 0:
        raise ValueError("empty stream")
    t0 = stream.channel_times_ps(0).astype(np.int64)
    t1 = stream.channel_times_ps(1).astype(np.int64)
    if len(t0) == 0 or len(t1) == 0:
        raise ValueError("g2 needs events on both channels")

    duration_s = stream.span_s
    if duration_s <= 0:
        raise ValueError("stream duration is zero")
    # Whole number of bins on each side of zero.
    n_side = int(np.ceil(window_ns / bin_width_ns))
    n_bins = 2 * n_side
    w_ps = n_side * bin_width_ns * 1e3
    bin_ps = bin_width_ns * 1e3

    pair_counts = np.zeros(n_bins, dtype=np.int64)
    for lo_idx in range(0, len(t0), _CHUNK):
        a = t0[lo_idx:lo_idx + _CHUNK]
        lo = np.searchsorted(t1, a - int(round(w_ps)), side="left")
        hi = np.searchsorted(t1, a + int(round(w_ps)), side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        # Flatten variable-length windows: index j runs over t1 positions.
        starts = np.repeat(lo, counts)
        offsets = np.arange(total) - np.repeat(
            np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        tau_ps = t1[starts + offsets] - np.repeat(a, counts)
        bins = np.floor(tau_ps / bin_ps).astype(np.int64) + n_side
        valid = (bins >= 0) & (bins < n_bins)
        pair_counts += np.bincount(bins[valid], minlength=n_bins)

    r0 = len(t0) / duration_s
    r1 = len(t1) / duration_s
    norm = r0 * r1 * duration_s * (bin_width_ns * 1e-9)
    centers = (np.arange(n_bins) - n_side + 0.5) * bin_width_ns
    return CorrelationCurve(
        tau_bins_ns=centers,
        g2_values=pair_counts / norm,
        bin_width_ns=bin_width_ns,
        normalization_rate_cps=(r0, r1),
        pair_counts=pair_counts,
        duration_s=duration_s,
    )


def antibunching_model(tau_ns: np.ndarray, g2_0: float,
                       tau_anti_ns: float) -> np.ndarray:
    """g2(tau) = 1 - (1 - g2_0) exp(-|tau|/tau_anti)."""
    return 1.0 - (1.0 - g2_0) * np.exp(-np.abs(tau_ns) / tau_anti_ns)


def background_g2_floor(signal_rate_cps: float, dark_rate_cps: float) -> float:
    """Zero-delay floor from uncorrelated dark counts on both channels.

    With signal fraction rho = S/(S + 2D) of all detected counts,
    g2(0) = 1 - rho^2 for an otherwise perfect single emitter.
    """
    total = signal_rate_cps + 2.0 * dark_rate_cps
    if total <= 0:
        raise ValueError("no counts at all")
    rho = signal_rate_cps / total
    return 1.0 - rho * rho


def fit_g2(curve: CorrelationCurve) -> FitResult:
    """Fit the antibunching dip; non-convergence is flagged, never raised."""
    tau = curve.tau_bins_ns
    y = curve.g2_values
    err = curve.g2_errors
    sigma = err if np.all(np.isfinite(err)) and np.all(err > 0) else None

    plateau = float(np.median(y))
    dip = float(np.min(y))
    depth = plateau - dip
    if plateau <= 0 or depth <= 0.05 * max(plateau, 1e-12):
        # Flat curve: no antibunching signature to fit.
        cov = np.full((2, 2), np.nan)
        return FitResult(
            param_names=["g2_0", "tau_anti_ns"],
            params={"g2_0": float(dip / plateau) if plateau > 0 else 1.0,
                    "tau_anti_ns": float("nan")},
            covariance=cov, reduced_chi2=0.0, n_iterations=0, converged=False,
            flags=["degenerate_flat_curve", "tau_unbounded"],
            model="antibunching")

    # Moment seed: integral of (1 - g2)/depth over tau gives 2*tau_anti.
    norm_dip = (plateau - y) / depth
    tau_seed = max(float(np.sum(norm_dip) * curve.bin_width_ns / 2.0),
                   curve.bin_width_ns)
    g2_0_seed = max(dip / plateau, 0.0)

    def model(p: np.ndarray) -> np.ndarray:
        return antibunching_model(tau, p[0], abs(p[1]))

    res = lm_fit(model, y, [g2_0_seed, tau_seed], ["g2_0", "tau_anti_ns"],
                 sigma=sigma, model_name="antibunching")
    res.params["tau_anti_ns"] = abs(res.params["tau_anti_ns"])
    span = float(tau.max() - tau.min())
    if span < 5.0 * res.params["tau_anti_ns"]:
        res.flags.append("window_shorter_than_5_tau")
    return res


def fit_lifetime(hist: DelayHistogram, fit_background: bool = True) -> FitResult:
    """Poisson-likelihood fit of A exp(-t/tau) + B from the peak bin onward."""
    counts = np.asarray(hist.counts, dtype=float)
    if not np.any(counts > 0):
        raise ValueError("all-zero histogram")
    peak = int(np.argmax(counts))
    t = hist.bin_centers_ns[peak:] - hist.bin_centers_ns[peak]
    c = counts[peak:]
    n_past_peak = len(c) - 1
    decades = np.log10(max(c[0], 1.0) / max(float(np.min(c[c > 0])), 1.0))
    if n_past_peak < 50 and decades < 3.0:
        raise ValueError("need >= 50 bins past the peak or >= 3 decades of decay")
    if int(np.count_nonzero(c)) < 3:
        raise ValueError("decay region has fewer than 3 occupied bins")

    a0 = float(c[0])
    b0 = float(np.median(c[-max(len(c) // 10, 5):]))
    # Crude tau seed from the 1/e point of the background-subtracted decay.
    above = np.flatnonzero(c - b0 > (a0 - b0) / np.e)
    tau0 = float(t[above[-1]]) if len(above) else float(t[-1] / 3.0)
    tau0 = max(tau0, hist.bin_width_ns)

    if fit_background:
        def model(p: np.ndarray) -> np.ndarray:
            return np.abs(p[0]) * np.exp(-t / np.abs(p[1])) + np.abs(p[2])
        res = poisson_mle_fit(model, c, [a0, tau0, max(b0, 1e-3)],
                              ["amplitude", "tau_ns", "background"],
                              model_name="single_exp_background")
        res.params["background"] = abs(res.params["background"])
    else:
        def model(p: np.ndarray) -> np.ndarray:
            return np.abs(p[0]) * np.exp(-t / np.abs(p[1]))
        res = poisson_mle_fit(model, c, [a0, tau0], ["amplitude", "tau_ns"],
                              model_name="single_exp")
    res.params["tau_ns"] = abs(res.params["tau_ns"])
    res.params["amplitude"] = abs(res.params["amplitude"])
    res.meta["peak_bin"] = peak
    return res


def saturation_model(power_uw: np.ndarray, i_inf: float, p_sat: float,
                     linear_bg: float = 0.0) -> np.ndarray:
    """R(P) = I_inf P/(P + P_sat) + m P."""
    return i_inf * power_uw / (power_uw + p_sat) + linear_bg * power_uw


def fit_saturation(power_uw: np.ndarray, rate_cps: np.ndarray,
                   fit_linear_bg: bool = False,
                   sigma: np.ndarray | None = None) -> FitResult:
    """Saturation-curve fit; the linear background is off by default."""
    power_uw = np.asarray(power_uw, dtype=float)
    rate_cps = np.asarray(rate_cps, dtype=float)
    if len(power_uw) < 4:
        raise ValueError("need >= 4 points")
    if np.any(power_uw < 0):
        raise ValueError("powers must be >= 0")

    if not np.any(rate_cps > 0):
        cov = np.zeros((3, 3))
        return FitResult(
            param_names=["i_inf_cps", "p_sat_uw", "linear_bg_cps_per_uw"],
            params={"i_inf_cps": 0.0, "p_sat_uw": float("nan"),
                    "linear_bg_cps_per_uw": 0.0},
            covariance=cov, reduced_chi2=0.0, n_iterations=0, converged=False,
            flags=["degenerate_all_zero"], model="saturation")

    i0 = float(np.max(rate_cps)) * 1.5
    half = np.interp(i0 / 3.0, np.sort(rate_cps), power_uw[np.argsort(rate_cps)])
    p0 = max(float(half), float(np.min(power_uw[power_uw > 0], initial=1.0)))

    def model(p: np.ndarray) -> np.ndarray:
        return saturation_model(power_uw, p[0], np.abs(p[1]), p[2])

    fixed = () if fit_linear_bg else ("linear_bg_cps_per_uw",)
    res = lm_fit(model, rate_cps, [i0, p0, 0.0],
                 ["i_inf_cps", "p_sat_uw", "linear_bg_cps_per_uw"],
                 sigma=sigma, fixed=fixed, model_name="saturation")
    res.params["p_sat_uw"] = abs(res.params["p_sat_uw"])
    if float(np.max(power_uw)) < res.params["p_sat_uw"]:
        res.flags.append("span_below_p_sat")
    return res


@dataclass(frozen=True)
class PolarizationScan:
    """Count rate versus half-wave-plate angle."""

    angles_deg: np.ndarray
    counts_cps: np.ndarray
    dark_rate_cps: float = 0.0

    def __post_init__(self):
        if len(self.angles_deg) != len(self.counts_cps):
            raise ValueError("angle/count length mismatch")
        if np.any(np.asarray(self.counts_cps) < 0):
            raise ValueError("counts must be >= 0")
        if self.dark_rate_cps < 0:
            raise ValueError("dark_rate_cps must be >= 0")


def polarization_model(angle_deg: np.ndarray, amplitude: float,
                       theta0_deg: float, offset: float) -> np.ndarray:
    """R(theta) = A cos^2(2(theta - theta0)) + B, plate angle convention."""
    rad = np.deg2rad(2.0 * (angle_deg - theta0_deg))
    return amplitude * np.cos(rad) ** 2 + offset


def fit_polarization(scan: PolarizationScan) -> FitResult:
    """Dipole-pattern fit after scalar dark subtraction.

    The half-wave plate rotates the analyzed polarization at twice the
    plate angle, so the pattern period is 90 degrees of plate rotation;
    theta0 is reported in [0, 90).
    """
    angles = np.asarray(scan.angles_deg, dtype=float)
    span = float(np.max(angles) - np.min(angles))
    if span < 90.0:
        raise ValueError("angles must span >= 90 degrees of plate rotation")
    y = np.clip(np.asarray(scan.counts_cps, dtype=float) - scan.dark_rate_cps,
                0.0, None)

    if np.ptp(y) <= 1e-9 * max(float(np.max(y)), 1.0):
        cov = np.full((3, 3), np.nan)
        return FitResult(
            param_names=["amplitude_cps", "theta0_deg", "offset_cps"],
            params={"amplitude_cps": 0.0, "theta0_deg": float("nan"),
                    "offset_cps": float(np.mean(y)), "visibility": 0.0},
            covariance=cov, reduced_chi2=0.0, n_iterations=0, converged=False,
            flags=["unpolarized_theta0_undefined"], model="cos2_dipole")

    # Seed phase from the first harmonic at period 90 degrees.
    phase = np.angle(np.sum((y - np.mean(y)) * np.exp(-1j * np.deg2rad(4 * angles))))
    theta0_seed = np.rad2deg(phase) / 4.0 % 90.0
    a_seed = float(np.ptp(y))
    b_seed = float(np.min(y))

    def model(p: np.ndarray) -> np.ndarray:
        return polarization_model(angles, p[0], p[1], p[2])

    res = lm_fit(model, y, [a_seed, theta0_seed, b_seed],
                 ["amplitude_cps", "theta0_deg", "offset_cps"],
                 model_name="cos2_dipole")
    a = res.params["amplitude_cps"]
    b = res.params["offset_cps"]
    if a < 0:
        # cos^2 + 90-degree shift absorbs a sign flip.
        a = -a
        res.params["amplitude_cps"] = a
        res.params["theta0_deg"] += 45.0
        res.params["offset_cps"] = b = b - a
    res.params["theta0_deg"] %= 90.0
    b_eff = max(b, 0.0)
    visibility = a / (a + 2.0 * b_eff) if a + 2.0 * b_eff > 0 else 0.0
    res.params["visibility"] = float(visibility)
    # Error propagation for the derived visibility, v = A/(A + 2B).
    i_a = res.param_names.index("amplitude_cps")
    i_b = res.param_names.index("offset_cps")
    denom = (a + 2.0 * b_eff) ** 2
    if denom > 0 and np.all(np.isfinite(res.covariance)):
        grad = np.zeros(len(res.param_names))
        grad[i_a] = 2.0 * b_eff / denom
        grad[i_b] = -2.0 * a / denom
        var = float(grad @ res.covariance @ grad)
        res.meta["derived_stderr"] = {"visibility": float(np.sqrt(max(var, 0.0)))}
    return res
