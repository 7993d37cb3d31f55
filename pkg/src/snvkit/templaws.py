"""Temperature-series fits and thermometry inversion.

Linewidth follows gamma0 + c1 T + c3 T^3 (+ c5 T^5 as a comparison model),
line shift follows alpha T^2 + beta T^4 with no constant term, and the ZPL
branching fraction follows DW(T) = exp(-S (1 + (2 pi^2/3) T^2/T_c^2)).
An instrumental temperature offset T0 (sample warmer than the sensor) can
be fitted as an opt-in shared parameter. Model selection is reported via
reduced chi^2 and consistency-with-zero, never automated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .fitting import FitResult, lm_fit
from .io import read_series_csv, write_series_csv
from .levels import DWParams, cutoff_phonon_energy_mev, dw_factor

LINEWIDTH_MODELS = ("T3", "T_plus_T3", "T3_plus_T5")


@dataclass(frozen=True)
class TempSeries:
    """Per-temperature spectral observables; NaN marks absent cells."""

    temperature_k: np.ndarray
    linewidth_ghz: np.ndarray = None
    linewidth_err_ghz: np.ndarray = None
    shift_ghz: np.ndarray = None
    shift_err_ghz: np.ndarray = None
    dw: np.ndarray = None
    dw_err: np.ndarray = None
    t_offset_k: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.temperature_k, dtype=float)
        if len(t) == 0 or np.any(t <= 0):
            raise ValueError("temperatures must be > 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("temperatures must be strictly increasing")
        object.__setattr__(self, "temperature_k", t)
        n = len(t)
        for name in ("linewidth_ghz", "linewidth_err_ghz", "shift_ghz",
                     "shift_err_ghz", "dw", "dw_err"):
            arr = getattr(self, name)
            arr = np.full(n, np.nan) if arr is None else np.asarray(arr, dtype=float)
            if len(arr) != n:
                raise ValueError(f"{name} length mismatch")
            object.__setattr__(self, name, arr)
        for val, err in (("linewidth_ghz", "linewidth_err_ghz"),
                         ("shift_ghz", "shift_err_ghz"), ("dw", "dw_err")):
            v, e = getattr(self, val), getattr(self, err)
            bad = np.isfinite(v) & np.isfinite(e) & (e <= 0)
            if np.any(bad):
                raise ValueError(f"{err} must be > 0 where present")

    def __len__(self) -> int:
        return len(self.temperature_k)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TempSeries":
        cols = read_series_csv(path)
        return cls(**cols)

    def to_csv(self, path: str | Path) -> None:
        write_series_csv({
            "temperature_k": self.temperature_k,
            "linewidth_ghz": self.linewidth_ghz,
            "linewidth_err_ghz": self.linewidth_err_ghz,
            "shift_ghz": self.shift_ghz,
            "shift_err_ghz": self.shift_err_ghz,
            "dw": self.dw,
            "dw_err": self.dw_err,
        }, path)


def _present(series: TempSeries, value_name: str, err_name: str):
    v = getattr(series, value_name)
    e = getattr(series, err_name)
    mask = np.isfinite(v)
    t = series.temperature_k[mask]
    v = v[mask]
    e = e[mask]
    sigma = e if np.all(np.isfinite(e) & (e > 0)) else None
    return t, v, sigma


def linewidth_model_fn(model: str, t_k: np.ndarray, params: np.ndarray,
                       fit_t_offset: bool) -> np.ndarray:
    """params layout: [gamma0, coeffs..., (t_offset)]."""
    t0 = params[-1] if fit_t_offset else 0.0
    te = t_k + t0
    g0 = params[0]
    if model == "T3":
        return g0 + params[1] * te ** 3
    if model == "T_plus_T3":
        return g0 + params[1] * te + params[2] * te ** 3
    return g0 + params[1] * te ** 3 + params[2] * te ** 5


def _linewidth_param_names(model: str, fit_t_offset: bool) -> list[str]:
    base = {
        "T3": ["gamma0_ghz", "c3_ghz_per_k3"],
        "T_plus_T3": ["gamma0_ghz", "c1_ghz_per_k", "c3_ghz_per_k3"],
        "T3_plus_T5": ["gamma0_ghz", "c3_ghz_per_k3", "c5_ghz_per_k5"],
    }[model]
    return base + (["t_offset_k"] if fit_t_offset else [])


def fit_linewidth_series(series: TempSeries, model: str = "T3",
                         fit_t_offset: bool = False) -> FitResult:
    """Weighted fit of the linewidth-broadening law."""
    if model not in LINEWIDTH_MODELS:
        raise ValueError(f"model must be one of {LINEWIDTH_MODELS}")
    t, y, sigma = _present(series, "linewidth_ghz", "linewidth_err_ghz")
    if len(t) < 4:
        raise ValueError("need >= 4 temperatures with linewidth values")
    if t.max() / t.min() < 3.0:
        raise ValueError("temperature span must cover >= x3")

    names = _linewidth_param_names(model, fit_t_offset)
    g0_seed = max(float(np.min(y)), 1e-6)
    # Seed the leading power-law coefficient from the hottest point.
    c3_seed = max((float(np.max(y)) - g0_seed) / float(t.max()) ** 3, 1e-12)
    seeds = {"T3": [g0_seed, c3_seed],
             "T_plus_T3": [g0_seed, 0.0, c3_seed],
             "T3_plus_T5": [g0_seed, c3_seed, 0.0]}[model]
    if fit_t_offset:
        seeds = seeds + [0.0]

    def fn(p: np.ndarray) -> np.ndarray:
        return linewidth_model_fn(model, t, p, fit_t_offset)

    res = lm_fit(fn, y, seeds, names, sigma=sigma,
                 model_name=f"linewidth_{model}")
    res.meta["observable"] = "linewidth"
    res.meta["model_kind"] = model
    res.meta["fit_t_offset"] = fit_t_offset
    res.meta["t_range_k"] = [float(t.min()), float(t.max())]
    return res


def shift_model_fn(t_k: np.ndarray, params: np.ndarray,
                   fit_t_offset: bool) -> np.ndarray:
    t0 = params[-1] if fit_t_offset else 0.0
    te = t_k + t0
    return params[0] * te ** 2 + params[1] * te ** 4


def fit_shift_series(series: TempSeries, fit_t_offset: bool = False) -> FitResult:
    """Line-shift law alpha T^2 + beta T^4; no constant term, so shift(0)=0."""
    t, y, sigma = _present(series, "shift_ghz", "shift_err_ghz")
    if len(t) < 4:
        raise ValueError("need >= 4 temperatures with shift values")
    if t.max() / t.min() < 3.0:
        raise ValueError("temperature span must cover >= x3")
    names = ["alpha_ghz_per_k2", "beta_ghz_per_k4"]
    hot = float(t.max())
    beta_seed = float(y[np.argmax(t)]) / hot ** 4
    seeds = [0.0, beta_seed]
    if fit_t_offset:
        names.append("t_offset_k")
        seeds.append(0.0)

    def fn(p: np.ndarray) -> np.ndarray:
        return shift_model_fn(t, p, fit_t_offset)

    res = lm_fit(fn, y, seeds, names, sigma=sigma, model_name="shift_T2_T4")
    res.meta["observable"] = "shift"
    res.meta["fit_t_offset"] = fit_t_offset
    res.meta["t_range_k"] = [float(t.min()), float(t.max())]
    return res


def dw_model_fn(t_k: np.ndarray, s: float, t_cutoff_k: float) -> np.ndarray:
    return dw_factor(DWParams(huang_rhys_s=s, t_cutoff_k=t_cutoff_k), t_k)


def fit_dw_series(series: TempSeries) -> FitResult:
    """Fit DW(T); reports derived DW(0) = exp(-S) and k_B T_cutoff."""
    t, y, sigma = _present(series, "dw", "dw_err")
    if np.any((y <= 0) | (y > 1)):
        raise ValueError("dw values must lie in (0, 1]")
    if len(t) < 4:
        raise ValueError("need >= 4 temperatures with dw values")
    if t.max() - t.min() < 200.0:
        raise ValueError("temperature span must cover >= 200 K")

    # Linearized seed: ln DW = -S - S (2 pi^2/3) T^2 / T_c^2 is linear in T^2.
    a, b = np.polynomial.polynomial.polyfit(t ** 2, np.log(y), 1)
    s_seed = max(-a, 1e-3)
    if b >= -1e-15 * s_seed or np.ptp(y) <= 1e-12:
        return FitResult(
            param_names=["huang_rhys_s", "t_cutoff_k"],
            params={"huang_rhys_s": float(s_seed), "t_cutoff_k": float("inf"),
                    "dw0": float(np.exp(-s_seed)),
                    "phonon_energy_mev": float("inf")},
            covariance=np.full((2, 2), np.nan), reduced_chi2=0.0,
            n_iterations=0, converged=False,
            flags=["t_cutoff_unbounded"], model="dw_law")
    tc_seed = float(np.sqrt(s_seed * (2.0 * np.pi ** 2 / 3.0) / -b))

    def fn(p: np.ndarray) -> np.ndarray:
        return dw_model_fn(t, abs(p[0]), abs(p[1]))

    res = lm_fit(fn, y, [s_seed, tc_seed], ["huang_rhys_s", "t_cutoff_k"],
                 sigma=sigma, model_name="dw_law")
    s = abs(res.params["huang_rhys_s"])
    tc = abs(res.params["t_cutoff_k"])
    res.params["huang_rhys_s"] = s
    res.params["t_cutoff_k"] = tc
    res.params["dw0"] = float(np.exp(-s))
    res.params["phonon_energy_mev"] = cutoff_phonon_energy_mev(tc)
    res.meta["derived_stderr"] = {
        "dw0": float(np.exp(-s)) * res.stderr("huang_rhys_s"),
        "phonon_energy_mev": cutoff_phonon_energy_mev(res.stderr("t_cutoff_k")),
    }
    res.meta["observable"] = "dw"
    res.meta["t_range_k"] = [float(t.min()), float(t.max())]
    return res


def compare_linewidth_models(series: TempSeries,
                             models: tuple[str, ...] = LINEWIDTH_MODELS,
                             fit_t_offset: bool = False) -> dict[str, FitResult]:
    """Fit every requested model; the caller reads the reduced chi^2 table."""
    return {m: fit_linewidth_series(series, model=m, fit_t_offset=fit_t_offset)
            for m in models}


@dataclass(frozen=True)
class ThermometryResult:
    temperature_k: float
    sigma_k: float
    ci_low_k: float
    ci_high_k: float
    observable: str
    value_ghz: float

    def to_dict(self) -> dict:
        return {"temperature_k": self.temperature_k, "sigma_k": self.sigma_k,
                "ci_low_k": self.ci_low_k, "ci_high_k": self.ci_high_k,
                "observable": self.observable, "value_ghz": self.value_ghz}


def _law_function(law: FitResult):
    """(f(T), gradient names) reconstructed from a fitted series result."""
    observable = law.meta.get("observable")
    if observable == "linewidth":
        model = law.meta["model_kind"]
        fit_t_offset = law.meta.get("fit_t_offset", False)
        names = _linewidth_param_names(model, fit_t_offset)
        pv = np.array([law.params[n] for n in names])

        def f(t):
            return linewidth_model_fn(model, np.asarray(t, dtype=float), pv,
                                      fit_t_offset)
        def f_with(p, t):
            return linewidth_model_fn(model, np.asarray(t, dtype=float), p,
                                      fit_t_offset)
        return f, f_with, names, pv
    if observable == "shift":
        fit_t_offset = law.meta.get("fit_t_offset", False)
        names = ["alpha_ghz_per_k2", "beta_ghz_per_k4"] + (
            ["t_offset_k"] if fit_t_offset else [])
        pv = np.array([law.params[n] for n in names])

        def f(t):
            return shift_model_fn(np.asarray(t, dtype=float), pv, fit_t_offset)
        def f_with(p, t):
            return shift_model_fn(np.asarray(t, dtype=float), p, fit_t_offset)
        return f, f_with, names, pv
    raise ValueError("law result carries no invertible observable "
                     "(need meta['observable'] of 'linewidth' or 'shift')")


def invert_thermometer(law: FitResult, value_ghz: float,
                       monotone_range_k: tuple[float, float] | None = None,
                       confidence_sigma: float = 1.96) -> ThermometryResult:
    """Temperature from a measured linewidth or shift, with a CI.

    Root-finds law(T) = value over the fitted temperature range extended by
    10% on both sides; the CI comes from first-order propagation of the law's
    parameter covariance divided by the local slope. Shift laws can be
    non-monotone, so shift inversion requires an explicit monotone range.
    """
    observable = law.meta.get("observable")
    f, f_with, names, pv = _law_function(law)
    if monotone_range_k is not None:
        t_lo, t_hi = monotone_range_k
    else:
        if observable == "shift":
            raise ValueError("shift inversion needs an explicit monotone_range_k")
        rng = law.meta.get("t_range_k")
        if rng is None:
            raise ValueError("law result lacks the fitted temperature range")
        span = rng[1] - rng[0]
        t_lo = max(rng[0] - 0.1 * span, 1e-6)
        t_hi = rng[1] + 0.1 * span
    f_lo = float(f(t_lo))
    f_hi = float(f(t_hi))
    if f_lo == f_hi:
        raise ValueError("law is constant over the bracket")
    grid = np.linspace(t_lo, t_hi, 64)
    vals = f(grid)
    if not (np.all(np.diff(vals) > 0) or np.all(np.diff(vals) < 0)):
        raise ValueError("law is not monotone over the bracket; "
                         "pass a monotone_range_k")
    lo_v, hi_v = min(f_lo, f_hi), max(f_lo, f_hi)
    if not lo_v <= value_ghz <= hi_v:
        raise ValueError(f"value {value_ghz} GHz outside the achievable range "
                         f"[{lo_v:.6g}, {hi_v:.6g}] GHz for T in "
                         f"[{t_lo:.3g}, {t_hi:.3g}] K")

    t_star = brentq(lambda t: float(f(t)) - value_ghz, t_lo, t_hi,
                    xtol=1e-9, rtol=1e-14)

    # Delta method: sigma_T = sigma_law(T*) / |d law/dT|.
    dt = max(1e-6 * t_star, 1e-9)
    slope = (float(f(t_star + dt)) - float(f(t_star - dt))) / (2 * dt)
    grad = np.zeros(len(names))
    for i in range(len(names)):
        h = 1e-6 * max(abs(pv[i]), 1.0)
        p_hi = pv.copy(); p_hi[i] += h
        p_lo = pv.copy(); p_lo[i] -= h
        grad[i] = (float(f_with(p_hi, t_star)) - float(f_with(p_lo, t_star))) / (2 * h)
    idx = [law.param_names.index(n) for n in names]
    cov = law.covariance[np.ix_(idx, idx)]
    var_f = float(grad @ cov @ grad)
    sigma_t = float(np.sqrt(max(var_f, 0.0)) / abs(slope)) if slope != 0 else float("inf")
    return ThermometryResult(
        temperature_k=float(t_star), sigma_k=sigma_t,
        ci_low_k=float(t_star - confidence_sigma * sigma_t),
        ci_high_k=float(t_star + confidence_sigma * sigma_t),
        observable=str(observable), value_ghz=float(value_ghz))
