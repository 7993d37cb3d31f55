"""Monte-Carlo photon sources for a single SnV centre.

Three generators, all bit-reproducible for a fixed seed:

* :func:`simulate_stream` -- CW excitation, two detection channels behind a
  50/50 splitter. Emission is a two-state renewal process (pump at rate
  ``a = (P/P_sat)/tau``, decay at ``b = 1/tau``) so consecutive emitter
  photons are antibunched with g2(t) = 1 - exp(-(a+b)t). The stream is
  sampled directly at the detected level: with per-photon detection
  efficiency eta, the wait between detected photons is a sum of
  K ~ Geometric(eta) full cycles, i.e. Gamma(K, 1/a) + Gamma(K, tau).
  Independent thinning leaves g2 unchanged, so no intrinsic-rate events
  are ever materialized (at saturation that would be 1/tau = 2e8 events/s).
* :func:`simulate_tcspc` -- pulsed excitation, single channel, exponential
  delay histogram plus flat dark background.
* :func:`simulate_ple_scan` -- resonant laser scanned across the line while
  counting sideband fluorescence; includes two-photon ionization to the
  dark charge state, green-laser recovery, and spectral diffusion of the
  line centre.

Timestamps are integer picoseconds in int64 throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .io import DelayHistogram
from .levels import DEFAULT_LEVEL_STRUCTURE, DWParams, LevelStructure, dw_factor
from .units import PhotonStream

# Refuse to build streams larger than this many records (memory guard).
MAX_STREAM_EVENTS = 5e8

DETECTION_BANDS = ("all", "zpl", "psb")


class StreamSizeError(ValueError):
    """Requested stream would exceed the in-memory record budget."""


@dataclass(frozen=True)
class EmitterConfig:
    """CW-excitation emitter plus detection chain.

    ``max_rate_cps`` is the detected signal rate at full saturation;
    ``dark_rate_cps`` applies per detection channel. ``detection_band``
    restricts collection to the ZPL or the sideband, scaling the signal by
    the Debye-Waller fraction at ``temperature_k`` (requires ``dw``).
    """

    level: LevelStructure = DEFAULT_LEVEL_STRUCTURE
    excitation_power_uw: float = 200.0
    saturation_power_uw: float = 200.0
    max_rate_cps: float = 1.2e5
    dark_rate_cps: float = 0.0
    dw: DWParams | None = None
    temperature_k: float = 4.0
    duration_s: float = 1.0
    rng_seed: int = 0
    detection_band: str = "all"

    def __post_init__(self):
        if self.excitation_power_uw < 0:
            raise ValueError("excitation_power_uw must be >= 0")
        if self.saturation_power_uw <= 0:
            raise ValueError("saturation_power_uw must be > 0")
        if self.max_rate_cps < 0 or self.dark_rate_cps < 0:
            raise ValueError("rates must be >= 0")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        if self.temperature_k <= 0:
            raise ValueError("temperature_k must be > 0")
        if self.detection_band not in DETECTION_BANDS:
            raise ValueError(f"detection_band must be one of {DETECTION_BANDS}")
        if self.detection_band != "all" and self.dw is None:
            raise ValueError("band-limited detection requires dw parameters")
        # Detected rate cannot exceed the intrinsic emission ceiling 1/tau.
        if self.max_rate_cps * self.level.excited_lifetime_ns * 1e-9 > 1.0:
            raise ValueError("max_rate_cps exceeds 1/excited_lifetime")

    @property
    def band_fraction(self) -> float:
        if self.detection_band == "all" or self.dw is None:
            return 1.0
        dw = dw_factor(self.dw, self.temperature_k)
        return dw if self.detection_band == "zpl" else 1.0 - dw

    @property
    def saturation_parameter(self) -> float:
        """s = P/P_sat."""
        return self.excitation_power_uw / self.saturation_power_uw

    @property
    def pump_rate_hz(self) -> float:
        return self.saturation_parameter / (self.level.excited_lifetime_ns * 1e-9)

    @property
    def expected_signal_rate_cps(self) -> float:
        """Detected signal rate, both channels combined."""
        s = self.saturation_parameter
        return self.max_rate_cps * self.band_fraction * s / (1.0 + s)

    @property
    def antibunching_time_ns(self) -> float:
        """1/(a + b): the g2 recovery time, power-shortened lifetime."""
        return self.level.excited_lifetime_ns / (1.0 + self.saturation_parameter)

    @property
    def detection_efficiency(self) -> float:
        """Probability that an emitted photon is detected."""
        return self.max_rate_cps * self.band_fraction * self.level.excited_lifetime_ns * 1e-9

    def to_dict(self) -> dict:
        doc = {
            "level": {
                "zpl_wavelength_nm": self.level.zpl_wavelength_nm,
                "ground_splitting_ghz": self.level.ground_splitting_ghz,
                "excited_splitting_ghz": self.level.excited_splitting_ghz,
                "excited_lifetime_ns": self.level.excited_lifetime_ns,
            },
            "excitation_power_uw": self.excitation_power_uw,
            "saturation_power_uw": self.saturation_power_uw,
            "max_rate_cps": self.max_rate_cps,
            "dark_rate_cps": self.dark_rate_cps,
            "temperature_k": self.temperature_k,
            "duration_s": self.duration_s,
            "rng_seed": self.rng_seed,
            "detection_band": self.detection_band,
        }
        if self.dw is not None:
            doc["dw"] = {"huang_rhys_s": self.dw.huang_rhys_s,
                         "t_cutoff_k": self.dw.t_cutoff_k}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EmitterConfig":
        kwargs = dict(doc)
        if "level" in kwargs:
            kwargs["level"] = LevelStructure(**kwargs["level"])
        if kwargs.get("dw") is not None:
            kwargs["dw"] = DWParams(**kwargs["dw"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, source: str | Path) -> "EmitterConfig":
        return cls.from_dict(json.loads(Path(source).read_text()))


def _detected_emission_times(cfg: EmitterConfig, rng: np.random.Generator) -> np.ndarray:
    """Arrival times (s) of detected emitter photons over the run."""
    rate = cfg.expected_signal_rate_cps
    if rate <= 0 or cfg.duration_s <= 0:
        return np.empty(0)
    eta = cfg.detection_efficiency
    a = cfg.pump_rate_hz
    tau_s = cfg.level.excited_lifetime_ns * 1e-9
    # Chunk size targets the expected photon number plus headroom; small
    # streams finish in one pass, long ones stay under ~100 MB per chunk.
    target = int(rate * cfg.duration_s)
    chunk = int(min(max(target * 1.05 + 1000, 1000), 5e6))
    parts: list[np.ndarray] = []
    t = 0.0
    while t < cfg.duration_s:
        k = rng.geometric(eta, size=chunk).astype(np.float64)
        waits = rng.gamma(shape=k, scale=1.0 / a) + rng.gamma(shape=k, scale=tau_s)
        times = t + np.cumsum(waits)
        parts.append(times)
        t = times[-1]
    all_times = np.concatenate(parts) if len(parts) > 1 else parts[0]
    return all_times[all_times < cfg.duration_s]


def simulate_stream(cfg: EmitterConfig) -> PhotonStream:
    """Two-channel detection-time stream: antibunched signal + dark counts."""
    expected = (cfg.expected_signal_rate_cps + 2 * cfg.dark_rate_cps) * cfg.duration_s
    if expected > MAX_STREAM_EVENTS:
        raise StreamSizeError(
            f"config implies ~{expected:.2e} records "
            f"(limit {MAX_STREAM_EVENTS:.0e}); shorten duration or rate")
    rng = np.random.default_rng(cfg.rng_seed)
    sig_t = _detected_emission_times(cfg, rng)
    sig_ch = rng.integers(0, 2, size=len(sig_t), dtype=np.uint8)
    dark_t = []
    dark_ch = []
    for ch in (0, 1):
        n = rng.poisson(cfg.dark_rate_cps * cfg.duration_s)
        dark_t.append(rng.uniform(0.0, cfg.duration_s, size=n))
        dark_ch.append(np.full(n, ch, dtype=np.uint8))
    t_all = np.concatenate([sig_t] + dark_t)
    ch_all = np.concatenate([sig_ch] + dark_ch)
    ts_ps = np.round(t_all * 1e12).astype(np.int64)
    order = np.argsort(ts_ps, kind="stable")
    return PhotonStream(timestamps_ps=ts_ps[order], channels=ch_all[order],
                        duration_s=cfg.duration_s)


def simulate_tcspc(cfg: EmitterConfig, pulse_period_ns: float, n_pulses: int,
                   n_bins: int = 512) -> DelayHistogram:
    """Pulsed-excitation delay histogram on a single detection channel.

    The detected-photon probability per pulse is the CW signal rate times
    the pulse period (thinned Bernoulli); delays are exponential in the
    excited lifetime, wrapped at the period. Dark counts land uniformly.
    """
    if pulse_period_ns <= 0:
        raise ValueError("pulse_period_ns must be > 0")
    if n_pulses <= 0:
        raise ValueError("n_pulses must be > 0")
    period_s = pulse_period_ns * 1e-9
    p_sig = cfg.expected_signal_rate_cps * period_s
    if p_sig > 1.0:
        raise ValueError("more than one detected photon per pulse on average; "
                         "lower the power or shorten the period")
    rng = np.random.default_rng(cfg.rng_seed)
    n_sig = rng.binomial(n_pulses, p_sig)
    delays = np.mod(rng.exponential(cfg.level.excited_lifetime_ns, size=n_sig),
                    pulse_period_ns)
    n_dark = rng.poisson(cfg.dark_rate_cps * period_s * n_pulses)
    dark_delays = rng.uniform(0.0, pulse_period_ns, size=n_dark)
    counts, edges = np.histogram(np.concatenate([delays, dark_delays]),
                                 bins=n_bins, range=(0.0, pulse_period_ns))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DelayHistogram(bin_centers_ns=centers,
                          counts=counts.astype(np.int64),
                          pulse_period_ns=pulse_period_ns,
                          n_pulses=n_pulses)


@dataclass(frozen=True)
class IonizationConfig:
    """Two-photon ionization and green-assisted recovery.

    ``two_photon_coefficient`` is the ionization probability per emitted
    resonant photon (the constant resonant intensity of a scan is folded
    in, since the mechanism needs a second photon while excited);
    ``recovery_coefficient`` is the recovery rate per microwatt of green.
    """

    two_photon_coefficient: float = 0.0
    recovery_coefficient_hz_per_uw: float = 0.0
    green_power_uw: float = 0.0

    def __post_init__(self):
        if self.two_photon_coefficient < 0 or self.recovery_coefficient_hz_per_uw < 0:
            raise ValueError("ionization coefficients must be >= 0")
        if self.green_power_uw < 0:
            raise ValueError("green_power_uw must be >= 0")

    @property
    def recovery_rate_hz(self) -> float:
        return self.recovery_coefficient_hz_per_uw * self.green_power_uw


@dataclass(frozen=True)
class DiffusionConfig:
    """Compound-Poisson spectral diffusion of the line centre.

    ``mode='redraw'`` resamples the centre from N(0, jump_sigma) at each
    jump (stationary; the long-run line profile is the homogeneous line
    convolved with that Gaussian). ``mode='walk'`` accumulates increments
    instead and is not stationary.
    """

    jump_rate_hz: float = 0.0
    jump_sigma_mhz: float = 0.0
    mode: str = "redraw"

    def __post_init__(self):
        if self.jump_rate_hz < 0 or self.jump_sigma_mhz < 0:
            raise ValueError("diffusion parameters must be >= 0")
        if self.mode not in ("redraw", "walk"):
            raise ValueError("mode must be 'redraw' or 'walk'")

    @property
    def active(self) -> bool:
        return self.jump_rate_hz > 0 and self.jump_sigma_mhz > 0


@dataclass(frozen=True)
class PLEScanConfig:
    """One resonant-laser sweep across the line."""

    start_detuning_ghz: float = -2.0
    stop_detuning_ghz: float = 2.0
    scan_speed_ghz_per_s: float = 0.1
    homogeneous_fwhm_mhz: float = 18.0
    on_resonance_rate_cps: float = 1e5
    dark_rate_cps: float = 0.0
    step_time_s: float = 1e-3
    shot_noise: bool = False
    ionization: IonizationConfig = field(default_factory=IonizationConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    rng_seed: int = 0

    def __post_init__(self):
        if self.stop_detuning_ghz <= self.start_detuning_ghz:
            raise ValueError("stop detuning must exceed start detuning")
        if self.scan_speed_ghz_per_s <= 0:
            raise ValueError("scan_speed_ghz_per_s must be > 0")
        if self.homogeneous_fwhm_mhz <= 0:
            raise ValueError("homogeneous_fwhm_mhz must be > 0")
        if self.on_resonance_rate_cps < 0 or self.dark_rate_cps < 0:
            raise ValueError("rates must be >= 0")
        if self.step_time_s <= 0:
            raise ValueError("step_time_s must be > 0")

    def to_dict(self) -> dict:
        return {
            "start_detuning_ghz": self.start_detuning_ghz,
            "stop_detuning_ghz": self.stop_detuning_ghz,
            "scan_speed_ghz_per_s": self.scan_speed_ghz_per_s,
            "homogeneous_fwhm_mhz": self.homogeneous_fwhm_mhz,
            "on_resonance_rate_cps": self.on_resonance_rate_cps,
            "dark_rate_cps": self.dark_rate_cps,
            "step_time_s": self.step_time_s,
            "shot_noise": self.shot_noise,
            "ionization": {
                "two_photon_coefficient": self.ionization.two_photon_coefficient,
                "recovery_coefficient_hz_per_uw":
                    self.ionization.recovery_coefficient_hz_per_uw,
                "green_power_uw": self.ionization.green_power_uw,
            },
            "diffusion": {
                "jump_rate_hz": self.diffusion.jump_rate_hz,
                "jump_sigma_mhz": self.diffusion.jump_sigma_mhz,
                "mode": self.diffusion.mode,
            },
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PLEScanConfig":
        kwargs = dict(doc)
        if "ionization" in kwargs:
            kwargs["ionization"] = IonizationConfig(**kwargs["ionization"])
        if "diffusion" in kwargs:
            kwargs["diffusion"] = DiffusionConfig(**kwargs["diffusion"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, source: str | Path) -> "PLEScanConfig":
        return cls.from_dict(json.loads(Path(source).read_text()))


@dataclass(frozen=True)
class PLETrace:
    """Time-ordered PLE scan record.

    ``charge`` is -1 while the emitter is bright (negative charge state)
    and 0 after ionization to the dark neutral state. ``rate_cps`` is the
    expected rate at each step; ``counts`` adds shot noise when enabled.
    """

    time_s: np.ndarray
    detuning_ghz: np.ndarray
    rate_cps: np.ndarray
    counts: np.ndarray
    charge: np.ndarray
    step_s: float

    def __len__(self) -> int:
        return len(self.time_s)

    @property
    def terminated(self) -> bool:
        """Scan ended in the dark charge state."""
        return bool(self.charge[-1] == 0)

    @property
    def bright_fraction(self) -> float:
        return float(np.mean(self.charge == -1))


def _lorentzian_peak_unit(detuning_ghz: np.ndarray | float,
                          fwhm_ghz: float) -> np.ndarray | float:
    """Unit-peak Lorentzian, FWHM parameterization."""
    half = fwhm_ghz / 2.0
    return half * half / (detuning_ghz * detuning_ghz + half * half)


def simulate_ple_scan(cfg: PLEScanConfig) -> PLETrace:
    """Sweep the laser from start to stop detuning, one dwell step at a time.

    Per step: fluorescence follows a Lorentzian of the homogeneous width
    around the current line centre; the ionization probability is
    proportional to the emitted photon number (two-photon channel); once
    ionized only dark counts remain until a green-driven recovery, which
    also re-draws the line centre from the diffusion distribution.
    """
    span = cfg.stop_detuning_ghz - cfg.start_detuning_ghz
    total_time = span / cfg.scan_speed_ghz_per_s
    n = max(int(round(total_time / cfg.step_time_s)), 1)
    dt = total_time / n
    # Midpoint sampling keeps a symmetric scan symmetric about zero.
    idx = np.arange(n)
    detuning = cfg.start_detuning_ghz + (idx + 0.5) * span / n
    time_s = (idx + 0.5) * dt

    rng = np.random.default_rng(cfg.rng_seed)
    fwhm_ghz = cfg.homogeneous_fwhm_mhz * 1e-3
    sigma_ghz = cfg.diffusion.jump_sigma_mhz * 1e-3
    recovery_rate = cfg.ionization.recovery_rate_hz
    k2 = cfg.ionization.two_photon_coefficient

    centre = 0.0
    charge = -1
    rate = np.empty(n)
    charge_arr = np.empty(n, dtype=np.int8)
    for i in range(n):
        if cfg.diffusion.active:
            n_jumps = rng.poisson(cfg.diffusion.jump_rate_hz * dt)
            if n_jumps > 0:
                if cfg.diffusion.mode == "redraw":
                    centre = rng.normal(0.0, sigma_ghz)
                else:
                    centre += rng.normal(0.0, sigma_ghz * np.sqrt(n_jumps))
        if charge == -1:
            signal = cfg.on_resonance_rate_cps * _lorentzian_peak_unit(
                detuning[i] - centre, fwhm_ghz)
            rate[i] = signal + cfg.dark_rate_cps
            charge_arr[i] = -1
            if k2 > 0:
                p_ion = -np.expm1(-k2 * signal * dt)
                if p_ion > 0 and rng.random() < p_ion:
                    charge = 0
        else:
            rate[i] = cfg.dark_rate_cps
            charge_arr[i] = 0
            if recovery_rate > 0:
                p_rec = -np.expm1(-recovery_rate * dt)
                if rng.random() < p_rec:
                    charge = -1
                    # Recovery shifts the line; re-draw from the diffusion
                    # distribution when one is configured.
                    if sigma_ghz > 0:
                        centre = rng.normal(0.0, sigma_ghz)
                    else:
                        centre = 0.0
    counts = rng.poisson(rate * dt).astype(np.float64) if cfg.shot_noise \
        else rate * dt
    return PLETrace(time_s=time_s, detuning_ghz=detuning, rate_cps=rate,
                    counts=counts, charge=charge_arr, step_s=dt)


# Voigt FWHM from its components, accurate to ~0.02% (standard rational
# approximation); used only for diffusion calibration, not for fitting.
def _voigt_fwhm_mhz(fwhm_lorentz_mhz: float, fwhm_gauss_mhz: float) -> float:
    return 0.5346 * fwhm_lorentz_mhz + np.sqrt(
        0.2166 * fwhm_lorentz_mhz ** 2 + fwhm_gauss_mhz ** 2)


def diffusion_sigma_for_width(target_fwhm_mhz: float,
                              homogeneous_fwhm_mhz: float) -> float:
    """Jump sigma (MHz) so the diffusion-averaged line has the target FWHM.

    In redraw mode the long-run profile is homogeneous Lorentzian convolved
    with the N(0, sigma) centre distribution, i.e. a Voigt; invert its FWHM
    approximation for the Gaussian component.
    """
    if target_fwhm_mhz <= homogeneous_fwhm_mhz:
        raise ValueError("target width must exceed the homogeneous width")
    gl = homogeneous_fwhm_mhz
    rad = (target_fwhm_mhz - 0.5346 * gl) ** 2 - 0.2166 * gl ** 2
    if rad <= 0:
        raise ValueError("target width too close to the homogeneous width")
    fwhm_gauss = np.sqrt(rad)
    return float(fwhm_gauss / (2.0 * np.sqrt(2.0 * np.log(2.0))))


def scan_with_seed(cfg: PLEScanConfig, seed: int) -> PLETrace:
    """Convenience: same scan with a different seed."""
    return simulate_ple_scan(replace(cfg, rng_seed=seed))
