"""Photophysics simulation and spectroscopy analysis for single
tin-vacancy centres in diamond.

Submodules:

- ``units``     energy/wavelength/frequency conversions, core containers
- ``levels``    level structure, transition table, temperature laws
- ``fitting``   damped least squares and Poisson maximum likelihood
- ``io``        binary photon streams, delimited spectra/series, JSON
- ``simulate``  photon-stream, TCSPC and resonant-scan generators
- ``analysis``  correlation, lifetime, saturation, polarization fits
- ``spectra``   peak models, Debye-Waller, sidebands, mirror, A2u fit
- ``templaws``  temperature-law fitting and thermometry inversion
- ``depth``     implantation-profile depth arithmetic
- ``plotting``  figure rendering (imported lazily; needs matplotlib)
- ``cli``       the ``snvkit`` command-line tool
"""

__version__ = "0.1.0"

from .units import (PLANCK_EV_S, BOLTZMANN_EV_PER_K, SPEED_OF_LIGHT_M_S,
                    SPEED_OF_LIGHT_NM_GHZ, HC_EV_NM, ENERGY_UNITS,
                    to_ev, from_ev, ghz_to_mev, mev_to_ghz, convert,
                    EnergyQuantity, Spectrum, PhotonRecord, PhotonStream)
from .levels import (LevelStructure, DEFAULT_LEVEL_STRUCTURE,
                     load_level_structure, dump_level_structure,
                     DWParams, LinewidthLaw, ShiftLaw,
                     boltzmann_upper_fraction, transition_table,
                     fourier_limit, dw_factor, linewidth_at, lineshift_at,
                     cutoff_phonon_energy_mev)
from .fitting import FitResult, lm_fit, poisson_mle_fit
from .io import (ParseError, DelayHistogram,
                 write_stream, read_stream, write_stream_csv, read_stream_csv,
                 write_spectrum_csv, read_spectrum_csv,
                 write_series_csv, read_series_csv,
                 write_correlation_csv, read_correlation_csv,
                 write_xy_csv, read_xy_csv,
                 write_histogram_csv, read_histogram_csv,
                 write_json, read_json)
from .simulate import (MAX_STREAM_EVENTS, DETECTION_BANDS, StreamSizeError,
                       EmitterConfig, simulate_stream, simulate_tcspc,
                       IonizationConfig, DiffusionConfig, PLEScanConfig,
                       PLETrace, simulate_ple_scan, diffusion_sigma_for_width,
                       scan_with_seed)
from .analysis import (CorrelationCurve, g2_histogram, antibunching_model,
                       background_g2_floor, fit_g2, fit_lifetime,
                       saturation_model, fit_saturation, PolarizationScan,
                       polarization_model, fit_polarization)
from .spectra import (GHZ_PER_EV, GHZ_PER_MEV, PEAK_KINDS, PeakModel,
                      lorentzian_profile, gaussian_profile, voigt_profile,
                      evaluate_peak, evaluate_peaks, spectrum_to_frequency,
                      spectrum_from_frequency, fit_peaks, DebyeWallerResult,
                      debye_waller, PSBTable, DEFAULT_PSB_TABLE, PSBMatch,
                      PSBReport, find_psb_peaks, mirror_spectrum,
                      fit_a2u_resonance)
from .templaws import (LINEWIDTH_MODELS, TempSeries, linewidth_model_fn,
                       fit_linewidth_series, shift_model_fn, fit_shift_series,
                       dw_model_fn, fit_dw_series, compare_linewidth_models,
                       ThermometryResult, invert_thermometer)
from .depth import (DEFAULT_WING_FRACTION, ImplantProfile, normalize_profile,
                    wing_depth, depth_from_countrate, EmpiricalProfile)
