import numpy as np
import pytest

from snvkit.levels import DEFAULT_LEVEL_STRUCTURE, DWParams
from snvkit.simulate import (DiffusionConfig, EmitterConfig, IonizationConfig,
                             PLEScanConfig, StreamSizeError,
                             diffusion_sigma_for_width, scan_with_seed,
                             simulate_ple_scan, simulate_stream,
                             simulate_tcspc)


def _cfg(**kw):
    base = dict(excitation_power_uw=200.0, saturation_power_uw=200.0,
                max_rate_cps=1e5, dark_rate_cps=0.0, duration_s=2.0,
                rng_seed=0)
    base.update(kw)
    return EmitterConfig(**base)


def test_same_seed_same_stream():
    a = simulate_stream(_cfg(rng_seed=11))
    b = simulate_stream(_cfg(rng_seed=11))
    assert np.array_equal(a.timestamps_ps, b.timestamps_ps)
    assert np.array_equal(a.channels, b.channels)


def test_different_seed_different_stream():
    a = simulate_stream(_cfg(rng_seed=1))
    b = simulate_stream(_cfg(rng_seed=2))
    assert not np.array_equal(a.timestamps_ps, b.timestamps_ps)


def test_detected_rate_tracks_saturation_curve():
    # at P = P_sat the detected rate is half the saturated maximum
    cfg = _cfg(duration_s=20.0, rng_seed=5)
    s = simulate_stream(cfg)
    rate = len(s) / cfg.duration_s
    assert rate == pytest.approx(5e4, rel=0.02)
    cfg_hi = _cfg(excitation_power_uw=2000.0, duration_s=20.0, rng_seed=6)
    rate_hi = len(simulate_stream(cfg_hi)) / 20.0
    assert rate_hi == pytest.approx(1e5 * 2000 / 2200, rel=0.02)


def test_beamsplitter_is_fair_within_counting_noise():
    rng_checks = []
    for seed in (0, 1, 2, 3, 4):
        s = simulate_stream(_cfg(duration_s=10.0, rng_seed=seed))
        n0, n1 = s.channel_counts()
        n = n0 + n1
        # binomial(n, 1/2): |n0 - n/2| below 5 sigma
        rng_checks.append(abs(n0 - n / 2) < 5 * np.sqrt(n / 4.0))
    assert all(rng_checks)


def test_antibunching_dip_visible_in_short_delays():
    cfg = _cfg(duration_s=60.0, rng_seed=3)
    s = simulate_stream(cfg)
    t0 = np.sort(s.channel_times_ps(0)).astype(np.float64)
    t1 = np.sort(s.channel_times_ps(1)).astype(np.float64)
    # nearest-neighbour cross delays, crude histogram
    idx = np.searchsorted(t1, t0)
    idx = np.clip(idx, 1, len(t1) - 1)
    nearest = np.minimum(np.abs(t1[idx] - t0), np.abs(t1[idx - 1] - t0))
    tau_anti_ps = cfg.antibunching_time_ns * 1e3
    near = np.count_nonzero(nearest < 0.2 * tau_anti_ps)
    far_lo, far_hi = 10 * tau_anti_ps, 10.2 * tau_anti_ps
    far = np.count_nonzero((nearest >= far_lo) & (nearest < far_hi))
    assert near < 0.5 * far


def test_stream_size_guard():
    # physical rates but an absurd duration still trip the record cap
    with pytest.raises(StreamSizeError):
        simulate_stream(_cfg(duration_s=1e7))


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(duration_s=-1.0)
    with pytest.raises(ValueError):
        _cfg(saturation_power_uw=0.0)
    with pytest.raises(ValueError):
        _cfg(detection_band="zpl")  # needs dw parameters
    cfg = _cfg(detection_band="zpl", dw=DWParams(0.57, 680.0), temperature_k=4.0)
    assert 0 < cfg.band_fraction < 1


def test_band_fractions_partition_unity():
    dw = DWParams(0.57, 680.0)
    zpl = _cfg(detection_band="zpl", dw=dw).band_fraction
    psb = _cfg(detection_band="psb", dw=dw).band_fraction
    assert zpl + psb == pytest.approx(1.0, rel=1e-12)
    assert _cfg().band_fraction == 1.0


def test_emitter_config_json_round_trip(tmp_path):
    cfg = _cfg(dark_rate_cps=250.0, dw=DWParams(0.57, 680.0),
               detection_band="psb", temperature_k=20.0)
    path = tmp_path / "cfg.json"
    path.write_text(__import__("json").dumps(cfg.to_dict()))
    back = EmitterConfig.from_json(path)
    assert back == cfg


def test_tcspc_histogram_shape_and_decay():
    cfg = _cfg(excitation_power_uw=20.0, duration_s=1.0, rng_seed=8)
    hist = simulate_tcspc(cfg, pulse_period_ns=100.0, n_pulses=2_000_000)
    assert len(hist.bin_centers_ns) == 512
    assert hist.counts.sum() > 0
    # bulk of the counts inside the first few lifetimes
    edge = np.searchsorted(hist.bin_centers_ns, 5 * 5.0)
    assert hist.counts[:edge].sum() > 0.95 * hist.counts.sum()


def test_tcspc_rejects_saturated_pulse_probability():
    cfg = _cfg(max_rate_cps=5e5, excitation_power_uw=2e4)
    with pytest.raises(ValueError):
        simulate_tcspc(cfg, pulse_period_ns=10_000.0, n_pulses=1000)


def test_ple_deterministic_and_symmetric_without_noise():
    cfg = PLEScanConfig(start_detuning_ghz=-2.0, stop_detuning_ghz=2.0,
                        scan_speed_ghz_per_s=0.5, homogeneous_fwhm_mhz=18.0,
                        on_resonance_rate_cps=1e5, step_time_s=1e-3)
    a = simulate_ple_scan(cfg)
    b = simulate_ple_scan(cfg)
    assert np.array_equal(a.rate_cps, b.rate_cps)
    assert np.allclose(a.rate_cps, a.rate_cps[::-1], rtol=1e-12)
    assert np.all(a.charge == -1)
    assert not a.terminated


def test_ple_same_seed_same_trace_with_noise():
    ion = IonizationConfig(two_photon_coefficient=1e-4,
                           recovery_coefficient_hz_per_uw=50.0,
                           green_power_uw=1.0)
    diff = DiffusionConfig(jump_rate_hz=30.0, jump_sigma_mhz=200.0)
    cfg = PLEScanConfig(ionization=ion, diffusion=diff, shot_noise=True,
                        rng_seed=21)
    a = simulate_ple_scan(cfg)
    b = simulate_ple_scan(cfg)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.charge, b.charge)


def test_ple_ionization_terminates_most_scans():
    ion = IonizationConfig(two_photon_coefficient=2e-4)
    cfg = PLEScanConfig(start_detuning_ghz=-1.0, stop_detuning_ghz=1.0,
                        scan_speed_ghz_per_s=0.1, on_resonance_rate_cps=1e5,
                        step_time_s=1e-3, ionization=ion)
    terminated = sum(scan_with_seed(cfg, s).terminated for s in range(40))
    assert terminated >= 38


def test_ple_green_repump_restores_fluorescence():
    ion_off = IonizationConfig(two_photon_coefficient=2e-4)
    ion_on = IonizationConfig(two_photon_coefficient=2e-4,
                              recovery_coefficient_hz_per_uw=50.0,
                              green_power_uw=5.0)
    cfg = PLEScanConfig(start_detuning_ghz=-1.0, stop_detuning_ghz=1.0,
                        scan_speed_ghz_per_s=0.1, on_resonance_rate_cps=1e5,
                        step_time_s=1e-3)
    from dataclasses import replace
    dark = np.mean([scan_with_seed(replace(cfg, ionization=ion_off), s).bright_fraction
                    for s in range(10)])
    lit = np.mean([scan_with_seed(replace(cfg, ionization=ion_on), s).bright_fraction
                   for s in range(10)])
    assert lit > dark


def test_diffusion_walk_wanders_further_than_redraw():
    base = dict(start_detuning_ghz=-2.0, stop_detuning_ghz=2.0,
                scan_speed_ghz_per_s=0.1, on_resonance_rate_cps=1e5,
                step_time_s=1e-3)
    walk = PLEScanConfig(diffusion=DiffusionConfig(jump_rate_hz=50.0,
                                                   jump_sigma_mhz=100.0,
                                                   mode="walk"), **base)
    redraw = PLEScanConfig(diffusion=DiffusionConfig(jump_rate_hz=50.0,
                                                     jump_sigma_mhz=100.0,
                                                     mode="redraw"), **base)
    # a random walk accumulates variance; redraw stays stationary, so the
    # walk's resonance wanders out of the window more often
    def peak_rate(cfg, seeds):
        return np.mean([scan_with_seed(cfg, s).rate_cps.max() for s in seeds])
    assert peak_rate(walk, range(15)) < peak_rate(redraw, range(15))


def test_diffusion_sigma_inversion_round_trip():
    from snvkit.simulate import _voigt_fwhm_mhz
    sigma = diffusion_sigma_for_width(580.0, 18.0)
    fg = sigma * 2.0 * np.sqrt(2.0 * np.log(2.0))
    assert _voigt_fwhm_mhz(18.0, fg) == pytest.approx(580.0, abs=1e-9)
    with pytest.raises(ValueError):
        diffusion_sigma_for_width(10.0, 18.0)


def test_ple_counts_follow_rate_without_shot_noise():
    cfg = PLEScanConfig(step_time_s=2e-3, shot_noise=False)
    t = simulate_ple_scan(cfg)
    assert np.allclose(t.counts, t.rate_cps * t.step_s)
