import numpy as np
import pytest

from snvkit.units import (BOLTZMANN_EV_PER_K, ENERGY_UNITS, HC_EV_NM,
                          EnergyQuantity, PhotonStream, Spectrum, convert,
                          from_ev, ghz_to_mev, mev_to_ghz, to_ev)


def test_wavelength_to_ev_reference_points():
    assert to_ev(620.0, "nm") == pytest.approx(1.9997451, abs=1e-6)
    assert to_ev(HC_EV_NM, "nm") == pytest.approx(1.0, rel=1e-12)
    assert to_ev(619.7, "nm") == pytest.approx(2.000713, abs=1e-5)


def test_kelvin_energy_scale():
    # 680 K of thermal energy in meV
    assert to_ev(680.0, "K") * 1e3 == pytest.approx(58.598, abs=0.01)
    assert BOLTZMANN_EV_PER_K * 1e3 == pytest.approx(0.08617333, rel=1e-6)


def test_ghz_mev_round_trip():
    assert mev_to_ghz(ghz_to_mev(830.0)) == pytest.approx(830.0, rel=1e-12)
    # the ground-state splitting is a few meV
    assert ghz_to_mev(830.0) == pytest.approx(3.433, abs=0.005)


def test_convert_round_trips_all_unit_pairs():
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.uniform(0.5, 3.0)  # eV scale keeps all units in range
        for ua in ENERGY_UNITS:
            x = from_ev(v, ua)
            for ub in ENERGY_UNITS:
                back = convert(convert(EnergyQuantity(x, ua), ub), ua)
                assert back.unit == ua
                assert back.value == pytest.approx(x, rel=1e-9), (ua, ub)


def test_convert_monotone_inversions():
    # wavelength and energy move oppositely, frequency and energy together
    assert (EnergyQuantity(600.0, "nm").in_unit("eV")
            > EnergyQuantity(700.0, "nm").in_unit("eV"))
    assert (EnergyQuantity(2.1, "eV").in_unit("GHz")
            > EnergyQuantity(1.9, "eV").in_unit("GHz"))


def test_energy_quantity_to_and_back():
    q = EnergyQuantity(619.7, "nm")
    e = q.to("eV")
    assert e.unit == "eV"
    assert e.to("nm").value == pytest.approx(619.7, rel=1e-12)
    assert q.in_unit("GHz") == pytest.approx(483770.3, abs=0.5)


def test_energy_quantity_rejects_unknown_unit():
    with pytest.raises(ValueError):
        EnergyQuantity(1.0, "furlong")
    with pytest.raises(ValueError):
        EnergyQuantity(619.7, "nm").to("furlong")


def test_nonpositive_wavelength_rejected():
    with pytest.raises(ValueError):
        to_ev(0.0, "nm")
    with pytest.raises(ValueError):
        to_ev(-5.0, "nm")


def test_spectrum_validation():
    wl = np.linspace(600, 700, 11)
    Spectrum(wl, np.ones(11), instrument_fwhm_ghz=1.0)
    with pytest.raises(ValueError):
        Spectrum(wl[::-1], np.ones(11), instrument_fwhm_ghz=1.0)
    with pytest.raises(ValueError):
        Spectrum(wl, -np.ones(11), instrument_fwhm_ghz=1.0)
    with pytest.raises(ValueError):
        Spectrum(wl, np.ones(11), instrument_fwhm_ghz=0.0)
    with pytest.raises(ValueError):
        Spectrum(wl, np.ones(10), instrument_fwhm_ghz=1.0)


def test_spectrum_energy_axis_descends():
    wl = np.linspace(600, 700, 11)
    s = Spectrum(wl, np.ones(11), instrument_fwhm_ghz=1.0)
    assert np.all(np.diff(s.energy_ev) < 0)
    assert len(s) == 11


def test_photon_stream_ordering_and_channels():
    ts = np.array([10, 20, 20, 35], dtype=np.int64)
    ch = np.array([0, 1, 0, 1], dtype=np.uint8)
    s = PhotonStream(ts, ch)
    assert len(s) == 4
    assert s.channel_counts() == (2, 2)
    assert list(s.channel_times_ps(1)) == [20, 35]
    with pytest.raises(ValueError):
        PhotonStream(ts[::-1].copy(), ch)
    with pytest.raises(ValueError):
        PhotonStream(ts, ch[:3])


def test_photon_stream_span_prefers_declared_duration():
    ts = np.array([0, 1_000_000], dtype=np.int64)
    ch = np.zeros(2, dtype=np.uint8)
    assert PhotonStream(ts, ch).span_s == pytest.approx(1e-6)
    assert PhotonStream(ts, ch, duration_s=2.0).span_s == 2.0
