import json

import numpy as np
import pytest

from snvkit.analysis import polarization_model, saturation_model
from snvkit.cli import build_parser, parse_quantity, run, window_qty
from snvkit.io import read_json, write_spectrum_csv, write_xy_csv
from snvkit.levels import DWParams
from snvkit.spectra import (DEFAULT_PSB_TABLE, GHZ_PER_EV, PeakModel,
                            evaluate_peaks, spectrum_from_frequency)
from snvkit.templaws import TempSeries
from snvkit.levels import dw_factor
from snvkit.units import HC_EV_NM, EnergyQuantity


def test_quantity_parsing_units():
    assert parse_quantity("0.5ns", "time_ns") == 0.5
    assert parse_quantity("500ps", "time_ns") == 0.5
    assert parse_quantity("2us", "time_ns") == 2000.0
    assert parse_quantity("120GHz", "freq_ghz") == 120.0
    assert parse_quantity("18MHz", "freq_mhz") == 18.0
    assert parse_quantity("100kcps", "rate_cps") == 1e5
    assert parse_quantity("1.2Mcps", "rate_cps") == 1.2e6
    assert parse_quantity("200uW", "power_uw") == 200.0
    assert parse_quantity("0.2mW", "power_uw") == 200.0
    assert parse_quantity("680K", "temp_k") == 680.0
    assert parse_quantity("50Hz/uW", "recovery_hz_uw") == 50.0


def test_quantity_parsing_rejects_bare_numbers():
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        parse_quantity("0.5", "time_ns")
    with pytest.raises(argparse.ArgumentTypeError):
        parse_quantity("120 parsec", "freq_ghz")


def test_window_parsing():
    w = window_qty("length_nm")
    assert w("610:625") == (610.0, 625.0)
    assert w("610nm:0.625um") == (610.0, 625.0)
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        w("625:610")
    with pytest.raises(argparse.ArgumentTypeError):
        w("610")


def test_bare_number_flag_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        run(["g2", "missing.bin", "--bin", "0.5", "--window", "50ns"])
    assert exc.value.code == 2


def test_parse_error_exits_1_with_position(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "bad.csv").write_text("wavelength_nm,counts\n610,5\n609,oops\n")
    code = run(["dw", "bad.csv"])
    assert code == 1
    err = capsys.readouterr().err
    assert "line 3" in err


def test_stream_g2_pipeline_and_manifest(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert run(["sim-stream", "--duration", "2s", "--dark", "100cps",
                "--seed", "3", "--out", "s"]) == 0
    assert (tmp_path / "s.bin").exists()
    manifest = read_json(tmp_path / "s.manifest.json")
    assert manifest["command"] == "sim-stream"
    assert manifest["seed"] == 3
    assert len(manifest["config_digest"]) == 64
    capsys.readouterr()
    assert run(["g2", "s.bin", "--bin", "0.5ns", "--window", "40ns",
                "--out", "g", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["fit"]["converged"]
    assert (tmp_path / "g.corr.csv").exists()
    assert (tmp_path / "g.fit.json").exists()
    m2 = read_json(tmp_path / "g.manifest.json")
    assert "s.bin" in list(m2["input_digests"])[0]


def test_manifest_digest_ignores_timestamp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    run(["sim-stream", "--duration", "1s", "--seed", "1", "--out", "a"])
    d1 = read_json(tmp_path / "a.manifest.json")
    run(["sim-stream", "--duration", "1s", "--seed", "1", "--out", "a"])
    d2 = read_json(tmp_path / "a.manifest.json")
    assert d1["config_digest"] == d2["config_digest"]


def test_json_and_table_print_identical_numbers(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    P = np.array([5.0, 20.0, 60.0, 150.0, 400.0, 1000.0])
    write_xy_csv("sat.csv", {"power_uw": P,
                             "rate_cps": saturation_model(P, 1.2e5, 200.0, 0.0)})
    run(["saturation", "sat.csv", "--out", "sa", "--json"])
    doc = json.loads(capsys.readouterr().out)
    run(["saturation", "sat.csv", "--out", "sa"])
    table = capsys.readouterr().out
    i_inf = doc["fit"]["params"]["i_inf_cps"]
    p_sat = doc["fit"]["params"]["p_sat_uw"]
    assert json.dumps(i_inf) in table
    assert json.dumps(p_sat) in table


def test_polarization_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    ang = np.arange(0.0, 181.0, 10.0)
    b = 1000.0 * (1 - 0.85) / (2 * 0.85)
    write_xy_csv("pol.csv", {"angle_deg": ang,
                             "rate_cps": polarization_model(ang, 1000.0, 45.0, b)})
    assert run(["polarization", "pol.csv", "--out", "po", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["fit"]["params"]["visibility"] == pytest.approx(0.85, abs=1e-6)


def _write_pl_spectrum(path):
    e0 = HC_EV_NM / 619.7
    pk = [PeakModel("voigt", EnergyQuantity(619.7, "nm"), fwhm_lorentz_ghz=150.0,
                    fwhm_gauss_ghz=50.0, area_counts_ghz=0.57)]
    amps = np.array([0.12, 0.10, 0.08, 0.06, 0.04, 0.03])
    amps = amps / amps.sum() * 0.43
    for o, a in zip(DEFAULT_PSB_TABLE.offsets_mev, amps):
        pk.append(PeakModel("voigt", EnergyQuantity(e0 - o * 1e-3, "eV"),
                            fwhm_lorentz_ghz=2500.0, fwhm_gauss_ghz=50.0,
                            area_counts_ghz=a))
    wl = np.linspace(605.0, 745.0, 3001)
    nu = np.sort(HC_EV_NM / wl * GHZ_PER_EV)
    spec = spectrum_from_frequency(nu, evaluate_peaks(pk, nu) * 1e6,
                                   instrument_fwhm_ghz=50.0)
    write_spectrum_csv(spec, path)


def test_dw_and_psb_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    _write_pl_spectrum("pl.csv")
    assert run(["dw", "pl.csv", "--instrument-fwhm", "50GHz",
                "--out", "d", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["dw"] == pytest.approx(0.57, abs=0.03)
    assert run(["psb", "pl.csv", "--zpl", "619.7nm", "--out", "p",
                "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n_matched"] == 6


def test_mirror_cli(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    _write_pl_spectrum("pl.csv")
    assert run(["mirror", "pl.csv", "--zpl", "619.7nm", "--out", "m"]) == 0
    assert (tmp_path / "m.mirror.csv").exists()


def test_temp_fit_and_thermo_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    T = np.array([4.0, 25.0, 50.0, 80.0, 120.0, 160.0, 200.0, 250.0, 300.0])
    g = 0.05 + 1.2e-5 * T ** 3
    TempSeries(temperature_k=T, linewidth_ghz=g,
               linewidth_err_ghz=0.02 * g + 1e-3).to_csv("series.csv")
    assert run(["temp-fit", "series.csv", "--observable", "linewidth",
                "--model", "T3", "--out", "law"]) == 0
    capsys.readouterr()
    assert run(["thermo", "--law", "law.law.json", "--linewidth", "120GHz",
                "--out", "t", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["temperature_k"] == pytest.approx(215.41, abs=0.05)
    # shift law value against a linewidth law file is refused
    assert run(["thermo", "--law", "law.law.json", "--shift", "5GHz",
                "--out", "t2"]) == 1


def test_dw_series_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    T = np.linspace(10.0, 300.0, 10)
    TempSeries(temperature_k=T,
               dw=dw_factor(DWParams(0.57, 680.0), T)).to_csv("dw.csv")
    assert run(["dw-series", "dw.csv", "--out", "f", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["fit"]["params"]["huang_rhys_s"] == pytest.approx(0.57, abs=1e-4)


def test_tcspc_and_lifetime_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert run(["sim-tcspc", "--period", "100ns", "--pulses", "2000000",
                "--power", "20uW", "--seed", "2", "--out", "h"]) == 0
    capsys.readouterr()
    assert run(["lifetime", "h.hist.csv", "--out", "lt", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["fit"]["params"]["tau_ns"] == pytest.approx(5.0, rel=0.15)


def test_ple_cli(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["sim-ple", "--two-photon", "2e-4", "--seed", "7",
                "--out", "p"]) == 0
    assert (tmp_path / "p.trace.csv").exists()


def test_depth_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert run(["depth", "--reference", "2Mcps", "--rate", "1Mcps",
                "--out", "d", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    w = doc["wing_nm"]
    assert doc["remaining_depth_nm"] == pytest.approx(w, rel=1e-6)


def test_spectrum_fit_cli(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    pk = [PeakModel("lorentzian", EnergyQuantity(619.7, "nm"),
                    fwhm_lorentz_ghz=120.0, area_counts_ghz=3e5)]
    wl = np.linspace(616.0, 624.0, 1000)
    nu = np.sort(HC_EV_NM / wl * GHZ_PER_EV)
    write_spectrum_csv(spectrum_from_frequency(nu, evaluate_peaks(pk, nu),
                                               instrument_fwhm_ghz=40.0),
                       "z.csv")
    assert run(["spectrum-fit", "z.csv", "--instrument-fwhm", "40GHz",
                "--peak", "lorentzian:619.7nm:100GHz", "--out", "sf",
                "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["peaks"]["0"]["fwhm_lorentz_ghz"] == pytest.approx(120.0, rel=1e-3)


def test_config_exclusive_with_flags(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    from snvkit.simulate import EmitterConfig
    (tmp_path / "cfg.json").write_text(json.dumps(EmitterConfig().to_dict()))
    code = run(["sim-stream", "--config", "cfg.json", "--power", "300uW",
                "--out", "s"])
    assert code == 1


def test_parser_covers_all_subcommands():
    parser = build_parser()
    subparsers = next(a for a in parser._actions
                      if isinstance(a, __import__("argparse")._SubParsersAction))
    names = set(subparsers.choices)
    assert names == {"sim-stream", "sim-tcspc", "sim-ple", "g2", "lifetime",
                     "saturation", "polarization", "spectrum-fit", "dw",
                     "dw-series", "temp-fit", "thermo", "psb", "mirror",
                     "a2u", "depth"}
