import numpy as np
import pytest

from snvkit.depth import (DEFAULT_WING_FRACTION, EmpiricalProfile,
                          ImplantProfile, depth_from_countrate,
                          normalize_profile, wing_depth)


def test_density_integrates_to_total():
    p = normalize_profile(2e6, mean_depth_nm=168.0, straggle_sigma_nm=30.0)
    x = np.linspace(0.0, 600.0, 200001)
    assert np.trapezoid(p.density(x), x) == pytest.approx(2e6, rel=1e-6)
    assert p.density(np.array([-5.0]))[0] == 0.0


def test_tail_integral_monotone_decreasing():
    p = normalize_profile(1e5)
    x = np.linspace(0.0, 400.0, 500)
    tails = np.array([p.tail_integral(xi) for xi in x])
    assert np.all(np.diff(tails) <= 0)
    assert tails[0] == pytest.approx(1e5, rel=1e-12)
    assert tails[-1] < 1.0


def test_wing_depth_scaling():
    p = normalize_profile(1e5, straggle_sigma_nm=30.0)
    # 1% wing sits sqrt(-2 ln 0.01) sigma past the mean
    assert wing_depth(p) == pytest.approx(30.0 * 3.03485, abs=1e-3)
    assert wing_depth(p, fraction=np.exp(-2.0)) == pytest.approx(60.0, rel=1e-9)
    with pytest.raises(ValueError):
        wing_depth(p, fraction=0.0)
    assert DEFAULT_WING_FRACTION == 0.01


def test_depth_round_trip_is_exact():
    rng = np.random.default_rng(6)
    for _ in range(50):
        p = normalize_profile(rng.uniform(1e4, 1e7),
                              mean_depth_nm=rng.uniform(150.0, 190.0),
                              straggle_sigma_nm=rng.uniform(15.0, 45.0))
        lo, hi = p.support_edges()
        removal = rng.uniform(lo, hi)
        measured = p.tail_integral(removal)
        depth = depth_from_countrate(p, measured)
        # re-integrating at the implied removal reproduces the rate
        implied_removal = hi - depth
        again = p.tail_integral(implied_removal)
        assert again == pytest.approx(measured, rel=1e-6)


def test_depth_clamps():
    p = normalize_profile(1e6)
    w = wing_depth(p)
    assert depth_from_countrate(p, 1e6) == pytest.approx(2 * w, rel=1e-9)
    assert depth_from_countrate(p, 0.0) == 0.0
    half = p.tail_integral(p.mean_depth_nm)
    assert depth_from_countrate(p, half) == pytest.approx(w, rel=1e-6)
    with pytest.raises(ValueError):
        depth_from_countrate(p, 1.1e6)


def test_profile_validation():
    with pytest.raises(ValueError):
        ImplantProfile(mean_depth_nm=0.0, straggle_sigma_nm=30.0,
                       total_amplitude_cps=1e5)
    with pytest.raises(ValueError):
        normalize_profile(-1.0)


def test_shallow_truncation_redistributes_mass():
    # a shallow profile loses the x < 0 lobe; the remaining density still
    # integrates to the full reference rate
    p = normalize_profile(1e5, mean_depth_nm=20.0, straggle_sigma_nm=30.0)
    x = np.linspace(0.0, 400.0, 400001)
    assert np.trapezoid(p.density(x), x) == pytest.approx(1e5, rel=1e-5)
    assert p.tail_integral(0.0) == pytest.approx(1e5, rel=1e-12)


def test_empirical_profile_matches_gaussian(tmp_path):
    gauss = normalize_profile(5e5, mean_depth_nm=168.0, straggle_sigma_nm=30.0)
    x = np.linspace(0.0, 400.0, 8001)
    from snvkit.io import write_xy_csv
    path = tmp_path / "srim.csv"
    write_xy_csv(path, {"depth_nm": x, "density": gauss.density(x)})
    emp = EmpiricalProfile.from_csv(path, reference_rate_cps=5e5)
    for removal in (120.0, 168.0, 220.0):
        assert emp.tail_integral(removal) == pytest.approx(
            gauss.tail_integral(removal), rel=1e-3)
    d_emp = depth_from_countrate(emp, emp.tail_integral(180.0))
    lo, hi = emp.support_edges()
    assert d_emp == pytest.approx(hi - 180.0, abs=0.2)
