import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wja.circuit import DESIGN, EXTRACTED
from wja.errors import AnalyticModelWarning, EvanescentModeError, ValidationError
from wja.waveguide import (
    DEFAULT_COUPLING_SLOPE,
    WR90,
    AntennaSpec,
    PlacementSpec,
    WaveguideSpec,
    antenna_coupling_capacitance,
    calibrate_coupling_slope,
    coupling_q,
    cutoff_frequency,
    guide_wavelength,
    is_uncoupled,
    load_impedance,
    q_vs_distance_sweep,
    q_vs_length_sweep,
    resonant_coupling_q,
    te10_wave_impedance,
)

C0 = 299792458.0
ETA0 = 376.730313412


def test_wr90_numbers():
    assert cutoff_frequency(WR90) == pytest.approx(6.55714e9, rel=1e-5)
    assert guide_wavelength(WR90, 9.5e9) == pytest.approx(43.6116e-3, rel=1e-5)
    assert te10_wave_impedance(WR90, 9.5e9) == pytest.approx(520.637, rel=1e-5)
    assert te10_wave_impedance(WR90, 8.2e9) == pytest.approx(627.398, rel=1e-5)


@given(st.floats(6.6e9, 40e9))
@settings(max_examples=50, deadline=None)
def test_dispersion_relation(f):
    # (1/lam0)^2 = (1/lam_g)^2 + (1/2a)^2
    lam_g = guide_wavelength(WR90, f)
    lhs = (f / C0) ** 2
    rhs = 1 / lam_g**2 + 1 / (2 * WR90.a) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-10)
    assert te10_wave_impedance(WR90, f) * C0 / f / lam_g == pytest.approx(ETA0, rel=1e-9)


@pytest.mark.parametrize("f", [6e9, cutoff_frequency(WR90)])
def test_evanescent(f):
    with pytest.raises(EvanescentModeError):
        guide_wavelength(WR90, f)


def test_waveguide_validation():
    with pytest.raises(ValidationError):
        WaveguideSpec(a=1e-3, b=2e-3)


def test_load_impedance_matches_parallel_stub():
    f, d = 9.5e9, 7.3e-3
    z = te10_wave_impedance(WR90, f)
    beta = 2 * math.pi / guide_wavelength(WR90, f)
    stub = 1j * z * math.tan(beta * d)
    expected = z * stub / (z + stub)
    assert load_impedance(WR90, PlacementSpec(d), f).Z_L == pytest.approx(expected, rel=1e-12)


def test_quarter_wave_load_is_real_and_matched():
    f = 9.5e9
    zl = load_impedance(WR90, PlacementSpec.quarter_wave(WR90, f), f)
    assert zl.real == pytest.approx(te10_wave_impedance(WR90, f), rel=1e-12)
    assert abs(zl.Z_L.imag) < 1e-9 * zl.real


def test_half_wave_is_a_short():
    f = 9.5e9
    d = guide_wavelength(WR90, f) / 2
    assert load_impedance(WR90, PlacementSpec(d), f).Z_L == 0
    q = coupling_q(EXTRACTED, 0.0, WR90, AntennaSpec(1e-3), PlacementSpec(d), f)
    assert is_uncoupled(q)


def test_default_slope_calibration():
    assert DEFAULT_COUPLING_SLOPE == pytest.approx(6.5217e-12, rel=1e-4)
    ant = AntennaSpec(2.5e-3)
    with pytest.warns(AnalyticModelWarning):
        c_c = antenna_coupling_capacitance(ant)
    assert c_c == pytest.approx(16.30e-15, rel=1e-3)


def test_calibrated_q_reproduced():
    slope = calibrate_coupling_slope(DESIGN, target_q=100.0)
    ant = AntennaSpec(2.5e-3, coupling_slope=slope)
    q = coupling_q(DESIGN, 0.0, WR90, ant, PlacementSpec.quarter_wave(WR90, 9.5e9), 9.5e9, warn=False)
    assert q == pytest.approx(100.0, rel=1e-12)


@given(st.floats(0.2e-3, 1.5e-3), st.floats(1.01, 3.0))
@settings(max_examples=40, deadline=None)
def test_q_scales_inverse_square(l, k):
    pl = PlacementSpec.quarter_wave(WR90, 9.5e9)
    q1 = coupling_q(EXTRACTED, 0.0, WR90, AntennaSpec(l), pl, 9.5e9, warn=False)
    q2 = coupling_q(EXTRACTED, 0.0, WR90, AntennaSpec(l * k), pl, 9.5e9, warn=False)
    assert q1 / q2 == pytest.approx(k * k, rel=1e-9)


def test_length_sweep_tags_and_slope():
    t = q_vs_length_sweep(np.linspace(0.5e-3, 5e-3, 10))
    assert np.all(np.diff(t.q) < 0)
    assert t.annotations["loglog_slope"] == pytest.approx(-2.0, abs=1e-9)
    assert any("beyond_cap" in tg for tg in t.tags)
    assert not t.tags[0]


def test_distance_sweep_annotations():
    lam = guide_wavelength(WR90, 9.5e9)
    d = np.linspace(1e-3, 40e-3, 391)
    t = q_vs_distance_sweep(d)
    assert t.annotations["minima_m"] == pytest.approx([lam / 4, 3 * lam / 4])
    assert t.annotations["divergences_m"] == pytest.approx([lam / 2])
    k = int(np.argmin(t.q))
    assert abs(d[k] - lam / 4) <= d[1] - d[0]


def test_resonant_q_varies_across_band():
    ant = AntennaSpec(2.5e-3)
    pl = PlacementSpec.quarter_wave(WR90, 9.5e9)
    q = [resonant_coupling_q(EXTRACTED, WR90, ant, pl, f) for f in np.linspace(9e9, 11e9, 21)]
    assert min(q) > 100 and max(q) < 150


def test_bad_grid():
    with pytest.raises(ValidationError):
        q_vs_length_sweep([1e-3, 0.5e-3])


def _band_q():
    ant = AntennaSpec(2.5e-3)
    pl = PlacementSpec.quarter_wave(WR90, 9.5e9)
    return np.array([resonant_coupling_q(EXTRACTED, WR90, ant, pl, f) for f in np.linspace(9e9, 11e9, 81)])


@pytest.mark.xfail(strict=True, reason="fixed-geometry model spreads Q by about 18% over 9-11 GHz")
def test_frequency_flatness_within_15_percent():
    q = _band_q()
    assert (q.max() - q.min()) / q.min() < 0.15


def test_frequency_flatness_model_value():
    q = _band_q()
    assert q.min() == pytest.approx(121.0, abs=0.1)
    assert q.max() == pytest.approx(142.7, abs=0.1)
