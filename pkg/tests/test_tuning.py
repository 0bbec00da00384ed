import warnings

import numpy as np
import pytest

from wja.circuit import EXTRACTED, resonance_frequency
from wja.errors import DegeneracyWarning, ValidationError
from wja.fitting.tuning import (
    TuningCurveData,
    circuit_from_fit,
    fit_flux_tuning,
    synth_tuning_curve,
    tuning_jacobian,
    tuning_model,
)

GRID = np.linspace(-0.45, 0.45, 40)
THETA = np.array([EXTRACTED.I0, EXTRACTED.C, EXTRACTED.L_stray])


def test_model_matches_circuit():
    assert tuning_model(THETA, GRID) == pytest.approx(resonance_frequency(EXTRACTED, GRID), rel=1e-14)


def test_fixed_capacitance_recovers_exactly():
    data = synth_tuning_curve(EXTRACTED, GRID)
    res = fit_flux_tuning(data, fixed={"C": EXTRACTED.C})
    assert res.converged and not res.extras["degenerate"]
    c = circuit_from_fit(res)
    assert c.I0 == pytest.approx(EXTRACTED.I0, rel=1e-8)
    assert c.L_stray == pytest.approx(EXTRACTED.L_stray, rel=1e-8)


def test_free_fit_is_degenerate_but_identifiable_combinations_exact():
    data = synth_tuning_curve(EXTRACTED, GRID)
    with pytest.warns(DegeneracyWarning):
        res = fit_flux_tuning(data)
    assert res.extras["degenerate"]
    assert res.extras["f_max_Hz"] == pytest.approx(11.49966e9, rel=1e-6)
    assert res.extras["p_zero_flux"] == pytest.approx(0.37351, rel=1e-4)
    assert res.extras["C_L_stray"] == pytest.approx(EXTRACTED.C * EXTRACTED.L_stray, rel=1e-6)


def test_scaling_null_direction():
    # (I0, C, L_stray) -> (s I0, s C, L_stray / s) leaves the curve unchanged
    s = 3.7
    other = THETA * np.array([s, s, 1 / s])
    assert tuning_model(other, GRID) == pytest.approx(tuning_model(THETA, GRID), rel=1e-13)


def test_coil_mode_recovers_calibration():
    current = np.linspace(-3e-3, 2e-3, 40)
    data = synth_tuning_curve(EXTRACTED, current, alpha=100.0, I_off=-0.5e-3)
    assert not data.flux_mode
    res = fit_flux_tuning(data, fixed={"C": EXTRACTED.C})
    assert res.estimates["alpha"] == pytest.approx(100.0, rel=1e-6)
    assert res.estimates["I_off"] == pytest.approx(-0.5e-3, rel=1e-6)


def test_analytic_jacobian_matches_finite_difference():
    rng = np.random.default_rng(3)
    for _ in range(10):
        th = THETA * np.exp(0.2 * rng.standard_normal(3))
        J = tuning_jacobian(th, GRID)
        for j in range(3):
            h = 1e-6 * th[j]
            e = np.zeros(3)
            e[j] = h
            fd = (tuning_model(th + e, GRID) - tuning_model(th - e, GRID)) / (2 * h)
            assert J[:, j] == pytest.approx(fd, rel=1e-6)


def test_noise_needs_seed():
    with pytest.raises(ValidationError):
        synth_tuning_curve(EXTRACTED, GRID, noise=0.01)


def test_data_validation():
    with pytest.raises(ValidationError):
        TuningCurveData([0, 0.1], [1e9, 1e9])
    with pytest.raises(ValidationError):
        TuningCurveData([0, 0.1, 0.2], [1e9, np.nan, 1e9])


def test_unknown_fixed_name():
    with pytest.raises(ValidationError):
        fit_flux_tuning(synth_tuning_curve(EXTRACTED, GRID), fixed={"L": 1.0})
