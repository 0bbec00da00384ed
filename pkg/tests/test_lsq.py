import warnings

import numpy as np
import pytest
from scipy.optimize import least_squares

from wja.errors import DegeneracyWarning, ValidationError
from wja.fitting.lsq import FitOptions, damped_least_squares


def test_linear_model_exact():
    x = np.linspace(0, 1, 20)
    y = 3.0 * x - 2.0
    res = damped_least_squares(lambda p: p[0] * x + p[1] - y, [1.0, 1.0], ["a", "b"])
    assert res.converged
    assert res.estimates["a"] == pytest.approx(3.0, abs=1e-12)
    assert res.estimates["b"] == pytest.approx(-2.0, abs=1e-12)


def test_rosenbrock():
    fun = lambda p: np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])
    res = damped_least_squares(fun, [-1.2, 1.0])
    assert res.converged
    assert [res.estimates["x0"], res.estimates["x1"]] == pytest.approx([1.0, 1.0], abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_matches_scipy_oracle(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 4, 60)
    truth = np.array([2.0, 1.3, 0.4])
    y = truth[0] * np.exp(-truth[1] * t) + truth[2] + 0.01 * rng.standard_normal(t.size)
    fun = lambda p: p[0] * np.exp(-p[1] * t) + p[2] - y
    ours = damped_least_squares(fun, [1.0, 1.0, 0.0], scale=[1.0, 1.0, 1.0])
    ref = least_squares(fun, [1.0, 1.0, 0.0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    assert list(ours.estimates.values()) == pytest.approx(ref.x, rel=1e-6, abs=1e-9)
    # covariance against the oracle's Jacobian
    J = ref.jac
    cov = np.linalg.inv(J.T @ J) * (ref.fun @ ref.fun) / (t.size - 3)
    assert list(ours.std_errors.values()) == pytest.approx(np.sqrt(np.diag(cov)), rel=1e-4)


def test_complex_residuals():
    f = np.linspace(-1, 1, 30)
    y = (1 + 2j) * f
    res = damped_least_squares(lambda p: (p[0] + 1j * p[1]) * f - y, [0.0, 0.0])
    assert res.estimates["x0"] == pytest.approx(1.0) and res.estimates["x1"] == pytest.approx(2.0)


def test_bounds_projection():
    x = np.linspace(0, 1, 10)
    res = damped_least_squares(lambda p: p[0] * x + 1.0, [1.0], ["a"],
                               options=FitOptions(bounds={"a": (0.0, None)}))
    assert res.estimates["a"] == pytest.approx(0.0, abs=1e-12)


def test_singular_direction_reported():
    x = np.linspace(0, 1, 10)
    with pytest.warns(DegeneracyWarning):
        res = damped_least_squares(lambda p: (p[0] + p[1]) * x - x, [0.2, 0.3], scale=[1.0, 1.0])
    d = res.singular_direction
    assert d is not None and d["x0"] == pytest.approx(-d["x1"])
    assert np.isinf(res.std_errors["x0"])


def test_validation():
    with pytest.raises(ValidationError):
        FitOptions(max_iterations=0)
    with pytest.raises(ValidationError):
        damped_least_squares(lambda p: np.array([p[0]]), [1.0, 2.0])
    with pytest.raises(ValidationError):
        damped_least_squares(lambda p: np.array([np.nan, 1.0]), [1.0])
