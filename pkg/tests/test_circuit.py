import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wja.circuit import (
    DESIGN,
    EXTRACTED,
    CircuitParams,
    amplification_feasible,
    characteristic_impedance,
    flux_for_frequency,
    josephson_inductance,
    max_frequency,
    operating_point,
    participation_ratio,
    qp_product,
    resonance_frequency,
)
from wja.constants import PHI0
from wja.errors import FluxDomainError, ValidationError


def test_zero_flux_inductance():
    # L_J0 = Phi0 / (2 pi I0) computed by hand for 4.6 uA
    assert josephson_inductance(0.0, 4.6e-6) == pytest.approx(2.067833848e-15 / (2 * math.pi * 4.6e-6), rel=1e-9)


def test_inductance_grows_as_secant():
    L0 = josephson_inductance(0.0, 4e-6)
    assert josephson_inductance(1 / 3, 4e-6) == pytest.approx(2 * L0, rel=1e-12)


@pytest.mark.parametrize("phi", [0.5, -0.5, 0.7])
def test_flux_domain(phi):
    with pytest.raises(FluxDomainError):
        josephson_inductance(phi, 4e-6)


def test_extracted_values():
    assert max_frequency(EXTRACTED) == pytest.approx(11.49966e9, rel=1e-5)
    assert resonance_frequency(EXTRACTED, 0.35) == pytest.approx(9.5525e9, rel=1e-4)
    assert characteristic_impedance(EXTRACTED, 0.0) == pytest.approx(13.840, rel=1e-4)
    assert participation_ratio(EXTRACTED, 0.0) == pytest.approx(0.37351, rel=1e-4)


def test_design_without_stray_has_full_participation():
    assert participation_ratio(DESIGN, 0.2) == 1.0


def test_vectorized():
    phi = np.linspace(0, 0.45, 7)
    f = resonance_frequency(EXTRACTED, phi)
    assert f.shape == phi.shape
    assert np.all(np.diff(f) < 0)


def test_operating_point_consistent():
    op = operating_point(EXTRACTED, 0.2)
    assert op.f0 == pytest.approx(resonance_frequency(EXTRACTED, 0.2))
    assert op.p == pytest.approx(op.L_J / (op.L_J + EXTRACTED.L_stray))


@given(st.floats(0.0, 0.49))
@settings(max_examples=60, deadline=None)
def test_flux_inverse(phi):
    f = resonance_frequency(EXTRACTED, phi)
    assert flux_for_frequency(EXTRACTED, f) == pytest.approx(phi, abs=1e-7)


@given(st.floats(0.0, 0.49), st.floats(0.0, 0.49))
@settings(max_examples=60, deadline=None)
def test_participation_increases_with_flux(a, b):
    lo, hi = sorted((a, b))
    assert participation_ratio(EXTRACTED, lo) <= participation_ratio(EXTRACTED, hi) + 1e-15


def test_flux_for_frequency_above_max():
    with pytest.raises(FluxDomainError):
        flux_for_frequency(EXTRACTED, 12e9)


@pytest.mark.parametrize("kw", [dict(I0=0, C=1e-12), dict(I0=1e-6, C=-1), dict(I0=1e-6, C=1e-12, L_stray=-1e-12)])
def test_invalid_params(kw):
    with pytest.raises(ValidationError):
        CircuitParams(**kw)


def test_qp_verdict():
    qp = qp_product(100, EXTRACTED, 0.0)
    assert qp == pytest.approx(37.35, abs=0.01)
    v = amplification_feasible(qp)
    assert v.feasible and not v.optimal
    assert amplification_feasible(7).optimal
    assert not amplification_feasible(4.9).feasible
    with pytest.raises(ValidationError):
        qp_product(0, EXTRACTED, 0.0)
