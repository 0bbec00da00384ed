"""Lumped-element model of the flux-tunable SQUID resonator.

The SQUID is treated as a single effective junction whose inductance is
``L_J(phi) = L_J0 / cos(pi * phi)`` with ``L_J0 = Phi0 / (2 pi I0)``, in series
with a stray inductance and shunted by a capacitance. Flux is always reduced,
``phi = Phi / Phi0``, and restricted to the principal branch ``|phi| < 0.5``.

All functions accept scalars or numpy arrays for ``phi``.
"""

from dataclasses import dataclass

import numpy as np

from wja.constants import PHI0
from wja.errors import FluxDomainError, ValidationError

QP_THRESHOLD = 5.0
QP_OPTIMAL_BAND = (5.0, 10.0)


@dataclass(frozen=True)
class CircuitParams:
    """Critical current ``I0`` [A], shunt capacitance ``C`` [F] and stray
    inductance ``L_stray`` [H]."""

    I0: float
    C: float
    L_stray: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.I0) and self.I0 > 0):
            raise ValidationError(f"I0 must be > 0, got {self.I0!r}")
        if not (np.isfinite(self.C) and self.C > 0):
            raise ValidationError(f"C must be > 0, got {self.C!r}")
        if not (np.isfinite(self.L_stray) and self.L_stray >= 0):
            raise ValidationError(f"L_stray must be >= 0, got {self.L_stray!r}")

    @property
    def L_J0(self):
        return PHI0 / (2 * np.pi * self.I0)


# Values extracted from the measured flux-tuning curve of the built device.
EXTRACTED = CircuitParams(I0=4.6e-6, C=1e-12, L_stray=120e-12)
# Nominal design targets (no stray inductance budgeted).
DESIGN = CircuitParams(I0=4e-6, C=3.5e-12, L_stray=0.0)


@dataclass(frozen=True)
class OperatingPoint:
    L_J: float
    f0: float
    p: float
    Z_c: float


def _check_flux(phi):
    phi = np.asarray(phi, dtype=float)
    if np.any(~np.isfinite(phi)) or np.any(np.abs(phi) >= 0.5):
        raise FluxDomainError(
            "reduced flux must satisfy |phi| < 0.5 (SQUID inductance diverges at 0.5)"
        )
    return phi


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def josephson_inductance(phi, I0):
    """SQUID inductance [H] at reduced flux ``phi`` for critical current ``I0``."""
    phi = _check_flux(phi)
    if not I0 > 0:
        raise ValidationError(f"I0 must be > 0, got {I0!r}")
    return _scalar(PHI0 / (2 * np.pi * I0) / np.cos(np.pi * phi))


def total_inductance(params, phi):
    return _scalar(params.L_stray + josephson_inductance(phi, params.I0))


def resonance_frequency(params, phi):
    """Linear resonance frequency [Hz]."""
    L = total_inductance(params, phi)
    return _scalar(1.0 / (2 * np.pi * np.sqrt(params.C * np.asarray(L))))


def participation_ratio(params, phi):
    """Fraction of the total inductance carried by the junction."""
    L_J = np.asarray(josephson_inductance(phi, params.I0))
    return _scalar(L_J / (L_J + params.L_stray))


def characteristic_impedance(params, phi):
    """Resonator impedance ``sqrt(L_total / C)`` [Ohm]."""
    L = np.asarray(total_inductance(params, phi))
    return _scalar(np.sqrt(L / params.C))


def operating_point(params, phi):
    phi = float(phi)
    return OperatingPoint(
        L_J=josephson_inductance(phi, params.I0),
        f0=resonance_frequency(params, phi),
        p=participation_ratio(params, phi),
        Z_c=characteristic_impedance(params, phi),
    )


def max_frequency(params):
    return resonance_frequency(params, 0.0)


def inductance_for_frequency(params, f):
    """Junction inductance needed to put the resonance at ``f``."""
    f = np.asarray(f, dtype=float)
    L_total = 1.0 / ((2 * np.pi * f) ** 2 * params.C)
    return _scalar(L_total - params.L_stray)


def flux_for_frequency(params, f):
    """Inverse of :func:`resonance_frequency` on ``0 <= phi < 0.5``.

    Raises
    ------
    FluxDomainError
        If ``f`` lies above the zero-flux maximum or is not positive.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise FluxDomainError("frequency must be positive")
    L_J = np.asarray(inductance_for_frequency(params, f))
    ratio = params.L_J0 / L_J
    # 1e-12 slack absorbs round-off right at the sweet spot
    if np.any(L_J <= 0) or np.any(ratio > 1.0 + 1e-12):
        raise FluxDomainError(
            f"frequency above the tuning maximum {max_frequency(params):.6g} Hz"
        )
    return _scalar(np.arccos(np.minimum(ratio, 1.0)) / np.pi)


def qp_product(Q, params, phi):
    if not Q > 0:
        raise ValidationError(f"Q must be > 0, got {Q!r}")
    return _scalar(Q * np.asarray(participation_ratio(params, phi)))


@dataclass(frozen=True)
class QpVerdict:
    qp: float
    feasible: bool
    optimal: bool
    threshold: float = QP_THRESHOLD
    optimal_band: tuple = QP_OPTIMAL_BAND


def amplification_feasible(qp, threshold=QP_THRESHOLD, optimal_band=QP_OPTIMAL_BAND):
    """Whether the resonator can amplify (``Qp >= threshold``), and whether
    ``Qp`` also sits in the band that maximizes saturation power."""
    qp = float(qp)
    lo, hi = optimal_band
    return QpVerdict(
        qp=qp,
        feasible=qp >= threshold,
        optimal=lo <= qp <= hi,
        threshold=threshold,
        optimal_band=tuple(optimal_band),
    )
