"""Coupling of the resonator to the TE10 mode of a shorted rectangular waveguide.

The antenna behaves as a coupling capacitor ``C_c`` into the load seen at the
chip position. That load is the matched guide towards the port in parallel
with the shorted stub formed by the back wall, and only its real part sets
the external Q::

    Q = Z_c / Re(Z_L) * (C / C_c)**2
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from wja.circuit import (
    EXTRACTED,
    characteristic_impedance,
    flux_for_frequency,
    resonance_frequency,
)
from wja.constants import C0, ETA0
from wja.errors import AnalyticModelWarning, EvanescentModeError, ValidationError

ANALYTIC_LENGTH_CAP = 1.5e-3
DESIGN_FREQUENCY = 9.5e9
DESIGN_Q = 100.0
DESIGN_PAD_LENGTH = 2.5e-3


@dataclass(frozen=True)
class WaveguideSpec:
    a: float
    b: float
    label: str = ""

    def __post_init__(self):
        if not (self.a > self.b > 0):
            raise ValidationError(f"waveguide needs a > b > 0, got a={self.a}, b={self.b}")


WR90 = WaveguideSpec(a=0.900 * 25.4e-3, b=0.400 * 25.4e-3, label="WR-90")


def cutoff_frequency(wg):
    """TE10 cutoff ``c / 2a`` [Hz]."""
    return C0 / (2 * wg.a)


def _propagating(wg, f):
    f = np.asarray(f, dtype=float)
    fc = cutoff_frequency(wg)
    if np.any(f <= fc):
        raise EvanescentModeError(
            f"TE10 mode is evanescent below {fc:.6g} Hz ({wg.label or 'waveguide'})"
        )
    return f, np.sqrt(1.0 - (fc / f) ** 2)


def guide_wavelength(wg, f):
    f, root = _propagating(wg, f)
    lam = C0 / f / root
    return float(lam) if lam.ndim == 0 else lam


def te10_wave_impedance(wg, f):
    f, root = _propagating(wg, f)
    z = ETA0 / root
    return float(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class PlacementSpec:
    """Chip distance from the shorting back wall [m]."""

    d: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValidationError(f"distance from wall must be > 0, got {self.d!r}")

    @classmethod
    def quarter_wave(cls, wg, f):
        return cls(guide_wavelength(wg, f) / 4)


@dataclass(frozen=True)
class LoadImpedance:
    Z_L: complex
    frequency: float

    @property
    def real(self):
        return self.Z_L.real


def load_impedance(wg, placement, f):
    """Impedance seen by the chip at distance ``placement.d`` from the wall.

    ``Z_TE || j Z_TE tan(beta d)`` simplifies to
    ``Z_TE * (sin^2 + j sin cos)(beta d)``, which stays finite at the
    quarter-wave point. Positions within 1e-12 of a half-wave multiple are
    snapped to an exact short.
    """
    d = placement.d if isinstance(placement, PlacementSpec) else float(placement)
    lam = guide_wavelength(wg, f)
    z_te = te10_wave_impedance(wg, f)
    u = d / (lam / 2)
    if abs(u - round(u)) < 1e-12:
        return LoadImpedance(0j, float(f))
    s, c = math.sin(math.pi * u), math.cos(math.pi * u)
    return LoadImpedance(complex(z_te * s * s, z_te * s * c), float(f))


@dataclass(frozen=True)
class AntennaSpec:
    """Dipole antenna pads. ``coupling_slope`` maps pad length to ``C_c`` [F/m]."""

    pad_length: float
    coupling_slope: float = None
    pad_width: float = 0.25e-3
    gap: float = 150e-6
    length_cap: float = ANALYTIC_LENGTH_CAP

    def __post_init__(self):
        if not self.pad_length > 0:
            raise ValidationError(f"antenna pad length must be > 0, got {self.pad_length!r}")
        if self.coupling_slope is None:
            object.__setattr__(self, "coupling_slope", DEFAULT_COUPLING_SLOPE)
        if not self.coupling_slope > 0:
            raise ValidationError(f"coupling slope must be > 0, got {self.coupling_slope!r}")

    @property
    def analytic_valid(self):
        return self.pad_length <= self.length_cap


def antenna_coupling_capacitance(ant, warn=True):
    """``C_c = kappa * l`` [F]. Linear only for short antennas."""
    if warn and not ant.analytic_valid:
        warnings.warn(
            f"pad length {ant.pad_length * 1e3:.3g} mm exceeds the analytic-model cap "
            f"{ant.length_cap * 1e3:.3g} mm; C_c is extrapolated linearly",
            AnalyticModelWarning,
            stacklevel=2,
        )
    return ant.coupling_slope * ant.pad_length


def _coupling_q(circuit, phi, wg, c_c, placement, f):
    z_l = load_impedance(wg, placement, f).real
    if z_l <= 0.0:
        return math.inf
    return characteristic_impedance(circuit, phi) / z_l * (circuit.C / c_c) ** 2


def coupling_q(circuit, phi, wg, ant, placement, f=None, warn=True):
    """External (coupling) Q of the resonator.

    ``f`` is the frequency at which the waveguide load is evaluated; when
    omitted it is the resonance frequency at ``phi``. Returns ``math.inf``
    when the chip sits at a node of the standing wave (see :func:`is_uncoupled`).
    """
    if f is None:
        f = resonance_frequency(circuit, phi)
    c_c = antenna_coupling_capacitance(ant, warn=warn)
    return _coupling_q(circuit, phi, wg, c_c, placement, f)


def is_uncoupled(q):
    return math.isinf(q)


def calibrate_coupling_slope(
    circuit=EXTRACTED,
    phi=0.0,
    wg=WR90,
    pad_length=DESIGN_PAD_LENGTH,
    f=DESIGN_FREQUENCY,
    target_q=DESIGN_Q,
    placement=None,
):
    """Coupling slope [F/m] that yields ``target_q`` for the given geometry.

    Default placement is a quarter guide wavelength at ``f``.
    """
    if placement is None:
        placement = PlacementSpec.quarter_wave(wg, f)
    z_l = load_impedance(wg, placement, f).real
    if z_l <= 0:
        raise ValidationError("cannot calibrate at a standing-wave node")
    z_c = characteristic_impedance(circuit, phi)
    c_c = circuit.C * math.sqrt(z_c / (target_q * z_l))
    return c_c / pad_length


DEFAULT_COUPLING_SLOPE = calibrate_coupling_slope()


@dataclass
class SweepTable:
    """Tabulated coupling Q over a geometric sweep axis."""

    axis: str
    values: np.ndarray
    q: np.ndarray
    tags: list
    annotations: dict = field(default_factory=dict)

    def columns(self):
        return {
            self.axis: list(self.values),
            "Q": list(self.q),
            "tags": [";".join(t) for t in self.tags],
        }


def _check_grid(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValidationError(f"{name} grid must be 1-D and strictly increasing")
    if np.any(grid <= 0):
        raise ValidationError(f"{name} grid must be positive")
    return grid


def loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def q_vs_length_sweep(lengths, circuit=EXTRACTED, phi=0.0, wg=WR90, ant=None,
                      placement=None, f=DESIGN_FREQUENCY):
    """Q over antenna pad lengths. Points beyond the analytic cap are tagged
    ``beyond_cap`` and excluded from the reported log-log slope."""
    lengths = _check_grid(lengths, "length")
    if ant is None:
        ant = AntennaSpec(pad_length=lengths[0])
    if placement is None:
        placement = PlacementSpec.quarter_wave(wg, f)
    q = np.empty_like(lengths)
    tags = []
    for i, l in enumerate(lengths):
        a = AntennaSpec(l, ant.coupling_slope, ant.pad_width, ant.gap, ant.length_cap)
        q[i] = coupling_q(circuit, phi, wg, a, placement, f, warn=False)
        tags.append([] if a.analytic_valid else ["beyond_cap"])
    valid = lengths <= ant.length_cap
    notes = {"frequency_Hz": float(f), "distance_m": placement.d}
    if valid.sum() >= 2:
        notes["loglog_slope"] = loglog_slope(lengths[valid], q[valid])
    return SweepTable("pad_length_m", lengths, q, tags, notes)


def q_vs_distance_sweep(distances, circuit=EXTRACTED, phi=0.0, wg=WR90, ant=None,
                        f=DESIGN_FREQUENCY):
    """Q over chip-to-wall distance. Half-wave nodes are tagged ``uncoupled``;
    minima (odd quarter-wave points) and divergences inside the grid range are
    listed in the annotations."""
    distances = _check_grid(distances, "distance")
    if ant is None:
        ant = AntennaSpec(pad_length=DESIGN_PAD_LENGTH)
    lam = guide_wavelength(wg, f)
    q = np.empty_like(distances)
    tags = []
    for i, d in enumerate(distances):
        q[i] = coupling_q(circuit, phi, wg, ant, PlacementSpec(d), f, warn=False)
        tags.append(["uncoupled"] if math.isinf(q[i]) else [])
    lo, hi = distances[0], distances[-1]
    n_lo, n_hi = math.ceil(lo / (lam / 4)), math.floor(hi / (lam / 4))
    quarter = [k * lam / 4 for k in range(n_lo, n_hi + 1)]
    notes = {
        "frequency_Hz": float(f),
        "guide_wavelength_m": lam,
        "minima_m": [d for k, d in zip(range(n_lo, n_hi + 1), quarter) if k % 2 == 1],
        "divergences_m": [d for k, d in zip(range(n_lo, n_hi + 1), quarter) if k % 2 == 0],
    }
    return SweepTable("distance_m", distances, q, tags, notes)


def resonant_coupling_q(circuit, wg, ant, placement, f):
    """Q with the flux tuned so that the resonance sits at ``f``."""
    phi = flux_for_frequency(circuit, f)
    return coupling_q(circuit, phi, wg, ant, placement, f, warn=False)
