"""Stiff-pump four-wave-mixing amplifier model.

A Kerr (Duffing) cavity of total linewidth ``kappa`` is driven by two pumps
placed symmetrically about the signal frequency. Under the stiff-pump
approximation the pumps are replaced by an effective degenerate parametric
drive ``lam``; signal and idler then obey a 2x2 linear response whose
reflection gives the small-signal gain. Internally every rate is angular
(rad/s); Hz appear only at the interfaces (grids, bandwidths).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from wja.circuit import (
    EXTRACTED,
    flux_for_frequency,
    participation_ratio,
    resonance_frequency,
)
from wja.constants import E_CHARGE, HBAR, KB
from wja.errors import BandwidthUndefinedError, ThresholdError, ValidationError

TWO_PI = 2 * math.pi
QUADRATURE_DIP_DB = 10 * math.log10(2.0)

# Saturation anchor measured at 20 dB gain, and the measured (non-ideal) slope.
SATURATION_ANCHOR = (-132.0, 20.0)
MEASURED_SATURATION_SLOPE = 1.2


@dataclass(frozen=True)
class KerrParams:
    K: float
    n_crit: float
    kappa: float


@dataclass(frozen=True)
class PumpConfig:
    """Two pump tones symmetric about the signal centre ``f_s``."""

    f_s: float
    detuning: float = 500e6
    P1_dBm: float = -64.919
    P2_dBm: float = -63.740

    def __post_init__(self):
        if not (self.f_s > 0 and self.detuning > 0):
            raise ValidationError("pump frequencies must be positive")

    @property
    def f_p1(self):
        return self.f_s - self.detuning

    @property
    def f_p2(self):
        return self.f_s + self.detuning


@dataclass(frozen=True)
class EffectivePump:
    """Effective parametric drive ``lam`` and linewidth ``kappa`` (rad/s),
    centred on ``f_s`` [Hz]."""

    lam: float
    kappa: float
    f_s: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0 or self.lam < 0:
            raise ValidationError("need kappa > 0 and lam >= 0")
        if self.lam >= self.kappa / 2:
            raise ThresholdError(
                f"lam/(kappa/2) = {2 * self.lam / self.kappa:.6g} is at or beyond "
                "the parametric oscillation threshold"
            )


@dataclass(frozen=True)
class NoiseConfig:
    T_sys: float = 35.0
    T_N: float = 0.0
    rbw: float = 2.5e6

    def __post_init__(self):
        if not (self.T_sys > 0 and self.T_N >= 0 and self.rbw > 0):
            raise ValidationError("need T_sys > 0, T_N >= 0, rbw > 0")


def kerr_coefficient(circuit, phi, Q):
    """Self-Kerr shift per photon ``K = -p^3 e^2 / (2 hbar C)`` and the photon
    number at the onset of bistability."""
    if not Q > 0:
        raise ValidationError(f"Q must be > 0, got {Q!r}")
    p = participation_ratio(circuit, phi)
    K = -(p**3) * E_CHARGE**2 / (2 * HBAR * circuit.C)
    kappa = TWO_PI * resonance_frequency(circuit, phi) / Q
    return KerrParams(K=K, n_crit=kappa / (math.sqrt(3) * abs(K)), kappa=kappa)


# -- Duffing steady state ---------------------------------------------------


@dataclass(frozen=True)
class DuffingSolution:
    photons: tuple
    stable: tuple

    @property
    def count(self):
        return len(self.photons)


def _cubic_coeffs(drive, delta, K, kappa):
    """Dimensionless cubic ``u^3 + b u^2 + c u + d`` with ``u = |K| n / kappa``."""
    s = math.copysign(1.0, K)
    D = delta / kappa
    p = drive * abs(K) / kappa**3
    return 1.0, -2 * s * D, D * D + 0.25, -p


def cubic_discriminant(drive, delta, K, kappa):
    """Discriminant of the steady-state cubic, relative to its own term scale
    (0 at a double or triple root, > 0 when three real roots exist)."""
    _, b, c, d = _cubic_coeffs(drive, delta, K, kappa)
    terms = (18 * b * c * d, -4 * b**3 * d, b * b * c * c, -4 * c**3, -27 * d * d)
    scale = sum(abs(t) for t in terms)
    return sum(terms) / scale if scale else 0.0


def duffing_steady_state(drive, delta, K, kappa):
    """Intracavity photon numbers ``n`` solving
    ``n * ((delta - K n)^2 + kappa^2 / 4) = drive``.

    ``drive`` is the incoming photon flux times the coupling rate
    (photons * (rad/s)^2). Roots are bracketed between the turning points of
    the cubic and refined with Brent's method. With three roots the middle one
    is unstable; a tangent (double) root is reported once, as unstable.
    """
    if not kappa > 0:
        raise ValidationError("kappa must be > 0")
    if drive < 0:
        raise ValidationError("drive must be >= 0")
    if drive == 0:
        return DuffingSolution((0.0,), (True,))
    if K == 0:
        return DuffingSolution((drive / (delta**2 + kappa**2 / 4),), (True,))

    _, b, c, d = _cubic_coeffs(drive, delta, K, kappa)
    p = -d

    def g(u):
        return ((u + b) * u + c) * u + d

    # every root satisfies u <= 4p because (D - s u)^2 + 1/4 >= 1/4
    hi = 4 * p * (1 + 1e-12) + 1e-300
    disc = b * b - 3 * c
    knots = [0.0]
    if disc > 0:
        r = math.sqrt(disc)
        knots += [u for u in sorted(((-b - r) / 3, (-b + r) / 3)) if 0 < u < hi]
    knots.append(hi)

    roots, tangent = [], []
    for lo_k, hi_k in zip(knots[:-1], knots[1:]):
        if g(lo_k) * g(hi_k) < 0:
            roots.append(brentq(g, lo_k, hi_k, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    # turning point that touches zero within round-off is a tangent root
    for u in knots[1:-1]:
        scale = abs(u**3) + abs(b * u * u) + abs(c * u) + p
        if abs(g(u)) <= 1e-12 * scale and all(abs(u - r) > 1e-9 * max(u, 1e-300) for r in roots):
            roots.append(u)
            tangent.append(u)
    roots.sort()
    n_scale = kappa / abs(K)
    if len(roots) == 3:
        stable = (True, False, True)
    else:
        stable = tuple(u not in tangent for u in roots)
    return DuffingSolution(tuple(u * n_scale for u in roots), stable)


def bifurcation_point(K, kappa):
    """Critical detuning [rad/s] and photon number at the onset of bistability."""
    if K == 0:
        raise ValidationError("no bifurcation for a linear cavity (K = 0)")
    if not kappa > 0:
        raise ValidationError("kappa must be > 0")
    return math.copysign(math.sqrt(3) * kappa / 2, K), kappa / (math.sqrt(3) * abs(K))


def critical_drive(K, kappa):
    """Drive at which the three steady states merge (at the critical detuning)."""
    _, n_c = bifurcation_point(K, kappa)
    return n_c * kappa**2 / 3


# -- parametric gain --------------------------------------------------------


def pump_photons(P_dBm, f_p, f_0, kappa, attenuation_dB):
    """Stiff-pump photon number from the linear cavity response at the pump
    detuning. ``attenuation_dB`` lumps line loss and the weak pump-port
    coupling into one calibration number."""
    P = 1e-3 * 10 ** ((P_dBm - attenuation_dB) / 10)
    det = TWO_PI * (f_p - f_0)
    return kappa * P / (HBAR * TWO_PI * f_p) / (det**2 + kappa**2 / 4)


def effective_pump_strength(pump, K, kappa, pump_line_attenuation):
    """Effective drive ``lam = 2|K| sqrt(n_p1 n_p2)``.

    Raises
    ------
    ThresholdError
        If ``lam >= kappa / 2``.
    """
    lam = _raw_lambda(pump, K, kappa) * 10 ** (-pump_line_attenuation / 10)
    return EffectivePump(lam, kappa, pump.f_s)


def lambda_for_gain(G, kappa):
    """Drive giving peak power gain ``G`` (inverse of the zero-detuning gain)."""
    if G < 1:
        raise ValidationError("power gain must be >= 1")
    s = math.sqrt(G)
    return kappa / 2 * math.sqrt((s - 1) / (s + 1))


def calibrate_pump_attenuation(pump, K, kappa, target_gain_dB):
    """Attenuation [dB] that makes ``pump`` produce ``target_gain_dB``.

    ``lam`` scales as 10**(-A/10), so the calibration is closed-form.
    """
    lam0 = _raw_lambda(pump, K, kappa)
    target = lambda_for_gain(10 ** (target_gain_dB / 10), kappa)
    return 10 * math.log10(lam0 / target)


def _raw_lambda(pump, K, kappa):
    n1 = pump_photons(pump.P1_dBm, pump.f_p1, pump.f_s, kappa, 0.0)
    n2 = pump_photons(pump.P2_dBm, pump.f_p2, pump.f_s, kappa, 0.0)
    return 2 * abs(K) * math.sqrt(n1 * n2)


def response_matrix(ep, delta):
    """Reflection matrix on (signal, idler*) at signal detuning ``delta``.

    Solves ``M [a, a_dag] = sqrt(kappa) [a_in, a_in_dag]`` with
    ``M = [[k/2 - i d, i lam], [-i lam, k/2 - i d]]`` and returns
    ``S = kappa M^-1 - 1``, stacked along the leading axis.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    M = np.empty(delta.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = M[..., 1, 1] = ep.kappa / 2 - 1j * delta
    M[..., 0, 1] = 1j * ep.lam
    M[..., 1, 0] = -1j * ep.lam
    return ep.kappa * np.linalg.inv(M) - np.eye(2)


def small_signal_gain(ep, delta):
    """Phase-preserving power gain at signal detuning ``delta`` [rad/s]."""
    G = np.abs(response_matrix(ep, delta)[..., 0, 0]) ** 2
    return float(G[0]) if np.ndim(delta) == 0 else G


@dataclass
class GainProfile:
    frequencies: np.ndarray
    gain_dB: np.ndarray
    f_s: float
    tags: list = field(default_factory=list)

    @property
    def peak_dB(self):
        return float(np.max(self.gain_dB))

    def columns(self):
        return {"f_Hz": list(self.frequencies), "gain_dB": list(self.gain_dB)}


def gain_profile(ep, frequencies):
    f = np.asarray(frequencies, dtype=float)
    if f.ndim != 1 or np.any(np.diff(f) <= 0):
        raise ValidationError("frequency grid must be strictly increasing")
    G = small_signal_gain(ep, TWO_PI * (f - ep.f_s))
    return GainProfile(f, 10 * np.log10(np.atleast_1d(G)), ep.f_s)


def _half_power_crossings(f, G):
    k = int(np.argmax(G))
    half = G[k] / 2
    below = np.nonzero(G[:k] < half)[0]
    above = np.nonzero(G[k:] < half)[0]
    if below.size == 0 or above.size == 0:
        raise BandwidthUndefinedError("half-power points fall outside the grid")
    i = below[-1]
    lo = f[i] + (half - G[i]) * (f[i + 1] - f[i]) / (G[i + 1] - G[i])
    j = k + above[0]
    hi = f[j - 1] + (half - G[j - 1]) * (f[j] - f[j - 1]) / (G[j] - G[j - 1])
    return lo, hi


def gain_bandwidth(profile):
    """Full width at half maximum power gain [Hz] and the amplitude
    gain-bandwidth product ``sqrt(G_peak) * B`` [Hz]."""
    if profile.peak_dB <= 10 * math.log10(2):
        raise BandwidthUndefinedError(
            f"peak gain {profile.peak_dB:.3g} dB is below 3 dB; bandwidth undefined"
        )
    G = 10 ** (profile.gain_dB / 10)
    lo, hi = _half_power_crossings(profile.frequencies, G)
    B = hi - lo
    return B, math.sqrt(G.max()) * B


def exact_bandwidth(ep):
    """Half-power bandwidth [Hz] found by root-bracketing the gain curve."""
    G0 = small_signal_gain(ep, 0.0)
    if G0 <= 2:
        raise BandwidthUndefinedError("peak gain below 3 dB")
    d = brentq(lambda x: small_signal_gain(ep, x) - G0 / 2, 0.0, 10 * ep.kappa, xtol=1e-12 * ep.kappa)
    return 2 * d / TWO_PI


def quadrature_gains(G):
    """Amplitude gains of the amplified and de-amplified quadratures."""
    if G < 1:
        raise ValidationError(f"power gain must be >= 1, got {G!r}")
    g_amp = math.sqrt(G) + math.sqrt(G - 1)
    return g_amp, 1.0 / g_amp


def photon_number(P_dBm, f, B):
    """Photons per bandwidth ``B`` carried by power ``P_dBm`` at frequency ``f``."""
    if not (f > 0 and B > 0):
        raise ValidationError("need f > 0 and B > 0")
    return 1e-3 * 10 ** (P_dBm / 10) / (HBAR * TWO_PI * f * B)


def saturation_power(G_dB, anchor=SATURATION_ANCHOR, slope=1.0):
    """Input 1 dB compression power [dBm]: affine in gain through ``anchor``
    ``(P_ref_dBm, G_ref_dB)`` with slope ``-slope`` dB/dB."""
    if G_dB <= 3:
        raise ValidationError("saturation power is defined for gains above 3 dB")
    P_ref, G_ref = anchor
    return P_ref - slope * (G_dB - G_ref)


# -- noise ------------------------------------------------------------------


def quantum_temperature(f):
    """Half-photon noise temperature ``hbar omega / 2 k_B`` [K]."""
    return HBAR * TWO_PI * f / (2 * KB)


def _nvr_linear(G, T_N, T_sys, T_Q):
    return (G * (T_Q + T_N) + T_sys) / (T_Q + T_sys)


def noise_visibility(G, cfg, f):
    """Increase [dB] of the output noise when the amplifier is switched on."""
    G_arr = np.asarray(G, dtype=float)
    if np.any(G_arr < 1):
        raise ValidationError("power gain must be >= 1")
    v = 10 * np.log10(_nvr_linear(G_arr, cfg.T_N, cfg.T_sys, quantum_temperature(f)))
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True)
class NoiseBound:
    T_N: float
    ratio_to_TQ: float
    T_Q: float
    clamped: bool


def noise_temperature_bound(nvr_dB, G, T_sys, f):
    """Added noise temperature implied by a measured visibility ratio.

    A negative inversion is clamped to ``T_N = 0`` with ``clamped=True``.
    """
    if not G > 1:
        raise ValidationError("inversion needs G > 1")
    T_Q = quantum_temperature(f)
    R = 10 ** (nvr_dB / 10)
    T_N = (R * (T_Q + T_sys) - T_sys) / G - T_Q
    clamped = T_N < 0
    if clamped:
        T_N = 0.0
    return NoiseBound(T_N, T_N / T_Q, T_Q, clamped)


@dataclass
class NVRTrace:
    frequencies: np.ndarray
    ideal_dB: np.ndarray
    measured_dB: np.ndarray
    dip_depth_dB: float
    dip_width: float

    def columns(self):
        return {
            "f_Hz": list(self.frequencies),
            "nvr_ideal_dB": list(self.ideal_dB),
            "nvr_measured_dB": list(self.measured_dB),
        }


def _cell_overlap(offsets, half_width):
    """Fraction of each unit cell centred on ``offsets`` lying in
    ``[-half_width, half_width]``."""
    lo = np.maximum(offsets - 0.5, -half_width)
    hi = np.minimum(offsets + 0.5, half_width)
    return np.clip(hi - lo, 0.0, 1.0)


def _box_smooth(y, width_cells):
    """Running mean over a window ``width_cells`` wide, with fractional edge
    weights and edge renormalization."""
    h = width_cells / 2
    m = int(math.ceil(h + 0.5))
    k = np.arange(-m, m + 1, dtype=float)
    w = _cell_overlap(k, h)
    num = np.convolve(y, w, mode="same")
    den = np.convolve(np.ones_like(y), w, mode="same")
    return num / den


def nvr_spectrum(ep, cfg, frequencies, dip_band=0.5e6):
    """Noise visibility across a uniform frequency grid.

    The ideal trace follows the gain profile, halved (-3.01 dB) within
    ``dip_band`` of the centre where only one quadrature is amplified. The
    measured trace is the ideal linear power averaged over a rectangular
    window of width ``cfg.rbw``. Depth is taken at the grid point nearest
    ``f_s``, relative to the same smoothing applied without the dip. Width is
    the full width at half maximum of the removed linear power.
    """
    f = np.asarray(frequencies, dtype=float)
    df = np.diff(f)
    if f.ndim != 1 or f.size < 3 or np.any(df <= 0) or not np.allclose(df, df[0], rtol=1e-9):
        raise ValidationError("nvr_spectrum needs a uniform, increasing grid")
    df = df[0]
    G = np.atleast_1d(small_signal_gain(ep, TWO_PI * (f - ep.f_s)))
    base = _nvr_linear(G, cfg.T_N, cfg.T_sys, quantum_temperature(ep.f_s))
    inside = _cell_overlap((f - ep.f_s) / df, dip_band / df / 2)
    ideal = base * (1 - 0.5 * inside)
    smooth = _box_smooth(ideal, cfg.rbw / df)
    smooth_base = _box_smooth(base, cfg.rbw / df)
    # depth at the signal frequency, relative to the dip-free smoothing
    k = int(np.argmin(np.abs(f - ep.f_s)))
    depth = -10 * math.log10(smooth[k] / smooth_base[k])
    # width from the removed linear power, whose profile is the window
    # swept across a fixed lump and so does not depend on the gain shape
    removed = smooth_base - smooth
    half = removed[k] / 2
    left = np.nonzero(removed[:k] < half)[0]
    right = np.nonzero(removed[k:] < half)[0]
    if left.size == 0 or right.size == 0:
        width = float("nan")
    else:
        i, j = left[-1], k + right[0]
        lo = f[i] + (half - removed[i]) * df / (removed[i + 1] - removed[i])
        hi = f[j - 1] + (half - removed[j - 1]) * df / (removed[j] - removed[j - 1])
        width = hi - lo
    return NVRTrace(f, 10 * np.log10(ideal), 10 * np.log10(smooth), depth, width)


# -- default operating point ------------------------------------------------


def default_operating_point(circuit=None, f_s=9.5e9, Q=100.0):
    """Kerr parameters with the resonance tuned to ``f_s`` and fixed ``Q``."""
    circuit = circuit or EXTRACTED
    phi = flux_for_frequency(circuit, f_s)
    return kerr_coefficient(circuit, phi, Q)
