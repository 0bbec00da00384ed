"""Fitting the flux-tuning curve of the resonance frequency.

In reduced-flux mode the abscissa is ``phi`` directly; in coil-current mode
``phi = alpha * (I_coil - I_off)`` and the calibration is fitted jointly.

Note that the tuning curve depends on the circuit only through the products
``C * L_stray`` and ``C * L_J0``: scaling ``C`` and ``I0`` by ``s`` and
``L_stray`` by ``1/s`` leaves every frequency unchanged. A free three-parameter
fit is therefore singular along that direction and the absolute values of
``I0, C, L_stray`` are set by the starting capacitance (``C_guess``) unless
one of them is held fixed. The identifiable quantities (zero-flux frequency,
zero-flux participation ratio) are reported separately with their own
uncertainties.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from wja.circuit import DESIGN, CircuitParams
from wja.constants import PHI0
from wja.errors import DegeneracyWarning, ValidationError
from wja.fitting.lsq import FitOptions, damped_least_squares

CIRCUIT_NAMES = ("I0", "C", "L_stray")
COIL_NAMES = ("alpha", "I_off")
DEGENERACY_CONDITION = 1e8
TWO_PI = 2 * math.pi


@dataclass
class TuningCurveData:
    """Resonance frequencies ``f0`` [Hz] against reduced flux
    (``flux_mode=True``) or coil current [A]."""

    x: np.ndarray
    f0: np.ndarray
    flux_mode: bool = True

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.f0 = np.asarray(self.f0, dtype=float)
        if self.x.shape != self.f0.shape or self.x.ndim != 1:
            raise ValidationError("x and f0 must be 1-D arrays of equal length")
        if self.x.size < 3:
            raise ValidationError("a tuning curve needs at least 3 points")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.f0))):
            raise ValidationError("tuning data contain non-finite values")
        if np.any(self.f0 <= 0):
            raise ValidationError("resonance frequencies must be positive")

    def __len__(self):
        return self.x.size

    def columns(self):
        key = "flux" if self.flux_mode else "current_A"
        return {key: list(self.x), "f0_Hz": list(self.f0)}


def tuning_frequency(phi, I0, C, L_stray):
    L_J = PHI0 / (TWO_PI * I0) / np.cos(np.pi * np.asarray(phi, dtype=float))
    return 1.0 / (TWO_PI * np.sqrt(C * (L_stray + L_J)))


def _phi(x, flux_mode, alpha, I_off):
    return x if flux_mode else alpha * (x - I_off)


def tuning_model(theta, x, flux_mode=True):
    """Resonance frequency for ``theta = (I0, C, L_stray[, alpha, I_off])``."""
    I0, C, L_stray = theta[:3]
    phi = _phi(np.asarray(x, float), flux_mode, *(theta[3:5] if not flux_mode else (1.0, 0.0)))
    return tuning_frequency(phi, I0, C, L_stray)


def tuning_jacobian(theta, x, flux_mode=True):
    """Analytic derivative of :func:`tuning_model` with respect to ``theta``."""
    I0, C, L_stray = theta[:3]
    x = np.asarray(x, float)
    alpha, I_off = (1.0, 0.0) if flux_mode else theta[3:5]
    phi = _phi(x, flux_mode, alpha, I_off)
    L_J = PHI0 / (TWO_PI * I0) / np.cos(np.pi * phi)
    L = L_stray + L_J
    f = 1.0 / (TWO_PI * np.sqrt(C * L))
    cols = [f * L_J / (2 * L * I0), -f / (2 * C), -f / (2 * L)]
    if not flux_mode:
        df_dphi = -f / (2 * L) * L_J * np.pi * np.tan(np.pi * phi)
        cols += [df_dphi * (x - I_off), -df_dphi * alpha]
    return np.column_stack(cols)


def synth_tuning_curve(params, grid, noise=0.0, seed=None, alpha=None, I_off=0.0):
    """Synthetic tuning curve with multiplicative Gaussian frequency noise.

    ``grid`` is reduced flux unless ``alpha`` is given, in which case it is
    coil current and ``phi = alpha * (grid - I_off)``.
    """
    if noise < 0:
        raise ValidationError("noise must be >= 0")
    if noise > 0 and seed is None:
        raise ValidationError("a seed is required for noisy synthetic data")
    grid = np.asarray(grid, dtype=float)
    flux_mode = alpha is None
    phi = grid if flux_mode else alpha * (grid - I_off)
    if np.any(np.abs(phi) >= 0.5):
        raise ValidationError("grid reaches |phi| >= 0.5")
    f = tuning_frequency(phi, params.I0, params.C, params.L_stray)
    if noise > 0:
        f = f * (1 + noise * np.random.default_rng(seed).standard_normal(f.size))
    return TuningCurveData(grid, f, flux_mode)


def _linear_combos(phi, f):
    """Weighted fit of ``1/omega^2 = a + b sec(pi phi)``; returns ``(a, b, rss)``."""
    y = 1.0 / (TWO_PI * f) ** 2
    A = np.column_stack([np.ones_like(phi), 1.0 / np.cos(np.pi * phi)]) / y[:, None]
    coef, res, *_ = np.linalg.lstsq(A, np.ones_like(y), rcond=None)
    rss = float(res[0]) if res.size else float(np.sum((A @ coef - 1) ** 2))
    return coef[0], coef[1], rss


def _coil_calibration_guess(x, f):
    """Grid search for ``(alpha, I_off)`` maximizing linear-fit quality."""
    span = x.max() - x.min()
    k = int(np.argmax(f))
    offsets = x[k] + np.linspace(-0.25, 0.25, 41) * span
    best = (math.inf, None, None)
    for I_off in offsets:
        reach = np.max(np.abs(x - I_off))
        if reach == 0:
            continue
        for alpha in np.linspace(0.02, 0.495, 60) / reach:
            phi = alpha * (x - I_off)
            a, b, rss = _linear_combos(phi, f)
            if b > 0 and rss < best[0]:
                best = (rss, alpha, I_off)
    if best[1] is None:
        raise ValidationError("could not locate the flux calibration of the coil data")
    return best[1], best[2]


def initial_guess(data, C_guess=DESIGN.C):
    """Starting point consistent with the data's identifiable combinations.

    The capacitance is taken as ``C_guess`` (the design value by default);
    see the module docstring for why it cannot be inferred from the data.
    """
    guess = {}
    if data.flux_mode:
        phi = data.x
    else:
        alpha, I_off = _coil_calibration_guess(data.x, data.f0)
        guess.update(alpha=alpha, I_off=I_off)
        phi = alpha * (data.x - I_off)
    if np.any(np.abs(phi) >= 0.5):
        raise ValidationError("reduced flux outside |phi| < 0.5")
    a, b, _ = _linear_combos(phi, data.f0)
    if b <= 0:
        raise ValidationError("tuning data do not decrease with |flux|; cannot initialize")
    L_J0 = b / C_guess
    guess.update(I0=PHI0 / (TWO_PI * L_J0), C=C_guess, L_stray=max(a, 0.0) / C_guess)
    return guess


def _identifiable(est, data, residual_norm):
    """Zero-flux frequency and participation with delta-method errors, from
    the regular parameterization ``(a, b) = (C L_stray, C L_J0)``."""
    a = est["C"] * est["L_stray"]
    b = est["C"] * PHI0 / (TWO_PI * est["I0"])
    phi = _phi(data.x, data.flux_mode, est.get("alpha", 1.0), est.get("I_off", 0.0))
    sec = 1.0 / np.cos(np.pi * phi)
    f = 1.0 / (TWO_PI * np.sqrt(a + b * sec))
    # conditional on the fitted flux calibration in coil mode
    g = -0.5 * f / (a + b * sec) / data.f0
    J = np.column_stack([g, g * sec])
    dof = max(len(data) - (3 if data.flux_mode else 5) + 1, 1)
    sigma2 = residual_norm**2 / dof
    try:
        cov = np.linalg.inv(J.T @ J) * sigma2
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.inf)
    f_max = 1.0 / (TWO_PI * math.sqrt(a + b))
    p0 = b / (a + b)
    gf = np.array([-0.5 * f_max / (a + b)] * 2)
    gp = np.array([-b, a]) / (a + b) ** 2
    return {
        "f_max_Hz": f_max,
        "f_max_std_Hz": float(math.sqrt(max(gf @ cov @ gf, 0.0))),
        "p_zero_flux": p0,
        "p_zero_flux_std": float(math.sqrt(max(gp @ cov @ gp, 0.0))),
        "C_L_stray": a,
        "C_L_J0": b,
    }


def fit_flux_tuning(data, init=None, options=None, fixed=None, C_guess=DESIGN.C,
                    n_starts=8, seed=0):
    """Fit ``(I0, C, L_stray[, alpha, I_off])`` to a tuning curve.

    Parameters
    ----------
    data : TuningCurveData
    init : dict, optional
        Starting values; missing entries come from :func:`initial_guess`.
    fixed : dict, optional
        Parameters held at the given values (e.g. ``{"C": 1e-12}`` to break
        the capacitance scaling degeneracy).
    n_starts : int
        Number of starts (the first unperturbed, the rest log-normally
        perturbed by 10% with ``seed``); the lowest residual wins.

    Warns
    -----
    DegeneracyWarning
        When the covariance condition number exceeds 1e8 or the normal
        equations are singular.
    """
    fixed = dict(fixed or {})
    names = list(CIRCUIT_NAMES) + ([] if data.flux_mode else list(COIL_NAMES))
    unknown = set(fixed) - set(names)
    if unknown:
        raise ValidationError(f"unknown fixed parameters: {sorted(unknown)}")
    start = initial_guess(data, fixed.get("C", C_guess))
    start.update(init or {})
    start.update(fixed)
    free = [n for n in names if n not in fixed]
    if len(data) < len(free) + 1:
        raise ValidationError(f"{len(free)} free parameters need at least {len(free) + 1} points")

    options = options or FitOptions()
    bounds = {"I0": (0.0, None), "C": (0.0, None), "L_stray": (0.0, None)}
    bounds.update(options.bounds)
    opts = FitOptions(**{**options.__dict__, "bounds": bounds})

    def full(theta_free):
        vals = dict(start)
        vals.update(zip(free, theta_free))
        return np.array([vals[n] for n in names])

    def residual(theta_free):
        theta = full(theta_free)
        if theta[0] <= 0 or theta[1] <= 0:
            return np.full(len(data), np.nan)
        phi = _phi(data.x, data.flux_mode, *(theta[3:5] if not data.flux_mode else (1.0, 0.0)))
        if np.any(np.abs(phi) >= 0.5):
            return np.full(len(data), np.nan)
        return tuning_model(theta, data.x, data.flux_mode) / data.f0 - 1.0

    x0 = np.array([start[n] for n in free])
    scale = np.array([abs(start[n]) if start[n] != 0 else _default_scale(n, start) for n in free])
    rng = np.random.default_rng(seed)
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        for k in range(max(n_starts, 1)):
            xs = x0 if k == 0 else x0 * np.exp(0.1 * rng.standard_normal(x0.size))
            try:
                res = damped_least_squares(residual, xs, free, scale, opts)
            except (ValueError, FloatingPointError):
                continue
            if best is None or res.residual_norm < best.residual_norm * (1 - 1e-12):
                best = res
    if best is None:
        raise ValidationError("no start produced a finite residual")

    best.estimates = {n: float(v) for n, v in zip(names, full([best.estimates[n] for n in free]))}
    if best.std_errors is not None:
        best.std_errors.update({n: 0.0 for n in fixed})
    best.extras.update(_identifiable(best.estimates, data, best.residual_norm))
    best.extras["fixed"] = sorted(fixed)
    best.extras["flux_mode"] = data.flux_mode
    degenerate = best.singular_direction is not None or best.condition_number > DEGENERACY_CONDITION
    best.extras["degenerate"] = degenerate
    if degenerate:
        warnings.warn(
            f"flux-tuning fit is degenerate (covariance condition number "
            f"{best.condition_number:.3g}); only C*L_stray and C*L_J0 are constrained "
            "unless a circuit parameter is fixed",
            DegeneracyWarning,
            stacklevel=2,
        )
    return best


def _default_scale(name, start):
    if name == "L_stray":
        return PHI0 / (TWO_PI * start["I0"])
    if name == "I_off":
        return 1.0 / abs(start.get("alpha", 1.0))
    return 1.0


def circuit_from_fit(result):
    e = result.estimates
    return CircuitParams(e["I0"], e["C"], e["L_stray"])
