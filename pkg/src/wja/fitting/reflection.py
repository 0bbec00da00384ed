"""Single-port reflection fits of the resonator and the Q-versus-frequency
reduction of a flux series of traces.

Model (rates in rad/s, frequencies in Hz)::

    G(f) = exp(i (theta0 + 2 pi f tau))
           * (k_c - k_i + 4 pi i (f - f0)) / (k_c + k_i - 4 pi i (f - f0))
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from wja.errors import FitQualityWarning, ValidationError, WJAError
from wja.fitting.lsq import FitOptions, FitResult, damped_least_squares
from wja.fitting.tuning import TuningCurveData, fit_flux_tuning

TWO_PI = 2 * math.pi
NAMES = ("f0", "kappa_c", "kappa_i", "tau", "theta0")
MAGNITUDE_SLACK = 0.05


@dataclass
class ReflectionTrace:
    frequencies: np.ndarray
    gamma: np.ndarray
    eps: float = MAGNITUDE_SLACK

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=complex)
        if self.frequencies.ndim != 1 or self.frequencies.shape != self.gamma.shape:
            raise ValidationError("frequencies and gamma must be 1-D and equally long")
        if self.frequencies.size and np.any(np.diff(self.frequencies) <= 0):
            raise ValidationError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(self.gamma)):
            raise ValidationError("reflection data contain non-finite values")
        if np.any(np.abs(self.gamma) > 1 + self.eps):
            raise ValidationError(f"|gamma| exceeds 1 + {self.eps} (passive one-port expected)")

    def __len__(self):
        return self.frequencies.size

    def columns(self):
        return {
            "f_Hz": list(self.frequencies),
            "re": list(self.gamma.real),
            "im": list(self.gamma.imag),
        }


def reflection_model(f, f0, kappa_c, kappa_i, tau=0.0, theta0=0.0):
    f = np.asarray(f, dtype=float)
    x = 2 * TWO_PI * (f - f0)
    res = (kappa_c - kappa_i + 1j * x) / (kappa_c + kappa_i - 1j * x)
    return np.exp(1j * (theta0 + TWO_PI * f * tau)) * res


def synth_reflection_trace(f0, kappa_c, kappa_i, tau, theta0, frequencies, noise=0.0, seed=None):
    """Model trace plus independent Gaussian noise of standard deviation
    ``noise`` on each quadrature."""
    if noise < 0:
        raise ValidationError("noise must be >= 0")
    if noise > 0 and seed is None:
        raise ValidationError("a seed is required for noisy synthetic data")
    g = reflection_model(frequencies, f0, kappa_c, kappa_i, tau, theta0)
    if noise > 0:
        rng = np.random.default_rng(seed)
        g = g + noise * (rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size))
    return ReflectionTrace(frequencies, g, eps=max(MAGNITUDE_SLACK, 6 * noise))


def _wrap(a):
    return (a + math.pi) % TWO_PI - math.pi


def _crossing(f, y, level):
    """First interpolated abscissa where ``y`` crosses ``level``."""
    s = np.sign(y - level)
    idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
    if idx.size == 0:
        return None
    i = idx[0]
    if y[i + 1] == y[i]:
        return f[i]
    return f[i] + (level - y[i]) * (f[i + 1] - f[i]) / (y[i + 1] - y[i])


def _starts(trace):
    """Starting points ``(f0, kc, ki, tau, theta_c)`` for the over- and
    under-coupled hypotheses."""
    f = trace.frequencies
    f_ref = 0.5 * (f[0] + f[-1])
    span = f[-1] - f[0]
    ph = np.unwrap(np.angle(trace.gamma))
    starts = []
    for winding in (TWO_PI, 0.0):
        tau = (ph[-1] - ph[0] - winding) / (TWO_PI * span)
        psi = ph - TWO_PI * (f - f_ref) * tau
        if winding:
            mid = 0.5 * (psi[0] + psi[-1])
            f0 = _crossing(f, psi, mid)
            lo, hi = _crossing(f, psi, mid - math.pi / 2), _crossing(f, psi, mid + math.pi / 2)
            if f0 is None:
                continue
            width = abs(hi - lo) if lo is not None and hi is not None else span / 10
            kappa = TWO_PI * max(width, span * 1e-4)
            theta = float(np.interp(f0, f, psi))
            starts.append((f0, kappa, 0.0, tau, theta))
        else:
            mag = np.abs(trace.gamma)
            k = int(np.argmin(mag))
            f0 = f[k]
            below = f[mag < 0.5 * (mag[k] + np.median(mag))]
            width = below[-1] - below[0] if below.size > 1 else span / 10
            kappa = TWO_PI * max(width, span * 1e-4)
            theta = float(psi[k]) - math.pi
            starts.append((f0, kappa / 4, 3 * kappa / 4, tau, theta))
    return starts, f_ref


def _winding(kappa_c, kappa_i):
    """Total phase winding [deg] of the resonance term over all frequencies."""
    if kappa_c > kappa_i:
        return 360.0
    if kappa_c < kappa_i:
        return 0.0
    return 180.0


def trace_winding(trace, tau, theta0):
    """Phase accumulated across the trace once the delay is removed [deg]."""
    g = trace.gamma * np.exp(-1j * (theta0 + TWO_PI * trace.frequencies * tau))
    ph = np.unwrap(np.angle(g))
    return float(np.degrees(ph[-1] - ph[0]))


def fit_reflection_phase(trace, init=None, options=None):
    """Fit ``(f0, kappa_c, kappa_i, tau, theta0)`` to a one-port trace.

    Internally the phase reference is moved to the trace centre so that delay
    and phase offset decorrelate; the reported ``theta0`` and its covariance
    are transformed back to the ``theta0 + 2 pi f tau`` convention.

    The result's ``extras`` carry ``Q_c``, ``Q_i``, ``Q`` (loaded),
    ``winding_deg`` (full-axis winding of the fitted resonance: 360 when
    over-coupled, 0 when under-coupled) and ``trace_winding_deg`` (accumulated
    over the measured span).

    Warns
    -----
    FitQualityWarning
        When under-coupled, or when the trace winds less than 180 degrees.
    """
    f = trace.frequencies
    if len(trace) < 6:
        raise ValidationError("a reflection fit needs at least 6 points")
    starts, f_ref = _starts(trace)
    if init:
        x0 = dict(zip(("f0", "kappa_c", "kappa_i", "tau", "theta_c"), starts[0] if starts else (0,) * 5))
        x0.update(init)
        if "theta0" in init:
            x0["theta_c"] = init["theta0"] + TWO_PI * f_ref * x0["tau"]
        starts = [tuple(x0[k] for k in ("f0", "kappa_c", "kappa_i", "tau", "theta_c"))]
    if not starts:
        raise ValidationError("could not locate a resonance in the trace")

    options = options or FitOptions()
    bounds = {"kappa_c": (0.0, None), "kappa_i": (0.0, None)}
    bounds.update(options.bounds)
    opts = FitOptions(**{**options.__dict__, "bounds": bounds})
    names = ["f0", "kappa_c", "kappa_i", "tau", "theta_c"]

    def residual(p):
        f0, kc, ki, tau, theta_c = p
        if kc <= 0:
            return np.full(2 * len(trace), np.nan)
        return reflection_model(f - f_ref, f0 - f_ref, kc, ki, tau, theta_c) - trace.gamma

    best, best_warnings = None, []
    for s in starts:
        kappa = s[1] + s[2]
        scale = [kappa / TWO_PI, kappa, kappa, 1.0 / (TWO_PI * (f[-1] - f[0])), 1.0]
        # only the retained start's warnings reach the caller
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                res = damped_least_squares(residual, s, names, scale, opts)
            except (ValueError, FloatingPointError):
                continue
        if best is None or res.residual_norm < best.residual_norm:
            best, best_warnings = res, caught
    if best is None:
        raise ValidationError("reflection fit failed from every start")
    for w in best_warnings:
        warnings.warn(w.message, w.category, stacklevel=2)
    return _finish(best, trace, f_ref)


def _finish(res, trace, f_ref):
    e = res.estimates
    theta0 = _wrap(e["theta_c"] - TWO_PI * f_ref * e["tau"])
    T = np.eye(5)
    T[4, 3] = -TWO_PI * f_ref
    cov = None
    if res.covariance is not None:
        with np.errstate(invalid="ignore"):
            cov = T @ res.covariance @ T.T
        cov[np.isnan(cov)] = np.inf
    est = {"f0": e["f0"], "kappa_c": e["kappa_c"], "kappa_i": e["kappa_i"], "tau": e["tau"], "theta0": theta0}
    std = None
    if res.std_errors is not None and cov is not None:
        std = {k: float(math.sqrt(max(cov[i, i], 0.0))) for i, k in enumerate(NAMES)}
    f0, kc, ki = est["f0"], est["kappa_c"], est["kappa_i"]
    w0 = TWO_PI * f0
    extras = dict(res.extras)
    extras.update(
        Q_c=w0 / kc,
        Q_i=w0 / ki if ki > 0 else math.inf,
        Q=w0 / (kc + ki),
        winding_deg=_winding(kc, ki),
        trace_winding_deg=trace_winding(trace, est["tau"], theta0),
    )
    if cov is not None and np.all(np.isfinite(cov[:2, :2])):
        g = np.array([TWO_PI / kc, -w0 / kc**2])
        extras["Q_c_std"] = float(math.sqrt(max(g @ cov[:2, :2] @ g, 0.0)))
    extras["undercoupled"] = ki > kc
    # an under-coupled resonance never winds far, so only flag over-coupled fits
    extras["off_resonance"] = not extras["undercoupled"] and abs(extras["trace_winding_deg"]) < 180.0
    if extras["undercoupled"]:
        warnings.warn("fitted resonator is under-coupled (kappa_i > kappa_c)", FitQualityWarning, stacklevel=3)
    if extras["off_resonance"]:
        warnings.warn(
            f"trace winds only {extras['trace_winding_deg']:.1f} deg; resonance may lie off the trace",
            FitQualityWarning,
            stacklevel=3,
        )
    return FitResult(
        estimates=est,
        std_errors=std,
        residual_norm=res.residual_norm,
        converged=res.converged,
        iterations=res.iterations,
        covariance=cov,
        condition_number=res.condition_number,
        singular_direction=res.singular_direction,
        message=res.message,
        extras=extras,
    )


@dataclass
class QTable:
    """Per-trace reduction: resonance, Q, participation and Qp."""

    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    COLUMNS = ("flux", "f0_Hz", "Q", "Q_c", "Q_i", "p", "Qp")

    def columns(self):
        return {c: [r[c] for r in self.rows] for c in self.COLUMNS}


def extract_q_vs_frequency(traces, circuit=None, options=None):
    """Fit each ``(flux, ReflectionTrace)`` pair and tabulate ``f0, Q, p, Qp``.

    ``p`` follows from the circuit as ``1 - C L_stray (2 pi f0)^2``. When
    ``circuit`` is None it is obtained by fitting the tuning curve formed by
    the batch's own ``(flux, f0)`` pairs; ``C L_stray`` is identified even
    though the individual circuit parameters are not. Traces that fail are
    recorded in ``failures`` and skipped.
    """
    table = QTable()
    fitted = []
    for i, (flux, trace) in enumerate(traces):
        try:
            if not isinstance(trace, ReflectionTrace):
                trace = ReflectionTrace(*trace)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = fit_reflection_phase(trace, options=options)
            if not res.converged:
                raise WJAError(f"fit did not converge: {res.message}")
            if res.singular_direction is not None:
                raise WJAError("fit is singular; trace does not constrain the resonance")
            fitted.append((float(flux), res))
        except (WJAError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            table.failures.append({"index": i, "flux": float(flux), "error": str(exc)})

    if circuit is not None:
        c_ls = circuit.C * circuit.L_stray
    elif len(fitted) >= 4:
        data = TuningCurveData([fl for fl, _ in fitted], [r.estimates["f0"] for _, r in fitted])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            c_ls = fit_flux_tuning(data).extras["C_L_stray"]
    else:
        raise ValidationError("need a circuit or at least 4 fittable traces to get participation")

    for flux, res in fitted:
        f0 = res.estimates["f0"]
        p = 1.0 - c_ls * (TWO_PI * f0) ** 2
        Q = res.extras["Q"]
        table.rows.append(
            {"flux": flux, "f0_Hz": f0, "Q": Q, "Q_c": res.extras["Q_c"],
             "Q_i": res.extras["Q_i"], "p": p, "Qp": Q * p}
        )
    return table
