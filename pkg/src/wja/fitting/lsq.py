"""Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Parameters are fitted in affine-scaled coordinates ``x = x0 + scale * z`` so
that quantities of very different magnitude (amperes, farads, hertz) share
one damping parameter. Jacobians are central differences in ``z``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from wja.errors import DegeneracyWarning, ValidationError

# Relative singular value of J below which J^T J is treated as singular.
SINGULAR_RCOND = 1e-7


@dataclass
class FitOptions:
    max_iterations: int = 200
    xtol: float = 1e-10
    ftol: float = 1e-15
    damping_init: float = 1e-3
    damping_grow: float = 10.0
    damping_shrink: float = 0.3
    max_damping_trials: int = 40
    diff_step: float = 1e-6
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not (self.xtol > 0 and self.ftol >= 0 and self.damping_init >= 0 and self.diff_step > 0):
            raise ValidationError("tolerances and damping must be positive")
        if not (self.damping_grow > 1 and 0 < self.damping_shrink < 1):
            raise ValidationError("need damping_grow > 1 and 0 < damping_shrink < 1")
        for name, (lo, hi) in self.bounds.items():
            if lo is not None and hi is not None and lo >= hi:
                raise ValidationError(f"inconsistent bounds for {name}: {lo} >= {hi}")


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``std_errors`` is None unless the fit converged. ``singular_direction``
    names the unidentified parameter combination (in scaled units) when the
    normal equations are singular.
    """

    estimates: dict
    std_errors: dict
    residual_norm: float
    converged: bool
    iterations: int
    covariance: np.ndarray = None
    condition_number: float = math.inf
    singular_direction: dict = None
    message: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def names(self):
        return list(self.estimates)

    def to_dict(self):
        out = {
            "estimates": dict(self.estimates),
            "std_errors": None if self.std_errors is None else dict(self.std_errors),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "condition_number": self.condition_number,
            "singular_direction": self.singular_direction,
            "message": self.message,
        }
        out.update(self.extras)
        return out


def _flatten(r):
    r = np.asarray(r)
    if np.iscomplexobj(r):
        return np.concatenate([r.real.ravel(), r.imag.ravel()])
    return r.astype(float).ravel()


class _Problem:
    def __init__(self, fun, x0, scale, lower, upper, h):
        self.fun = fun
        self.x0 = x0
        self.scale = scale
        self.lower = (lower - x0) / scale
        self.upper = (upper - x0) / scale
        self.h = h
        self.nfev = 0

    def x(self, z):
        return self.x0 + self.scale * z

    def residual(self, z):
        self.nfev += 1
        return _flatten(self.fun(self.x(z)))

    def clip(self, z):
        return np.minimum(np.maximum(z, self.lower), self.upper)

    def jacobian(self, z, r0):
        J = np.empty((r0.size, z.size))
        for j in range(z.size):
            e = np.zeros_like(z)
            e[j] = self.h
            rp, rm = self.residual(z + e), self.residual(z - e)
            if np.all(np.isfinite(rp)) and np.all(np.isfinite(rm)):
                J[:, j] = (rp - rm) / (2 * self.h)
            elif np.all(np.isfinite(rp)):
                J[:, j] = (rp - r0) / self.h
            elif np.all(np.isfinite(rm)):
                J[:, j] = (r0 - rm) / self.h
            else:
                raise FloatingPointError(f"residual not finite around parameter {j}")
        return J


def _damped_step(J, r, mu):
    """Solve ``(J^T J + mu diag(J^T J)) dz = -J^T r`` as an augmented
    least-squares problem (minimum-norm when singular)."""
    if mu == 0:
        return np.linalg.lstsq(J, -r, rcond=None)[0]
    d = np.sqrt(mu * np.maximum(np.sum(J * J, axis=0), 1e-300))
    A = np.vstack([J, np.diag(d)])
    b = np.concatenate([-r, np.zeros(J.shape[1])])
    return np.linalg.lstsq(A, b, rcond=None)[0]


def damped_least_squares(fun, x0, names=None, scale=None, options=None):
    """Minimize ``sum |fun(x)|^2`` from ``x0``.

    Each iteration first tries the undamped Gauss-Newton step and falls back to increasingly damped steps until
    the cost decreases. Bounds from ``options.bounds`` are enforced by
    projection.

    Parameters
    ----------
    fun : callable
        Maps a parameter vector to a real or complex residual array.
    x0 : array_like
        Starting point.
    names : list of str, optional
        Parameter names used in the returned dictionaries.
    scale : array_like, optional
        Characteristic size of each parameter; defaults to ``|x0|`` (1 where 0).
    options : FitOptions, optional

    Returns
    -------
    FitResult
    """
    options = options or FitOptions()
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    names = list(names) if names is not None else [f"x{i}" for i in range(n)]
    if scale is None:
        scale = np.where(x0 != 0, np.abs(x0), 1.0)
    scale = np.asarray(scale, dtype=float)
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for i, name in enumerate(names):
        lo, hi = options.bounds.get(name, (None, None))
        lower[i] = -np.inf if lo is None else lo
        upper[i] = np.inf if hi is None else hi
    prob = _Problem(fun, x0, scale, lower, upper, options.diff_step)

    z = prob.clip(np.zeros(n))
    r = prob.residual(z)
    if not np.all(np.isfinite(r)):
        raise ValidationError("residual is not finite at the initial point")
    if r.size < n:
        raise ValidationError(f"{n} parameters but only {r.size} residuals")
    cost = 0.5 * float(r @ r)
    mu = options.damping_init
    converged = False
    message = "maximum iterations reached"
    it = 0
    for it in range(1, options.max_iterations + 1):
        J = prob.jacobian(z, r)
        accepted = False
        trials = [0.0] + [
            mu * options.damping_grow**k for k in range(options.max_damping_trials)
        ]
        for trial_mu in trials:
            dz = _damped_step(J, r, trial_mu)
            z_new = prob.clip(z + dz)
            r_new = prob.residual(z_new)
            if not np.all(np.isfinite(r_new)):
                continue
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new <= cost:
                accepted = True
                break
        if not accepted:
            message = "no damped step reduces the cost"
            converged = _stationary(J, r, z + x0 / scale)
            break
        step = z_new - z
        rel_drop = (cost - cost_new) / cost if cost > 0 else 0.0
        z, r = z_new, r_new
        cost = cost_new
        mu = max((trial_mu or mu) * options.damping_shrink, 1e-15)
        if np.linalg.norm(step) <= options.xtol * (np.linalg.norm(z + x0 / scale) + options.xtol):
            converged, message = True, "relative step below xtol"
            break
        if cost == 0.0:
            converged, message = True, "zero residual"
            break
        if rel_drop <= options.ftol and np.linalg.norm(step) <= math.sqrt(options.xtol):
            converged, message = True, "relative cost reduction below ftol"
            break

    J = prob.jacobian(z, r)
    return _finish(prob, z, r, J, names, converged, it, message)


def _stationary(J, r, z_abs):
    """No descent found: accept when the Gauss-Newton step is round-off sized."""
    dz = np.linalg.lstsq(J, -r, rcond=None)[0]
    return bool(np.linalg.norm(dz) <= 1e-6 * (np.linalg.norm(z_abs) + 1e-6))


def _finish(prob, z, r, J, names, converged, iterations, message):
    x = prob.x(z)
    m, n = J.shape
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    cond = (s[0] / s[-1]) ** 2 if s[-1] > 0 else math.inf
    dof = max(m - n, 1)
    sigma2 = float(r @ r) / dof
    singular = s[-1] <= SINGULAR_RCOND * s[0]
    inv_s2 = np.where(s > SINGULAR_RCOND * s[0], 1.0 / np.maximum(s, 1e-300) ** 2, np.inf)
    cov_z = (Vt.T * np.where(np.isfinite(inv_s2), inv_s2, 0.0)) @ Vt * sigma2
    cov = cov_z * np.outer(prob.scale, prob.scale)
    direction = None
    if singular:
        v = Vt[-1]
        v = v / v[np.argmax(np.abs(v))]
        direction = {nm: float(c) for nm, c in zip(names, v)}
        for k in range(n):
            if s[k] <= SINGULAR_RCOND * s[0]:
                for j in range(n):
                    if abs(Vt[k, j]) > 1e-6:
                        cov[j, j] = math.inf
        warnings.warn(
            "singular normal equations; unidentified direction "
            + ", ".join(f"{k}:{v:+.3g}" for k, v in direction.items()),
            DegeneracyWarning,
            stacklevel=3,
        )
    std = None
    if converged:
        std = {nm: float(math.sqrt(cov[i, i])) for i, nm in enumerate(names)}
    return FitResult(
        estimates={nm: float(v) for nm, v in zip(names, x)},
        std_errors=std,
        residual_norm=float(np.linalg.norm(r)),
        converged=converged,
        iterations=iterations,
        covariance=cov,
        condition_number=float(cond),
        singular_direction=direction,
        message=message,
        extras={"nfev": prob.nfev},
    )
