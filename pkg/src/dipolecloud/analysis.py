"""
Rate extraction and the effective three-level Raman model.

Rates are in units of Gamma and times in units of 1/Gamma unless a function
says otherwise.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import least_squares, nnls

GEOMETRY_FACTORS = {1.0: 4 / 3, 2.0: 5 / 6, 4.0: 2 / 3, 8.0: 2 / 5}


@dataclass(frozen=True)
class TriExpFit:
    """``p1 exp(-gamma_S t) + p2 exp(-gamma t) + p3 exp(-gamma_s t)``."""

    p1: float
    p2: float
    p3: float
    gamma_S: float
    gamma: float
    gamma_s: float
    residual: float
    converged: bool = True

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return (self.p1 * np.exp(-self.gamma_S * t) + self.p2 * np.exp(-self.gamma * t)
                + self.p3 * np.exp(-self.gamma_s * t))


def _model(params, t, g_mid):
    p1, p2, p3, gS, gs = params
    return p1 * np.exp(-gS * t) + p2 * np.exp(-g_mid * t) + p3 * np.exp(-gs * t)


def fit_triexponential(times, p, gamma=1.0, window=6.0, n_log=80, t_min=0.01,
                       drop_below=1e-12, weight_tol=1e-6):
    """Fit a three-exponential decay with the middle rate pinned to ``gamma``.

    The curve is resampled (log-linear interpolation) at ``t = 0`` plus
    ``n_log`` log-spaced times in ``[t_min, window]``, so the fast initial
    decay and the slow tail carry comparable weight. Least squares on
    ``log p`` (uniform weight) with non-negative weights, ``gamma_S >= gamma >= gamma_s >= 0``. Several
    starts are tried, built from the rates ``gamma * {5, 1, 0.2}`` rescaled
    by the initial slope of the data, with weights from non-negative linear
    least squares; the best residual wins.

    A branch whose weight falls below ``weight_tol`` of the total is set to
    zero and its rate collapsed onto ``gamma``, so a pure single-exponential
    input returns ``gamma_S == gamma_s == gamma``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(p, dtype=float)
    keep = (t <= window) & (y > drop_below) & np.isfinite(y)
    t, y = t[keep], y[keep]
    if n_log and len(t) > 1:
        t_new = np.concatenate([[t[0]], np.geomspace(max(t_min, t[1]), t[-1], n_log)])
        y = np.exp(np.interp(t_new, t, np.log(y)))
        t = t_new
    if len(t) < 6:
        raise ValueError("too few usable samples for a three-exponential fit")
    logy = np.log(y)

    n_head = max(2, len(t) // 50)
    slope = -(logy[n_head] - logy[0]) / (t[n_head] - t[0])
    slope = max(slope / gamma, 1.0)

    def resid(params):
        return np.log(np.maximum(_model(params, t, gamma), 1e-300)) - logy

    lo = [0, 0, 0, gamma, 0]
    hi = [np.inf, np.inf, np.inf, np.inf, gamma]
    best = None
    for fast in (5.0, 2.0 * slope, 5.0 * slope, 10.0 * slope):
        for slow in (0.2, 0.05, 0.5):
            rates = (max(fast * gamma, 1.001 * gamma), gamma, slow * gamma)
            design = np.exp(-np.outer(t, rates))
            w, _ = nnls(design, y)
            x0 = np.array([*w, rates[0], rates[2]])
            x0[:3] = np.maximum(x0[:3], 1e-9 * y[0])
            try:
                sol = least_squares(resid, x0, bounds=(lo, hi), method="trf",
                                    x_scale="jac", xtol=1e-12, ftol=1e-12, gtol=1e-12,
                                    max_nfev=4000)
            except ValueError:
                continue
            if best is None or sol.cost < best.cost:
                best = sol
    if best is None:
        raise RuntimeError("three-exponential fit failed for every start")

    p1, p2, p3, gS, gs = best.x
    total = p1 + p2 + p3
    if p1 < weight_tol * total:
        p2, p1, gS = p2 + p1, 0.0, gamma
    if p3 < weight_tol * total:
        p2, p3, gs = p2 + p3, 0.0, gamma
    rms = float(np.sqrt(np.mean(best.fun**2)))
    return TriExpFit(float(p1), float(p2), float(p3), float(gS), float(gamma), float(gs),
                     rms, bool(best.success))


def superradiant_rate_model(n, k_e, sigma_xy, geometry_factor, gamma=1.0):
    """Collective rate ``G N / (k_e sigma_xy)^2`` times ``gamma``."""
    if min(n, k_e, sigma_xy, geometry_factor) <= 0:
        raise ValueError("inputs must be positive")
    return geometry_factor * n / (k_e * sigma_xy) ** 2 * gamma


def geometry_factor(rate, n, k_e, sigma_xy, gamma=1.0):
    """Invert :func:`superradiant_rate_model` for the geometry factor."""
    return rate / gamma * (k_e * sigma_xy) ** 2 / n


@dataclass(frozen=True)
class EffectiveThreeLevel:
    """Storage -> broad collective level -> ground.

    ``rabi_scale`` multiplies the applied pulse to give Omega_eff(t);
    ``delta_e`` is the collective level shift and ``gamma_s`` its decay
    rate, both in units of Gamma.
    """

    rabi_scale: float = 0.92
    delta_e: float = -1.0
    gamma_s: float = 6.0

    def __post_init__(self):
        if not self.gamma_s > 0:
            raise ValueError("gamma_s must be positive")


def effective_three_level_pG(model, pulse, t, gamma):
    """Ground-state transfer of the effective model, adiabatic solution.

    With the broad level eliminated, ``c(t) = exp(-int Omega_eff^2 ds / D)``
    and ``b = i Omega_eff e^{-i d t} c / D``, where
    ``D = gamma_s/2 - i (delta_c - delta_e)``. The ground population is the
    emitted part ``gamma_s int |b|^2 ds``, which equals ``1 - |c|^2`` in this
    approximation; it lies in [0, 1] and never decreases.

    ``t`` in units of 1/Gamma (scalar or array); ``pulse`` in laboratory
    units, scaled with ``gamma`` (s^-1).
    """
    sp = pulse.scaled(gamma)
    detuning = sp.delta_c - model.delta_e
    denom = model.gamma_s / 2 - 1j * detuning
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))

    def omega_eff2(s):
        return (model.rabi_scale * float(sp.rabi(s))) ** 2

    out = np.empty(len(t))
    for i, ti in enumerate(t):
        area, _ = quad(omega_eff2, 0.0, ti, limit=200,
                       points=[sp.t0] if 0 < sp.t0 < ti else None)
        out[i] = -math.expm1(-2 * area * (1 / denom).real)
    return float(out[0]) if scalar else out


def pearson(x, y):
    x = np.asarray(x, float) - np.mean(x)
    y = np.asarray(y, float) - np.mean(y)
    return float(np.dot(x, y) / math.sqrt(np.dot(x, x) * np.dot(y, y)))
