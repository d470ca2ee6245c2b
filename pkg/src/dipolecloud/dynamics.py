"""
Single-excitation amplitude dynamics.

Time is measured in units of 1/Gamma and all rates in units of Gamma. The
excited amplitudes are tilde-gauge amplitudes whenever the interaction
matrix is in the tilde gauge, and plain amplitudes otherwise; the equations
are the same in both.

Two-level decay, ``db/dt = -(1/2) A b``, is propagated exactly through the
eigendecomposition of ``A`` (with an adaptive Runge-Kutta fallback). The
Raman problem

    dc/dt = i Omega(t) b exp(+i Delta_c t)
    db/dt = i Omega(t) c exp(-i Delta_c t) - (1/2) A b

is integrated with a fixed-step fourth-order Lawson (integrating-factor)
Runge-Kutta scheme, which treats the stiff decay/shift part exactly. The
step is halved until the population curves stop changing.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.special import erf

from .errors import NumericalError

log = logging.getLogger(__name__)

TWO_PI = 2 * math.pi


@dataclass
class AmplitudeState:
    """Excited amplitudes ``b`` and optional storage amplitudes ``c`` at time ``t``."""

    b: np.ndarray
    c: np.ndarray = None
    t: float = 0.0

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=complex)
        if self.c is not None:
            self.c = np.asarray(self.c, dtype=complex)
            if self.c.shape != self.b.shape:
                raise ValueError("storage and excited amplitudes differ in length")

    @property
    def n(self):
        return len(self.b)

    def scaled(self, factor):
        c = None if self.c is None else self.c * factor
        return AmplitudeState(self.b * factor, c, self.t)


@dataclass(frozen=True)
class Pulse:
    """Coupling-field Rabi frequency in laboratory units.

    ``omega0`` in s^-1, ``t0`` and ``sigma_t`` in us, ``delta_c`` (the
    detuning omega_c - omega_e) in rad/s. The ``erf`` shape is
    ``omega0 * (1 + erf((t - t0) / (sqrt(2) sigma_t))) / 2``.
    """

    shape: str = "erf"
    omega0: float = 0.0
    t0: float = 1.0
    sigma_t: float = 0.4
    delta_c: float = 0.0

    def __post_init__(self):
        if self.shape not in ("constant", "erf"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.omega0 < 0:
            raise ValueError("omega0 must be non-negative")
        if self.shape == "erf" and not self.sigma_t > 0:
            raise ValueError("sigma_t must be positive for an erf pulse")

    @classmethod
    def from_mhz(cls, delta_c_mhz, **kwargs):
        """Build with the detuning given as Delta_c / 2pi in MHz."""
        return cls(delta_c=TWO_PI * 1e6 * delta_c_mhz, **kwargs)

    def scaled(self, gamma):
        """The pulse in units of ``gamma`` (rates) and ``1/gamma`` (times)."""
        return _ScaledPulse(
            self.shape,
            self.omega0 / gamma,
            self.t0 * 1e-6 * gamma,
            self.sigma_t * 1e-6 * gamma,
            self.delta_c / gamma,
        )


@dataclass(frozen=True)
class _ScaledPulse:
    shape: str
    omega0: float
    t0: float
    sigma_t: float
    delta_c: float

    def rabi(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "constant":
            return np.full_like(t, self.omega0)
        return self.omega0 * 0.5 * (1 + erf((t - self.t0) / (math.sqrt(2) * self.sigma_t)))


@dataclass
class AmplitudeTrajectory:
    """Amplitudes on a time grid; ``b`` and ``c`` have shape (T, N)."""

    times: np.ndarray
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(default=None, repr=False)
    info: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.b.shape[1]

    def __len__(self):
        return len(self.times)

    def state(self, i):
        c = None if self.c is None else self.c[i]
        return AmplitudeState(self.b[i], c, float(self.times[i]))

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    @property
    def p_td(self):
        """Timed-Dicke population ``|sum_j b_j|^2 / N`` (tilde amplitudes)."""
        return np.abs(self.b.sum(axis=1)) ** 2 / self.n

    @property
    def p_e(self):
        return np.sum(np.abs(self.b) ** 2, axis=1)

    @property
    def p_s(self):
        if self.c is None:
            return np.zeros(len(self.times))
        return np.sum(np.abs(self.c) ** 2, axis=1)

    @property
    def p_g(self):
        return 1.0 - self.p_s - self.p_e


def timed_dicke_state(n):
    """Uniform tilde-gauge amplitudes ``1/sqrt(n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return AmplitudeState(np.full(n, 1 / math.sqrt(n), dtype=complex))


def storage_state(n):
    """Collective storage state: ``c_j = 1/sqrt(n)``, no excitation."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return AmplitudeState(np.zeros(n, complex), np.full(n, 1 / math.sqrt(n), dtype=complex))


def default_decay_times(t_max=6.0, n=400):
    return np.linspace(0.0, t_max, n)


def _entries(A):
    return A.entries if hasattr(A, "entries") else np.asarray(A, dtype=complex)


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-D grid")
    if times[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return times


def _finite_or_raise(x, what):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite amplitudes in {what}")


def eigen_decompose(M, cond_limit=1e10):
    """Right eigenvectors ``V``, eigenvalues and ``V^-1`` of a dense matrix.

    Raises NumericalError when the eigenvector matrix is too ill-conditioned
    for the decomposition to be trusted.
    """
    try:
        vals, V = np.linalg.eig(M)
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    recon = (V * vals) @ Vinv
    scale = max(np.abs(M).max(), 1.0)
    err = np.abs(recon - M).max() / scale
    if not np.isfinite(err) or err > 1e-9 or np.linalg.norm(V) * np.linalg.norm(Vinv) > cond_limit:
        raise NumericalError(f"unreliable eigendecomposition (reconstruction error {err:.2e})")
    return vals, V, Vinv


def evolve_two_level(A, b0, times, method="eigen"):
    """Free decay ``db/dt = -(1/2) A b`` from ``b0`` sampled on ``times``.

    Parameters
    ----------
    A : InteractionMatrix or (N, N) array
    b0 : AmplitudeState or array
    times : 1-D array starting at 0, units of 1/Gamma
    method : {"eigen", "ode"}
        ``eigen`` propagates through the eigendecomposition and falls back
        to adaptive RK (DOP853, rtol 1e-10) if the decomposition is
        unreliable; ``ode`` forces the adaptive integrator.
    """
    M = _entries(A)
    b_init = np.asarray(getattr(b0, "b", b0), dtype=complex)
    if M.shape != (len(b_init), len(b_init)):
        raise ValueError(f"matrix of size {M.shape} does not match {len(b_init)} amplitudes")
    times = _check_times(times)
    info = {"method": method}

    if method == "eigen":
        try:
            vals, V, Vinv = eigen_decompose(M)
        except NumericalError as exc:
            log.warning("eigen propagation unavailable (%s); falling back to adaptive stepping", exc)
            info["fallback"] = str(exc)
            method = "ode"
        else:
            coeff = Vinv @ b_init
            b = (np.exp(-0.5 * np.outer(times, vals)) * coeff) @ V.T
    if method == "ode":
        info["method"] = "ode"
        b = _integrate_linear_ode(-0.5 * M, b_init, times)
    elif method != "eigen":
        raise ValueError(f"unknown method {method!r}")

    _finite_or_raise(b, "two-level evolution")
    return AmplitudeTrajectory(times, b, None, info)


def _integrate_linear_ode(L, y0, times, rtol=1e-10, atol=1e-12):
    n = len(y0)

    def rhs(_, y):
        z = y[:n] + 1j * y[n:]
        dz = L @ z
        return np.concatenate([dz.real, dz.imag])

    sol = solve_ivp(
        rhs, (times[0], times[-1]), np.concatenate([y0.real, y0.imag]),
        method="DOP853", t_eval=times, rtol=rtol, atol=atol,
    )
    if not sol.success:
        raise NumericalError(f"adaptive integration failed: {sol.message}")
    return (sol.y[:n] + 1j * sol.y[n:]).T


def _lawson_rk4(decay, c, b, times, h_max, pulse):
    """Lawson RK4 for the storage/excited pair with linear part on ``b``.

    ``decay(tau)`` returns a function applying ``exp(-(1/2) A tau)`` to a
    vector of excited amplitudes.
    """
    out_c = np.empty((len(times), len(c)), complex)
    out_b = np.empty_like(out_c)
    out_c[0], out_b[0] = c, b
    delta = pulse.delta_c
    step_cache = {}

    def forcing(t, cc, bb):
        om = float(pulse.rabi(t))
        return 1j * om * np.exp(1j * delta * t) * bb, 1j * om * np.exp(-1j * delta * t) * cc

    for k in range(1, len(times)):
        t = times[k - 1]
        dt = times[k] - t
        m = max(1, math.ceil(dt / h_max - 1e-9))
        h = dt / m
        key = round(h, 14)
        if key not in step_cache:
            step_cache[key] = (decay(h / 2), decay(h))
        half, full = step_cache[key]
        for _ in range(m):
            k1c, k1b = forcing(t, c, b)
            k2c, k2b = forcing(t + h / 2, c + h / 2 * k1c, half(b + h / 2 * k1b))
            hb = half(b)
            k3c, k3b = forcing(t + h / 2, c + h / 2 * k2c, hb + h / 2 * k2b)
            k4c, k4b = forcing(t + h, c + h * k3c, full(b) + h * half(k3b))
            c = c + h / 6 * (k1c + 2 * k2c + 2 * k3c + k4c)
            b = full(b) + h / 6 * (full(k1b) + 2 * half(k2b + k3b) + k4b)
            t += h
        out_c[k], out_b[k] = c, b
    return out_c, out_b


def evolve_three_level(A, pulse, c0, times, gamma, method="eigen", h_max=0.1,
                       tol=1e-6, max_halvings=8, decomposition=None):
    """Raman transfer from storage amplitudes through the coupled excited manifold.

    Parameters
    ----------
    A : InteractionMatrix or (N, N) array
    pulse : Pulse
        Coupling field in laboratory units; converted with ``gamma``.
    c0 : AmplitudeState
        Initial state, normally :func:`storage_state`.
    times : 1-D array starting at 0, units of 1/Gamma
    gamma : float
        Single-atom decay rate (s^-1) used to scale the pulse.
    method : {"eigen", "direct"}
        ``eigen`` integrates the decoupled modes of ``A`` (cost O(N) per
        step); ``direct`` works in the site basis with dense propagators.
    h_max : float
        Initial largest step; halved until populations change by < ``tol``.
    decomposition : tuple, optional
        ``(eigenvalues, V, V^-1)`` of ``A`` from :func:`eigen_decompose`,
        reused across calls (detuning scans).
    """
    M = _entries(A)
    n = M.shape[0]
    if not isinstance(c0, AmplitudeState):
        c0 = AmplitudeState(np.zeros(n, complex), c0)
    if c0.c is None:
        raise ValueError("initial state has no storage amplitudes")
    if c0.n != n:
        raise ValueError(f"matrix of size {M.shape} does not match {c0.n} amplitudes")
    times = _check_times(times)
    sp = pulse.scaled(gamma)

    if method == "eigen":
        vals, V, Vinv = decomposition if decomposition is not None else eigen_decompose(M)

        def decay(tau):
            f = np.exp(-0.5 * vals * tau)
            return lambda v: f * v

        c_init, b_init = Vinv @ c0.c, Vinv @ c0.b

        def back(cc, bb):
            return cc @ V.T, bb @ V.T
    elif method == "direct":
        def decay(tau):
            E = expm(-0.5 * M * tau)
            return lambda v: E @ v

        c_init, b_init = c0.c, c0.b

        def back(cc, bb):
            return cc, bb
    else:
        raise ValueError(f"unknown method {method!r}")

    def run(h):
        cc, bb = _lawson_rk4(decay, c_init, b_init, times, h, sp)
        cc, bb = back(cc, bb)
        _finite_or_raise(bb, "three-level evolution")
        return cc, bb

    def pops(cc, bb):
        ps = np.sum(np.abs(cc) ** 2, axis=1)
        pe = np.sum(np.abs(bb) ** 2, axis=1)
        return np.stack([ps, pe])

    h = h_max
    c_prev, b_prev = run(h)
    for _ in range(max_halvings):
        h /= 2
        c_new, b_new = run(h)
        change = np.abs(pops(c_new, b_new) - pops(c_prev, b_prev)).max()
        c_prev, b_prev = c_new, b_new
        if change < tol:
            break
    else:
        raise NumericalError(f"step refinement did not converge (last change {change:.2e})")

    info = {"method": method, "step": h, "step_change": float(change)}
    return AmplitudeTrajectory(times, b_prev, c_prev, info)
