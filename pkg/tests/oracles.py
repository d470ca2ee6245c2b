"""
Independent reference computations used by the tests.

Nothing here calls into the package's propagators or kernels; each oracle
takes a different route to the same quantity.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp


def expm_taylor(M, terms=30):
    """Matrix exponential by scaling and squaring a truncated Taylor series."""
    M = np.asarray(M, dtype=complex)
    norm = np.abs(M).sum(axis=0).max()
    s = max(0, int(math.ceil(math.log2(norm / 0.25)))) if norm > 0 else 0
    X = M / 2**s
    out = np.eye(len(M), dtype=complex)
    term = np.eye(len(M), dtype=complex)
    for k in range(1, terms):
        term = term @ X / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def green_kernel(x, proj2):
    """Pair coupling from the dyadic Green tensor form.

    ``(3/2) e^{ix} [(1 - P)/(ix) + (1 - 3P)(1/x^2 + i/x^3)]``.
    """
    return 1.5 * np.exp(1j * x) * ((1 - proj2) / (1j * x) + (1 - 3 * proj2) * (1 / x**2 + 1j / x**3))


def dense_kernel_matrix(positions, k_e, dipole, k_c):
    """Tilde-gauge interaction matrix, one pair at a time."""
    n = len(positions)
    p = np.asarray(dipole, complex)
    A = np.eye(n, dtype=complex)
    for j in range(n):
        for i in range(n):
            if i == j:
                continue
            r = positions[i] - positions[j]
            d = np.linalg.norm(r)
            P = abs(np.dot(p, r / d)) ** 2
            A[j, i] = green_kernel(k_e * d, P) * np.exp(1j * np.dot(k_c, r))
    return A


def three_level_reference(M, omega, delta, c0, b0, times):
    """``dc/dt = i Om e^{i D t} b``, ``db/dt = i Om e^{-i D t} c - A b / 2`` by DOP853.

    ``omega`` is a callable of time; all quantities in units of Gamma.
    """
    n = len(c0)

    def rhs(t, y):
        z = y[: 2 * n] + 1j * y[2 * n:]
        c, b = z[:n], z[n:]
        om = omega(t)
        dc = 1j * om * np.exp(1j * delta * t) * b
        db = 1j * om * np.exp(-1j * delta * t) * c - 0.5 * (M @ b)
        dz = np.concatenate([dc, db])
        return np.concatenate([dz.real, dz.imag])

    z0 = np.concatenate([c0, b0]).astype(complex)
    sol = solve_ivp(rhs, (times[0], times[-1]), np.concatenate([z0.real, z0.imag]),
                    method="DOP853", t_eval=times, rtol=1e-11, atol=1e-13)
    z = (sol.y[: 2 * n] + 1j * sol.y[2 * n:]).T
    return z[:, :n], z[:, n:]


def effective_rk4(omega_eff, detuning, gamma_s, t_end, steps):
    """Fixed-step RK4 of the two-amplitude effective model; returns p_G(t_end).

    ``dc/dt = i W e^{i D t} b``, ``db/dt = i W e^{-i D t} c - (gamma_s/2) b``.
    """
    def f(t, y):
        c, b = y
        w = omega_eff(t)
        return np.array([1j * w * np.exp(1j * detuning * t) * b,
                         1j * w * np.exp(-1j * detuning * t) * c - 0.5 * gamma_s * b])

    y = np.array([1.0, 0.0], complex)
    h = t_end / steps
    t = 0.0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return 1.0 - float(np.sum(np.abs(y) ** 2))


def dipole_cone_fraction(theta_c):
    """Share of a circular dipole's (1 + cos^2)/2 pattern inside a cone."""
    mu = math.cos(theta_c)
    return 0.5 * ((1 - mu) + (1 - mu**3) / 3) / (4 / 3)


def cooperative_share(n, wavelength, sigma_perp):
    """``N dW / (4 pi + N dW)`` with ``dW = 2 pi / (k sigma)^2`` from the wavelength."""
    k = 2 * math.pi / wavelength
    d_omega = 2 * math.pi / (k * k * sigma_perp * sigma_perp)
    return n * d_omega / (4 * math.pi + n * d_omega)


def three_level_shifted_frame(M, omega, delta, c0, b0, times):
    """Same system with ``b' = b e^{i D t}``: the detuning moves onto the diagonal.

    ``db'/dt = i D b' + i Om c - A b' / 2``, ``dc/dt = i Om b'``; returns
    ``(c, b)`` in the original frame.
    """
    n = len(c0)
    L = -0.5 * np.asarray(M, complex) + 1j * delta * np.eye(n)

    def rhs(t, y):
        z = y[: 2 * n] + 1j * y[2 * n:]
        c, bp = z[:n], z[n:]
        om = omega(t)
        dz = np.concatenate([1j * om * bp, 1j * om * c + L @ bp])
        return np.concatenate([dz.real, dz.imag])

    z0 = np.concatenate([c0, b0]).astype(complex)
    sol = solve_ivp(rhs, (times[0], times[-1]), np.concatenate([z0.real, z0.imag]),
                    method="DOP853", t_eval=times, rtol=1e-11, atol=1e-13)
    z = (sol.y[: 2 * n] + 1j * sol.y[2 * n:]).T
    return z[:, :n], z[:, n:] * np.exp(-1j * delta * np.asarray(times))[:, None]


def dyadic_coupling(r_vec, k_e, dipole):
    """``p* . G . p`` with the full 3x3 dyadic Green tensor (no scalar projection)."""
    r_vec = np.asarray(r_vec, float)
    d = np.linalg.norm(r_vec)
    x = k_e * d
    rr = np.outer(r_vec, r_vec) / d**2
    eye = np.eye(3)
    G = 1.5 * np.exp(1j * x) * ((eye - rr) / (1j * x) + (eye - 3 * rr) * (1 / x**2 + 1j / x**3))
    p = np.asarray(dipole, complex)
    return p.conj() @ G @ p
