"""
Far-field emission, Gaussian-mode collection and non-interacting baselines.

Fields are in units of ``wp k_e^2 / (4 pi eps0)`` per unit distance with the
common ``exp(i k_e r)/r`` carrier and retardation removed; time is in units
of 1/Gamma. In these units the photon energy radiated into all directions
is ``(3 / 8pi) * integral U dOmega`` (one for a fully decayed excitation).

A map stores the time dependence in compressed form. The time-weighted
amplitude matrix ``b_j(t_k) sqrt(w_k)`` is factored by SVD, and the map keeps
``amplitudes[d, m]`` (direction x component) and ``time_modes[m, k]``
(orthonormal under the trapezoid weights), so that

    E_sigma(d, t_k) = pol[d, sigma] * sum_m amplitudes[d, m] time_modes[m, k].

Every time integral of products of fields reduces to sums over ``m``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import roots_legendre

from .errors import GridResolutionError

ENERGY_SCALE = 3 / (8 * math.pi)


@dataclass(frozen=True)
class AngularGrid:
    """Tensor grid: Gauss-Legendre in cos(theta), uniform in phi.

    Directions are ordered theta-major: index ``i * n_phi + j``.
    """

    mu: np.ndarray = field(repr=False)
    mu_weights: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    spec: tuple = ()

    @property
    def n_phi(self):
        return len(self.phi)

    @property
    def size(self):
        return len(self.mu) * len(self.phi)

    @property
    def theta(self):
        return np.arccos(self.mu)

    @property
    def weights(self):
        return np.outer(self.mu_weights, np.full(self.n_phi, 2 * math.pi / self.n_phi)).ravel()

    def directions(self, rows=slice(None)):
        """Unit vectors (D, 3) for the theta rows selected by ``rows``."""
        mu = self.mu[rows]
        st = np.sqrt(np.clip(1 - mu**2, 0, None))
        cp, sp = np.cos(self.phi), np.sin(self.phi)
        x = np.outer(st, cp).ravel()
        y = np.outer(st, sp).ravel()
        z = np.repeat(mu, self.n_phi)
        return np.stack([x, y, z], axis=1)

    def polarization_basis(self, rows=slice(None)):
        """(D, 2, 3): unit vectors theta-hat and phi-hat per direction."""
        mu = self.mu[rows]
        st = np.sqrt(np.clip(1 - mu**2, 0, None))
        cp, sp = np.cos(self.phi), np.sin(self.phi)
        e_theta = np.stack([np.outer(mu, cp).ravel(), np.outer(mu, sp).ravel(),
                            np.repeat(-st, self.n_phi)], axis=1)
        e_phi = np.stack([np.tile(-sp, len(mu)), np.tile(cp, len(mu)),
                          np.zeros(len(mu) * self.n_phi)], axis=1)
        return np.stack([e_theta, e_phi], axis=1)

    def refined(self):
        """Grid with every node count doubled."""
        n_theta, n_phi, cap, n_cap = self.spec
        return make_angular_grid(2 * n_theta, 2 * n_phi, cap, 2 * n_cap if n_cap else None)


def make_angular_grid(n_theta=128, n_phi=256, cap=None, n_cap=None):
    """Quadrature grid over the full sphere; the weights sum to 4 pi.

    ``cap`` (a value of cos(theta)) splits the polar axis into
    ``[-1, cap]`` with ``n_theta`` nodes and a forward panel ``[cap, 1]``
    with ``n_cap`` nodes, which resolves a narrow forward lobe cheaply.
    """
    if n_theta < 1 or n_phi < 1:
        raise ValueError("node counts must be positive")
    if cap is None:
        x, w = roots_legendre(n_theta)
        mu, wmu = x, w
    else:
        if not -1 < cap < 1 or not n_cap:
            raise ValueError("cap needs -1 < cap < 1 and a node count")
        x1, w1 = roots_legendre(n_theta)
        x2, w2 = roots_legendre(n_cap)
        h1, h2 = (cap + 1) / 2, (1 - cap) / 2
        mu = np.concatenate([h1 * x1 + (cap - h1), h2 * x2 + (cap + h2)])
        wmu = np.concatenate([h1 * w1, h2 * w2])
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    return AngularGrid(mu, wmu, phi, (n_theta, n_phi, cap, n_cap))


@dataclass
class RadiationMap:
    """Far-field emission of one trajectory on an angular grid."""

    grid: AngularGrid
    pol: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)
    time_modes: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)

    def field(self, sigma):
        """Complex field time series (D, T) for polarization 0 (theta) or 1 (phi)."""
        return self.pol[:, sigma, None] * (self.amplitudes @ self.time_modes)

    def intensity(self):
        """Per-direction intensity ``sum_sigma |E_sigma|^2`` at every time (D, T)."""
        s = self.amplitudes @ self.time_modes
        return np.sum(np.abs(self.pol) ** 2, axis=1)[:, None] * np.abs(s) ** 2

    def total(self):
        return float(self.grid.weights @ self.U)

    def emitted_energy(self):
        """Radiated photon energy in units of hbar*omega_e."""
        return ENERGY_SCALE * self.total()

    def ring_integrals(self):
        """``integral U dphi`` for each cos(theta) node."""
        U = self.U.reshape(len(self.grid.mu), self.grid.n_phi)
        return U.sum(axis=1) * (2 * math.pi / self.grid.n_phi)


def _trapezoid_weights(t):
    w = np.zeros(len(t))
    if len(t) > 1:
        dt = np.diff(t)
        w[:-1] += dt / 2
        w[1:] += dt / 2
    else:
        w[:] = 1.0
    return w


def far_field(traj, cloud, grid, gauge="tilde", rank_rtol=1e-10, chunk_rows=None):
    """Far-field map of the excited amplitudes in ``traj`` for ``cloud``.

    ``E_sigma(r, t) = (eps_sigma . p) sum_j b_j(t) exp(i (k_c - k_e r) . r_j)``
    for tilde amplitudes (plain amplitudes drop the ``k_c`` phase). ``U``
    integrates ``sum_sigma |E_sigma|^2`` over the trajectory with the
    trapezoid rule.
    """
    b = np.asarray(traj.b)
    if b.shape[1] != cloud.n:
        raise ValueError(f"trajectory has {b.shape[1]} atoms, cloud has {cloud.n}")
    if not isinstance(grid, AngularGrid):
        raise TypeError("grid must be an AngularGrid with quadrature weights")
    spec = cloud.spec
    pos = cloud.positions
    times = np.asarray(traj.times, float)
    wt = _trapezoid_weights(times)

    X = b.T * np.sqrt(wt)
    Uu, s, Vh = np.linalg.svd(X, full_matrices=False)
    keep = s > rank_rtol * s[0] if s[0] > 0 else np.zeros(len(s), bool)
    keep[0] = True
    coeff = Uu[:, keep] * s[keep]
    with np.errstate(divide="ignore", invalid="ignore"):
        time_modes = np.where(wt > 0, Vh[keep] / np.sqrt(np.where(wt > 0, wt, 1)), 0.0)

    if gauge == "tilde":
        site_phase = np.exp(1j * (pos @ spec.k_c))
    elif gauge == "plain":
        site_phase = np.ones(len(pos))
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    coeff = coeff * site_phase[:, None]

    n_mu = len(grid.mu)
    if chunk_rows is None:
        chunk_rows = max(1, int(2_000_000 // max(1, cloud.n * grid.n_phi)))
    amps = np.empty((grid.size, coeff.shape[1]), complex)
    pol = np.empty((grid.size, 2), complex)
    p_hat = spec.dipole_vector
    for start in range(0, n_mu, chunk_rows):
        rows = slice(start, min(n_mu, start + chunk_rows))
        sl = slice(rows.start * grid.n_phi, rows.stop * grid.n_phi)
        rhat = grid.directions(rows)
        phase = np.exp(-1j * spec.k_e * (rhat @ pos.T))
        amps[sl] = phase @ coeff
        pol[sl] = grid.polarization_basis(rows) @ p_hat
    U = np.sum(np.abs(pol) ** 2, axis=1) * np.sum(np.abs(amps) ** 2, axis=1)
    return RadiationMap(grid, pol, amps, time_modes, times, U)


@dataclass(frozen=True)
class GaussianMode:
    """Paraxial Gaussian mode with wavenumber ``k`` (um^-1) and waist ``w0`` (um)."""

    k: float
    w0: float

    def __post_init__(self):
        if not self.w0 > 0 or not self.k > 0:
            raise ValueError("k and w0 must be positive")

    @property
    def rayleigh(self):
        return self.k * self.w0**2 / 2

    @property
    def divergence(self):
        """Far-field half-angle ``lambda / (pi w0) = 2 / (k w0)``."""
        return 2 / (self.k * self.w0)

    @classmethod
    def matched(cls, cloud_or_spec):
        """Mode of waist ``sqrt(2) sigma_x`` at the resonant wavenumber."""
        spec = getattr(cloud_or_spec, "spec", cloud_or_spec)
        return cls(spec.k_e, math.sqrt(2) * spec.sigma[0])

    def far_field(self, mu, radius=None):
        """Mode amplitude on a sphere at direction cosines ``mu``.

        The paraxial far-field form is used: with ``z = R mu`` and
        ``rho = R sin(theta)``, ``zeta / (z - i zeta) * exp(i k (z + rho^2/2z)
        - k zeta tan^2(theta) / 2)``. ``radius=None`` takes ``R -> infinity``
        after removing the common ``exp(i k R)/R`` carrier, which leaves
        ``zeta / mu * exp(-(k w0 / 2)^2 tan^2 theta)``. The mode is zero in
        the backward hemisphere.
        """
        mu = np.asarray(mu, dtype=float)
        out = np.zeros(mu.shape, complex)
        fwd = mu > 0
        m = mu[fwd]
        tan2 = (1 - m**2) / m**2
        zeta = self.rayleigh
        env = np.exp(-0.5 * self.k * zeta * tan2)
        if radius is None:
            out[fwd] = zeta / m * env
        else:
            R = float(radius)
            gouy = R * zeta / (R * m - 1j * zeta)
            excess = self.k * R * (1 - m) ** 2 / (2 * m)
            out[fwd] = gouy * np.exp(1j * excess) * env
        return out


def collection_probability(rmap, mode, radius=None):
    """Probability that the emitted photon ends up in the Gaussian ``mode``.

    The mode is collected in both fixed transverse polarizations x and y.
    For each, ``e_m`` projected onto the plane normal to the direction
    multiplies the scalar profile ``phi``, and

    ``P = sum_m int dt |<phi e_m, E(t)>|^2 / (int U dOmega * int |phi e_m|^2 dOmega)``

    with the overlaps taken over the sphere. By Cauchy-Schwarz ``0 <= P <= 1``;
    ``P`` does not change under a global phase, a time shift or a detuning
    of the emission.
    """
    grid = rmap.grid
    w = grid.weights
    phi = mode.far_field(np.repeat(grid.mu, grid.n_phi), radius)
    total = rmap.total()
    if total <= 0 or not np.any(phi):
        return 0.0
    basis = grid.polarization_basis()          # (D, 2, 3), real
    field_vec = np.einsum("ds,dsc->dc", rmap.pol, basis)   # transverse dipole pattern
    num = 0.0
    for axis in (0, 1):
        # e_m . field_vec; field_vec is transverse so e_m needs no projection here
        proj_pol = field_vec[:, axis]
        e_perp2 = np.sum(basis[:, :, axis] ** 2, axis=1)
        mode_norm = float(w @ (np.abs(phi) ** 2 * e_perp2))
        proj = (w * np.conj(phi) * proj_pol) @ rmap.amplitudes
        num += float(np.sum(np.abs(proj) ** 2)) / mode_norm
    return num / total


def converged_collection_probability(traj, cloud, mode, grid, tol=1e-3, max_doublings=2,
                                     gauge="tilde", radius=None):
    """Collection probability with the grid doubled until P changes by < ``tol``.

    Returns ``(P, RadiationMap)`` for the finest grid used.

    Raises
    ------
    GridResolutionError
        If ``max_doublings`` refinements do not converge.
    """
    rmap = far_field(traj, cloud, grid, gauge=gauge)
    P = collection_probability(rmap, mode, radius)
    for _ in range(max_doublings):
        grid = grid.refined()
        rmap = far_field(traj, cloud, grid, gauge=gauge)
        P_new = collection_probability(rmap, mode, radius)
        if abs(P_new - P) < tol:
            return P_new, rmap
        P = P_new
    raise GridResolutionError(
        f"collection probability not converged on angular grid {grid.spec}", seed=cloud.seed)


def forward_cone_fraction(rmap, delta_theta):
    """Share of the emitted energy within ``theta <= 2 delta_theta`` of +z.

    Each Gauss-Legendre node owns the slice of cos(theta) between its
    cumulative weights; the slice straddling the cone edge contributes
    in proportion to its overlap.
    """
    mu_c = math.cos(min(2 * delta_theta, math.pi))
    wmu = rmap.grid.mu_weights
    edges = -1 + np.concatenate([[0.0], np.cumsum(wmu)])
    overlap = np.clip(edges[1:], mu_c, 1.0) - np.clip(edges[:-1], mu_c, 1.0)
    ring = rmap.ring_integrals()
    inside = float(np.sum(ring * overlap))
    return inside / float(np.sum(ring * wmu))


def lobe_profile(rmap, theta_max=0.2 * math.pi):
    """Azimuthally averaged ``U`` against polar angle, for ``theta <= theta_max``."""
    theta = rmap.grid.theta
    ring = rmap.ring_integrals() / (2 * math.pi)
    sel = theta <= theta_max
    order = np.argsort(theta[sel])
    return theta[sel][order], ring[sel][order]


def fit_lobe_width(rmap, theta_max=0.2 * math.pi):
    """Fit ``A exp(-2 theta^2 / w^2) + floor`` to the forward lobe; returns ``w``."""
    theta, U = lobe_profile(rmap, theta_max)

    def model(th, a, width, floor):
        return a * np.exp(-2 * th**2 / width**2) + floor

    p0 = (U.max(), max(theta_max / 4, 1e-3), max(U.min(), 0.0))
    (_, width, _), _ = curve_fit(model, theta, U, p0=p0, maxfev=20000)
    return abs(float(width))


def noninteracting_envelope(theta, k_e, sigma_perp, sigma_z):
    """Coherent far-field envelope of a Gaussian cloud of non-interacting atoms.

    ``exp(-(k_e^2/2) [sin^2(theta) sigma_perp^2 + (cos(theta) - 1)^2 sigma_z^2])``;
    the field of N atoms is N times this (with the ``exp(i k_e r)/r`` carrier).
    """
    theta = np.asarray(theta, dtype=float)
    st2 = np.sin(theta) ** 2
    dz2 = (np.cos(theta) - 1) ** 2
    return np.exp(-0.5 * k_e**2 * (st2 * sigma_perp**2 + dz2 * sigma_z**2))


def divergence(k_e, sigma_perp):
    """Beam divergence ``sqrt(2) / (k_e sigma_perp)`` of the matched mode."""
    return math.sqrt(2) / (k_e * sigma_perp)


def analytic_P_noninteracting(n, k_e, sigma_perp):
    """Cooperative emission share ``N dOmega / (4 pi + N dOmega)``, ``dOmega = 2 pi/(k sigma)^2``."""
    if n < 0 or not k_e > 0 or not sigma_perp > 0:
        raise ValueError("invalid inputs")
    d_omega = 2 * math.pi / (k_e * sigma_perp) ** 2
    return n * d_omega / (4 * math.pi + n * d_omega)
