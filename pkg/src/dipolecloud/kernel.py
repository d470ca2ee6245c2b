"""
Dipole-dipole exchange coupling and the collective interaction matrix.

The matrix ``A`` defines the single-excitation dynamics
``db/dt = -(Gamma/2) A b`` with unit diagonal. Off-diagonal entries are the
complex exchange kernel ``F = f + i g`` (``plain`` gauge) or the same kernel
dressed with the coupling-laser phase ``exp(i k_c . r_ij)`` (``tilde`` gauge,
where the timed-Dicke state is the uniform vector).

For a complex dipole direction the projection ``(p . r)^2`` is taken as
``|p . r|^2``, which is what the angular integral of the transverse dipole
pattern produces for the dissipative part ``f``.
"""

from dataclasses import dataclass, field

import numpy as np

MODES = ("full", "isotropic", "farfield", "none")
GAUGES = ("plain", "tilde")


@dataclass(frozen=True)
class PairCoupling:
    f: float
    g: float

    @property
    def F(self):
        return complex(self.f, self.g)


@dataclass(frozen=True)
class InteractionMatrix:
    """Dense N x N coupling matrix with unit diagonal.

    ``phases`` holds ``exp(i k_c . r_j)``; it maps tilde amplitudes to plain
    ones (``b = phases * b_tilde``) and gives the timed-Dicke vector in
    either gauge.
    """

    entries: np.ndarray = field(repr=False)
    gauge: str
    mode: str
    k_e: float
    k_c: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.entries.shape[0]

    def timed_dicke_vector(self):
        """Normalized timed-Dicke state expressed in this matrix's gauge."""
        v = np.full(self.n, 1 / np.sqrt(self.n), dtype=complex)
        return v if self.gauge == "tilde" else v * self.phases

    def to_gauge(self, gauge):
        """Same physics in the other gauge (diagonal unitary similarity)."""
        if gauge == self.gauge:
            return self
        if gauge not in GAUGES:
            raise ValueError(f"unknown gauge {gauge!r}")
        p = self.phases
        if gauge == "tilde":
            entries = np.conj(p)[:, None] * self.entries * p[None, :]
        else:
            entries = p[:, None] * self.entries * np.conj(p)[None, :]
        return InteractionMatrix(entries, gauge, self.mode, self.k_e, self.k_c, self.phases)


def _projection_sq(rhat, dipole):
    proj = rhat @ dipole
    return proj.real**2 + proj.imag**2


def _kernel(kr, proj2, mode):
    """Complex kernel F for arrays of k_e*r and |p.rhat|^2."""
    if mode == "isotropic":
        return np.exp(1j * kr) / (1j * kr)
    if mode == "farfield":
        return 1.5 * (1 - proj2) * np.exp(1j * kr) / (1j * kr)
    if mode != "full":
        raise ValueError(f"unknown coupling mode {mode!r}")
    s, c = np.sin(kr), np.cos(kr)
    a = 1.5 * (1 - proj2)
    b = 1.5 * (1 - 3 * proj2)
    kr2 = kr * kr
    kr3 = kr2 * kr
    # (x cos x - sin x)/x^3 cancels badly at small x; use its series there
    near = np.where(kr < 0.05,
                    -1 / 3 + kr2 / 30 - kr2**2 / 840 + kr2**3 / 45360,
                    (c / kr2 - s / np.maximum(kr3, 1e-300)))
    f = a * s / kr + b * near
    g = -a * c / kr + b * (s / kr2 + c / kr3)
    return f + 1j * g


def pair_coupling(r_vec, dipole, k_e, mode="full", min_separation=0.0):
    """Exchange coupling between two atoms separated by ``r_vec`` (um).

    ``mode`` selects the complete kernel (``full``, with near-field
    terms), the isotropic-dipole form ``exp(ikr)/(ikr)`` or the far-field
    form ``(3/2)(1 - |p.r|^2) exp(ikr)/(ikr)``.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        raise ValueError("zero-length separation")
    if r < min_separation:
        raise ValueError(f"separation {r:g} um below cutoff {min_separation:g} um")
    if not k_e > 0:
        raise ValueError("k_e must be positive")
    proj2 = _projection_sq(r_vec / r, np.asarray(dipole, dtype=complex))
    F = complex(_kernel(np.float64(k_e * r), proj2, mode))
    return PairCoupling(F.real, F.imag)


def build_interaction_matrix(cloud, gauge="tilde", mode="full"):
    """Assemble the collective coupling matrix of ``cloud``.

    Row ``j``, column ``i`` couples amplitude ``i`` into the equation for
    ``j``; in the tilde gauge it carries ``exp(i k_c . (r_i - r_j))``.
    ``mode="none"`` gives the non-interacting identity matrix.
    """
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}")
    if mode not in MODES:
        raise ValueError(f"unknown coupling mode {mode!r}")
    spec = cloud.spec
    pos = cloud.positions
    n = len(pos)
    k_e = spec.k_e
    k_c = spec.k_c
    phases = np.exp(1j * (pos @ k_c))

    if mode == "none" or n == 1:
        entries = np.eye(n, dtype=complex)
    else:
        diff = pos[None, :, :] - pos[:, None, :]  # diff[j, i] = r_i - r_j
        r = np.sqrt(np.einsum("jik,jik->ji", diff, diff))
        np.fill_diagonal(r, 1.0)
        offdiag = ~np.eye(n, dtype=bool)
        r_min = r[offdiag].min()
        if r_min == 0.0:
            raise ValueError("coincident atoms")
        if r_min < spec.min_separation:
            raise ValueError(
                f"separation {r_min:g} um below cutoff {spec.min_separation:g} um"
            )
        proj2 = _projection_sq(diff / r[:, :, None], spec.dipole_vector)
        entries = _kernel(k_e * r, proj2, mode)
        np.fill_diagonal(entries, 1.0)
        # enforce exact exchange symmetry against rounding in proj2
        entries = 0.5 * (entries + entries.T)

    A = InteractionMatrix(entries, "plain", mode, k_e, k_c, phases)
    return A.to_gauge(gauge)
