"""
Random atom clouds in anisotropic Gaussian traps.

Lengths are in micrometres, rates in s^-1 at this interface. Everything
downstream works in units of the single-atom decay rate.

Random numbers come from numpy's counter-based ``Philox`` bit generator
keyed through ``SeedSequence(seed)``. Seeds for individual realizations
of an ensemble are derived from a master seed with :func:`realization_seed`
(a splitmix64 mix), so any realization can be replayed on its own.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import SamplingError

LAMBDA_E_UM = 0.78
GAMMA_PER_S = 2.0e7
SIGMA_PLUS = (1 / math.sqrt(2), 1j / math.sqrt(2), 0.0)

_MASK64 = (1 << 64) - 1
_MAX_RESAMPLE_ROUNDS = 200


def splitmix64(x):
    """One splitmix64 output for the 64-bit state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def realization_seed(master_seed, index):
    """Seed of realization ``index`` in an ensemble started from ``master_seed``.

    ``splitmix64(master ^ splitmix64(index))``; distinct indices give
    decorrelated 64-bit seeds.
    """
    if index < 0:
        raise ValueError("realization index must be non-negative")
    return splitmix64((int(master_seed) & _MASK64) ^ splitmix64(int(index)))


def fixed_volume_sigma(sigma_z, product=8.0):
    """Trap widths ``(s, s, sigma_z)`` with ``s**2 * sigma_z == product``."""
    s = math.sqrt(product / sigma_z)
    return (s, s, float(sigma_z))


@dataclass(frozen=True)
class CloudSpec:
    """Trap and transition parameters of an atom cloud.

    Parameters
    ----------
    n_atoms : int
    sigma : 3-tuple of float
        Gaussian standard deviations along x, y, z (um).
    lambda_e : float
        Transition wavelength (um).
    gamma : float
        Single-atom decay rate (s^-1).
    dipole : 3-tuple of complex
        Unit transition dipole direction; defaults to (x + iy)/sqrt(2).
    k_c_dir : 3-tuple of float
        Direction of the coupling-laser wavevector.
    min_separation : float, optional
        Exclusion radius (um); defaults to ``0.01 * lambda_e``.
    """

    n_atoms: int
    sigma: tuple
    lambda_e: float = LAMBDA_E_UM
    gamma: float = GAMMA_PER_S
    dipole: tuple = SIGMA_PLUS
    k_c_dir: tuple = (0.0, 0.0, 1.0)
    min_separation: float = None

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        sigma = tuple(float(s) for s in self.sigma)
        if len(sigma) != 3 or min(sigma) <= 0 or not all(map(math.isfinite, sigma)):
            raise ValueError(f"sigma must be three positive lengths, got {self.sigma}")
        if not self.lambda_e > 0:
            raise ValueError("lambda_e must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        dipole = tuple(complex(p) for p in self.dipole)
        if len(dipole) != 3 or abs(sum(abs(p) ** 2 for p in dipole) - 1) > 1e-9:
            raise ValueError("dipole must be a unit complex 3-vector")
        kdir = np.asarray(self.k_c_dir, dtype=float)
        if kdir.shape != (3,) or abs(np.linalg.norm(kdir) - 1) > 1e-9:
            raise ValueError("k_c_dir must be a unit 3-vector")
        min_sep = 0.01 * self.lambda_e if self.min_separation is None else float(self.min_separation)
        if min_sep < 0:
            raise ValueError("min_separation must be non-negative")

        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "dipole", dipole)
        object.__setattr__(self, "k_c_dir", tuple(float(k) for k in kdir))
        object.__setattr__(self, "min_separation", min_sep)

        mean_sep = self.mean_separation
        if self.n_atoms > 1 and min_sep > 0.1 * mean_sep:
            warnings.warn(
                f"min_separation {min_sep:g} um exceeds 10% of the mean separation "
                f"{mean_sep:g} um; pair statistics will be distorted",
                stacklevel=3,
            )

    @property
    def k_e(self):
        """Resonant wavenumber 2*pi/lambda_e (um^-1)."""
        return 2 * math.pi / self.lambda_e

    @property
    def k_c(self):
        """Coupling wavevector (um^-1); its magnitude equals ``k_e``."""
        return self.k_e * np.asarray(self.k_c_dir)

    @property
    def dipole_vector(self):
        return np.asarray(self.dipole, dtype=complex)

    @property
    def v_eff(self):
        sx, sy, sz = self.sigma
        return (2 * math.pi) ** 1.5 * sx * sy * sz

    @property
    def mean_separation(self):
        return (self.v_eff / self.n_atoms) ** (1 / 3)

    def replace(self, **changes):
        """Copy with some fields changed (validation re-runs)."""
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if "lambda_e" in changes and "min_separation" not in changes:
            values["min_separation"] = None
        values.update(changes)
        return CloudSpec(**values)


@dataclass(frozen=True)
class AtomCloud:
    """One sampled realization: ``positions`` is an (N, 3) array in um."""

    spec: CloudSpec
    positions: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (self.spec.n_atoms, 3):
            raise ValueError(
                f"positions must have shape ({self.spec.n_atoms}, 3), got {pos.shape}"
            )
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self):
        return self.spec.n_atoms

    def min_pair_distance(self):
        if self.n < 2:
            return math.inf
        d, _ = cKDTree(self.positions).query(self.positions, k=2)
        return float(d[:, 1].min())


@dataclass(frozen=True)
class CloudStats:
    v_eff: float
    mean_separation: float
    aspect: float


def sample_cloud(spec, seed):
    """Draw ``spec.n_atoms`` positions from the trap density.

    Each coordinate is an independent normal deviate scaled by the trap
    width. Atoms closer than ``spec.min_separation`` to an earlier atom are
    redrawn until no such pair remains.

    Raises
    ------
    SamplingError
        If the constraint cannot be met within a bounded number of rounds,
        which means the cloud is too dense for the exclusion radius.
    """
    if not isinstance(spec, CloudSpec):
        raise TypeError("spec must be a CloudSpec")
    seed = int(seed) & _MASK64
    rng = np.random.Generator(np.random.Philox(seed))
    sigma = np.asarray(spec.sigma)
    pos = rng.standard_normal((spec.n_atoms, 3)) * sigma

    r_min = spec.min_separation
    if r_min > 0 and spec.n_atoms > 1:
        for _ in range(_MAX_RESAMPLE_ROUNDS):
            pairs = cKDTree(pos).query_pairs(r_min, output_type="ndarray")
            if len(pairs) == 0:
                break
            # the later atom of each close pair is redrawn
            bad = np.unique(pairs.max(axis=1))
            pos[bad] = rng.standard_normal((len(bad), 3)) * sigma
        else:
            raise SamplingError(
                f"could not place {spec.n_atoms} atoms with min_separation "
                f"{r_min:g} um; density too high",
                seed=seed,
            )
    return AtomCloud(spec=spec, positions=pos, seed=seed)


def cloud_stats(cloud):
    """Effective volume, mean separation and aspect ratio sigma_z/sigma_x."""
    spec = cloud.spec if isinstance(cloud, AtomCloud) else cloud
    sx, _, sz = spec.sigma
    return CloudStats(v_eff=spec.v_eff, mean_separation=spec.mean_separation, aspect=sz / sx)
