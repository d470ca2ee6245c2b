"""
Eigenvalues of the effective non-Hermitian Hamiltonian, Franck-Condon
weights, the excitation spectrum and eigenvalue histograms.

An eigenvalue ``a`` of the interaction matrix corresponds to the complex
frequency ``omega_e - i (Gamma/2) a``: the level shift is ``Im(a)/2`` and the
half-width ``Re(a)/2``, both in units of Gamma.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError


@dataclass
class EigenSpectrum:
    """Eigen-data of one realization.

    ``right_vectors[:, n]`` is the unit-norm right eigenvector of mode n;
    ``fc_weights[n] = |<E_TD|Psi_n>|^2``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray = field(repr=False)
    fc_weights: np.ndarray = field(repr=False)
    td_vector: np.ndarray = field(repr=False)
    seed: int = None
    _left: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.eigenvalues)

    @property
    def shifts(self):
        return 0.5 * self.eigenvalues.imag

    @property
    def half_widths(self):
        return 0.5 * self.eigenvalues.real

    @property
    def left_vectors(self):
        """Rows of ``V^-1``: the biorthogonal partners of the right vectors."""
        if self._left is None:
            self._left = np.linalg.inv(self.right_vectors)
        return self._left

    def propagate(self, b0, times):
        """Two-level evolution ``b(t)`` (shape (T, N)) through the eigenbasis."""
        b0 = np.asarray(getattr(b0, "b", b0), dtype=complex)
        coeff = self.left_vectors @ b0
        phases = np.exp(-0.5 * np.outer(np.asarray(times, float), self.eigenvalues))
        return (phases * coeff) @ self.right_vectors.T


def eigenspectrum(A, seed=None):
    """Diagonalize an :class:`~dipolecloud.kernel.InteractionMatrix`.

    FC weights use the timed-Dicke vector in the matrix's own gauge, so
    they agree between gauges.
    """
    M = A.entries
    if not np.all(np.isfinite(M)):
        raise NumericalError("interaction matrix has non-finite entries", seed=seed)
    try:
        vals, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}", seed=seed) from exc
    V = V / np.linalg.norm(V, axis=0)
    td = A.timed_dicke_vector()
    fc = np.abs(td.conj() @ V) ** 2
    return EigenSpectrum(vals, V, fc, td, seed)


def lorentzian_sum(delta, shifts, half_widths, weights):
    """``sum_n w_n g_n^2 / ((delta - d_n)^2 + g_n^2)`` on a grid of detunings."""
    delta = np.asarray(delta, dtype=float)
    out = np.zeros(delta.shape)
    g2 = half_widths**2
    # chunked to bound memory for long grids and many modes
    for start in range(0, len(shifts), 2048):
        sl = slice(start, start + 2048)
        d = delta[..., None] - shifts[sl]
        out += np.sum(weights[sl] * g2[sl] / (d * d + g2[sl]), axis=-1)
    return out


def excitation_spectrum(eig, delta_grid):
    """Absorption spectrum S(delta), each mode a Lorentzian weighted by FC."""
    return lorentzian_sum(delta_grid, eig.shifts, eig.half_widths, eig.fc_weights)


@dataclass(frozen=True)
class SpectrumStats:
    peak_delta: float
    fwhm: float
    ambiguous: bool = False


def spectrum_stats(delta, S, tie_rtol=1e-6):
    """Peak position (parabolic refinement) and FWHM (linear crossings).

    If several local maxima reach the global maximum within ``tie_rtol``,
    the one with smallest ``|delta|`` is reported and ``ambiguous`` is set.
    """
    delta = np.asarray(delta, dtype=float)
    S = np.asarray(S, dtype=float)
    if len(delta) < 3 or delta.shape != S.shape:
        raise ValueError("need matching grids of at least 3 points")
    smax = S.max()
    interior = np.zeros(len(S), bool)
    interior[1:-1] = (S[1:-1] >= S[:-2]) & (S[1:-1] >= S[2:])
    interior[0] = S[0] > S[1]
    interior[-1] = S[-1] > S[-2]
    candidates = np.flatnonzero(interior & (S >= smax * (1 - tie_rtol)))
    # plateau points of one maximum are a single peak
    groups = np.split(candidates, np.flatnonzero(np.diff(candidates) > 1) + 1)
    heads = [g[len(g) // 2] for g in groups if len(g)]
    ambiguous = len(heads) > 1
    i = min(heads, key=lambda j: abs(delta[j]))
    if ambiguous:
        warnings.warn("spectrum has several equal maxima; reporting the one nearest zero",
                      stacklevel=2)

    peak, peak_val = delta[i], S[i]
    if 0 < i < len(S) - 1:
        y0, y1, y2 = S[i - 1], S[i], S[i + 1]
        h = delta[i + 1] - delta[i]
        denom = y0 - 2 * y1 + y2
        if denom < 0 and abs(delta[i] - delta[i - 1] - h) < 1e-9 * abs(h):
            off = 0.5 * (y0 - y2) / denom
            peak = delta[i] + off * h
            peak_val = y1 - 0.25 * (y0 - y2) * off

    half = 0.5 * peak_val
    j = i
    while j > 0 and S[j - 1] >= half:
        j -= 1
    k = i
    while k < len(S) - 1 and S[k + 1] >= half:
        k += 1
    if j == 0 or k == len(S) - 1:
        fwhm = np.nan
    else:
        left = np.interp(half, [S[j - 1], S[j]], [delta[j - 1], delta[j]])
        right = np.interp(half, [S[k + 1], S[k]], [delta[k + 1], delta[k]])
        fwhm = right - left
    return SpectrumStats(float(peak), float(fwhm), ambiguous)


@dataclass
class EigenHistogram:
    """Accumulated (shift, half-width) counts, plain and FC-weighted.

    Eigenvalues outside the grid are tallied in ``overflow`` and
    ``overflow_fc``; ``density`` and ``fc_density`` normalize over all
    accumulated mass.
    """

    delta_edges: np.ndarray
    gamma_edges: np.ndarray
    counts: np.ndarray
    fc_counts: np.ndarray
    overflow: float = 0.0
    overflow_fc: float = 0.0
    n_spectra: int = 0

    @property
    def total(self):
        return self.counts.sum() + self.overflow

    @property
    def density(self):
        return self.counts / self.total

    @property
    def fc_density(self):
        return self.fc_counts / (self.fc_counts.sum() + self.overflow_fc)

    def add(self, spectrum):
        d, g, w = spectrum.shifts, spectrum.half_widths, spectrum.fc_weights
        inside = ((d >= self.delta_edges[0]) & (d <= self.delta_edges[-1])
                  & (g >= self.gamma_edges[0]) & (g <= self.gamma_edges[-1]))
        edges = (self.delta_edges, self.gamma_edges)
        self.counts += np.histogram2d(d[inside], g[inside], bins=edges)[0]
        self.fc_counts += np.histogram2d(d[inside], g[inside], bins=edges, weights=w[inside])[0]
        self.overflow += float(np.count_nonzero(~inside))
        self.overflow_fc += float(w[~inside].sum())
        self.n_spectra += 1
        return self


def empty_histogram(delta_range=(-6.0, 6.0), gamma_range=(0.0, 6.0), bins=(120, 120)):
    delta_edges = np.linspace(*delta_range, bins[0] + 1)
    gamma_edges = np.linspace(*gamma_range, bins[1] + 1)
    return EigenHistogram(delta_edges, gamma_edges, np.zeros(bins), np.zeros(bins))


def eigen_histogram(spectra, delta_range=(-6.0, 6.0), gamma_range=(0.0, 6.0),
                    bins=(120, 120)):
    """Histogram eigenvalues of many realizations on a (shift, half-width) grid.

    Spectra are added in the given order, so the result is reproducible.
    """
    hist = empty_histogram(delta_range, gamma_range, bins)
    for s in spectra:
        hist.add(s)
    if hist.overflow:
        warnings.warn(f"{int(hist.overflow)} eigenvalues fell outside the histogram grid",
                      stacklevel=2)
    return hist
