import math

import numpy as np
import pytest

from oracles import dipole_cone_fraction

from dipolecloud.dynamics import (AmplitudeTrajectory, Pulse, evolve_three_level,
                                  evolve_two_level, storage_state, timed_dicke_state)
from dipolecloud.ensemble import CloudSpec, sample_cloud
from dipolecloud.errors import GridResolutionError
from dipolecloud.kernel import build_interaction_matrix
from dipolecloud.radiation import (GaussianMode, RadiationMap, analytic_P_noninteracting,
                                   collection_probability,
                                   converged_collection_probability, divergence, far_field,
                                   fit_lobe_width, forward_cone_fraction, make_angular_grid,
                                   noninteracting_envelope)

GAMMA = 2e7


def decay(cloud, t_max=30.0, n=601, mode="full"):
    A = build_interaction_matrix(cloud, mode=mode)
    return evolve_two_level(A, timed_dicke_state(cloud.n), np.linspace(0, t_max, n))


@pytest.fixture(scope="module")
def single():
    cloud = sample_cloud(CloudSpec(1, (1, 1, 1)), 0)
    return cloud, far_field(decay(cloud), cloud, make_angular_grid(32, 64))


@pytest.fixture(scope="module")
def elongated():
    spec = CloudSpec(300, (1.0, 1.0, 6.0))
    cloud = sample_cloud(spec, 77)
    traj = decay(cloud, 20.0, 401)
    return cloud, traj, far_field(traj, cloud, make_angular_grid(64, 128, math.cos(0.6), 48))


def test_grid_weights_sum_to_4pi():
    for g in (make_angular_grid(16, 32), make_angular_grid(16, 32, cap=0.8, n_cap=8)):
        assert g.weights.sum() == pytest.approx(4 * math.pi, rel=1e-13)
    g = make_angular_grid(8, 8, 0.5, 4).refined()
    assert g.spec == (16, 16, 0.5, 8)
    with pytest.raises(ValueError):
        make_angular_grid(8, 8, cap=0.5)


def test_single_atom_pattern(single):
    cloud, rmap = single
    mu = np.repeat(rmap.grid.mu, rmap.grid.n_phi)
    shape = (1 + mu**2) / 2
    ratio = rmap.U / shape
    assert np.allclose(ratio, ratio[0], rtol=1e-12)
    assert rmap.emitted_energy() == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("theta_c", [0.1, 0.5, 1.2, 2.5])
def test_single_atom_cone_fraction(single, theta_c):
    _, rmap = single
    frac = forward_cone_fraction(rmap, theta_c / 2)
    assert frac == pytest.approx(dipole_cone_fraction(theta_c), abs=2e-3)


def test_isotropic_map_cone_fraction():
    cloud = sample_cloud(CloudSpec(1, (1, 1, 1)), 0)
    grid = make_angular_grid(200, 8)
    rmap = far_field(decay(cloud), cloud, grid)
    rmap.U = np.ones_like(rmap.U)
    dth = 0.2
    omega_f = 2 * math.pi * (1 - math.cos(2 * dth))
    assert forward_cone_fraction(rmap, dth) == pytest.approx(omega_f / (4 * math.pi), abs=1e-4)


def test_energy_bookkeeping(elongated):
    _, traj, rmap = elongated
    # coarse grid for speed; the acceptance suite checks converged grids
    assert rmap.emitted_energy() == pytest.approx(1 - traj.p_e[-1], rel=3e-3)
    assert np.all(rmap.U >= 0)


def test_gauge_of_amplitudes_consistent(elongated):
    cloud, traj, rmap = elongated
    A = build_interaction_matrix(cloud)
    plain = AmplitudeTrajectory(traj.times, traj.b * A.phases)
    other = far_field(plain, cloud, rmap.grid, gauge="plain")
    assert np.allclose(other.U, rmap.U, rtol=1e-8, atol=1e-12 * rmap.U.max())


def test_collection_probability_bounds_and_invariances(elongated):
    cloud, traj, rmap = elongated
    mode = GaussianMode.matched(cloud)
    P = collection_probability(rmap, mode)
    assert 0 < P <= 1
    phased = AmplitudeTrajectory(traj.times, traj.b * np.exp(1.3j))
    assert collection_probability(far_field(phased, cloud, rmap.grid), mode) == pytest.approx(P)
    shifted = AmplitudeTrajectory(traj.times + 5.0, traj.b)
    shifted.times = np.asarray(traj.times) + 5.0
    assert collection_probability(far_field(shifted, cloud, rmap.grid), mode) == pytest.approx(P)
    # a mode at finite radius is evaluated with its curvature and Gouy phase
    P_r = collection_probability(rmap, mode, radius=1e6)
    assert 0 < P_r <= 1


def test_collection_independent_of_detuning_for_long_runs():
    spec = CloudSpec(100, (1.0, 1.0, 4.0))
    cloud = sample_cloud(spec, 12)
    A = build_interaction_matrix(cloud)
    grid = make_angular_grid(48, 96, math.cos(0.6), 32)
    mode = GaussianMode.matched(spec)
    t = np.linspace(0, 160, 401)
    Ps = []
    for d in (-3.0, 0.0, 3.0):
        traj = evolve_three_level(A, Pulse.from_mhz(d, omega0=1e7), storage_state(100), t, GAMMA)
        Ps.append(collection_probability(far_field(traj, cloud, grid), mode))
    assert max(Ps) - min(Ps) < 5e-3


def test_converged_probability_and_failure(elongated):
    cloud, traj, _ = elongated
    mode = GaussianMode.matched(cloud)
    P, rmap = converged_collection_probability(
        traj, cloud, mode, make_angular_grid(64, 128, math.cos(0.6), 48))
    assert 0 < P < 1
    with pytest.raises(GridResolutionError):
        converged_collection_probability(traj, cloud, mode, make_angular_grid(2, 4),
                                         tol=1e-12, max_doublings=1)


def test_gaussian_mode_far_field():
    mode = GaussianMode(2 * math.pi / 0.78, math.sqrt(2))
    assert mode.divergence == pytest.approx(divergence(mode.k, 1.0))
    mu = np.array([-0.5, 1.0, math.cos(mode.divergence)])
    amp = mode.far_field(mu)
    assert amp[0] == 0
    # amplitude falls to 1/e at the divergence angle (to paraxial accuracy)
    assert abs(amp[2] / amp[1]) == pytest.approx(math.exp(-1), rel=0.02)
    far = mode.far_field(mu, radius=1e9)
    assert abs(far[1]) == pytest.approx(abs(amp[1]), rel=1e-6)
    with pytest.raises(ValueError):
        GaussianMode(1.0, 0.0)


def test_forward_lobe_matches_gaussian_model():
    spec = CloudSpec(400, (1.5, 1.5, 3.0))
    cloud = sample_cloud(spec, 30)
    traj = decay(cloud, 20.0, 401, mode="none")
    rmap = far_field(traj, cloud, make_angular_grid(64, 128, math.cos(0.6), 64))
    width = fit_lobe_width(rmap)
    assert width == pytest.approx(divergence(spec.k_e, 1.5), rel=0.1)


def test_noninteracting_envelope():
    k, s = 2 * math.pi / 0.78, 1.0
    assert noninteracting_envelope(0.0, k, s, 8.0) == 1.0
    theta = math.asin(math.sqrt(2) / (k * s))
    val = noninteracting_envelope(theta, k, s, 0.0)
    assert val == pytest.approx(math.exp(-1), rel=1e-12)


def test_noninteracting_map_tracks_envelope():
    spec = CloudSpec(200, (1.0, 1.0, 2.0))
    grid = make_angular_grid(48, 32, math.cos(0.6), 32)
    Us = []
    for seed in range(20):
        cloud = sample_cloud(spec, seed)
        Us.append(far_field(decay(cloud, 40.0, 201, mode="none"), cloud, grid).U)
    U = np.mean(Us, axis=0)
    mu = np.repeat(grid.mu, grid.n_phi)
    th = np.arccos(mu)
    pol = (1 + mu**2) / 2
    n = spec.n_atoms
    env2 = noninteracting_envelope(th, spec.k_e, 1.0, 2.0) ** 2
    # <|sum_j e^{i q.r_j}|^2> / N = 1 + (N - 1) env^2, times int e^{-t} dt = 1
    expected = pol * (1 + (n - 1) * env2)
    fwd = th < 0.15
    assert np.allclose(U[fwd], expected[fwd], rtol=0.15)


def test_cooperative_share_limits():
    k = 2 * math.pi / 0.78
    assert analytic_P_noninteracting(0, k, 1.0) == 0
    assert analytic_P_noninteracting(10**12, k, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        analytic_P_noninteracting(10, k, -1.0)


def _map_from(grid, pol, profile):
    amps = profile[:, None].astype(complex)
    U = np.sum(np.abs(pol) ** 2, axis=1) * np.abs(profile) ** 2
    return RadiationMap(grid, pol, amps, np.ones((1, 1)), np.zeros(1), U)


@pytest.mark.parametrize("pol_vec", [(1, 0, 0), (0, 1, 0), (1 / math.sqrt(2), 1j / math.sqrt(2), 0)])
def test_field_shaped_like_the_mode_is_fully_collected(pol_vec):
    grid = make_angular_grid(64, 128, math.cos(0.6), 48)
    mode = GaussianMode(2 * math.pi / 0.78, math.sqrt(2))
    phi = mode.far_field(np.repeat(grid.mu, grid.n_phi))
    pol = grid.polarization_basis() @ np.asarray(pol_vec, complex)
    assert collection_probability(_map_from(grid, pol, phi), mode) == pytest.approx(1.0, abs=1e-9)
    # an azimuthal winding is orthogonal to the mode
    winding = phi * np.exp(1j * np.tile(grid.phi, len(grid.mu)))
    assert collection_probability(_map_from(grid, pol, winding), mode) < 1e-9
