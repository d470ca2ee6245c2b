"""
Raman readout of a stored spin wave
===================================

A coupling pulse converts a collective storage excitation into a photon
through the broad, red-shifted superradiant level. Scanning the laser
detuning maps out that level; a three-level model with one effective
collective state follows the full many-atom result.
"""

import sys

import numpy as np

from dipolecloud import (CloudSpec, EffectiveThreeLevel, Pulse, build_interaction_matrix,
                         effective_three_level_pG, evolve_three_level, sample_cloud,
                         storage_state)
from dipolecloud.analysis import pearson
from dipolecloud.dynamics import eigen_decompose

N = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
GAMMA = 2e7

spec = CloudSpec(N, (1.0, 1.0, 8.0))
cloud = sample_cloud(spec, seed=5)
A = build_interaction_matrix(cloud)
dec = eigen_decompose(A.entries)     # reused for every detuning

t_end = 2e-6 * GAMMA                 # 2 us in units of 1/Gamma
scan = np.linspace(-10, 10, 21)
model = EffectiveThreeLevel(rabi_scale=0.92, delta_e=-1.0, gamma_s=6.0)
full, eff = [], []
for d in scan:
    pulse = Pulse.from_mhz(d, omega0=0.5 * GAMMA)
    traj = evolve_three_level(A, pulse, storage_state(N), np.array([0.0, t_end]), GAMMA,
                              decomposition=dec)
    full.append(traj.p_g[-1])
    eff.append(effective_three_level_pG(model, pulse, t_end, GAMMA))
    print(f"Delta_c/2pi = {d:+5.1f} MHz   p_G full {full[-1]:.3f}   effective {eff[-1]:.3f}")
print(f"correlation {pearson(full, eff):.4f}")
