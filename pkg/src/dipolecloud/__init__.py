"""
Coupled-dipole simulation of collective single-photon emission from dense,
random, Gaussian atom clouds.

Units: lengths in micrometres, times in 1/Gamma and rates in Gamma unless a
name carries an explicit unit (``_per_s``, ``_us``, ``_mhz``).
"""

__version__ = "0.1.0"

from .analysis import (EffectiveThreeLevel, TriExpFit, effective_three_level_pG,
                       fit_triexponential, geometry_factor, superradiant_rate_model)
from .dynamics import (AmplitudeState, AmplitudeTrajectory, Pulse, evolve_three_level,
                       evolve_two_level, storage_state, timed_dicke_state)
from .ensemble import AtomCloud, CloudSpec, cloud_stats, realization_seed, sample_cloud
from .errors import ConfigError, GridResolutionError, NumericalError, SamplingError
from .kernel import InteractionMatrix, PairCoupling, build_interaction_matrix, pair_coupling
from .radiation import (AngularGrid, GaussianMode, RadiationMap, analytic_P_noninteracting,
                        collection_probability, converged_collection_probability, far_field,
                        forward_cone_fraction, make_angular_grid, noninteracting_envelope)
from .spectrum import (EigenHistogram, EigenSpectrum, eigen_histogram, eigenspectrum,
                       excitation_spectrum, spectrum_stats)

__all__ = [name for name in dir() if not name.startswith("_")]
