"""Numerical experiments for 2D Euler with L(log L)^alpha vorticity.

Vortex-blob approximation, vanishing viscosity and exact smooth runs on a
periodic spectral solver, with Orlicz-norm, energy and Serfati-identity
diagnostics.
"""
from .blob import (BlobEnsemble, VortexBlobParams, auto_dt, error_field_E, error_field_F,
                   initialize, reconstruct_vorticity, step, theoretical_h, velocity)
from .diagnostics import (DiagnosticsReport, cauchy_distance, kinetic_energy_grid,
                          kinetic_energy_pairwise, mean_vorticity, structure_function,
                          transport_comparison)
from .errors import (ConfigurationError, DataError, DivergenceError, DomainError,
                     EulerLLogError, InfiniteEnergyWarning, InstabilityError,
                     PracticalityWarning, ResourceError, TheoryRegimeWarning)
from .grid import GridField, GridSpec, read_grid_snapshot, write_grid_snapshot
from .harness import (RunConfig, config_from_mapping, load_config, membership_verifier,
                      refinement_sweep, run)
from .kernel import (BlobProfile, CutoffPair, biot_savart, far_gradient_kernel, g_eps_l1,
                     mollified_kernel, near_kernel, serfati_far_kernel)
from .orlicz import OrliczParams, log_plus_modular, lp_norm, luxemburg_norm, modular
from .presets import Preset, preset
from .serfati import SerfatiConfig, SerfatiResult, SnapshotFields, serfati_residual
from .spectral import (SpectralState, energy, enstrophy, init_spectral, spectral_velocity,
                       step_spectral)
from .treecode import velocity_treecode

__version__ = "0.1.0"
