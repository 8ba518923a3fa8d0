"""Dephasing-assisted diffusive dynamics in 1D qubit chains.

Simulates single-excitation transport under controlled pure dephasing with
two interchangeable engines (deterministic density-matrix propagation and a
stochastic white-noise unraveling), derives the transport and relaxation
observables used to classify the dynamics, and ships reproducible scenario
presets for the headline phenomena: the ballistic-to-diffusive transition,
dephasing-enhanced localization on a quasiperiodic chain, and anomalous
relaxation ordering (Mpemba effect).
"""

from .errors import (ConfigError, DataQualityError, DephasimError, FitDomainError,
                     IntegrationFailureError, SpecificationError)
from .lattice import (GOLDEN_MEAN, LatticeSpec, QuasiperiodicSpec, SpectralReport,
                      build_hamiltonian, center_index, centered_positions,
                      inverse_participation_ratio, lattice_from_quasiperiodic,
                      quasiperiodic_couplings, spectral_report)
from .lindblad import (DensityMatrix, EvolutionResult, IntegratorStats, default_step,
                       dissipator_apply, evolve, lindblad_rhs)
from .observables import (CrossingReport, ObservableSeries, PowerLawFit,
                          compute_observables, detect_mpemba_crossing, distance_function,
                          fit_spreading_exponent, integrated_moment, population_centroid,
                          second_moment)
from .trajectories import (NoiseSpec, TrajectoryEnsemble, evolve_trajectory,
                           max_refresh_interval, run_ensemble, sample_noise_step)
from .experiments import (BUILTIN_DESCRIPTIONS, InitialState, KappaSweepConfig,
                          MpembaStudy, ScenarioConfig, ScenarioReport, builtin_scenarios,
                          load_config, run_kappa_sweep, run_mpemba, run_scenario,
                          save_config, sweep_kappa, write_mpemba_report, write_report,
                          write_sweep_result)

__version__ = "0.1.0"
