"""Exact MCMC posterior sampling for Markov jump processes and CTBNs.

Alternates virtual-jump augmentation with conditional skeleton updates
(particle Gibbs with ancestor sampling, or exact forward-backward sampling
on finite state spaces).
"""

from .augment import (HomogeneousVirtual, ScaledExit, SkeletonKernel,
                      Uniformization, build_kernel)
from .ctbn import (CtbnInitial, CtbnModel, CtbnPath, flatten_ctbn,
                   flatten_path, log_density_ctbn,
                   log_density_node_given_parents, node_full_conditional,
                   parent_segments, simulate_ctbn)
from .density import (log_density_augmented, log_density_trajectory,
                      log_density_virtual)
from .diagnostics import (discretized_smoother, ess, ess_summary,
                          exact_skeleton_posterior, grid_summary,
                          sufficient_stats)
from .errors import (ConfigError, DegeneratePotentialError, ExplosionError,
                     MjpGibbsError, PolicyViolationError, SamplingError,
                     UnsupportedModelError, WeightCollapseError)
from .evidence import (ChildProcessEvidence, HmmFactors, PointObservation,
                       build_hmm_factors, build_hmm_factors_segmented)
from .lv import LotkaVolterraRates, prey_observation
from .mcmc import (ChainConfig, ChainResult, CtbnProblem, MjpProblem,
                   ctbn_gibbs_sweep, mjp_mcmc_step, run_chain,
                   validate_ergodicity)
from .presets import (PRESETS, ExperimentPreset, chain_model, pin_state,
                      preset_chain, preset_lotka_volterra, preset_toy,
                      toy_model)
from .rates import (DenseRateSpec, FiniteInitial, FunctionRateSpec,
                    PointMassInitial, RateSpec, SegmentedRates)
from .simulate import resample_virtual, simulate_gillespie, thinning_sample
from .smc import ffbs_sample, pgas_step, smc_run
from .trajectory import AugmentedTrajectory, Trajectory, strip_virtual

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
