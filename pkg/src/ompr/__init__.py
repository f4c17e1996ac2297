"""Greedy sparse recovery: OMPR(l), two-stage hard thresholding, OMPR-Hash."""
from .algorithms import (AlgorithmConfig, RecoveryState, RecoveryTrace, Status,
                         initialize_support, run_cosamp, run_iht_newton, run_omp, run_ompr,
                         run_omprl, run_subspace_pursuit, run_two_stage)
from .diagnostics import (RipContext, IterationDiagnostics, admissible_step_sizes,
                          check_ompr_iteration, check_two_stage_iteration)
from .ensemble import MeasurementProblem, derive_seed, gaussian_matrix, make_problem
from .errors import (BadArguments, DegenerateColumn, DimensionMismatch, FormatError,
                     RankDeficient, RecoveryError, TooLarge)
from .harness import ExperimentSpec, run_lsh_benchmark, run_noise_sweep, run_phase_transition
from .linalg import least_squares_on_support, rip_constant_exhaustive, rip_constant_sampled
from .lsh import LshIndex, build_index, query_max_abs_correlation, run_ompr_hash
from .thresholding import hard_threshold, partial_hard_threshold

__version__ = "0.1.0"
