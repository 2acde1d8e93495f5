"""l1 recovery of sparse signals by belief propagation, AMP and state evolution."""

from .amp_solver import AmpConfig, AmpState, amp_sweep, init_amp_state, run_amp
from .bp_solver import BpConfig, BpState, cavity_sums, init_state, run_bp
from .instance_gen import (DenseGaussian, DenseMeasurementMatrix, EnsembleSpec, Instance,
                           MeasurementVector, RegularSparse, RngSeed, SignalVector,
                           SparseMeasurementMatrix, gen_dense_matrix, gen_regular_sparse_matrix,
                           gen_signal, load_instance, make_instance, measure, save_instance)
from .kernel import soft_threshold, soft_threshold_deriv
from .l1_oracle import OracleResult, brute_force_l1, certify_l1_optimality
from .result import SUCCESS_TOL, RecoveryResult
from .state_evolution import (MacroState, QuadratureSpec, find_threshold, se_trajectory,
                              se_update, solve_c)
