"""Interpolation-based Gram-matrix computation for wideband massive MU-MIMO-OFDM.

Submodules
----------
channel
    Rayleigh tap synthesis, BS correlation, DFT to subcarriers, CSI error.
grammat
    Brute-force, exact (DFT-domain) and 0th/1st-order interpolated Grams.
theory
    Closed-form interpolation MSE and a Monte-Carlo oracle.
opcount
    Real-multiplication cost formulas and instrumented counters.
detect
    16-QAM, MMSE equalization, ZF precoding, pilot estimation, BER.
config, results, experiments, cli
    Experiment harness behind the ``gramterp`` command.
"""
__version__ = "0.1.0"

from .channel import (SystemConfig, TdChannel, FdChannel, CorrSqrtCoeffs, centered_active_set,
                      gen_td_channel, gen_exp_pdp_channel, corr_sqrt_coeffs,
                      apply_bs_correlation, td_to_fd, perturb_csi, sigma_from_snr,
                      snr_from_sigma)
from .grammat import (GramMethod, GramSet, BasePointPlan, IllConditionedWarning,
                      IllConditionedError, plan_from_base_points, plan_uniform_base_points,
                      gram_brute_force, build_dft_submatrix, exact_interp_operator,
                      gram_exact_interp, gram_interp_0th, gram_interp_1st, compute_grams)
from .theory import (MseParams, MsePrediction, fejer, mse_0th, mse_1st, mse_0th_limit,
                     mse_0th_max_bound, dominance_condition, predict_plan_mse,
                     mse_empirical_oracle, oracle_sweep)
from .opcount import (OpCounter, ComplexityReport, cost_bf, cost_exact, cost_0th, cost_1st,
                      cost_1st_corrected, cost_gram, exact_break_even, instrumented_count,
                      complexity_report, cost_detection)
from .detect import (QamConstellation, QAM16, qam_map, qam_demap, mmse_equalize, zf_precode,
                     dft_pilots, ml_channel_estimate, GramSpec, BerResult,
                     simulate_uplink_ber)
