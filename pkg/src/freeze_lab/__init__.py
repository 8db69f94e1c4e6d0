"""Exact and asymptotic freezing behaviour of layered shift Gibbs measures.

Library layout: ``model`` (alphabet, metric, potential), ``tropical``
(max-plus rate gamma, zones, calibrated subaction), ``series`` (certified
auxiliary series and the singular integral), ``pressure`` (scalar pressure
equation and prefactor limits), ``measures`` (eigen/Gibbs weights and
freezing limits), ``oracle`` (independent truncated-chain ground truth),
``cli`` (command-line front end) and ``acceptance`` (the verification
battery).
"""

from .model import (BlockLetter, EXAMPLE_PARAMS, InSigma, Letter, ModelError,
                    ModelParams, PointRep, STAR, U, birkhoff_weight,
                    block_word, dist_to_sigma, leading_run, letter_alpha,
                    make_params, params_from_text, potential_A, require_valid,
                    ring_point, sigma_point, u_point, validate)
from .tropical import (MaxPlusMatrix, SubactionValues, ZoneLabel,
                       build_M, build_M1, build_M2, build_M_closed_form,
                       calibrated_subaction_at, critical_cycles,
                       gamma_closed_form, max_cycle_mean, mp_mul,
                       peierls_barrier, subaction_eigenvector, zone_classify)
from .series import (F, F_prefixed, F_truncated, G, I_integral, IntegralValue,
                     SeriesDivergenceError, SeriesKernel, SeriesValue,
                     ToleranceError, product_asymptotic_check, r_exponent,
                     s_factor)
from .pressure import (GLimitPrediction, PressureError, PressureRangeError,
                       PressureSolution, g_limit_prediction, residual,
                       solve_pressure)
from .measures import (EigenData, LimitPrediction, MeasureReport, MuBlocks,
                       eigen_data, measure_report, mu_blocks, nu_blocks,
                       nu_cylinder, predicted_limit, subaction_from_H)
from .oracle import (ChainMeasures, TruncatedChain, build_chain,
                     chain_measures, error_bound, leading_triple)
from .acceptance import CriterionResult, run_battery, run_criterion

__version__ = "1.0.0"
