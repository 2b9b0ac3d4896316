"""Analysis toolkit for multiple-choice test matrices corrected for guessing.

Scores response grids under rival schemes (including fractional -1/(m-1)
penalties that make blind guessing score zero in expectation), computes
bias-corrected classical item statistics and reliability coefficients, fits
logistic success-function models through a likelihood that accepts the
negative corrective entries, and ships a seeded Monte-Carlo simulator for
validating every correction claim against the matching no-guessing matrix.
"""

from .errors import (GuesscorrError, InputFormatError, PruningRequiredError,
                     UndefinedStatisticError, UnsupportedModelError)
from .matrix import (CORRECT, ItemBank, Kind, OMITTED, OrderingRecord,
                     PruneReport, Removal, ResponseMatrix, Scheme, ScoredMatrix,
                     ScoreVector, WRONG, double_order, needs_pruning, prune,
                     row_and_column_scores, score_matrix)
from .stats import (Intercorrelations, ItemStats, correction_coefficient,
                    correction_coefficients, corrected_item_total,
                    intercorrelation_matrix, item_rest_correlation,
                    item_statistics, item_total_correlation,
                    item_total_correlations, pearson, pearson_sum_form,
                    point_biserial, validity_flags)
from .reliability import (ALPHA_CORRECTED_WARNING, HalvesDetail, Method,
                          ReliabilityReport, SplitScheme, cronbach_alpha, kr20,
                          spearman_brown, split_half, test_retest)
from .irt import (FitConfig, FitDiagnostics, IrtParams, LOGIT_BOUND, Model,
                  SlopeRule, cell_log_likelihood, combined_discrimination, fit,
                  log_likelihood_gradient, matrix_log_likelihood,
                  probability_matrix, rasch_probability, success_probability,
                  threepl_probability, twopl_probability)
from .simulate import (Normal, RecoveryReport, SimBundle, SimConfig,
                       expected_distorted_score, generate_bundle,
                       generate_true_matrix, inject_guessing,
                       replication_metrics, replication_seeds,
                       run_recovery_experiment)

__version__ = "0.1.0"
