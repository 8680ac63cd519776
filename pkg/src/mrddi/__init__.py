"""Multiply robust estimation of causal drug-drug interactions.

Propensity-score weighting over the four arms of a two-drug composite
treatment, with empirical-likelihood weights that combine several candidate
propensity models and optionally enforce exact covariate balance.
"""

from .data import ARMS, Arm, Dataset, arm_partition, make_dataset, validate_dataset
from .diagnostics import balance_report, pairwise_smd, psb_arm_covariate, psb_overall
from .estimator import (DdiEstimate, EstimationPipeline, bootstrap_inference, ddi_point_estimate,
                        point_estimate, weighted_arm_mean)
from .formula import build_design_matrix, parse_formula
from .propensity import (FittedPropensity, PropensityModelSpec, fit_factored_binary,
                         fit_multinomial_logistic, predict_arm_probabilities)
from .weights import (build_constraint_matrix, el_weights, iptw_weights, melcb_weights,
                      solve_dual)

__version__ = "0.1.0"
