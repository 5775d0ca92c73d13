from __future__ import absolute_import
from .pseudolikelihood import PLObjective, SolveReport, pl_gradient, pl_hessian, pl_neg_log, solve_ple
from .sandwich import (ConfidenceInterval, SandwichEstimate, a_hat, confidence_interval, sandwich_estimate,
                       sigma_hat)
from .mle_zero import (OriginCalibration, approx_mle_origin, grad_Z0, hoeffding_variance, origin_calibration,
                       raw_gamma_matrix)
