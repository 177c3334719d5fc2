"""Conditional-mean estimation through log-partition functions."""
from .base import (Estimate, ExpectationConfig, FiniteAlphabet, FiniteSupport, Interval, JointModel, SaddleSolution,
                   tilt_vector)
from .core import conditional_covariance, conditional_mean, expect, log_partition, log_partition_result, mmse
from .errors import *  # noqa: F401,F403
from .identities import (MismatchReport, MmseReport, TiltedEnsemble, fisher_matrix, fisher_matrix_hessian_form,
                         information_density, information_density_formulas, log_theta, mismatched_mse,
                         mmse_all_formulas, prior_moments, score, xi_matrix)
from .numerics import DiffConfig, SignedLogValue
from .spherical import (SphericalKernel, build_kernel, cauchy_kernel, load_kernel, mixture_log_density,
                        spherical_estimator, spherical_exact_mean, spherical_log_partition, spherical_saddle_t,
                        spherical_single_letter_mmse)
