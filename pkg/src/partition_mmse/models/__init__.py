"""Worked source/channel models."""
from .cauchy import (CauchyModel, cauchy_conditional_mean, cauchy_joint_model, cauchy_log_partition,
                     cauchy_saddle_estimator, cauchy_saddle_t)
from .codebook import (CodebookAsymptotics, CodebookModel, codebook_asymptotic_log_partition, codebook_asymptotics,
                       codebook_exact_log_partition, codebook_exact_posterior_mean, codebook_joint_model,
                       codebook_large_m_posterior_mean, codebook_log_partition_spread, codebook_monte_carlo_mse,
                       codebook_saddle_estimator, critical_beta)
from .curie_weiss import (CurieWeissModel, cw_asymptotic_mmse, cw_conditional_mean_hs, cw_empirical_mmse,
                          cw_joint_model, cw_log_partition_hs, cw_saddle_estimator, cw_saddle_fixed_point,
                          magnetization)
from .discrete import independent_model, noiseless_binary, random_discrete_model
from .gaussian import gaussian_awgn, gaussian_mmse, wiener_coefficient
