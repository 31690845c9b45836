"""Kernel correlation between random probability measures in two-group
partially exchangeable Bayesian models: closed forms where they exist,
Monte Carlo otherwise, with the full hierarchical Dirichlet Process
posterior machinery and cross-model calibration against a Gaussian
hierarchical model."""

from .distributions import NormalBase, UniformBase, parse_base
from .errors import (
    CapacityError,
    DegenerateVarianceError,
    InfeasibleError,
    InputError,
    InternalError,
    KercorrError,
)
from .hdp import (
    HdpParams,
    HdpState,
    enumerate_table_posterior,
    generate_joint_data,
    gibbs_sweep,
    predictive_step,
    prior_corr_closed,
    prior_setwise_moments,
    sample_posterior_block,
    stirling_unsigned,
)
from .hdp_analytics import (
    P0Star,
    cond_cov_var_given_tables,
    posterior_corr_analytics,
    posterior_corr_sampling,
    v_terms,
)
from .kernels import (
    GaussianKernel,
    Kernel,
    LaplaceKernel,
    LinearKernel,
    MixtureGaussianKernel,
    MonteCarloMixtureKernel,
    SetwiseKernel,
    mixture_kernel_mc,
    mixture_updated_gaussian,
    parse_kernel,
)
from .measures import (
    DiscreteMeasure,
    degeneracy_statistic,
    diag_minus_double,
    double_integral,
    mc_discretize,
    moments_from_measure_pairs,
)
from .moments import BlockSet, PairedBlock, corr_hat, cov_hat, estimator_clt_check, var_hat
from .parametric import (
    CalibrationTarget,
    GaussParams,
    calibrate_gaussian,
    calibrate_hdp,
    gauss_posterior,
    gauss_predictive_sample,
    gauss_variance_identity,
    kernel_corr_gauss_prior,
    param_posterior_corr,
)
from .reporting import CltReport, CorrelationReport

__version__ = "0.1.0"
